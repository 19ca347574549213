"""Run configuration: one JSON object, flags win over file values.

Schema (all keys optional):
    {"T_w": int, "D0": number, "D0_is_fraction": bool, "inverse": bool,
     "seed": int, "recompute_stride": int, "theta": number,
     "kappa": number, "v_min": number, "K": int}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

from .complexity import DEFAULT_K, DEFAULT_KAPPA, DEFAULT_V_MIN, DominanceParams
from .errors import ConfigError
from .saliency import DEFAULT_THRESHOLD
from .scheduler import WarmupSchedule

_KEY_TO_FIELD = {
    "T_w": "t_warmup",
    "D0": "d_initial",
    "D0_is_fraction": "d_initial_is_fraction",
    "inverse": "inverse",
    "seed": "seed",
    "recompute_stride": "recompute_stride",
    "theta": "theta",
    "kappa": "kappa",
    "v_min": "v_min",
    "K": "k_clusters",
}


@dataclass(frozen=True)
class RunConfig:
    t_warmup: int = 1000
    d_initial: float = 0.1
    d_initial_is_fraction: bool = True
    inverse: bool = False
    seed: int = 0
    recompute_stride: int = 1
    theta: float = DEFAULT_THRESHOLD
    kappa: float = DEFAULT_KAPPA
    v_min: float = DEFAULT_V_MIN
    k_clusters: int = DEFAULT_K

    @classmethod
    def from_dict(cls, raw: dict, source: str = "config") -> "RunConfig":
        unknown = set(raw) - set(_KEY_TO_FIELD)
        if unknown:
            raise ConfigError(f"unknown keys in {source}: {sorted(unknown)}")
        try:
            return cls(**{_KEY_TO_FIELD[k]: v for k, v in raw.items()})
        except TypeError as exc:
            raise ConfigError(f"bad value in {source}: {exc}") from exc

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config file {path} must hold one JSON object")
        return cls.from_dict(raw, source=str(path))

    def merged(self, **overrides) -> "RunConfig":
        """Apply non-None overrides (CLI flags win over the file)."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **changes) if changes else self

    def to_dict(self) -> dict:
        return {
            "T_w": self.t_warmup,
            "D0": self.d_initial,
            "D0_is_fraction": self.d_initial_is_fraction,
            "inverse": self.inverse,
            "seed": self.seed,
            "recompute_stride": self.recompute_stride,
            "theta": self.theta,
            "kappa": self.kappa,
            "v_min": self.v_min,
            "K": self.k_clusters,
        }

    def dominance_params(self) -> DominanceParams:
        return DominanceParams(kappa=self.kappa, v_min=self.v_min)

    def schedule_for(self, n_images: int) -> WarmupSchedule:
        d0 = self.d_initial * n_images if self.d_initial_is_fraction else self.d_initial
        if self.d_initial_is_fraction and not 0.0 < self.d_initial <= 1.0:
            raise ConfigError(
                f"fractional D0 must lie in (0, 1], got {self.d_initial}"
            )
        d0 = max(1.0, float(d0))
        return WarmupSchedule(
            t_warmup=self.t_warmup,
            n_images=n_images,
            d_initial=d0,
            inverse=self.inverse,
            seed=self.seed,
            recompute_stride=self.recompute_stride,
        )
