"""Synthetic token embedding fixtures with recorded ground truth.

Foreground tokens are offset along a planted unit direction (plus a
cluster-specific base orthogonal to it) so the saliency fit should recover
the direction and the threshold should recover the masks. The generator is
a pure function of (spec, seed); the truth sidecar records everything an
oracle test needs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .embeddings import TokenEmbeddingSet
from .errors import ArgumentError, FormatError

TRUTH_SUFFIX = ".truth.jsonl"


@dataclass(frozen=True)
class SyntheticSpec:
    n_images: int
    tokens_per_image: int
    dim: int
    clusters: int
    fg_fraction: float
    fg_jitter: float = 0.0
    noise: float = 0.1
    offset: float = 1.0
    cluster_spread: float = 0.5
    direction: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.n_images < 1:
            raise ArgumentError(f"need at least one image, got {self.n_images}")
        if self.clusters < 1:
            raise ArgumentError(f"need at least one cluster, got {self.clusters}")
        if self.tokens_per_image < 1 or self.dim < 1:
            raise ArgumentError("tokens_per_image and dim must be >= 1")
        if not 0.0 <= self.fg_fraction <= 1.0:
            raise ArgumentError(f"fg_fraction must lie in [0, 1], got {self.fg_fraction}")
        if self.fg_jitter < 0.0 or self.noise < 0.0 or self.offset < 0.0:
            raise ArgumentError("fg_jitter, noise, and offset must be non-negative")
        if self.direction is not None and len(self.direction) != self.dim:
            raise ArgumentError(
                f"direction has {len(self.direction)} entries, expected dim={self.dim}"
            )

    @classmethod
    def from_dict(cls, raw: dict) -> "SyntheticSpec":
        known = {
            "N": "n_images",
            "L": "tokens_per_image",
            "d": "dim",
            "clusters": "clusters",
            "fg_fraction": "fg_fraction",
            "fg_jitter": "fg_jitter",
            "noise": "noise",
            "offset": "offset",
            "cluster_spread": "cluster_spread",
            "direction": "direction",
        }
        unknown = set(raw) - set(known)
        if unknown:
            raise ArgumentError(f"unknown synthetic spec keys: {sorted(unknown)}")
        kwargs = {known[k]: v for k, v in raw.items()}
        if "direction" in kwargs and kwargs["direction"] is not None:
            kwargs["direction"] = tuple(float(x) for x in kwargs["direction"])
        return cls(**kwargs)


@dataclass(frozen=True)
class SyntheticTruth:
    """Planted structure: direction, per-image masks, clusters, fractions."""

    direction: np.ndarray
    masks: np.ndarray
    cluster_ids: np.ndarray
    fg_fractions: np.ndarray
    noise: float
    offset: float
    seed: int
    image_ids: tuple[str, ...] = field(default=())

    @property
    def bg_ratios(self) -> np.ndarray:
        l = self.masks.shape[1]
        return (l - self.masks.sum(axis=1)) / l


def generate_synthetic(spec: SyntheticSpec, seed: int) -> tuple[TokenEmbeddingSet, SyntheticTruth]:
    rng = np.random.default_rng(seed)
    n, l, d = spec.n_images, spec.tokens_per_image, spec.dim

    if spec.direction is not None:
        direction = np.asarray(spec.direction, dtype=np.float64)
        norm = np.linalg.norm(direction)
        if norm == 0:
            raise ArgumentError("planted direction must be non-zero")
        direction = direction / norm
        rng.standard_normal(d)  # keep the draw stream identical either way
    else:
        direction = rng.standard_normal(d)
        direction /= np.linalg.norm(direction)

    # cluster bases live orthogonal to the planted direction and sum to
    # zero, so neither their span nor their mean disturbs the dominant
    # foreground/background axis
    bases = rng.standard_normal((spec.clusters, d))
    bases -= np.outer(bases @ direction, direction)
    norms = np.linalg.norm(bases, axis=1)
    norms[norms == 0] = 1.0
    bases = spec.cluster_spread * bases / norms[:, None]
    bases -= bases.mean(axis=0)

    cluster_ids = np.arange(n) % spec.clusters
    data = np.empty((n, l, d), dtype=np.float64)
    masks = np.zeros((n, l), dtype=bool)
    fractions = np.empty(n)
    for i in range(n):
        jitter = float(rng.uniform(-1.0, 1.0)) * spec.fg_jitter
        f = min(1.0, max(0.0, spec.fg_fraction + jitter))
        fg_count = int(round(f * l))
        order = rng.permutation(l)
        fg_positions = np.sort(order[:fg_count])
        tokens = spec.noise * rng.standard_normal((l, d))
        tokens[fg_positions] += spec.offset * direction + bases[cluster_ids[i]]
        data[i] = tokens
        masks[i, fg_positions] = True
        fractions[i] = fg_count / l

    image_ids = tuple(f"img{i:06d}" for i in range(n))
    embeddings = TokenEmbeddingSet(data=data.astype(np.float32), image_ids=image_ids)
    truth = SyntheticTruth(
        direction=direction,
        masks=masks,
        cluster_ids=cluster_ids,
        fg_fractions=fractions,
        noise=spec.noise,
        offset=spec.offset,
        seed=seed,
        image_ids=image_ids,
    )
    return embeddings, truth


def write_truth(truth: SyntheticTruth, path) -> None:
    """Sidecar: a meta line with the planted direction, then one line per image."""
    with open(path, "w", encoding="utf-8") as out:
        meta = {
            "record": "meta",
            "direction": [float(x) for x in truth.direction],
            "noise": truth.noise,
            "offset": truth.offset,
            "seed": truth.seed,
        }
        out.write(json.dumps(meta, separators=(",", ":")) + "\n")
        for i, image_id in enumerate(truth.image_ids):
            row = {
                "record": "image",
                "image_id": image_id,
                "mask": "".join("1" if v else "0" for v in truth.masks[i]),
                "cluster": int(truth.cluster_ids[i]),
                "fg_fraction": float(truth.fg_fractions[i]),
            }
            out.write(json.dumps(row, separators=(",", ":")) + "\n")


def read_truth(path) -> SyntheticTruth:
    with open(path, "r", encoding="utf-8") as stream:
        lines = [json.loads(line) for line in stream if line.strip()]
    if not lines or lines[0].get("record") != "meta":
        raise FormatError(f"{path} does not start with a meta record")
    meta = lines[0]
    rows = [row for row in lines[1:] if row.get("record") == "image"]
    if not rows:
        raise FormatError(f"{path} holds no image records")
    masks = np.array([[c == "1" for c in row["mask"]] for row in rows])
    return SyntheticTruth(
        direction=np.asarray(meta["direction"], dtype=np.float64),
        masks=masks,
        cluster_ids=np.asarray([row["cluster"] for row in rows], dtype=np.int64),
        fg_fractions=np.asarray([row["fg_fraction"] for row in rows], dtype=np.float64),
        noise=float(meta["noise"]),
        offset=float(meta["offset"]),
        seed=int(meta["seed"]),
        image_ids=tuple(row["image_id"] for row in rows),
    )
