"""Temperature-controlled sampling and the effective-size annealing schedule.

The sampler draws image indices with probability proportional to
exp(-score/tau). Rather than setting tau directly, the schedule targets an
effective dataset size (the expected number of distinct images seen in one
epoch of N with-replacement draws) and recovers tau by bisection, which is
sound because the effective size grows monotonically with tau.

``TAU_UNIFORM`` (+inf) is the explicit uniform sentinel: the uniform path
is a dedicated branch, never a softmax at some large finite temperature.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, ConfigError, TargetRangeError

log = logging.getLogger(__name__)

TAU_UNIFORM = math.inf

# Bisection runs on log(tau); the bracket expands beyond these bounds when
# the target demands it.
BRACKET_LO = 1e-6
BRACKET_HI = 1e6
MAX_BISECTIONS = 200


def solver_tolerance(target: float) -> float:
    """0.5 images absolute or 1e-6 relative, whichever is looser."""
    return max(0.5, 1e-6 * abs(target))


def sampling_probs(scores: np.ndarray, tau: float) -> np.ndarray:
    """Softmax of -scores/tau with max-subtraction; uniform at the sentinel."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or scores.size < 1:
        raise ArgumentError(f"scores must be a non-empty vector, got shape {scores.shape}")
    if not np.isfinite(scores).all():
        raise ArgumentError("scores must be finite")
    tau = float(tau)
    if tau == TAU_UNIFORM:
        return np.full(scores.size, 1.0 / scores.size)
    if math.isnan(tau) or tau <= 0:
        raise ArgumentError(f"tau must be positive, got {tau}")
    z = -scores / tau
    z -= z.max()
    e = np.exp(z)
    return e / e.sum()


def effective_size(probs: np.ndarray) -> float:
    """Expected distinct images in one epoch of N with-replacement draws."""
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size < 1:
        raise ArgumentError(f"probs must be a non-empty vector, got shape {p.shape}")
    total = float(p.sum())
    if not math.isfinite(total) or abs(total - 1.0) > 1e-6 or p.min() < 0:
        raise ArgumentError("probs must be a probability vector summing to 1")
    n = p.size
    out = np.ones(n)
    partial = p < 1.0
    # 1 - (1-p)^n evaluated as -expm1(n*log1p(-p)) for accuracy at tiny p
    out[partial] = -np.expm1(n * np.log1p(-p[partial]))
    return float(out.sum())


def uniform_effective_size(n: int) -> float:
    """Exact finite-N effective size at uniform sampling.

    The asymptotic form n*(1 - 1/e) overshoots what one epoch of draws can
    actually reach for finite n, which would make it an infeasible solver
    target; the exact expression is what effective_size returns at uniform.
    """
    if n < 1:
        raise ArgumentError(f"n must be >= 1, got {n}")
    return float(n * -math.expm1(n * math.log1p(-1.0 / n))) if n > 1 else 1.0


def min_effective_size(scores: np.ndarray) -> float:
    """Limit of the effective size as tau -> 0+ (mass on the minimal scores)."""
    scores = np.asarray(scores, dtype=np.float64)
    m = int(np.count_nonzero(scores == scores.min()))
    n = scores.size
    if m == n:
        return uniform_effective_size(n)
    return float(m * -math.expm1(n * math.log1p(-1.0 / m))) if m > 1 else 1.0


def solve_temperature(scores: np.ndarray, target: float) -> float:
    """Recover the tau whose sampling distribution hits the target size.

    Bisection on log(tau) with bracket expansion. Returns TAU_UNIFORM for
    the uniform endpoint and for flat score vectors (where the effective
    size does not depend on tau at all).
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or scores.size < 1:
        raise ArgumentError(f"scores must be a non-empty vector, got shape {scores.shape}")
    if not np.isfinite(scores).all():
        raise ArgumentError("scores must be finite")
    n = scores.size
    d_max = uniform_effective_size(n)
    if float(scores.max()) == float(scores.min()):
        log.warning(
            "score vector is flat: effective size is %.6g at every temperature", d_max
        )
        return TAU_UNIFORM
    s_min = min_effective_size(scores)
    if not math.isfinite(target) or target <= s_min or target > d_max:
        raise TargetRangeError(
            f"target effective size {target} is outside the feasible interval "
            f"({s_min:.6g}, {d_max:.6g}]"
        )
    if target == d_max:
        return TAU_UNIFORM

    tol = solver_tolerance(target)

    def size_at(tau: float) -> float:
        return effective_size(sampling_probs(scores, tau))

    lo, hi = BRACKET_LO, BRACKET_HI
    for _ in range(60):
        if size_at(lo) < target:
            break
        lo /= 10.0
    for _ in range(60):
        if size_at(hi) >= target:
            break
        hi *= 10.0
    else:
        # monotone limit is d_max > target, so float granularity ran out first
        return TAU_UNIFORM

    tau = hi
    for _ in range(MAX_BISECTIONS):
        tau = math.exp(0.5 * (math.log(lo) + math.log(hi)))
        value = size_at(tau)
        if abs(value - target) <= tol:
            return tau
        if value < target:
            lo = tau
        else:
            hi = tau
        if hi / lo < 1.0 + 1e-14:
            return tau
    return tau


def power2_target(t: float, t_warmup: int, d_initial: float, d_max: float) -> float:
    """Quadratic ease-out from d_initial to d_max over t_warmup iterations.

    Exact at both endpoints; constant at d_max for t > t_warmup.
    """
    if t < 0:
        raise ArgumentError(f"iteration must be >= 0, got {t}")
    if t >= t_warmup:
        return d_max
    remaining = 1.0 - t / t_warmup
    return d_initial + (d_max - d_initial) * (1.0 - remaining * remaining)


def linear_target(t: float, t_warmup: int, d_initial: float, d_max: float) -> float:
    """Linear ramp; kept as an ablation alternative to the quadratic curve."""
    if t < 0:
        raise ArgumentError(f"iteration must be >= 0, got {t}")
    if t >= t_warmup:
        return d_max
    return d_initial + (d_max - d_initial) * (t / t_warmup)


def inverse_scores(scores: np.ndarray) -> np.ndarray:
    """Reflect normalized scores so high-complexity images lead the schedule."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size and (not np.isfinite(scores).all() or scores.min() < 0.0 or scores.max() > 1.0):
        raise ArgumentError("scores must lie in [0, 1]")
    return 1.0 - scores


_CURVES = {"power2": power2_target, "linear": linear_target}


@dataclass(frozen=True)
class WarmupSchedule:
    """Resolved schedule parameters for one dataset."""

    t_warmup: int
    n_images: int
    d_initial: float
    inverse: bool = False
    seed: int = 0
    recompute_stride: int = 1
    curve: str = "power2"

    def __post_init__(self):
        if self.t_warmup < 1:
            raise ConfigError(f"T_w must be >= 1, got {self.t_warmup}")
        if self.n_images < 1:
            raise ConfigError(f"dataset size must be >= 1, got {self.n_images}")
        if self.recompute_stride < 1:
            raise ConfigError(f"recompute_stride must be >= 1, got {self.recompute_stride}")
        if self.curve not in _CURVES:
            raise ConfigError(f"unknown annealing curve {self.curve!r}")
        if not (1.0 <= self.d_initial <= self.d_max):
            raise ConfigError(
                f"D0 must lie in [1, {self.d_max:.6g}] for N={self.n_images}, "
                f"got {self.d_initial}"
            )

    @property
    def d_max(self) -> float:
        return uniform_effective_size(self.n_images)

    def target(self, t: float) -> float:
        return _CURVES[self.curve](t, self.t_warmup, self.d_initial, self.d_max)


class SamplerState:
    """Mutable per-run sampler: probabilities, RNG, and draw statistics.

    Single-threaded by design (it owns a mutable RNG); run independent
    states with distinct seeds for parallel simulations. The RNG is numpy's
    seeded PCG64, so draw sequences are reproducible per seed.
    """

    def __init__(self, scores: np.ndarray, schedule: WarmupSchedule):
        scores = np.asarray(scores, dtype=np.float64)
        if scores.ndim != 1 or scores.size != schedule.n_images:
            raise ConfigError(
                f"score vector of length {scores.size} does not match "
                f"schedule dataset size {schedule.n_images}"
            )
        if scores.size and (not np.isfinite(scores).all() or scores.min() < 0.0 or scores.max() > 1.0):
            raise ConfigError("normalized scores must lie in [0, 1]")
        self.schedule = schedule
        self.scores = scores
        self.sampling_scores = inverse_scores(scores) if schedule.inverse else scores
        flat = float(self.sampling_scores.max()) == float(self.sampling_scores.min())
        floor = min_effective_size(self.sampling_scores)
        if not flat and schedule.d_initial <= floor:
            raise ConfigError(
                f"D0={schedule.d_initial:.6g} is unreachable: the schedule floor for "
                f"these scores is {floor:.6g} (raise D0 above it)"
            )
        self.t = 0
        self.tau = float("nan")
        self.probs: np.ndarray | None = None
        self._cum: np.ndarray | None = None
        self.rng = np.random.default_rng(schedule.seed)
        n = schedule.n_images
        self._seen = np.zeros(n, dtype=bool)
        self.distinct_seen = 0
        # trailing window of the last n draws, for realized effective size
        self._window = np.zeros(n, dtype=np.int64)
        self._window_counts = np.zeros(n, dtype=np.int64)
        self._window_pos = 0
        self._window_fill = 0
        self.window_distinct = 0
        self.draw_log: list[np.ndarray] | None = None

    def _refresh(self, t: int):
        sched = self.schedule
        if t > sched.t_warmup:
            if self.tau != TAU_UNIFORM:
                self.tau = TAU_UNIFORM
                self.probs = sampling_probs(self.sampling_scores, TAU_UNIFORM)
                self._cum = np.cumsum(self.probs)
            return
        if self.probs is not None and (t - 1) % sched.recompute_stride != 0:
            return
        target = sched.target(t)
        self.tau = solve_temperature(self.sampling_scores, target)
        self.probs = sampling_probs(self.sampling_scores, self.tau)
        self._cum = np.cumsum(self.probs)

    def step(self, batch_size: int) -> np.ndarray:
        """Advance one iteration and draw a batch of image indices."""
        if batch_size < 1:
            raise ArgumentError(f"batch_size must be >= 1, got {batch_size}")
        self.t += 1
        self._refresh(self.t)
        u = self.rng.random(batch_size)
        idx = np.searchsorted(self._cum, u, side="right")
        np.clip(idx, 0, self.schedule.n_images - 1, out=idx)
        self._record(idx)
        if self.draw_log is not None:
            self.draw_log.append(idx)
        return idx

    def _record(self, idx: np.ndarray):
        self._seen[idx] = True
        self.distinct_seen = int(self._seen.sum())
        n = self.schedule.n_images
        for value in idx:
            if self._window_fill == n:
                old = self._window[self._window_pos]
                self._window_counts[old] -= 1
            else:
                self._window_fill += 1
            self._window[self._window_pos] = value
            self._window_counts[value] += 1
            self._window_pos = (self._window_pos + 1) % n
        self.window_distinct = int(np.count_nonzero(self._window_counts))

    def current_target(self) -> float:
        return self.schedule.target(self.t)
