"""Dataset-level saliency: dominant token direction, per-token scores, masks.

Tokens are mean-centered before extracting the principal direction; an
uncentered first component mostly tracks the global mean and destroys the
foreground/background contrast the threshold relies on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embeddings import TokenEmbeddingSet
from .errors import ArgumentError, ConvergenceError, DegenerateInputError
from .parallel import CHUNK_IMAGES, chunk_bounds, map_chunks

DEFAULT_THRESHOLD = 0.05


@dataclass(frozen=True)
class SaliencyModel:
    """Unit direction plus centering mean and the foreground threshold.

    ``sign_convention`` is +1 when the direction is oriented so the mean
    score of the top-decile-norm tokens is positive, -1 when the caller
    asked for the flipped orientation.
    """

    direction: np.ndarray
    mean: np.ndarray
    threshold: float = DEFAULT_THRESHOLD
    sign_convention: int = 1
    eigenvalue: float = 0.0
    iterations: int = 0
    residual: float = 0.0

    def __post_init__(self):
        direction = np.asarray(self.direction, dtype=np.float64)
        norm = float(np.linalg.norm(direction))
        if abs(norm - 1.0) > 1e-9:
            raise ArgumentError(f"direction must be unit length, norm is {norm}")
        object.__setattr__(self, "direction", direction)
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=np.float64))


@dataclass(frozen=True)
class ForegroundMasks:
    """Boolean (N, L) foreground flags with derived counts and ratios."""

    mask: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.ndim != 2:
            raise ArgumentError(f"mask must be (N, L), got shape {mask.shape}")
        object.__setattr__(self, "mask", mask)

    @property
    def fg_counts(self) -> np.ndarray:
        return self.mask.sum(axis=1)

    @property
    def bg_ratios(self) -> np.ndarray:
        l = self.mask.shape[1]
        return (l - self.fg_counts) / l


def token_mean_and_covariance(
    embeddings: TokenEmbeddingSet, chunk: int = CHUNK_IMAGES
) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance over all N*L tokens, accumulated per image chunk.

    Partial sums are combined in chunk order, so the result does not depend
    on the worker count (associative-reduction contract).
    """
    data = embeddings.data
    n, l, d = data.shape
    total = n * l
    bounds = chunk_bounds(n, chunk)

    sums = map_chunks(lambda b: data[b[0] : b[1]].reshape(-1, d).sum(axis=0, dtype=np.float64), bounds)
    mean = np.zeros(d)
    for part in sums:
        mean += part
    mean /= total

    def centered_moment(b):
        centered = data[b[0] : b[1]].reshape(-1, d).astype(np.float64) - mean
        return centered.T @ centered

    moments = map_chunks(centered_moment, bounds)
    cov = np.zeros((d, d))
    for part in moments:
        cov += part
    cov /= total
    return mean, cov


def dominant_eigenvector(
    cov: np.ndarray, tol: float = 1e-9, max_iters: int = 10_000, seed: int = 0
) -> tuple[float, np.ndarray, int, float]:
    """Power iteration with a seed-derived start and a residual stopping test."""
    cov = np.asarray(cov, dtype=np.float64)
    d = cov.shape[0]
    rng = np.random.default_rng(seed)
    vec = rng.standard_normal(d)
    vec /= np.linalg.norm(vec)
    eig = 0.0
    residual = np.inf
    for iteration in range(1, max_iters + 1):
        nxt = cov @ vec
        norm = float(np.linalg.norm(nxt))
        if norm == 0.0:
            # start vector landed in the nullspace; perturb deterministically
            vec = rng.standard_normal(d)
            vec /= np.linalg.norm(vec)
            continue
        vec = nxt / norm
        eig = float(vec @ (cov @ vec))
        residual = float(np.linalg.norm(cov @ vec - eig * vec))
        if eig > 0 and residual / eig <= tol:
            return eig, vec, iteration, residual
    raise ConvergenceError(
        f"power iteration did not reach tolerance {tol} in {max_iters} iterations "
        f"(final relative residual {residual / eig if eig else float('inf'):.3e})"
    )


def fit_saliency(
    embeddings: TokenEmbeddingSet,
    threshold: float = DEFAULT_THRESHOLD,
    tol: float = 1e-9,
    max_iters: int = 10_000,
    seed: int = 0,
    flip_sign: bool = False,
) -> SaliencyModel:
    """Fit the dominant token direction over the whole dataset.

    The direction is oriented so that the mean score of the tokens whose
    centered norm falls in the top decile is positive (foreground = high
    activation); ``flip_sign`` inverts that convention.
    """
    n, l, d = embeddings.data.shape
    if n * l < 2:
        raise ArgumentError("need at least two tokens to fit a direction")
    mean, cov = token_mean_and_covariance(embeddings)
    total_var = float(np.trace(cov))
    scale = float(np.mean(np.square(embeddings.data, dtype=np.float64))) + 1e-30
    if total_var <= 1e-18 * scale:
        raise DegenerateInputError("all tokens are identical: covariance is zero")
    eig, vec, iterations, residual = dominant_eigenvector(cov, tol=tol, max_iters=max_iters, seed=seed)

    centered = embeddings.data.reshape(-1, d).astype(np.float64) - mean
    norms = np.linalg.norm(centered, axis=1)
    cutoff = np.quantile(norms, 0.9)
    top = norms >= cutoff
    if float((centered[top] @ vec).mean()) < 0.0:
        vec = -vec
    sign = 1
    if flip_sign:
        vec = -vec
        sign = -1
    return SaliencyModel(
        direction=vec,
        mean=mean,
        threshold=threshold,
        sign_convention=sign,
        eigenvalue=eig,
        iterations=iterations,
        residual=residual,
    )


def saliency_scores(embeddings: TokenEmbeddingSet, model: SaliencyModel) -> np.ndarray:
    """Project every centered token onto the model direction -> (N, L)."""
    if embeddings.dim != model.direction.shape[0]:
        raise ArgumentError(
            f"dimension mismatch: tokens have d={embeddings.dim}, "
            f"model has d={model.direction.shape[0]}"
        )
    n, l, d = embeddings.data.shape
    flat = embeddings.data.reshape(-1, d)

    def project(b):
        return (flat[b[0] : b[1]].astype(np.float64) - model.mean) @ model.direction

    parts = map_chunks(project, chunk_bounds(n * l, CHUNK_IMAGES * max(1, l)))
    return np.concatenate(parts).reshape(n, l)


def foreground_mask(scores: np.ndarray, threshold: float = DEFAULT_THRESHOLD) -> ForegroundMasks:
    """Strictly-above-threshold foreground flags; ties count as background."""
    scores = np.asarray(scores)
    if scores.ndim != 2:
        raise ArgumentError(f"scores must be (N, L), got shape {scores.shape}")
    return ForegroundMasks(mask=scores > threshold)
