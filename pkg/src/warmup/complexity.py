"""Per-image complexity scoring.

Two factors are combined multiplicatively: a sigmoid-corrected background
ratio (how much of the frame salient content fails to occupy) and the
Euclidean distance from the image's mean foreground vector to its nearest
learned prototype (how unusual the content is). Raw products are then
min-max normalized within each prototype cluster so no visual concept is
globally favored just because its raw scores run low.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .embeddings import TokenEmbeddingSet
from .errors import ArgumentError
from .parallel import chunk_bounds, map_chunks
from .saliency import ForegroundMasks

DEFAULT_KAPPA = 12.0
DEFAULT_V_MIN = 0.002
DEFAULT_K = 1000

# Full-batch Lloyd stays deterministic and exact at desk scale; above this
# size the fitter switches to mini-batch updates for throughput.
FULL_BATCH_LIMIT = 50_000
DEFAULT_MINI_BATCH = 4096


@dataclass(frozen=True)
class DominanceParams:
    """Steepness and floor of the background-ratio correction."""

    kappa: float = DEFAULT_KAPPA
    v_min: float = DEFAULT_V_MIN

    def __post_init__(self):
        if not self.kappa > 0:
            raise ArgumentError(f"kappa must be > 0, got {self.kappa}")
        if not 0.0 < self.v_min < 0.5:
            raise ArgumentError(f"v_min must be in (0, 0.5), got {self.v_min}")

    @property
    def alpha(self) -> float:
        return math.log(self.v_min / (1.0 - self.v_min))


@dataclass(frozen=True)
class ComplexityRecord:
    image_id: str
    r_bg: float
    omega_dom: float
    omega_prot: float
    cluster_id: int
    omega: float
    omega_norm: float


@dataclass(frozen=True)
class PrototypeModel:
    """K centroids; assignment is nearest-centroid with lowest-index ties.

    ``labels`` and ``distances`` hold the assignment of the fitting data;
    models loaded from a centroid dump carry centroids only.
    """

    centroids: np.ndarray
    iterations: int = 0
    inertia: float = float("nan")
    seed: int | None = None
    batch_size: int | None = None
    init_centroids: np.ndarray | None = None
    inertia_history: tuple[float, ...] = field(default=())
    reseeds: int = 0
    labels: np.ndarray | None = None
    distances: np.ndarray | None = None

    def __post_init__(self):
        centroids = np.asarray(self.centroids, dtype=np.float64)
        if centroids.ndim != 2 or centroids.shape[0] < 1:
            raise ArgumentError(f"centroids must be (K, d) with K >= 1, got {centroids.shape}")
        if not np.isfinite(centroids).all():
            raise ArgumentError("centroids must be finite")
        object.__setattr__(self, "centroids", centroids)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]


def dominance(r_bg, params: DominanceParams = DominanceParams()):
    """Sigmoid correction of the background ratio, pinned to v_min at 0.

    Accepts a scalar or an array; returns the same shape. Strictly
    increasing in r_bg, bounded in (0, 1).
    """
    arr = np.asarray(r_bg, dtype=np.float64)
    if arr.size and (not np.isfinite(arr).all() or arr.min() < 0.0 or arr.max() > 1.0):
        raise ArgumentError("r_bg values must lie in [0, 1]")
    out = 1.0 / (1.0 + np.exp(-(params.kappa * arr + params.alpha)))
    if np.isscalar(r_bg) or (hasattr(r_bg, "ndim") and r_bg.ndim == 0):
        return float(out)
    return out


def mean_foreground(embeddings: TokenEmbeddingSet, masks: ForegroundMasks) -> np.ndarray:
    """Per-image mean of foreground tokens, or of all tokens when none pass."""
    data = embeddings.data
    n, l, d = data.shape
    if masks.mask.shape != (n, l):
        raise ArgumentError(
            f"mask shape {masks.mask.shape} does not match embeddings ({n}, {l})"
        )
    counts = masks.fg_counts
    weighted = np.einsum("nld,nl->nd", data.astype(np.float64), masks.mask.astype(np.float64))
    out = np.empty((n, d), dtype=np.float64)
    has_fg = counts > 0
    out[has_fg] = weighted[has_fg] / counts[has_fg, None]
    if (~has_fg).any():
        out[~has_fg] = data[~has_fg].astype(np.float64).mean(axis=1)
    return out


def _sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d2 = (
        np.sum(points * points, axis=1)[:, None]
        + np.sum(centroids * centroids, axis=1)[None, :]
        - 2.0 * (points @ centroids.T)
    )
    np.maximum(d2, 0.0, out=d2)
    return d2


def _assign(points: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-centroid labels and squared distances, chunked.

    Selection uses the fast expansion form; the distance of the selected
    pair is then recomputed from differences, which is exact at zero.
    """

    def one(b):
        block = points[b[0] : b[1]]
        lbl = np.argmin(_sq_dists(block, centroids), axis=1)
        diff = block - centroids[lbl]
        return lbl, np.einsum("ij,ij->i", diff, diff)

    parts = map_chunks(one, chunk_bounds(len(points), 8192))
    labels = np.concatenate([p[0] for p in parts])
    dist2 = np.concatenate([p[1] for p in parts])
    return labels, dist2


def _plusplus_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = int(rng.integers(n))
    centroids = np.empty((k, points.shape[1]), dtype=np.float64)
    centroids[0] = points[chosen[0]]
    d2 = _sq_dists(points, centroids[:1])[:, 0]
    for j in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            # remaining points coincide with chosen centroids; take the
            # lowest-index point not yet used
            used = set(chosen[:j].tolist())
            idx = next(i for i in range(n) if i not in used)
        else:
            idx = int(rng.choice(n, p=d2 / total))
        chosen[j] = idx
        centroids[j] = points[idx]
        d2 = np.minimum(d2, _sq_dists(points, centroids[j : j + 1])[:, 0])
    return centroids


def _repair_empty(
    points: np.ndarray, centroids: np.ndarray, labels: np.ndarray, dist2: np.ndarray
) -> int:
    """Reseed empty clusters to the point farthest from its assigned centroid.

    Deterministic: empty clusters are handled in index order and ties pick
    the lowest point index. Returns the number of reseeds performed.
    """
    counts = np.bincount(labels, minlength=len(centroids))
    reseeds = 0
    working = dist2.copy()
    for cluster in np.flatnonzero(counts == 0):
        point = int(np.argmax(working))
        centroids[cluster] = points[point]
        labels[point] = cluster
        dist2[point] = 0.0
        working[point] = -1.0
        reseeds += 1
    return reseeds


def fit_prototypes(
    vectors: np.ndarray,
    k: int = DEFAULT_K,
    seed: int = 0,
    max_iters: int = 300,
    batch: int | None = None,
    tol: float = 1e-6,
) -> PrototypeModel:
    """k-means++ initialization followed by Lloyd or mini-batch updates.

    ``batch=None`` picks full-batch below FULL_BATCH_LIMIT points and
    mini-batch (DEFAULT_MINI_BATCH) above; pass an explicit size to force
    mini-batch mode. Deterministic for fixed (vectors, k, seed, batch).
    """
    points = np.asarray(vectors, dtype=np.float64)
    if points.ndim != 2:
        raise ArgumentError(f"vectors must be (N, d), got shape {points.shape}")
    n = len(points)
    if k < 1:
        raise ArgumentError(f"k must be >= 1, got {k}")
    if n < k:
        raise ArgumentError(f"need at least as many points as clusters: N={n} < K={k}")
    if batch is not None and batch < 1:
        raise ArgumentError(f"batch must be >= 1, got {batch}")
    if batch is None and n > FULL_BATCH_LIMIT:
        batch = DEFAULT_MINI_BATCH

    rng = np.random.default_rng(seed)
    centroids = _plusplus_init(points, k, rng)
    init_centroids = centroids.copy()

    if batch is None:
        return _fit_full(points, centroids, init_centroids, rng, k, seed, max_iters, tol)
    return _fit_minibatch(points, centroids, init_centroids, rng, k, seed, max_iters, tol, batch)


def _fit_full(points, centroids, init_centroids, rng, k, seed, max_iters, tol):
    history = []
    reseeds = 0
    labels = np.zeros(len(points), dtype=np.int64)
    dist2 = np.zeros(len(points))
    iterations = 0
    for iterations in range(1, max_iters + 1):
        labels, dist2 = _assign(points, centroids)
        reseeds += _repair_empty(points, centroids, labels, dist2)
        history.append(float(dist2.sum()))
        new_centroids = centroids.copy()
        for j in range(k):
            members = labels == j
            if members.any():
                new_centroids[j] = points[members].mean(axis=0)
        movement = float(np.max(np.linalg.norm(new_centroids - centroids, axis=1)))
        centroids = new_centroids
        if movement < tol:
            break
    labels, dist2 = _assign(points, centroids)
    for _ in range(k):
        fixed = _repair_empty(points, centroids, labels, dist2)
        if fixed == 0:
            break
        reseeds += fixed
        labels, dist2 = _assign(points, centroids)
    return PrototypeModel(
        centroids=centroids,
        iterations=iterations,
        inertia=float(dist2.sum()),
        seed=seed,
        batch_size=None,
        init_centroids=init_centroids,
        inertia_history=tuple(history),
        reseeds=reseeds,
        labels=labels,
        distances=np.sqrt(dist2),
    )


def _fit_minibatch(points, centroids, init_centroids, rng, k, seed, max_iters, tol, batch):
    n = len(points)
    counts = np.ones(k)  # init counts as one observation per centroid
    iterations = 0
    for iterations in range(1, max_iters + 1):
        idx = rng.integers(0, n, size=batch)
        sample = points[idx]
        labels, _ = _assign(sample, centroids)
        old = centroids.copy()
        sums = np.zeros_like(centroids)
        np.add.at(sums, labels, sample)
        members = np.bincount(labels, minlength=k).astype(np.float64)
        touched = members > 0
        # grouped form of the sequential per-sample running-mean update
        centroids[touched] = (
            counts[touched, None] * centroids[touched] + sums[touched]
        ) / (counts[touched] + members[touched])[:, None]
        counts += members
        movement = float(np.max(np.linalg.norm(centroids - old, axis=1)))
        if movement < tol:
            break
    labels, dist2 = _assign(points, centroids)
    reseeds = 0
    # bounded repair loop: each pass reseeds every currently-empty cluster
    for _ in range(k):
        fixed = _repair_empty(points, centroids, labels, dist2)
        if fixed == 0:
            break
        reseeds += fixed
        labels, dist2 = _assign(points, centroids)
    return PrototypeModel(
        centroids=centroids,
        iterations=iterations,
        inertia=float(dist2.sum()),
        seed=seed,
        batch_size=batch,
        init_centroids=init_centroids,
        inertia_history=(),
        reseeds=reseeds,
        labels=labels,
        distances=np.sqrt(dist2),
    )


def typicality(vector: np.ndarray, model: PrototypeModel) -> tuple[int, float]:
    """Nearest prototype id and the Euclidean distance to it."""
    vec = np.asarray(vector, dtype=np.float64)
    if vec.shape != (model.dim,):
        raise ArgumentError(f"vector shape {vec.shape} does not match model dim {model.dim}")
    cluster = int(np.argmin(_sq_dists(vec[None, :], model.centroids)[0]))
    return cluster, float(np.linalg.norm(vec - model.centroids[cluster]))


def assign_clusters(vectors: np.ndarray, model: PrototypeModel) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized typicality for (N, d) inputs -> (labels, distances)."""
    points = np.asarray(vectors, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != model.dim:
        raise ArgumentError(f"vectors shape {points.shape} does not match model dim {model.dim}")
    labels, dist2 = _assign(points, model.centroids)
    return labels, np.sqrt(dist2)


def combine_scores(omega_dom: np.ndarray, omega_prot: np.ndarray) -> np.ndarray:
    return np.asarray(omega_dom, dtype=np.float64) * np.asarray(omega_prot, dtype=np.float64)


def normalize_within_clusters(omega: np.ndarray, cluster_ids: np.ndarray) -> np.ndarray:
    """Min-max rescale scores inside each cluster.

    Clusters whose scores are all equal (singletons included) map to 0:
    their members count as maximally simple within their own concept, which
    keeps them reachable from the first iteration.
    """
    omega = np.asarray(omega, dtype=np.float64)
    cluster_ids = np.asarray(cluster_ids)
    if omega.shape != cluster_ids.shape:
        raise ArgumentError("omega and cluster_ids must have the same length")
    out = np.zeros_like(omega)
    for cluster in np.unique(cluster_ids):
        members = cluster_ids == cluster
        lo = omega[members].min()
        hi = omega[members].max()
        if hi > lo:
            out[members] = (omega[members] - lo) / (hi - lo)
    return out


def build_records(
    image_ids,
    r_bg: np.ndarray,
    omega_dom: np.ndarray,
    omega_prot: np.ndarray,
    cluster_ids: np.ndarray,
) -> list[ComplexityRecord]:
    """Combine draft per-image factors into finished records."""
    omega = combine_scores(omega_dom, omega_prot)
    omega_norm = normalize_within_clusters(omega, cluster_ids)
    return [
        ComplexityRecord(
            image_id=image_ids[i],
            r_bg=float(r_bg[i]),
            omega_dom=float(omega_dom[i]),
            omega_prot=float(omega_prot[i]),
            cluster_id=int(cluster_ids[i]),
            omega=float(omega[i]),
            omega_norm=float(omega_norm[i]),
        )
        for i in range(len(image_ids))
    ]
