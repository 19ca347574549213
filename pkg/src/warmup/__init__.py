"""Complexity-ordered data sampling for training pipelines.

Scores every image in a dataset from its spatial token embeddings
(foreground dominance times prototype typicality, normalized per cluster)
and drives a temperature-annealed sampler that presents simple content
first and flattens to uniform over a warmup horizon.
"""

__version__ = "0.1.0"

from .complexity import (
    ComplexityRecord,
    DominanceParams,
    PrototypeModel,
    assign_clusters,
    build_records,
    combine_scores,
    dominance,
    fit_prototypes,
    mean_foreground,
    normalize_within_clusters,
    typicality,
)
from .config import RunConfig
from .embeddings import TokenEmbeddingSet
from .saliency import (
    ForegroundMasks,
    SaliencyModel,
    fit_saliency,
    foreground_mask,
    saliency_scores,
)
from .scheduler import (
    TAU_UNIFORM,
    SamplerState,
    WarmupSchedule,
    effective_size,
    inverse_scores,
    min_effective_size,
    power2_target,
    sampling_probs,
    solve_temperature,
    uniform_effective_size,
)
from .synth import SyntheticSpec, SyntheticTruth, generate_synthetic

__all__ = [
    "__version__",
    "ComplexityRecord",
    "DominanceParams",
    "ForegroundMasks",
    "PrototypeModel",
    "RunConfig",
    "SamplerState",
    "SaliencyModel",
    "SyntheticSpec",
    "SyntheticTruth",
    "TAU_UNIFORM",
    "TokenEmbeddingSet",
    "WarmupSchedule",
    "assign_clusters",
    "build_records",
    "combine_scores",
    "dominance",
    "effective_size",
    "fit_prototypes",
    "fit_saliency",
    "foreground_mask",
    "generate_synthetic",
    "inverse_scores",
    "mean_foreground",
    "min_effective_size",
    "normalize_within_clusters",
    "power2_target",
    "sampling_probs",
    "saliency_scores",
    "solve_temperature",
    "typicality",
    "uniform_effective_size",
]
