"""Request/response models for the HTTP service.

Config fields use the wire names of the schedule-config JSON schema
(T_w, D0, ...), so a config file can be posted verbatim.
"""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict

from ..config import RunConfig


class ScheduleConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    T_w: int = 1000
    D0: float = 0.1
    D0_is_fraction: bool = True
    inverse: bool = False
    seed: int = 0
    recompute_stride: int = 1
    theta: float = 0.05
    kappa: float = 12.0
    v_min: float = 0.002
    K: int = 1000

    def to_run_config(self) -> RunConfig:
        return RunConfig.from_dict(self.model_dump(), source="request config")

    @classmethod
    def from_run_config(cls, config: RunConfig) -> "ScheduleConfig":
        return cls(**config.to_dict())


class ScoreRequest(BaseModel):
    input: str
    out: str
    config: ScheduleConfig = ScheduleConfig()
    write_masks: bool = False
    kmeans_batch: int | None = None


class ScoreResponse(BaseModel):
    summary: dict
    paths: dict[str, str]


class SimulateRequest(BaseModel):
    scores: str
    iters: int
    batch: int
    config: ScheduleConfig = ScheduleConfig()
    out: str | None = None


class SimulateResponse(BaseModel):
    n_images: int
    iterations: int
    batch_size: int
    T_w: int
    D0: float
    D_max: float
    inverse: bool
    seed: int
    distinct_seen: int
    coverage: float
    mean_score_first_5pct: float | None
    mean_score_last_5pct: float | None
    mean_score_per_warmup_pct: list[float | None]
    trace_path: str


class StatsRequest(BaseModel):
    scores: str
    out: str | None = None
    top: int = 20


class ClusterStats(BaseModel):
    cluster_id: int
    count: int
    omega_min: float
    omega_median: float
    omega_max: float
    lowest_ids: list[str]
    highest_ids: list[str]


class StatsResponse(BaseModel):
    n_records: int
    omega_quantiles: dict[str, float]
    dom_prot_correlation: float | None
    clusters: list[ClusterStats]
    stats_path: str


class SynthRequest(BaseModel):
    spec: dict
    seed: int = 0
    out: str


class SynthResponse(BaseModel):
    path: str
    truth_path: str
    n_images: int
    tokens_per_image: int
    dim: int


class HealthResponse(BaseModel):
    status: str
    version: str


class ErrorDetail(BaseModel):
    kind: str
    message: str


class ErrorResponse(BaseModel):
    error: ErrorDetail
