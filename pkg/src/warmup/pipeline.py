"""End-to-end operations behind the service endpoints and CLI subcommands.

Each run_* function is a pure-ish pipeline over files: it validates paths
up front, executes the module chain, writes its outputs, and returns a
JSON-ready report. Partial outputs are removed when a stage fails.
"""

from __future__ import annotations

import csv
import json
import math
import time
from pathlib import Path

import numpy as np

from . import complexity, formats, saliency, scheduler, synth
from .config import RunConfig
from .errors import ConfigError, DataError

SCORES_NAME = "scores.jsonl"
PROTOS_NAME = "protos.bin"
MASKS_NAME = "masks.jsonl"
SUMMARY_NAME = "summary.json"
TRACE_NAME = "trace.csv"
REPORT_NAME = "report.json"
STATS_NAME = "stats.csv"

TRACE_COLUMNS = ("t", "tau", "target_effective_size", "realized_effective_size", "distinct_seen_cumulative")


def _require_file(path: Path, what: str) -> Path:
    if not path.is_file():
        raise DataError(f"{what} not found: {path}")
    return path


def _fmt_tau(tau: float) -> str:
    return "inf" if tau == scheduler.TAU_UNIFORM else f"{tau:.9g}"


class _StageTimer:
    def __init__(self):
        self.timings: dict[str, float] = {}
        self._start = time.perf_counter()

    def mark(self, stage: str, since: float) -> float:
        now = time.perf_counter()
        self.timings[stage] = now - since
        return now

    def finish(self):
        self.timings["total"] = time.perf_counter() - self._start


def run_score(
    input_path,
    out_dir,
    config: RunConfig = RunConfig(),
    write_masks: bool = False,
    kmeans_batch: int | None = None,
) -> dict:
    """Score every image in a token embedding set and write the artifacts."""
    input_path = _require_file(Path(input_path), "embedding input")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    created: list[Path] = []
    timer = _StageTimer()
    try:
        tick = time.perf_counter()
        embeddings = formats.read_embeddings(input_path)
        tick = timer.mark("load", tick)

        model = saliency.fit_saliency(embeddings, threshold=config.theta, seed=config.seed)
        tick = timer.mark("saliency_fit", tick)
        token_scores = saliency.saliency_scores(embeddings, model)
        tick = timer.mark("saliency_scores", tick)
        masks = saliency.foreground_mask(token_scores, config.theta)
        r_bg = masks.bg_ratios
        tick = timer.mark("masks", tick)

        omega_dom = complexity.dominance(r_bg, config.dominance_params())
        tick = timer.mark("dominance", tick)
        fg_means = complexity.mean_foreground(embeddings, masks)
        tick = timer.mark("mean_foreground", tick)

        if config.k_clusters > embeddings.n_images:
            raise ConfigError(
                f"K={config.k_clusters} exceeds the dataset size N={embeddings.n_images}; "
                "lower K (k-means needs at least one point per cluster)"
            )
        protos = complexity.fit_prototypes(
            fg_means, k=config.k_clusters, seed=config.seed, batch=kmeans_batch
        )
        cluster_ids, omega_prot = protos.labels, protos.distances
        tick = timer.mark("prototypes", tick)

        records = complexity.build_records(
            embeddings.image_ids, r_bg, omega_dom, omega_prot, cluster_ids
        )
        tick = timer.mark("normalize", tick)

        scores_path = out / SCORES_NAME
        protos_path = out / PROTOS_NAME
        summary_path = out / SUMMARY_NAME
        created.extend([scores_path, protos_path, summary_path])
        formats.write_scores(records, scores_path)
        formats.write_prototypes(protos, protos_path)
        masks_path = None
        if write_masks:
            masks_path = out / MASKS_NAME
            created.append(masks_path)
            formats.write_masks(masks, embeddings.image_ids, masks_path)

        omega = np.array([rec.omega for rec in records])
        cluster_counts = np.bincount(cluster_ids, minlength=protos.k)
        summary = {
            "n_images": embeddings.n_images,
            "tokens_per_image": embeddings.tokens_per_image,
            "dim": embeddings.dim,
            "k_clusters": protos.k,
            "omega_deciles": [float(v) for v in np.percentile(omega, range(0, 101, 10))],
            "r_bg_mean": float(np.mean(r_bg)),
            "cluster_sizes": {
                "min": int(cluster_counts.min()),
                "max": int(cluster_counts.max()),
                "empty": int((cluster_counts == 0).sum()),
            },
            "saliency": {
                "eigenvalue": model.eigenvalue,
                "iterations": model.iterations,
                "residual": model.residual,
                "sign_convention": model.sign_convention,
            },
            "kmeans": {
                "iterations": protos.iterations,
                "inertia": protos.inertia,
                "reseeds": protos.reseeds,
                "batch_size": protos.batch_size,
            },
            "config": config.to_dict(),
        }
        timer.mark("write", tick)
        timer.finish()
        summary["timings"] = {k: round(v, 6) for k, v in timer.timings.items()}
        summary_path.write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
        return {
            "summary": summary,
            "paths": {
                "scores": str(scores_path),
                "prototypes": str(protos_path),
                "summary": str(summary_path),
                **({"masks": str(masks_path)} if masks_path else {}),
            },
        }
    except Exception:
        for path in created:
            path.unlink(missing_ok=True)
        raise


def run_simulate(
    scores_path,
    iterations: int,
    batch_size: int,
    config: RunConfig = RunConfig(),
    out_dir=None,
) -> dict:
    """Drive the sampling schedule and record its statistical trace.

    Stands in for a training loop: every iteration solves the scheduled
    temperature, draws a batch, and appends one trace row. The trace CSV is
    flushed row by row so long runs stay inspectable mid-flight.
    """
    scores_path = _require_file(Path(scores_path), "score file")
    if iterations < 1:
        raise ConfigError(f"iterations must be >= 1, got {iterations}")
    if batch_size < 1:
        raise ConfigError(f"batch size must be >= 1, got {batch_size}")
    out = Path(out_dir) if out_dir is not None else scores_path.parent
    out.mkdir(parents=True, exist_ok=True)

    records = formats.read_scores(scores_path)
    omega_norm = np.array([rec.omega_norm for rec in records])
    schedule = config.schedule_for(len(records))
    state = scheduler.SamplerState(omega_norm, schedule)

    t_w = schedule.t_warmup
    early_end = max(1, math.ceil(0.05 * t_w))
    late_start = min(t_w, math.floor(0.95 * t_w) + 1)
    bin_sums = np.zeros(100)
    bin_draws = np.zeros(100, dtype=np.int64)
    early = [0.0, 0]
    late = [0.0, 0]

    trace_path = out / TRACE_NAME
    report_path = out / REPORT_NAME
    created = [trace_path, report_path]
    try:
        with open(trace_path, "w", newline="", encoding="utf-8") as sink:
            writer = csv.writer(sink)
            writer.writerow(TRACE_COLUMNS)
            for _ in range(iterations):
                idx = state.step(batch_size)
                t = state.t
                if t <= t_w:
                    drawn = float(omega_norm[idx].sum())
                    pct = min(99, (t - 1) * 100 // t_w)
                    bin_sums[pct] += drawn
                    bin_draws[pct] += batch_size
                    if t <= early_end:
                        early[0] += drawn
                        early[1] += batch_size
                    if t >= late_start:
                        late[0] += drawn
                        late[1] += batch_size
                writer.writerow(
                    (
                        t,
                        _fmt_tau(state.tau),
                        f"{state.current_target():.6f}",
                        state.window_distinct,
                        state.distinct_seen,
                    )
                )
                sink.flush()

        bins = [float(bin_sums[i] / bin_draws[i]) if bin_draws[i] else None for i in range(100)]
        report = {
            "n_images": schedule.n_images,
            "iterations": iterations,
            "batch_size": batch_size,
            "T_w": t_w,
            "D0": schedule.d_initial,
            "D_max": schedule.d_max,
            "inverse": schedule.inverse,
            "seed": schedule.seed,
            "distinct_seen": state.distinct_seen,
            "coverage": state.distinct_seen / schedule.n_images,
            "mean_score_first_5pct": early[0] / early[1] if early[1] else None,
            "mean_score_last_5pct": late[0] / late[1] if late[1] else None,
            "mean_score_per_warmup_pct": bins,
            "trace_path": str(trace_path),
        }
        report_path.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
        return report
    except Exception:
        for path in created:
            path.unlink(missing_ok=True)
        raise


def run_stats(scores_path, out_dir=None, top: int = 20) -> dict:
    """Quantiles, factor correlation, and per-cluster exemplar ids."""
    scores_path = _require_file(Path(scores_path), "score file")
    out = Path(out_dir) if out_dir is not None else scores_path.parent
    out.mkdir(parents=True, exist_ok=True)
    records = formats.read_scores(scores_path)

    omega = np.array([rec.omega for rec in records])
    omega_dom = np.array([rec.omega_dom for rec in records])
    omega_prot = np.array([rec.omega_prot for rec in records])
    clusters = np.array([rec.cluster_id for rec in records])
    ids = np.array([rec.image_id for rec in records])

    if omega_dom.std() == 0.0 or omega_prot.std() == 0.0:
        correlation = None
    else:
        correlation = float(np.corrcoef(omega_dom, omega_prot)[0, 1])

    quantiles = {
        f"p{q}": float(np.percentile(omega, q)) for q in (0, 10, 25, 50, 75, 90, 100)
    }

    per_cluster = []
    stats_path = out / STATS_NAME
    with open(stats_path, "w", newline="", encoding="utf-8") as sink:
        writer = csv.writer(sink)
        writer.writerow(
            ("cluster_id", "count", "omega_min", "omega_median", "omega_max", "lowest_ids", "highest_ids")
        )
        for cluster in np.unique(clusters):
            members = clusters == cluster
            member_omega = omega[members]
            member_ids = ids[members]
            order = np.argsort(member_omega, kind="stable")
            lowest = member_ids[order[:top]].tolist()
            highest = member_ids[order[::-1][:top]].tolist()
            row = {
                "cluster_id": int(cluster),
                "count": int(members.sum()),
                "omega_min": float(member_omega.min()),
                "omega_median": float(np.median(member_omega)),
                "omega_max": float(member_omega.max()),
                "lowest_ids": lowest,
                "highest_ids": highest,
            }
            per_cluster.append(row)
            writer.writerow(
                (
                    row["cluster_id"],
                    row["count"],
                    f"{row['omega_min']:.9g}",
                    f"{row['omega_median']:.9g}",
                    f"{row['omega_max']:.9g}",
                    ";".join(lowest),
                    ";".join(highest),
                )
            )

    return {
        "n_records": len(records),
        "omega_quantiles": quantiles,
        "dom_prot_correlation": correlation,
        "clusters": per_cluster,
        "stats_path": str(stats_path),
    }


def run_synth(spec_dict: dict, seed: int, out_path) -> dict:
    """Generate a synthetic embedding set plus its ground-truth sidecar."""
    spec = synth.SyntheticSpec.from_dict(spec_dict)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    embeddings, truth = synth.generate_synthetic(spec, seed)
    truth_path = Path(str(out_path).removesuffix(".tokemb") + synth.TRUTH_SUFFIX)
    formats.write_embeddings(embeddings, out_path)
    synth.write_truth(truth, truth_path)
    return {
        "path": str(out_path),
        "truth_path": str(truth_path),
        "n_images": embeddings.n_images,
        "tokens_per_image": embeddings.tokens_per_image,
        "dim": embeddings.dim,
    }
