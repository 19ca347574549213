"""Thin HTTP client over the warmup service.

Every subcommand builds one request and posts it to the service: an
in-process app by default, or a remote instance when --server / the
WARMUP_SERVER env var is set. All pipeline work happens behind the
endpoints, so CLI and remote callers exercise the same code path.
"""

from __future__ import annotations

import asyncio
import json
import sys
from pathlib import Path

import click
import httpx

from .config import RunConfig
from .errors import EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC, ConfigError, WarmupError

_EXIT_BY_KIND = {"config": EXIT_CONFIG, "io": EXIT_IO, "numeric": EXIT_NUMERIC}


def _post(server: str | None, path: str, payload: dict) -> dict:
    async def go():
        if server:
            async with httpx.AsyncClient(base_url=server, timeout=None) as client:
                return await client.post(path, json=payload)
        from .service.app import create_app

        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(
            transport=transport, base_url="http://warmup.internal", timeout=None
        ) as client:
            return await client.post(path, json=payload)

    try:
        response = asyncio.run(go())
    except httpx.HTTPError as exc:
        click.echo(f"error (io): cannot reach service: {exc}", err=True)
        sys.exit(EXIT_IO)
    if response.status_code >= 400:
        try:
            detail = response.json()["error"]
            kind, message = detail["kind"], detail["message"]
        except Exception:
            kind, message = "error", response.text
        click.echo(f"error ({kind}): {message}", err=True)
        sys.exit(_EXIT_BY_KIND.get(kind, 1))
    return response.json()


def _load_config(config_path: str | None, **overrides) -> RunConfig:
    try:
        base = RunConfig.from_file(config_path) if config_path else RunConfig()
        return base.merged(**overrides)
    except WarmupError as exc:
        click.echo(f"error ({exc.kind}): {exc}", err=True)
        sys.exit(exc.exit_code)


@click.group()
@click.option("--server", envvar="WARMUP_SERVER", default=None, metavar="URL",
              help="Remote service base URL; defaults to an in-process service.")
@click.pass_context
def main(ctx, server):
    """Complexity scoring and curriculum sampling over token embeddings."""
    ctx.obj = server


@main.command()
@click.option("--input", "input_path", required=True, metavar="PATH", help="Input .tokemb file.")
@click.option("--out", "out_dir", required=True, metavar="DIR", help="Output directory.")
@click.option("--config", "config_path", default=None, metavar="PATH", help="JSON config file.")
@click.option("--theta", type=float, default=None, help="Foreground threshold override.")
@click.option("--kappa", type=float, default=None, help="Dominance steepness override.")
@click.option("--v-min", type=float, default=None, help="Dominance floor override.")
@click.option("-K", "--clusters", "k_clusters", type=int, default=None, help="Prototype count override.")
@click.option("--seed", type=int, default=None, help="Seed override.")
@click.option("--write-masks", is_flag=True, help="Also dump per-image masks.")
@click.option("--kmeans-batch", type=int, default=None, help="Force mini-batch k-means with this batch size.")
@click.pass_obj
def score(server, input_path, out_dir, config_path, theta, kappa, v_min, k_clusters, seed,
          write_masks, kmeans_batch):
    """Score a token embedding set: saliency, complexity, prototypes."""
    config = _load_config(
        config_path, theta=theta, kappa=kappa, v_min=v_min, k_clusters=k_clusters, seed=seed
    )
    result = _post(server, "/v1/score", {
        "input": input_path,
        "out": out_dir,
        "config": config.to_dict(),
        "write_masks": write_masks,
        "kmeans_batch": kmeans_batch,
    })
    summary = result["summary"]
    click.echo(f"scored {summary['n_images']} images "
               f"(L={summary['tokens_per_image']}, d={summary['dim']}, K={summary['k_clusters']})")
    for stage, seconds in summary["timings"].items():
        click.echo(f"  {stage:<16} {seconds:9.3f} s")
    deciles = ", ".join(f"{v:.4g}" for v in summary["omega_deciles"])
    click.echo(f"omega deciles: {deciles}")
    for name, path in result["paths"].items():
        click.echo(f"{name}: {path}")


@main.command()
@click.option("--scores", "scores_path", required=True, metavar="PATH", help="Input scores.jsonl.")
@click.option("--iters", type=int, required=True, help="Iterations to simulate.")
@click.option("--batch", type=int, required=True, help="Batch size per iteration.")
@click.option("--config", "config_path", default=None, metavar="PATH", help="JSON config file.")
@click.option("--out", "out_dir", default=None, metavar="DIR", help="Trace/report directory (default: scores dir).")
@click.option("--t-warmup", "--tw", "t_warmup", type=int, default=None, help="Warmup horizon override.")
@click.option("--d0", type=float, default=None, help="Initial effective size override.")
@click.option("--d0-absolute", is_flag=True, help="Treat --d0 as an absolute count, not a fraction.")
@click.option("--inverse", is_flag=True, default=None, help="Reverse the curriculum direction.")
@click.option("--seed", type=int, default=None, help="Seed override.")
@click.option("--stride", "recompute_stride", type=int, default=None, help="Iterations between probability refreshes.")
@click.pass_obj
def simulate(server, scores_path, iters, batch, config_path, out_dir, t_warmup, d0,
             d0_absolute, inverse, seed, recompute_stride):
    """Simulate the annealed sampling schedule and write a trace CSV."""
    config = _load_config(
        config_path,
        t_warmup=t_warmup,
        d_initial=d0,
        d_initial_is_fraction=False if d0_absolute else None,
        inverse=inverse,
        seed=seed,
        recompute_stride=recompute_stride,
    )
    report = _post(server, "/v1/simulate", {
        "scores": scores_path,
        "iters": iters,
        "batch": batch,
        "config": config.to_dict(),
        "out": out_dir,
    })
    click.echo(f"simulated {report['iterations']} iterations over {report['n_images']} images "
               f"(T_w={report['T_w']}, D0={report['D0']:.2f}, D_max={report['D_max']:.2f}, "
               f"inverse={report['inverse']})")
    click.echo(f"distinct seen: {report['distinct_seen']} ({report['coverage']:.1%})")
    if report["mean_score_first_5pct"] is not None:
        click.echo(f"mean sampled score, first 5% of warmup: {report['mean_score_first_5pct']:.4f}")
    if report["mean_score_last_5pct"] is not None:
        click.echo(f"mean sampled score, last 5% of warmup:  {report['mean_score_last_5pct']:.4f}")
    click.echo(f"trace: {report['trace_path']}")


@main.command()
@click.option("--scores", "scores_path", required=True, metavar="PATH", help="Input scores.jsonl.")
@click.option("--out", "out_dir", default=None, metavar="DIR", help="CSV output directory (default: scores dir).")
@click.option("--top", type=int, default=20, show_default=True, help="Exemplars per cluster end.")
@click.pass_obj
def stats(server, scores_path, out_dir, top):
    """Report score quantiles, factor correlation, and cluster exemplars."""
    report = _post(server, "/v1/stats", {"scores": scores_path, "out": out_dir, "top": top})
    click.echo(f"records: {report['n_records']}")
    for name, value in report["omega_quantiles"].items():
        click.echo(f"  omega {name:<4} {value:.6g}")
    corr = report["dom_prot_correlation"]
    click.echo(f"dominance/typicality correlation: "
               f"{'undefined (constant factor)' if corr is None else f'{corr:.6f}'}")
    for cluster in report["clusters"]:
        click.echo(f"cluster {cluster['cluster_id']} ({cluster['count']} images, "
                   f"omega {cluster['omega_min']:.4g}..{cluster['omega_max']:.4g})")
        click.echo(f"  simplest: {', '.join(cluster['lowest_ids'][:5])}")
        click.echo(f"  hardest:  {', '.join(cluster['highest_ids'][:5])}")
    click.echo(f"csv: {report['stats_path']}")


@main.command()
@click.option("--spec", "spec_path", required=True, metavar="PATH", help="Synthetic spec JSON file.")
@click.option("--seed", type=int, default=0, show_default=True, help="Generator seed.")
@click.option("--out", "out_path", required=True, metavar="PATH", help="Output .tokemb path.")
@click.pass_obj
def synth(server, spec_path, seed, out_path):
    """Generate a synthetic embedding fixture plus ground-truth sidecar."""
    try:
        spec = json.loads(Path(spec_path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        click.echo(f"error (config): cannot read spec file {spec_path}: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    result = _post(server, "/v1/synth", {"spec": spec, "seed": seed, "out": out_path})
    click.echo(f"wrote {result['n_images']} images "
               f"(L={result['tokens_per_image']}, d={result['dim']}) to {result['path']}")
    click.echo(f"truth sidecar: {result['truth_path']}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Run the service as a standalone HTTP server."""
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
