"""FastAPI app wrapping the scoring/scheduling pipeline.

The service is a job runner over files on its own filesystem: requests
carry paths plus a schedule config, responses carry the JSON report. The
CLI talks to this app either in-process or over the network.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__, pipeline
from ..errors import WarmupError
from . import schemas

_STATUS_BY_KIND = {"config": 400, "io": 422, "numeric": 500}


def create_app() -> FastAPI:
    app = FastAPI(title="warmup", version=__version__)

    @app.exception_handler(WarmupError)
    async def warmup_error_handler(_: Request, exc: WarmupError):
        body = schemas.ErrorResponse(
            error=schemas.ErrorDetail(kind=exc.kind, message=str(exc))
        )
        return JSONResponse(status_code=_STATUS_BY_KIND.get(exc.kind, 500), content=body.model_dump())

    @app.get("/v1/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/v1/score", response_model=schemas.ScoreResponse)
    def score(request: schemas.ScoreRequest):
        result = pipeline.run_score(
            request.input,
            request.out,
            config=request.config.to_run_config(),
            write_masks=request.write_masks,
            kmeans_batch=request.kmeans_batch,
        )
        return schemas.ScoreResponse(**result)

    @app.post("/v1/simulate", response_model=schemas.SimulateResponse)
    def simulate(request: schemas.SimulateRequest):
        report = pipeline.run_simulate(
            request.scores,
            iterations=request.iters,
            batch_size=request.batch,
            config=request.config.to_run_config(),
            out_dir=request.out,
        )
        return schemas.SimulateResponse(**report)

    @app.post("/v1/stats", response_model=schemas.StatsResponse)
    def stats(request: schemas.StatsRequest):
        report = pipeline.run_stats(request.scores, out_dir=request.out, top=request.top)
        return schemas.StatsResponse(**report)

    @app.post("/v1/synth", response_model=schemas.SynthResponse)
    def synthesize(request: schemas.SynthRequest):
        result = pipeline.run_synth(request.spec, seed=request.seed, out_path=request.out)
        return schemas.SynthResponse(**result)

    return app


app = create_app()
