"""FastAPI application exposing the pipeline stages as endpoints.

The CLI is a thin client of this app (in-process by default, remote with
--server); keeping all behaviour behind the API means a long-running
instance can hold trained LMs and serve many decode/score requests.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__, augment, ctc_decode, metrics, pipeline
from ..corpus import Split
from ..errors import AsrForgeError
from . import schemas

_STATUS_BY_CATEGORY = {"input": 400, "domain": 422, "io": 500}


def _policy_from_request(req: schemas.AugmentRequest) -> augment.AugmentPolicy:
    ranges = augment.ParamRanges()
    if req.ranges is not None:
        overrides = {
            name: pair.as_tuple()
            for name, pair in iter(req.ranges)
            if pair is not None
        }
        ranges = dataclasses.replace(ranges, **overrides)
    return augment.AugmentPolicy(
        low_noise_datasets=frozenset(req.low_noise_datasets),
        noise_dir=None if req.noise_dir is None else Path(req.noise_dir),
        rir_dir=None if req.rir_dir is None else Path(req.rir_dir),
        ranges=ranges,
        global_seed=req.seed,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="asrforge", version=__version__)

    @app.exception_handler(AsrForgeError)
    async def _toolkit_error(request: Request, exc: AsrForgeError) -> JSONResponse:
        body = schemas.ErrorBody(code=exc.code, category=exc.category, message=str(exc))
        return JSONResponse(
            status_code=_STATUS_BY_CATEGORY.get(exc.category, 422),
            content={"error": body.model_dump()},
        )

    @app.get("/v1/health", response_model=schemas.HealthResponse)
    def health() -> schemas.HealthResponse:
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/v1/stats", response_model=schemas.StatsResponse)
    def stats(req: schemas.StatsRequest) -> schemas.StatsResponse:
        table, records = pipeline.manifest_stats(req.manifest)
        return schemas.StatsResponse(table=table, records=records)

    @app.post("/v1/validate", response_model=schemas.ValidateResponse)
    def validate(req: schemas.ValidateRequest) -> schemas.ValidateResponse:
        report = pipeline.validate_manifest(req.manifest, req.audio_root)
        return schemas.ValidateResponse(
            ok=report.ok, report=report.render(), jsonl=report.to_jsonl()
        )

    @app.post("/v1/normalize", response_model=schemas.NormalizeResponse)
    def normalize(req: schemas.NormalizeRequest) -> schemas.NormalizeResponse:
        splits = None if req.splits is None else [Split(s) for s in req.splits]
        result = pipeline.normalize_corpus(
            req.manifest,
            req.audio_root,
            req.out_dir,
            target_dbfs=req.target_dbfs,
            splits=splits,
            jobs=req.jobs,
        )
        return schemas.NormalizeResponse(**dataclasses.asdict(result))

    @app.post("/v1/augment", response_model=schemas.AugmentResponse)
    def do_augment(req: schemas.AugmentRequest) -> schemas.AugmentResponse:
        policy = _policy_from_request(req)
        result = pipeline.augment_corpus(
            req.manifest,
            req.audio_root,
            req.out_dir,
            policy,
            jobs=req.jobs,
            replay_log=req.replay_log,
        )
        return schemas.AugmentResponse(**dataclasses.asdict(result))

    @app.post("/v1/decode", response_model=schemas.DecodeResponse)
    def decode(req: schemas.DecodeRequest) -> schemas.DecodeResponse:
        params = ctc_decode.FusionParams(
            alpha=req.alpha, beta=req.beta, beam_width=req.beam_width
        )
        result = pipeline.decode_directory(
            req.emissions_dir,
            req.out_csv,
            params,
            lm_path=req.lm,
            normalize=req.normalize,
            jobs=req.jobs,
        )
        return schemas.DecodeResponse(**dataclasses.asdict(result))

    @app.post("/v1/score", response_model=schemas.ScoreResponse)
    def score(req: schemas.ScoreRequest) -> schemas.ScoreResponse:
        report, rendered = pipeline.score_files(
            req.manifest,
            req.hypotheses,
            by_dataset=req.by_dataset,
            fmt=req.format,
            cer_counts_spaces=req.cer_counts_spaces,
        )
        tracks = json.loads(metrics.render_report(report, "json"))["tracks"]
        return schemas.ScoreResponse(report=rendered, tracks=tracks)

    @app.post("/v1/lm/train", response_model=schemas.LmTrainResponse)
    def lm_train(req: schemas.LmTrainRequest) -> schemas.LmTrainResponse:
        result = pipeline.train_lm_file(
            req.corpus,
            req.out,
            order=req.order,
            discount=req.discount,
            dev_path=req.dev,
        )
        return schemas.LmTrainResponse(**dataclasses.asdict(result))

    return app
