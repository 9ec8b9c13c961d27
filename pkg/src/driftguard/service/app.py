"""HTTP service wrapping the core package.

Run with `python3 -m driftguard.service` (requires uvicorn) or mount
`driftguard.service.app:app` in any ASGI server.  Trained bundles live
in an in-memory registry keyed by a content hash, so identical training
requests are idempotent.  Domain errors map onto HTTP statuses:
configuration problems 422, bad input data 400, numeric failures 500.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..chart import ChartConfig, monitor
from ..dataset import TimeSeries, at_summary, format_instants, parse_instants, resample_energy
from ..ensemble import bundle_from_dict, bundle_to_dict, fit_bundle
from ..errors import ConfigError, InputError, NumericError
from ..metrics import RunOutcome, aggregate
from ..nn import TrainConfig
from ..simgen import SimConfig, generate
from .schemas import (
    AlarmOut,
    AtSummaryRequest,
    AtSummaryResponse,
    BundleSummary,
    EnergyResampleRequest,
    EnergyResampleResponse,
    EvaluateRequest,
    EvaluateResponse,
    HealthResponse,
    MonitorRequest,
    MonitorResponse,
    ReportRow,
    SimulateRequest,
    SimulateResponse,
    TrainRequest,
)

_DETECTOR_ORDER = ["proposed", "ablated_a", "ablated_b", "rnn_residual"]


def _bundle_id(doc: dict) -> str:
    return hashlib.sha256(
        json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


def _summary(bundle_id: str, bundle) -> BundleSummary:
    return BundleSummary(bundle_id=bundle_id, window=bundle.window,
                         b=bundle.ensemble.b, provenance=bundle.provenance)


def create_app() -> FastAPI:
    app = FastAPI(title="driftguard", version=__version__)
    bundles: dict[str, object] = {}

    def _handler(status: int):
        def handle(request: Request, exc: Exception) -> JSONResponse:
            return JSONResponse(status_code=status,
                                content={"detail": str(exc)})
        return handle

    app.add_exception_handler(ConfigError, _handler(422))
    app.add_exception_handler(InputError, _handler(400))
    app.add_exception_handler(NumericError, _handler(500))

    def _get_bundle(bundle_id: str):
        bundle = bundles.get(bundle_id)
        if bundle is None:
            raise HTTPException(status_code=404,
                                detail=f"no bundle {bundle_id!r}")
        return bundle

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__,
                              bundles=len(bundles))

    @app.post("/simulate", response_model=SimulateResponse)
    def simulate(req: SimulateRequest) -> SimulateResponse:
        series = generate(SimConfig(**req.model_dump()))
        return SimulateResponse(label=series.label, tau=req.tau,
                                values=series.values.tolist())

    @app.post("/train", response_model=BundleSummary)
    def train(req: TrainRequest) -> BundleSummary:
        bundle = fit_bundle(
            TimeSeries(np.array(req.values)),
            window=req.window, b=req.b,
            cfg=TrainConfig(**req.train.model_dump()),
            master_seed=req.seed, n=req.n,
            variant=req.variant, use_bias=req.use_bias)
        bundle_id = _bundle_id(bundle_to_dict(bundle))
        bundles[bundle_id] = bundle
        return _summary(bundle_id, bundle)

    @app.get("/bundles", response_model=list[BundleSummary])
    def list_bundles() -> list[BundleSummary]:
        return [_summary(bid, b) for bid, b in sorted(bundles.items())]

    @app.get("/bundles/{bundle_id}")
    def export_bundle(bundle_id: str) -> dict:
        return bundle_to_dict(_get_bundle(bundle_id))

    @app.post("/bundles", response_model=BundleSummary)
    def import_bundle(doc: dict) -> BundleSummary:
        bundle = bundle_from_dict(doc)
        bundle_id = _bundle_id(bundle_to_dict(bundle))
        bundles[bundle_id] = bundle
        return _summary(bundle_id, bundle)

    @app.delete("/bundles/{bundle_id}")
    def delete_bundle(bundle_id: str) -> dict:
        _get_bundle(bundle_id)
        del bundles[bundle_id]
        return {"deleted": bundle_id}

    @app.post("/monitor", response_model=MonitorResponse)
    def monitor_series(req: MonitorRequest) -> MonitorResponse:
        bundle = _get_bundle(req.bundle_id)
        records = monitor(bundle, TimeSeries(np.array(req.values)),
                          ChartConfig(z=req.z, window=req.window))
        alarms = [AlarmOut(**vars(r)) for r in records if not r.in_control]
        return MonitorResponse(n_points=len(records), n_alarms=len(alarms),
                               alarms=alarms)

    @app.post("/evaluate", response_model=EvaluateResponse)
    def evaluate(req: EvaluateRequest) -> EvaluateResponse:
        records = [(r.model, r.phi, r.delta,
                    RunOutcome(r.tau, r.length, tuple(r.alarms)))
                   for r in req.runs]
        reports = aggregate(records, model_order=_DETECTOR_ORDER)
        rows = [ReportRow(model=r.model, phi=r.phi, delta=r.delta,
                          reps=r.reps, fap=r.fap, dr=r.dr, ced=r.ced,
                          recall=r.recall)
                for r in reports]
        return EvaluateResponse(rows=rows)

    @app.post("/preprocess/at-summary", response_model=AtSummaryResponse)
    def preprocess_at(req: AtSummaryRequest) -> AtSummaryResponse:
        return AtSummaryResponse(
            values=[at_summary(np.array(row)) for row in req.spectra])

    @app.post("/preprocess/energy-resample",
              response_model=EnergyResampleResponse)
    def preprocess_energy(req: EnergyResampleRequest) -> EnergyResampleResponse:
        series = TimeSeries(np.array(req.values),
                            parse_instants(req.timestamps))
        out = resample_energy(series,
                              service_start=req.service_start,
                              service_end=req.service_end,
                              bucket_minutes=req.bucket_minutes,
                              day_start=req.day_start,
                              apply_filter=req.apply_filter)
        return EnergyResampleResponse(timestamps=format_instants(out.timestamps),
                                      values=out.values.tolist())

    return app


app = create_app()
