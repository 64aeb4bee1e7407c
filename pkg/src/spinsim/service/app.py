"""FastAPI service wrapping the simulation and analysis pipelines.

The service is stateless: experiment outputs are returned in the response
body as named text artifacts, so a thin client can persist byte-identical
files to a local output directory.
"""

from __future__ import annotations

import json

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__, fitting, pipelines
from ..circuits import STATE_KINDS, build_state_circuit, circuit_to_json
from ..device import ConfigError, dump_config, paper_default_config
from .schemas import (AnalyzeRequest, AnalyzeResponse, CircuitResponse,
                      ConfigResponse, FitRequest, FitResponse, HealthResponse,
                      ReportRequest, ReportResponse, RunRequest, RunResponse)

app = FastAPI(
    title="spinsim",
    version=__version__,
    description="Pulse-level simulator for a two-unit-cell spin-qubit processor",
)


def _bad_request(exc: Exception) -> HTTPException:
    return HTTPException(status_code=400, detail=str(exc))


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.get("/config/default", response_model=ConfigResponse)
def default_config(mode: str = "sequential") -> ConfigResponse:
    try:
        return ConfigResponse(mode=mode, config_text=dump_config(paper_default_config(mode)))
    except ConfigError as exc:
        raise _bad_request(exc)


@app.get("/circuits/{kind}", response_model=CircuitResponse)
def circuit_dump(kind: str, wait_s: float = 0.0, j2_scale: float = 1.0,
                 j3_scale: float = 1.0, mode: str = "sequential") -> CircuitResponse:
    if kind not in STATE_KINDS:
        raise HTTPException(status_code=404, detail=f"unknown circuit kind {kind!r}")
    try:
        circ = build_state_circuit(kind, paper_default_config(mode), wait_s=wait_s,
                                   j2_scale=j2_scale, j3_scale=j3_scale)
    except ValueError as exc:
        raise _bad_request(exc)
    return CircuitResponse(kind=kind, circuit=json.loads(circuit_to_json(circ)))


@app.post("/experiments/run", response_model=RunResponse)
def run_experiment(req: RunRequest) -> RunResponse:
    try:
        spec = pipelines.ExperimentSpec(
            experiment=req.experiment, seed=req.seed, shots=req.shots, mode=req.mode,
            config_path=req.config_path, qubit=req.qubit, periods=req.periods,
            tau_max_s=req.tau_max_s, tau_points=req.tau_points, noise=req.noise,
            fast_dephasing=req.fast_dephasing, spam_reference=req.spam_reference,
            bootstrap_resamples=req.bootstrap_resamples,
        )
        summary, files = pipelines.run_experiment(
            spec, config_text=req.config_text,
            spam_reference_text=req.spam_reference_text)
    except (ValueError, OSError) as exc:
        raise _bad_request(exc)
    return RunResponse(summary=summary, files=files)


@app.post("/analyze", response_model=AnalyzeResponse)
def analyze(req: AnalyzeRequest) -> AnalyzeResponse:
    try:
        summary = pipelines.analyze(req.kind, req.inputs,
                                    spam_reference=req.spam_reference_text,
                                    resamples=req.resamples)
    except ValueError as exc:
        raise _bad_request(exc)
    return AnalyzeResponse(summary=summary)


@app.post("/fit", response_model=FitResponse)
def fit(req: FitRequest) -> FitResponse:
    try:
        if req.csv_text is not None:
            result = pipelines.fit_csv(req.model, req.csv_text)
        elif req.x is not None and req.y is not None:
            fitter = {
                "rabi": fitting.fit_rabi,
                "ramsey": fitting.fit_ramsey,
                "hahn": fitting.fit_hahn,
                "exchange": fitting.fit_exchange,
            }.get(req.model)
            if fitter is None:
                raise HTTPException(status_code=404, detail=f"unknown model {req.model!r}")
            result = fitter(np.asarray(req.x), np.asarray(req.y)).to_json()
        else:
            raise ValueError("provide csv_text or x/y arrays")
    except ValueError as exc:
        raise _bad_request(exc)
    return FitResponse(result=result)


@app.post("/report", response_model=ReportResponse)
def report(req: ReportRequest) -> ReportResponse:
    try:
        lines, failures = pipelines.report(req.summaries)
    except ValueError as exc:
        raise _bad_request(exc)
    return ReportResponse(lines=lines, failures=failures, passed=failures == 0)
