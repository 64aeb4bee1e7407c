"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class ConfigResponse(BaseModel):
    mode: str
    config_text: str


class RunRequest(BaseModel):
    experiment: str
    seed: int = 0
    shots: int = 1000
    mode: str = "sequential"
    qubit: int = 1
    periods: float = 10.0
    tau_max_s: float = 60e-6
    tau_points: int = 13
    noise: bool = True
    fast_dephasing: bool = True
    bootstrap_resamples: int = 1000
    config_path: str = ""
    config_text: str | None = None
    spam_reference: str = ""
    spam_reference_text: str | None = None


class RunResponse(BaseModel):
    summary: dict
    files: dict[str, str] = Field(default_factory=dict)


class AnalyzeRequest(BaseModel):
    kind: str
    inputs: dict[str, str]
    spam_reference_text: str | None = None
    resamples: int = 1000


class AnalyzeResponse(BaseModel):
    summary: dict


class FitRequest(BaseModel):
    model: str
    csv_text: str | None = None
    x: list[float] | None = None
    y: list[float] | None = None


class FitResponse(BaseModel):
    result: dict


class CircuitResponse(BaseModel):
    kind: str
    circuit: dict


class ReportRequest(BaseModel):
    summaries: list[dict]


class ReportResponse(BaseModel):
    lines: list[str]
    failures: int
    passed: bool
