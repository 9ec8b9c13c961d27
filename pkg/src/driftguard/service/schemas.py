"""Request and response bodies for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class TrainParams(BaseModel):
    learning_rate: float = 0.01
    max_epochs: int = 300
    batch_size: int = 32
    patience: int = 20
    hidden_dim: int = 32
    optimizer: str = "adam"


class SimulateRequest(BaseModel):
    phi: float
    delta: float = 0.0
    seed: int = 0
    length: int = 500
    tau: int = 401
    alpha0: float = 0.1
    alpha1: float = 0.1
    beta: float = 0.8
    burn_in: int = 200


class SimulateResponse(BaseModel):
    label: str
    tau: int
    values: list[float]


class TrainRequest(BaseModel):
    values: list[float] = Field(min_length=2)
    window: int = 5
    b: int = 5
    n: int | None = None
    seed: int = 0
    variant: str = "standard"
    use_bias: bool = True
    train: TrainParams = TrainParams()


class BundleSummary(BaseModel):
    bundle_id: str
    window: int
    b: int
    provenance: dict


class MonitorRequest(BaseModel):
    bundle_id: str
    values: list[float]
    z: float = 2.326
    window: int | None = None


class AlarmOut(BaseModel):
    index: int
    value: float
    f_hat: float
    s: float
    lcl: float
    ucl: float
    in_control: bool


class MonitorResponse(BaseModel):
    n_points: int
    n_alarms: int
    alarms: list[AlarmOut]


class RunIn(BaseModel):
    model: str = "proposed"
    phi: float = 0.0
    delta: float = 0.0
    tau: int
    length: int
    alarms: list[int] = Field(default_factory=list)


class EvaluateRequest(BaseModel):
    runs: list[RunIn] = Field(min_length=1)


class ReportRow(BaseModel):
    model: str
    phi: float
    delta: float
    reps: int
    fap: float
    dr: float
    ced: float | None
    recall: float


class EvaluateResponse(BaseModel):
    rows: list[ReportRow]


class AtSummaryRequest(BaseModel):
    spectra: list[list[float]] = Field(min_length=1)


class AtSummaryResponse(BaseModel):
    values: list[float]


class EnergyResampleRequest(BaseModel):
    timestamps: list[str] = Field(min_length=1)
    values: list[float] = Field(min_length=1)
    service_start: str = "05:30"
    service_end: str = "00:30"
    bucket_minutes: int = 30
    day_start: str = "04:00"
    apply_filter: bool = True


class EnergyResampleResponse(BaseModel):
    timestamps: list[str]
    values: list[float]


class HealthResponse(BaseModel):
    status: str
    version: str
    bundles: int
