"""Request and response models for the payment-design service.

Distribution, trigger, and scheme payloads are passed as plain dicts
and validated by the library's config factories, so the service and
the core package cannot drift apart on accepted families or scheme
kinds; the models here pin the envelope shapes and defaults.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict


class ExpectileRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    distribution: Optional[dict] = None
    samples: Optional[list[float]] = None
    gammas: list[float] = []
    alphas: list[float] = []


class ExpectileValue(BaseModel):
    gamma: float
    alpha: float
    value: float


class ExpectileResponse(BaseModel):
    results: list[ExpectileValue]


class DesignSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["pure", "linear", "step"]
    trigger: Optional[dict] = None
    bins: Optional[list[float]] = None


class FitRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    theta: list[float]
    response: list[float]
    design: DesignSpec
    covariates: Optional[list[list[float]]] = None
    gamma: float
    tol: float = 1e-10
    max_iter: int = 200


class FitResponse(BaseModel):
    coefficients: list[float]
    converged: bool
    iterations: int
    objective: float
    rank_deficient: bool
    objective_path: list[float]


class CurveNode(BaseModel):
    model_config = ConfigDict(extra="forbid")

    theta: float
    loss: dict


class DesignRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    alpha: float
    trigger: dict
    loss: Optional[dict] = None
    nodes: Optional[list[CurveNode]] = None


class DesignResponse(BaseModel):
    alpha: float
    gamma: float
    scheme: dict


class EvaluateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scheme: dict
    alpha: float
    theta: list[float]
    loss: list[float]


class EvaluateResponse(BaseModel):
    n: int
    alpha: float
    gamma: float
    mean_basis_risk: float
    stderr: float
    mean_loss: float
    mean_payout: float


class CropRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: dict = {}
    alphas: list[float] = [0.5]
    theta: Optional[list[float]] = None


class CropResponse(BaseModel):
    locations: list[list[float]]
    index_cov: list[float]
    central: int
    peripheral: int
    theta: list[float]
    # farm label -> str(alpha) -> payments on the theta grid
    curves: dict[str, dict[str, list[float]]]


class CyberRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    families: list[str] = ["lognormal", "gamma"]
    gammas: list[float] = [0.4, 0.5, 0.6, 0.9]
    p_levels: Optional[list[float]] = None
    services: Optional[list[list[float]]] = None
    years: int = 5
    runs: int = 1000
    seed: int = 0
    mode: Literal["static", "dynamic"] = "static"
    include_records: bool = True


class CyberRecordRow(BaseModel):
    run: int
    family: str
    service: int
    time: float
    year: int
    duration: float
    n_triggered: int
    loss_sum: float
    payout_sum: list[float]
    deviation_sum: list[float]


class CyberResponse(BaseModel):
    gammas: list[float]
    summary: dict
    records: list[CyberRecordRow]


class HealthResponse(BaseModel):
    status: str
    version: str
