"""HTTP facade over the library: one endpoint per CLI subcommand.

Bad inputs surface as 422 responses with a validation kind, numerical
breakdowns (bracket or convergence failures) as 500 with a numerical
kind, so thin clients can map them back onto typed errors and exit
codes without parsing messages.
"""

from __future__ import annotations

import numpy as np
from fastapi import APIRouter, FastAPI
from fastapi.responses import JSONResponse

from .. import __version__
from ..crop import (
    CropConfig,
    default_theta_grid,
    generate_portfolio,
    payment_curve,
    select_showcase_farms,
)
from ..cyber import (
    DEFAULT_P_LEVELS,
    DEFAULT_SERVICES,
    ServiceParams,
    StudyConfig,
    collect,
    full_portfolio,
    run_study,
    study_summary,
)
from ..distributions import make_distribution
from ..errors import NumericalError, ParameterError
from ..expectiles import alpha_from_gamma, empirical_expectile, expectile, gamma_from_alpha
from ..payments import (
    FixedPayout,
    basis_risk,
    check_alpha,
    optimal_index_curve,
    optimal_pure_payment,
    scheme_from_config,
    scheme_to_config,
    trigger_from_config,
)
from ..regression import (
    design_linear_index,
    design_pure_parametric,
    design_step_index,
    fit,
)
from . import schemas

router = APIRouter()


@router.get("/health", response_model=schemas.HealthResponse)
def health():
    return schemas.HealthResponse(status="ok", version=__version__)


def _levels(req: schemas.ExpectileRequest) -> list[tuple[float, float]]:
    pairs = [(float(g), alpha_from_gamma(g)) for g in req.gammas]
    pairs += [(gamma_from_alpha(a), float(a)) for a in req.alphas]
    if not pairs:
        raise ParameterError("at least one gamma or alpha level is required")
    return pairs


@router.post("/expectile", response_model=schemas.ExpectileResponse)
def compute_expectile(req: schemas.ExpectileRequest):
    if (req.distribution is None) == (req.samples is None):
        raise ParameterError("exactly one of distribution or samples is required")
    results = []
    if req.distribution is not None:
        law = make_distribution(req.distribution)
        for gamma, alpha in _levels(req):
            results.append(
                schemas.ExpectileValue(gamma=gamma, alpha=alpha, value=expectile(law, gamma))
            )
    else:
        samples = np.asarray(req.samples, dtype=float)
        for gamma, alpha in _levels(req):
            results.append(
                schemas.ExpectileValue(
                    gamma=gamma, alpha=alpha, value=empirical_expectile(samples, gamma)
                )
            )
    return schemas.ExpectileResponse(results=results)


@router.post("/fit", response_model=schemas.FitResponse)
def fit_scheme(req: schemas.FitRequest):
    theta = np.asarray(req.theta, dtype=float)
    response = np.asarray(req.response, dtype=float)
    covariates = None if req.covariates is None else np.asarray(req.covariates, dtype=float)
    spec = req.design
    if spec.kind == "pure":
        if spec.trigger is None:
            raise ParameterError("pure design requires a trigger config")
        design = design_pure_parametric(
            theta, response, trigger_from_config(spec.trigger), covariates
        )
    elif spec.kind == "linear":
        design = design_linear_index(theta, response, covariates)
    else:
        if not spec.bins:
            raise ParameterError("step design requires bin edges")
        design = design_step_index(theta, response, spec.bins, covariates)
    result = fit(design, req.gamma, tol=req.tol, max_iter=req.max_iter)
    return schemas.FitResponse(
        coefficients=list(result.coefficients),
        converged=result.converged,
        iterations=result.iterations,
        objective=result.objective,
        rank_deficient=result.rank_deficient,
        objective_path=list(result.objective_path),
    )


@router.post("/design", response_model=schemas.DesignResponse)
def design_payment(req: schemas.DesignRequest):
    alpha = check_alpha(req.alpha)
    trigger = trigger_from_config(req.trigger)
    if (req.loss is None) == (req.nodes is None):
        raise ParameterError("exactly one of loss or nodes is required")
    if req.loss is not None:
        amount = optimal_pure_payment(make_distribution(req.loss), alpha)
        scheme = FixedPayout(amount, trigger)
    else:
        nodes = [(node.theta, make_distribution(node.loss)) for node in req.nodes]
        scheme = optimal_index_curve(nodes, alpha, trigger)
    return schemas.DesignResponse(
        alpha=alpha, gamma=gamma_from_alpha(alpha), scheme=scheme_to_config(scheme)
    )


@router.post("/evaluate", response_model=schemas.EvaluateResponse)
def evaluate_scheme(req: schemas.EvaluateRequest):
    scheme = scheme_from_config(req.scheme)
    theta = np.asarray(req.theta, dtype=float)
    losses = np.asarray(req.loss, dtype=float)
    if theta.shape != losses.shape:
        raise ParameterError(
            f"theta and loss must have equal length, got {theta.size} and {losses.size}"
        )
    if theta.size == 0:
        raise ParameterError("at least one observation is required")
    payouts = np.asarray(scheme.payout(theta), dtype=float)
    risks = np.asarray(basis_risk(losses, payouts, req.alpha), dtype=float)
    n = int(risks.size)
    stderr = float(risks.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return schemas.EvaluateResponse(
        n=n,
        alpha=req.alpha,
        gamma=gamma_from_alpha(req.alpha),
        mean_basis_risk=float(risks.mean()),
        stderr=stderr,
        mean_loss=float(losses.mean()),
        mean_payout=float(payouts.mean()),
    )


@router.post("/crop-case", response_model=schemas.CropResponse)
def crop_case(req: schemas.CropRequest):
    try:
        config = CropConfig(**req.config)
    except TypeError as exc:
        raise ParameterError(f"bad crop config: {exc}") from None
    portfolio = generate_portfolio(config)
    central, peripheral = select_showcase_farms(portfolio)
    grid = (
        np.asarray(req.theta, dtype=float)
        if req.theta is not None
        else default_theta_grid(hi=config.threshold)
    )
    curves = {}
    for label, farm in (("central", central), ("peripheral", peripheral)):
        curves[label] = {
            str(float(alpha)): payment_curve(portfolio, farm, alpha, grid).payout(grid).tolist()
            for alpha in req.alphas
        }
    return schemas.CropResponse(
        locations=portfolio.locations.tolist(),
        index_cov=portfolio.index_cov.tolist(),
        central=central,
        peripheral=peripheral,
        theta=grid.tolist(),
        curves=curves,
    )


@router.post("/cyber-sim", response_model=schemas.CyberResponse)
def cyber_sim(req: schemas.CyberRequest):
    p_levels = tuple(req.p_levels) if req.p_levels is not None else DEFAULT_P_LEVELS
    services = (
        tuple(ServiceParams(*pair) for pair in req.services)
        if req.services is not None
        else DEFAULT_SERVICES
    )
    config = StudyConfig(
        portfolio=full_portfolio(p_levels),
        services=services,
        families=tuple(req.families),
        gammas=tuple(req.gammas),
        years=req.years,
        runs=req.runs,
        seed=req.seed,
        mode=req.mode,
    )
    rows: list[schemas.CyberRecordRow] = []

    def tee(records):
        for rec in records:
            if req.include_records:
                rows.append(
                    schemas.CyberRecordRow(
                        run=rec.run,
                        family=rec.family,
                        service=rec.service,
                        time=rec.time,
                        year=rec.year,
                        duration=rec.duration,
                        n_triggered=int(rec.triggered.sum()),
                        loss_sum=float(rec.losses.sum()),
                        payout_sum=rec.payouts.sum(axis=0).tolist(),
                        deviation_sum=rec.deviations.sum(axis=0).tolist(),
                    )
                )
            yield rec

    sums = collect(tee(run_study(config)), config)
    return schemas.CyberResponse(
        gammas=list(config.gammas), summary=study_summary(sums), records=rows
    )


def create_app() -> FastAPI:
    app = FastAPI(title="parapay", version=__version__)
    app.include_router(router)

    @app.exception_handler(ParameterError)
    def on_parameter_error(request, exc):
        return JSONResponse(
            status_code=422, content={"detail": {"kind": "validation", "message": str(exc)}}
        )

    @app.exception_handler(NumericalError)
    def on_numerical_error(request, exc):
        return JSONResponse(
            status_code=500, content={"detail": {"kind": "numerical", "message": str(exc)}}
        )

    return app
