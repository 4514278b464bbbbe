"""Asymmetric least squares for payment schemes indexed by covariates.

Fits coefficient vectors of linear-in-parameters payment rules by
minimizing the asymmetric squared loss

    L(beta) = sum_m w_m(r_m) * r_m^2,      r_m = s_m - x_m . beta,

with w = gamma on nonnegative residuals and 1 - gamma on negative ones
(underpayment carries weight gamma).  At gamma = 1/2 this is ordinary
least squares; an intercept-only design recovers the empirical
expectile of the response.

The solver is iteratively reweighted least squares.  Each weighted
normal-equation solve is a Newton step for L, and a step-halving line
search keeps the reported objective path nonincreasing even when the
weight pattern cycles.  Rank-deficient designs are stabilized with a
1e-10 ridge on the normal equations and flagged on the result.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class DesignMatrix:
    """Regressor columns (one row per observation) plus the response."""

    columns: np.ndarray
    response: np.ndarray

    def __post_init__(self):
        columns = np.atleast_2d(np.asarray(self.columns, dtype=float))
        response = np.asarray(self.response, dtype=float).ravel()
        if columns.shape[0] != response.shape[0]:
            raise ParameterError(
                f"design has {columns.shape[0]} rows but response has {response.shape[0]}"
            )
        if columns.shape[0] == 0:
            raise ParameterError("design must contain at least one observation")
        if not (np.all(np.isfinite(columns)) and np.all(np.isfinite(response))):
            raise ParameterError("design and response must be finite")
        object.__setattr__(self, "columns", columns)
        object.__setattr__(self, "response", response)


@dataclass(frozen=True)
class FitResult:
    coefficients: np.ndarray
    converged: bool
    iterations: int
    objective: float
    objective_path: tuple[float, ...]
    rank_deficient: bool


def _covariate_rows(covariates, n_obs: int) -> np.ndarray:
    """Normalize covariates to an (n_obs, l) array; None means a constant."""
    if covariates is None:
        return np.ones((n_obs, 1))
    arr = np.asarray(covariates, dtype=float)
    if arr.ndim == 1:
        arr = np.tile(arr, (n_obs, 1))
    if arr.ndim != 2 or arr.shape[0] != n_obs:
        raise ParameterError(
            f"covariates must be a shared row or one row per observation, got shape {arr.shape}"
        )
    return arr


def design_pure_parametric(theta, response, trigger, covariates=None) -> DesignMatrix:
    """Columns [x_j | x_j * 1{theta in trigger}] for a fixed-payout-on-trigger rule."""
    theta = np.asarray(theta, dtype=float).ravel()
    x = _covariate_rows(covariates, theta.size)
    indicator = np.asarray(trigger.contains(theta), dtype=float)[:, None]
    return DesignMatrix(np.hstack([x, x * indicator]), response)


def design_linear_index(theta, response, covariates=None) -> DesignMatrix:
    """Columns [x_j | x_j * theta] for a payout linear in the index."""
    theta = np.asarray(theta, dtype=float).ravel()
    x = _covariate_rows(covariates, theta.size)
    return DesignMatrix(np.hstack([x, x * theta[:, None]]), response)


def design_step_index(theta, response, bins, covariates=None) -> DesignMatrix:
    """Columns x_j * 1{theta in cell_q} over the Q+1 cells cut by ``bins``.

    Cells are right-closed: cell q collects theta in (b_{q-1}, b_q].
    """
    theta = np.asarray(theta, dtype=float).ravel()
    bins = np.asarray(bins, dtype=float).ravel()
    if bins.size == 0:
        raise ParameterError("step design needs at least one breakpoint")
    if np.any(np.diff(bins) <= 0):
        raise ParameterError("breakpoints must be strictly increasing")
    x = _covariate_rows(covariates, theta.size)
    cell = np.searchsorted(bins, theta, side="left")
    blocks = [x * (cell == q)[:, None] for q in range(bins.size + 1)]
    return DesignMatrix(np.hstack(blocks), response)


def _objective(columns, response, beta, gamma) -> float:
    r = response - columns @ beta
    w = np.where(r >= 0.0, gamma, 1.0 - gamma)
    return float(w @ np.square(r))


def fit(design: DesignMatrix, gamma: float, tol: float = 1e-10, max_iter: int = 200) -> FitResult:
    """Minimize the asymmetric squared loss over coefficients.

    Returns converged=False (never raises) when the iteration limit is
    reached; the reported objective path is nonincreasing either way.
    """
    gamma = float(gamma)
    if not 0.0 < gamma < 1.0:
        raise ParameterError(f"gamma must lie in (0, 1), got {gamma}")
    X, s = design.columns, design.response
    n, p = X.shape
    rank_deficient = bool(np.linalg.matrix_rank(X) < p)
    ridge = 1e-10 * np.eye(p)

    beta = np.linalg.lstsq(X, s, rcond=None)[0]
    objective = _objective(X, s, beta, gamma)
    path = [objective]
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        r = s - X @ beta
        w = np.where(r >= 0.0, gamma, 1.0 - gamma)
        a = X.T @ (w[:, None] * X)
        b = X.T @ (w * s)
        if rank_deficient:
            a = a + ridge
        try:
            target = np.linalg.solve(a, b)
        except np.linalg.LinAlgError:
            target = np.linalg.solve(a + ridge, b)
        candidate = target
        cand_obj = _objective(X, s, candidate, gamma)
        step = 1.0
        while cand_obj > objective and step > 1e-12:
            step *= 0.5
            candidate = beta + step * (target - beta)
            cand_obj = _objective(X, s, candidate, gamma)
        shift = float(np.max(np.abs(candidate - beta)))
        beta = candidate
        objective = min(cand_obj, objective)
        path.append(objective)
        if shift <= tol * (1.0 + float(np.max(np.abs(beta)))):
            converged = True
            break
    return FitResult(
        coefficients=beta,
        converged=converged,
        iterations=iterations,
        objective=objective,
        objective_path=tuple(path),
        rank_deficient=rank_deficient,
    )


def predict(coefficients, rows) -> np.ndarray:
    """Evaluate the fitted rule on one design row or a stack of rows."""
    beta = np.asarray(coefficients, dtype=float).ravel()
    arr = np.asarray(rows, dtype=float)
    if arr.ndim == 1:
        if arr.size != beta.size:
            raise ParameterError(f"row has {arr.size} entries, expected {beta.size}")
        return float(arr @ beta)
    if arr.shape[1] != beta.size:
        raise ParameterError(f"rows have {arr.shape[1]} columns, expected {beta.size}")
    return arr @ beta
