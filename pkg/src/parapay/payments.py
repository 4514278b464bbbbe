"""Payment schemes on an observable index and their basis risk.

A parametric contract pays from an index theta (and possibly the
incident time t), never from the actual loss S.  The mismatch cost is
the weighted quadratic basis risk

    B = alpha^2 * ((S - Y)^+)^2 + (1 - alpha)^2 * ((S - Y)^-)^2,

with alpha weighting underpayment.  Two classical results drive the
constructions here: over payments that are constant on a trigger area,
the optimal payout is the expectile of the loss given the trigger at
level gamma(alpha); over payments free to depend on (theta, t), the
optimal payout at each index value is the conditional expectile.  At
alpha = 1/2 the achieved minimum decomposes into conditional variance
on the trigger area and second moment off it, which is what
``min_basis_risk_decomposition`` checks with a shared sample stream.

Monte Carlo estimators draw from an incident model, a provider of
``sample(rng, n) -> (theta, t, loss)``.  Work is split into per-worker
chunks with independently derived substreams and reduced in fixed
order, so results depend only on (seed, workers), not on scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np

from .distributions import Distribution
from .errors import ParameterError, TriggerError
from .expectiles import expectile, gamma_from_alpha
from .rng import stream

_INF = float("inf")


# ---------------------------------------------------------------------------
# trigger areas
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Interval:
    """One-dimensional interval, open at infinite ends by construction."""

    lower: float = -_INF
    upper: float = _INF
    closed_lower: bool = False
    closed_upper: bool = False

    def __post_init__(self):
        if not self.lower <= self.upper:
            raise ParameterError(f"interval bounds are reversed: ({self.lower}, {self.upper})")

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        low = x >= self.lower if self.closed_lower else x > self.lower
        high = x <= self.upper if self.closed_upper else x < self.upper
        return low & high


@dataclass(frozen=True)
class TriggerArea:
    """Union of boxes, each box one Interval per index component."""

    boxes: tuple[tuple[Interval, ...], ...]

    def __post_init__(self):
        if not self.boxes:
            raise ParameterError("trigger area needs at least one box")
        widths = {len(box) for box in self.boxes}
        if len(widths) != 1:
            raise ParameterError("all trigger boxes must cover the same number of components")

    @property
    def n_components(self) -> int:
        return len(self.boxes[0])

    @classmethod
    def above(cls, threshold: float) -> "TriggerArea":
        return cls(((Interval(lower=float(threshold)),),))

    @classmethod
    def below(cls, threshold: float) -> "TriggerArea":
        return cls(((Interval(upper=float(threshold)),),))

    @classmethod
    def between(cls, lower: float, upper: float) -> "TriggerArea":
        return cls(((Interval(lower=float(lower), upper=float(upper)),),))

    @classmethod
    def any_component_above(cls, threshold: float, n_components: int) -> "TriggerArea":
        """Union over components of {component j exceeds the threshold}."""
        if n_components < 1:
            raise ParameterError("n_components must be at least 1")
        boxes = []
        for j in range(n_components):
            box = tuple(
                Interval(lower=float(threshold)) if i == j else Interval()
                for i in range(n_components)
            )
            boxes.append(box)
        return cls(tuple(boxes))

    def contains(self, theta):
        """Membership for a point or a stack of points.

        Scalar or (n,) input requires a one-component area; (c,) and
        (n, c) inputs address c components.
        """
        arr = np.asarray(theta, dtype=float)
        c = self.n_components
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
            squeeze = "scalar"
        elif arr.ndim == 1:
            if c == 1:
                arr = arr[:, None]
                squeeze = "vector"
            else:
                if arr.size != c:
                    raise ParameterError(f"point has {arr.size} components, expected {c}")
                arr = arr[None, :]
                squeeze = "scalar"
        else:
            if arr.shape[1] != c:
                raise ParameterError(f"points have {arr.shape[1]} components, expected {c}")
            squeeze = "none"
        hit = np.zeros(arr.shape[0], dtype=bool)
        for box in self.boxes:
            inside = np.ones(arr.shape[0], dtype=bool)
            for j, interval in enumerate(box):
                inside &= interval.contains(arr[:, j])
            hit |= inside
        if squeeze == "scalar":
            return bool(hit[0])
        return hit


def trigger_from_config(config: dict) -> TriggerArea:
    """Build a trigger area from a config mapping (see CLI docs)."""
    if not isinstance(config, dict) or "kind" not in config:
        raise ParameterError("trigger config must be a mapping with a 'kind' key")
    kind = config["kind"]
    if kind == "above":
        return TriggerArea.above(config["threshold"])
    if kind == "below":
        return TriggerArea.below(config["threshold"])
    if kind == "between":
        return TriggerArea.between(config["lower"], config["upper"])
    if kind == "any-component-above":
        return TriggerArea.any_component_above(config["threshold"], config["n_components"])
    raise ParameterError(
        f"unknown trigger kind '{kind}'; known kinds: above, below, between, any-component-above"
    )


def trigger_to_config(trigger: TriggerArea) -> dict:
    """Inverse of :func:`trigger_from_config` for the factory-made shapes."""
    boxes = trigger.boxes
    if len(boxes) == 1 and len(boxes[0]) == 1:
        iv = boxes[0][0]
        if iv.upper == _INF and iv.lower > -_INF:
            return {"kind": "above", "threshold": iv.lower}
        if iv.lower == -_INF and iv.upper < _INF:
            return {"kind": "below", "threshold": iv.upper}
        return {"kind": "between", "lower": iv.lower, "upper": iv.upper}
    threshold = boxes[0][0].lower
    return {
        "kind": "any-component-above",
        "threshold": threshold,
        "n_components": trigger.n_components,
    }


# ---------------------------------------------------------------------------
# payment schemes
# ---------------------------------------------------------------------------


class PaymentScheme:
    """Maps index observations to nonnegative payouts; zero off-trigger."""

    trigger: TriggerArea

    def payout(self, theta, t=None):
        raise NotImplementedError

    def _apply_trigger(self, theta, values):
        inside = self.trigger.contains(theta)
        values = np.maximum(np.asarray(values, dtype=float), 0.0)
        result = np.where(inside, values, 0.0)
        if np.ndim(theta) == 0 and result.ndim == 0:
            return float(result)
        return result


@dataclass(frozen=True)
class FixedPayout(PaymentScheme):
    """Constant amount whenever the trigger fires."""

    amount: float
    trigger: TriggerArea

    def __post_init__(self):
        if not self.amount >= 0.0:
            raise ParameterError(f"payout amount must be nonnegative, got {self.amount}")

    def payout(self, theta, t=None):
        inside = self.trigger.contains(theta)
        if isinstance(inside, (bool, np.bool_)):
            return self.amount if inside else 0.0
        return np.where(inside, self.amount, 0.0)


@dataclass(frozen=True)
class LinearPayout(PaymentScheme):
    """intercept + slope * theta on the trigger area, floored at zero."""

    intercept: float
    slope: float
    trigger: TriggerArea

    def payout(self, theta, t=None):
        arr = np.asarray(theta, dtype=float)
        return self._apply_trigger(theta, self.intercept + self.slope * arr)


@dataclass(frozen=True)
class StepPayout(PaymentScheme):
    """One level per cell of the right-closed partition cut by ``bins``."""

    bins: tuple[float, ...]
    levels: tuple[float, ...]
    trigger: TriggerArea

    def __post_init__(self):
        bins = np.asarray(self.bins, dtype=float)
        if bins.size == 0 or np.any(np.diff(bins) <= 0):
            raise ParameterError("bins must be nonempty and strictly increasing")
        if len(self.levels) != bins.size + 1:
            raise ParameterError(
                f"need {bins.size + 1} levels for {bins.size} breakpoints, got {len(self.levels)}"
            )

    def payout(self, theta, t=None):
        arr = np.asarray(theta, dtype=float)
        cell = np.searchsorted(np.asarray(self.bins), arr, side="left")
        values = np.asarray(self.levels, dtype=float)[cell]
        return self._apply_trigger(theta, values)


@dataclass(frozen=True)
class CurvePayout(PaymentScheme):
    """Piecewise-linear payout tabulated on an index grid.

    Values are interpolated inside the grid and held at the end values
    outside it; the trigger still zeroes everything off the area.
    """

    grid: tuple[float, ...]
    values: tuple[float, ...]
    trigger: TriggerArea

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.size < 2:
            raise ParameterError("curve needs at least two grid nodes")
        if np.any(np.diff(grid) <= 0):
            raise ParameterError("curve grid must be strictly increasing")
        if grid.shape != values.shape:
            raise ParameterError("curve grid and values must have equal length")
        if np.any(values < 0.0):
            raise ParameterError("curve values must be nonnegative")

    def payout(self, theta, t=None):
        arr = np.asarray(theta, dtype=float)
        interp = np.interp(arr, np.asarray(self.grid), np.asarray(self.values))
        return self._apply_trigger(theta, interp)


def scheme_to_config(scheme: PaymentScheme) -> dict:
    trigger = trigger_to_config(scheme.trigger)
    if isinstance(scheme, FixedPayout):
        return {"kind": "fixed", "amount": scheme.amount, "trigger": trigger}
    if isinstance(scheme, LinearPayout):
        return {
            "kind": "linear",
            "intercept": scheme.intercept,
            "slope": scheme.slope,
            "trigger": trigger,
        }
    if isinstance(scheme, StepPayout):
        return {
            "kind": "step",
            "bins": list(scheme.bins),
            "levels": list(scheme.levels),
            "trigger": trigger,
        }
    if isinstance(scheme, CurvePayout):
        return {
            "kind": "curve",
            "grid": list(scheme.grid),
            "values": list(scheme.values),
            "trigger": trigger,
        }
    raise ParameterError(f"cannot serialize scheme of type {type(scheme).__name__}")


def scheme_from_config(config: dict) -> PaymentScheme:
    if not isinstance(config, dict) or "kind" not in config:
        raise ParameterError("scheme config must be a mapping with a 'kind' key")
    kind = config["kind"]
    trigger = trigger_from_config(config["trigger"])
    if kind == "fixed":
        return FixedPayout(float(config["amount"]), trigger)
    if kind == "linear":
        return LinearPayout(float(config["intercept"]), float(config["slope"]), trigger)
    if kind == "step":
        return StepPayout(tuple(config["bins"]), tuple(config["levels"]), trigger)
    if kind == "curve":
        return CurvePayout(tuple(config["grid"]), tuple(config["values"]), trigger)
    raise ParameterError(f"unknown scheme kind '{kind}'; known kinds: fixed, linear, step, curve")


# ---------------------------------------------------------------------------
# basis risk
# ---------------------------------------------------------------------------


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    return alpha


def basis_risk(loss, payout, alpha: float):
    """Weighted quadratic mismatch between losses and payouts."""
    alpha = check_alpha(alpha)
    loss = np.asarray(loss, dtype=float)
    payout = np.asarray(payout, dtype=float)
    if np.any(loss < 0.0):
        raise ParameterError("losses must be nonnegative")
    if np.any(payout < 0.0):
        raise ParameterError("payouts must be nonnegative")
    gap = loss - payout
    under = np.square(np.maximum(gap, 0.0))
    over = np.square(np.maximum(-gap, 0.0))
    result = alpha**2 * under + (1.0 - alpha) ** 2 * over
    return float(result) if result.ndim == 0 else result


# ---------------------------------------------------------------------------
# optimal payments
# ---------------------------------------------------------------------------


def optimal_pure_payment(loss_given_trigger: Distribution, alpha: float) -> float:
    """Best constant-on-trigger payout: the gamma(alpha)-expectile of the loss."""
    gamma = gamma_from_alpha(check_alpha(alpha))
    return max(expectile(loss_given_trigger, gamma), 0.0)


def optimal_index_curve(nodes, alpha: float, trigger: TriggerArea) -> CurvePayout:
    """Tabulate the conditional expectile payout over index grid nodes.

    ``nodes`` is a sequence of (theta, conditional loss law) pairs with
    strictly increasing theta covering the trigger area; payouts in
    between are linear in theta.
    """
    gamma = gamma_from_alpha(check_alpha(alpha))
    grid, values = [], []
    for theta, law in nodes:
        grid.append(float(theta))
        values.append(max(expectile(law, gamma), 0.0))
    return CurvePayout(tuple(grid), tuple(values), trigger)


# ---------------------------------------------------------------------------
# Monte Carlo estimation
# ---------------------------------------------------------------------------


class IncidentModel(Protocol):
    """Joint sampler of (index, time, loss)."""

    def sample(self, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        ...


@dataclass(frozen=True)
class EstimateResult:
    estimate: float
    stderr: float
    n: int


@dataclass(frozen=True)
class DecompositionResult:
    lhs: float
    lhs_se: float
    rhs: float
    rhs_se: float

    @property
    def combined_se(self) -> float:
        return math.hypot(self.lhs_se, self.rhs_se)


def _chunk_sizes(n: int, workers: int) -> list[int]:
    if n <= 0:
        raise ParameterError(f"sample size must be positive, got {n}")
    if workers <= 0:
        raise ParameterError(f"workers must be positive, got {workers}")
    base, extra = divmod(n, workers)
    return [base + (1 if w < extra else 0) for w in range(workers)]


def _payout_of(scheme) -> Callable:
    if isinstance(scheme, PaymentScheme):
        return scheme.payout
    if callable(scheme):
        return scheme
    raise ParameterError("scheme must be a PaymentScheme or a callable(theta, t)")


def expected_basis_risk(
    scheme,
    model: IncidentModel,
    alpha: float,
    n: int,
    seed: int,
    workers: int = 1,
    collect: bool = False,
):
    """Estimate E[B] for a scheme under an incident model.

    Returns an :class:`EstimateResult`; with ``collect=True`` also a
    record dict of per-sample columns (time, theta, loss, payout,
    deviation) in stream order.
    """
    alpha = check_alpha(alpha)
    payout_fn = _payout_of(scheme)
    total = 0.0
    total_sq = 0.0
    count = 0
    records = {"time": [], "theta": [], "loss": [], "payout": [], "deviation": []} if collect else None
    for w, size in enumerate(_chunk_sizes(int(n), int(workers))):
        if size == 0:
            continue
        theta, t, loss = model.sample(stream(seed, w), size)
        payout = np.asarray(payout_fn(theta, t), dtype=float)
        b = basis_risk(loss, payout, alpha)
        total += float(b.sum())
        total_sq += float(np.square(b).sum())
        count += size
        if collect:
            records["time"].append(np.asarray(t, dtype=float))
            records["theta"].append(np.asarray(theta, dtype=float))
            records["loss"].append(np.asarray(loss, dtype=float))
            records["payout"].append(payout)
            records["deviation"].append(payout - np.asarray(loss, dtype=float))
    mean = total / count
    var = max(total_sq / count - mean**2, 0.0)
    result = EstimateResult(mean, math.sqrt(var / count), count)
    if collect:
        return result, {k: np.concatenate(v) for k, v in records.items()}
    return result


def min_basis_risk_decomposition(
    model,
    trigger: TriggerArea,
    scheme,
    n: int,
    seed: int,
    workers: int = 1,
) -> DecompositionResult:
    """Check E[B] against its conditional-moment form on one sample stream.

    The left side averages realized basis risk at alpha = 1/2 for the
    given scheme.  The right side averages the analytic conditional
    expectation of the same quantity,

        (1/4) * (Var(S | theta, t) + (m(theta, t) - Y)^2),

    which reduces to the variance/second-moment split when the scheme
    pays the conditional mean on the trigger and zero off it.  The model
    must expose ``conditional_mean`` and ``conditional_variance``.
    """
    payout_fn = _payout_of(scheme)
    sums = np.zeros(2)
    sums_sq = np.zeros(2)
    count = 0
    n_triggered = 0
    for w, size in enumerate(_chunk_sizes(int(n), int(workers))):
        if size == 0:
            continue
        theta, t, loss = model.sample(stream(seed, w), size)
        payout = np.asarray(payout_fn(theta, t), dtype=float)
        lhs = basis_risk(loss, payout, 0.5)
        m = np.asarray(model.conditional_mean(theta, t), dtype=float)
        v = np.asarray(model.conditional_variance(theta, t), dtype=float)
        rhs = 0.25 * (v + np.square(m - payout))
        sums += (lhs.sum(), rhs.sum())
        sums_sq += (np.square(lhs).sum(), np.square(rhs).sum())
        count += size
        n_triggered += int(np.count_nonzero(trigger.contains(theta)))
    if n_triggered == 0 or n_triggered == count:
        raise TriggerError(
            f"trigger fired on {n_triggered} of {count} samples; decomposition needs both sides"
        )
    means = sums / count
    variances = np.maximum(sums_sq / count - means**2, 0.0)
    ses = np.sqrt(variances / count)
    return DecompositionResult(float(means[0]), float(ses[0]), float(means[1]), float(ses[1]))


@dataclass(frozen=True)
class MissedIncidentCheck:
    payment: float
    grid_argmin: float
    grid_step: float


def payment_without_incident(
    loss_law: Distribution,
    alpha: float,
    miss_prob: float,
    n: int = 200_000,
    seed: int = 0,
) -> MissedIncidentCheck:
    """Optimal payout when the trigger misses incidents independently.

    With the payout suppressed by an independent Bernoulli miss, the
    optimizer is unchanged: still the gamma(alpha)-expectile of the
    loss.  A grid search over E[B(y * Z)] on a shared sample verifies
    the claim; the caller can compare ``payment`` and ``grid_argmin``
    up to ``grid_step``.
    """
    alpha = check_alpha(alpha)
    miss_prob = float(miss_prob)
    if not 0.0 < miss_prob < 1.0:
        raise ParameterError(f"miss probability must lie in (0, 1), got {miss_prob}")
    payment = optimal_pure_payment(loss_law, alpha)
    rng = stream(seed, 0)
    losses = loss_law.sample(rng, int(n))
    paid = rng.random(int(n)) > miss_prob
    grid = np.linspace(0.0, loss_law.quantile(0.999), 200)
    gap_w = alpha**2
    over_w = (1.0 - alpha) ** 2
    best_y, best_val = 0.0, np.inf
    for y in grid:
        payout = np.where(paid, y, 0.0)
        gap = losses - payout
        val = float(
            np.mean(gap_w * np.square(np.maximum(gap, 0.0)) + over_w * np.square(np.maximum(-gap, 0.0)))
        )
        if val < best_val:
            best_y, best_val = float(y), val
    return MissedIncidentCheck(payment, best_y, float(grid[1] - grid[0]))
