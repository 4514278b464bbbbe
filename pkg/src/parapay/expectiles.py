"""Expectiles of distributions and samples.

The gamma-expectile of a law X is the unique minimizer of the
asymmetric quadratic loss

    L(y) = gamma * E[((X - y)^+)^2] + (1 - gamma) * E[((y - X)^+)^2],

equivalently the unique root of the first-order condition

    psi(y) = gamma * E[(X - y)^+] - (1 - gamma) * E[(y - X)^+] = 0.

Both one-sided means reduce to the cdf and the lower partial moment,
so any law exposing those solves in a few dozen function evaluations.
gamma = 1/2 recovers the mean; gamma is strictly monotone in the
expectile; expectiles are translation-equivariant and positively
homogeneous.

When payment mismatches are weighted by alpha on shortfall and
1 - alpha on overshoot (squared), the optimal payment is the expectile
at level gamma = alpha^2 / ((1 - alpha)^2 + alpha^2); the conversion
functions below move between the two parameterizations.
"""

from __future__ import annotations

import numpy as np

from .distributions import Distribution
from .errors import BracketError, ParameterError

_MAX_EXPANSIONS = 60


def gamma_from_alpha(alpha: float) -> float:
    """Expectile level induced by mismatch weight ``alpha`` in (0, 1)."""
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    return alpha**2 / ((1.0 - alpha) ** 2 + alpha**2)


def alpha_from_gamma(gamma: float) -> float:
    """Inverse of :func:`gamma_from_alpha` on (0, 1)."""
    gamma = float(gamma)
    if not 0.0 < gamma < 1.0:
        raise ParameterError(f"gamma must lie in (0, 1), got {gamma}")
    if gamma == 0.5:
        return 0.5
    return (gamma - np.sqrt(gamma * (1.0 - gamma))) / (2.0 * gamma - 1.0)


def _check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not 0.0 < gamma < 1.0:
        raise ParameterError(f"gamma must lie in (0, 1), got {gamma}")
    return gamma


def one_sided_means(dist: Distribution, x: float) -> tuple[float, float]:
    """Return (E[(X - x)^+], E[(x - X)^+]) from mean and partial moment."""
    mean, partial = dist.mean_and_partial_moment(x)
    cdf = dist.cdf(x)
    upper = mean - partial - x * (1.0 - cdf)
    lower = x * cdf - partial
    return upper, lower


def stop_loss_transform(dist: Distribution, s: float) -> float:
    """Expected excess E[(X - s)^+]."""
    return one_sided_means(dist, s)[0]


def expectile_level(dist: Distribution, x: float) -> float:
    """The level gamma at which ``x`` is the expectile of ``dist``.

    Serves as a residual check: for a solver output x-hat,
    |expectile_level(d, x_hat) - gamma| measures how far the
    first-order condition is from balance.
    """
    upper, lower = one_sided_means(dist, x)
    total = upper + lower
    if total <= 0.0:
        raise ParameterError("law is degenerate at x; expectile level is undefined")
    return lower / total


def expectile(dist: Distribution, gamma: float, tol: float = 1e-10) -> float:
    """Expectile of a distribution at level ``gamma``.

    Bisection on the first-order condition with geometric bracket
    expansion, then a Newton polish (the derivative of psi only needs
    the cdf).  ``tol`` is the absolute x-tolerance of the bisection.
    """
    gamma = _check_gamma(gamma)

    def psi(y: float) -> float:
        upper, lower = one_sided_means(dist, y)
        return gamma * upper - (1.0 - gamma) * lower

    lo, hi = dist.support()
    if lo > hi:
        lo, hi = hi, lo
    if lo == hi:
        return lo

    f_lo, f_hi = psi(lo), psi(hi)
    width = max(hi - lo, 1.0)
    for _ in range(_MAX_EXPANSIONS):
        if f_lo > 0.0:
            break
        if f_lo == 0.0:
            return lo
        lo -= width
        width *= 2.0
        f_lo = psi(lo)
    else:
        raise BracketError(f"no lower bracket for expectile after {_MAX_EXPANSIONS} expansions")
    width = max(hi - lo, 1.0)
    for _ in range(_MAX_EXPANSIONS):
        if f_hi < 0.0:
            break
        if f_hi == 0.0:
            return hi
        hi += width
        width *= 2.0
        f_hi = psi(hi)
    else:
        raise BracketError(f"no upper bracket for expectile after {_MAX_EXPANSIONS} expansions")

    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f_mid = psi(mid)
        if f_mid > 0.0:
            lo = mid
        elif f_mid < 0.0:
            hi = mid
        else:
            return mid

    x = 0.5 * (lo + hi)
    fx = psi(x)
    for _ in range(8):
        cdf = dist.cdf(x)
        slope = -(gamma * (1.0 - cdf) + (1.0 - gamma) * cdf)
        if slope >= 0.0:
            break
        x_next = min(max(x - fx / slope, lo), hi)
        if x_next == x:
            break
        f_next = psi(x_next)
        if abs(f_next) >= abs(fx):
            break
        x, fx = x_next, f_next
    return x


def empirical_expectile(samples, gamma: float) -> float:
    """Exact expectile of a sample, solved on the sorted prefix sums.

    On the segment between consecutive order statistics the first-order
    condition is linear; the unique root lies in exactly one segment.
    """
    gamma = _check_gamma(gamma)
    x = np.sort(np.asarray(samples, dtype=float))
    if x.ndim != 1 or x.size == 0:
        raise ParameterError("samples must be a nonempty 1-d sequence")
    if not np.all(np.isfinite(x)):
        raise ParameterError("samples must be finite")
    n = x.size
    if x[0] == x[-1]:
        return float(x[0])
    prefix = np.concatenate([[0.0], np.cumsum(x)])
    total = prefix[-1]
    counts = np.arange(n + 1, dtype=float)
    denom = gamma * (n - counts) + (1.0 - gamma) * counts
    candidates = (gamma * (total - prefix) + (1.0 - gamma) * prefix) / denom
    lefts = np.concatenate([[-np.inf], x])
    rights = np.concatenate([x, [np.inf]])
    for slack in (0.0, 1e-9):
        pad = slack * (1.0 + np.abs(candidates))
        ok = (candidates >= lefts - pad) & (candidates <= rights + pad)
        if ok.any():
            return float(candidates[np.argmax(ok)])
    raise BracketError("no sample segment contains the expectile candidate")


def asymmetric_loss(samples, y: float, gamma: float) -> float:
    """Mean asymmetric quadratic loss of payment ``y`` against samples."""
    gamma = _check_gamma(gamma)
    s = np.asarray(samples, dtype=float)
    if s.size == 0:
        raise ParameterError("samples must be nonempty")
    resid = s - float(y)
    up = np.square(np.maximum(resid, 0.0))
    down = np.square(np.maximum(-resid, 0.0))
    return float(np.mean(gamma * up + (1.0 - gamma) * down))
