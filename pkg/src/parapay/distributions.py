"""Loss distributions with closed-form lower partial moments.

Every law exposes the same small interface: ``cdf``, ``quantile``
(generalized inverse), ``mean``, ``partial_moment`` and ``sample``.
The lower partial moment is

    G(x) = E[X * 1{X <= x}],

taken right-closed, so an atom sitting exactly at ``x`` is included.
With F = cdf and E = mean this yields the two one-sided means used by
the expectile fixed-point equation:

    E[(X - x)^+] = E - G(x) - x * (1 - F(x))
    E[(x - X)^+] = x * F(x) - G(x)

Lower-truncated variants describe a law conditioned on exceeding a
threshold; their cdf satisfies F_t(x) = (F(x) - p) / (1 - p) for
x above the threshold, where p is the base mass below it.  Truncated
sampling uses the inverse cdf on a rescaled uniform, never rejection.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import ParameterError

_SQRT_2PI = np.sqrt(2.0 * np.pi)


def _phi(z):
    """Standard normal density."""
    return np.exp(-0.5 * np.square(z)) / _SQRT_2PI


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ParameterError(message)


def _check_level(q: float) -> float:
    q = float(q)
    _require(0.0 < q < 1.0, f"probability level must lie in (0, 1), got {q}")
    return q


class Distribution:
    """Common interface; subclasses fill in the family-specific math."""

    def cdf(self, x: float) -> float:
        raise NotImplementedError

    def quantile(self, q: float) -> float:
        """Generalized inverse inf{x : F(x) >= q} for q in (0, 1)."""
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def partial_moment(self, x: float) -> float:
        """Lower partial moment G(x) = E[X * 1{X <= x}], right-closed."""
        raise NotImplementedError

    def second_moment(self) -> float:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def mean_and_partial_moment(self, x: float) -> tuple[float, float]:
        """Return (E, G(x)) in one call."""
        return self.mean(), self.partial_moment(x)

    def variance(self) -> float:
        return self.second_moment() - self.mean() ** 2

    def atoms(self) -> tuple[tuple[float, float], ...]:
        """Point masses as (value, probability) pairs; empty if none."""
        return ()

    def support(self) -> tuple[float, float]:
        """A bracket [quantile(eps), quantile(1 - eps)] covering the law."""
        eps = 1e-6
        return self.quantile(eps), self.quantile(1.0 - eps)


@dataclass(frozen=True)
class Normal(Distribution):
    mu: float
    sigma: float

    def __post_init__(self):
        _require(self.sigma > 0.0, f"sigma must be positive, got {self.sigma}")

    def cdf(self, x):
        return float(special.ndtr((x - self.mu) / self.sigma))

    def quantile(self, q):
        return self.mu + self.sigma * float(special.ndtri(_check_level(q)))

    def mean(self):
        return self.mu

    def partial_moment(self, x):
        z = (x - self.mu) / self.sigma
        return float(self.mu * special.ndtr(z) - self.sigma * _phi(z))

    def second_moment(self):
        return self.mu**2 + self.sigma**2

    def pdf(self, x):
        return _phi((x - self.mu) / self.sigma) / self.sigma

    def sample(self, rng, n):
        return rng.normal(self.mu, self.sigma, size=n)


@dataclass(frozen=True)
class LogNormal(Distribution):
    """Law of exp(Z) with Z ~ Normal(mu, sigma^2)."""

    mu: float
    sigma: float

    def __post_init__(self):
        _require(self.sigma > 0.0, f"sigma must be positive, got {self.sigma}")

    def cdf(self, x):
        if x <= 0.0:
            return 0.0
        return float(special.ndtr((np.log(x) - self.mu) / self.sigma))

    def quantile(self, q):
        return float(np.exp(self.mu + self.sigma * special.ndtri(_check_level(q))))

    def mean(self):
        return float(np.exp(self.mu + 0.5 * self.sigma**2))

    def partial_moment(self, x):
        if x <= 0.0:
            return 0.0
        z = (np.log(x) - self.mu - self.sigma**2) / self.sigma
        return float(self.mean() * special.ndtr(z))

    def second_moment(self):
        return float(np.exp(2.0 * self.mu + 2.0 * self.sigma**2))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            z = np.where(x > 0.0, (np.log(np.where(x > 0.0, x, 1.0)) - self.mu) / self.sigma, 0.0)
        return np.where(x > 0.0, _phi(z) / (x * self.sigma), 0.0)

    def sample(self, rng, n):
        return rng.lognormal(self.mu, self.sigma, size=n)


@dataclass(frozen=True)
class Gamma(Distribution):
    shape: float
    scale: float

    def __post_init__(self):
        _require(self.shape > 0.0, f"shape must be positive, got {self.shape}")
        _require(self.scale > 0.0, f"scale must be positive, got {self.scale}")

    def cdf(self, x):
        if x <= 0.0:
            return 0.0
        return float(special.gammainc(self.shape, x / self.scale))

    def quantile(self, q):
        return float(special.gammaincinv(self.shape, _check_level(q)) * self.scale)

    def mean(self):
        return self.shape * self.scale

    def partial_moment(self, x):
        if x <= 0.0:
            return 0.0
        # E[X 1{X<=x}] = shape*scale * F_{shape+1}(x) for the same scale.
        return float(self.shape * self.scale * special.gammainc(self.shape + 1.0, x / self.scale))

    def second_moment(self):
        return self.shape * (self.shape + 1.0) * self.scale**2

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        safe = np.where(x > 0.0, x, 1.0)
        logpdf = (
            (self.shape - 1.0) * np.log(safe)
            - safe / self.scale
            - special.gammaln(self.shape)
            - self.shape * np.log(self.scale)
        )
        return np.where(x > 0.0, np.exp(logpdf), 0.0)

    def sample(self, rng, n):
        return rng.gamma(self.shape, self.scale, size=n)


@dataclass(frozen=True)
class TruncatedLogNormal(Distribution):
    """LogNormal conditioned on exceeding ``lower``."""

    mu: float
    sigma: float
    lower: float
    truncated_mass: float = field(init=False)

    def __post_init__(self):
        _require(self.sigma > 0.0, f"sigma must be positive, got {self.sigma}")
        _require(self.lower > 0.0, f"truncation point must be positive, got {self.lower}")
        p = float(special.ndtr((np.log(self.lower) - self.mu) / self.sigma))
        _require(p < 1.0, "truncation point leaves no mass above it")
        object.__setattr__(self, "truncated_mass", p)

    @classmethod
    def at_quantile(cls, mu: float, sigma: float, level: float) -> "TruncatedLogNormal":
        """Truncate at the base law's ``level`` quantile."""
        lower = LogNormal(mu, sigma).quantile(_check_level(level))
        return cls(mu, sigma, lower)

    def _psi(self, x):
        """Base-law partial-moment factor Phi((log x - mu - sigma^2) / sigma)."""
        return float(special.ndtr((np.log(x) - self.mu - self.sigma**2) / self.sigma))

    def cdf(self, x):
        if x <= self.lower:
            return 0.0
        base = float(special.ndtr((np.log(x) - self.mu) / self.sigma))
        return (base - self.truncated_mass) / (1.0 - self.truncated_mass)

    def quantile(self, q):
        q = _check_level(q)
        u = self.truncated_mass + q * (1.0 - self.truncated_mass)
        return float(np.exp(self.mu + self.sigma * special.ndtri(u)))

    def mean(self):
        base_mean = np.exp(self.mu + 0.5 * self.sigma**2)
        return float(base_mean * (1.0 - self._psi(self.lower)) / (1.0 - self.truncated_mass))

    def partial_moment(self, x):
        if x <= self.lower:
            return 0.0
        base_mean = np.exp(self.mu + 0.5 * self.sigma**2)
        return float(base_mean * (self._psi(x) - self._psi(self.lower)) / (1.0 - self.truncated_mass))

    def second_moment(self):
        z = (np.log(self.lower) - self.mu - 2.0 * self.sigma**2) / self.sigma
        base_m2 = np.exp(2.0 * self.mu + 2.0 * self.sigma**2)
        return float(base_m2 * (1.0 - special.ndtr(z)) / (1.0 - self.truncated_mass))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = x > self.lower
        safe = np.where(inside, x, self.lower * 2.0)
        z = (np.log(safe) - self.mu) / self.sigma
        dens = _phi(z) / (safe * self.sigma) / (1.0 - self.truncated_mass)
        return np.where(inside, dens, 0.0)

    def sample(self, rng, n):
        u = self.truncated_mass + rng.random(n) * (1.0 - self.truncated_mass)
        return np.exp(self.mu + self.sigma * special.ndtri(u))


@dataclass(frozen=True)
class TruncatedGamma(Distribution):
    """Gamma conditioned on exceeding ``lower``."""

    shape: float
    scale: float
    lower: float
    truncated_mass: float = field(init=False)

    def __post_init__(self):
        _require(self.shape > 0.0, f"shape must be positive, got {self.shape}")
        _require(self.scale > 0.0, f"scale must be positive, got {self.scale}")
        _require(self.lower > 0.0, f"truncation point must be positive, got {self.lower}")
        p = float(special.gammainc(self.shape, self.lower / self.scale))
        _require(p < 1.0, "truncation point leaves no mass above it")
        object.__setattr__(self, "truncated_mass", p)

    @classmethod
    def at_quantile(cls, shape: float, scale: float, level: float) -> "TruncatedGamma":
        """Truncate at the base law's ``level`` quantile."""
        lower = Gamma(shape, scale).quantile(_check_level(level))
        return cls(shape, scale, lower)

    def cdf(self, x):
        if x <= self.lower:
            return 0.0
        base = float(special.gammainc(self.shape, x / self.scale))
        return (base - self.truncated_mass) / (1.0 - self.truncated_mass)

    def quantile(self, q):
        q = _check_level(q)
        u = self.truncated_mass + q * (1.0 - self.truncated_mass)
        return float(special.gammaincinv(self.shape, u) * self.scale)

    def _upper_tail(self, shape_shift: float) -> float:
        """1 - F_{shape+shift}(lower) at the shared scale."""
        return float(special.gammaincc(self.shape + shape_shift, self.lower / self.scale))

    def mean(self):
        return self.shape * self.scale * self._upper_tail(1.0) / (1.0 - self.truncated_mass)

    def partial_moment(self, x):
        if x <= self.lower:
            return 0.0
        inner = float(
            special.gammainc(self.shape + 1.0, x / self.scale)
            - special.gammainc(self.shape + 1.0, self.lower / self.scale)
        )
        return self.shape * self.scale * inner / (1.0 - self.truncated_mass)

    def second_moment(self):
        m2 = self.shape * (self.shape + 1.0) * self.scale**2
        return m2 * self._upper_tail(2.0) / (1.0 - self.truncated_mass)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = x > self.lower
        base = Gamma(self.shape, self.scale).pdf(x)
        return np.where(inside, base / (1.0 - self.truncated_mass), 0.0)

    def sample(self, rng, n):
        u = self.truncated_mass + rng.random(n) * (1.0 - self.truncated_mass)
        return special.gammaincinv(self.shape, u) * self.scale


def clamped_deficit_moments(mu, sigma, crit, floor):
    """First and second moment of min(max(crit - X, 0), crit - floor).

    X ~ Normal(mu, sigma^2); all arguments broadcast, so conditional
    moments for many ``mu`` values come out of one vectorized call.

    Returns
    -------
    (mean, second_moment) : tuple of arrays or floats
    """
    mu, sigma, crit, floor = np.broadcast_arrays(
        np.asarray(mu, dtype=float), sigma, crit, floor
    )
    cap = crit - floor
    z_c = (crit - mu) / sigma
    z_f = (floor - mu) / sigma
    phi_c, phi_f = _phi(z_c), _phi(z_f)
    cdf_c, cdf_f = special.ndtr(z_c), special.ndtr(z_f)
    d_c = crit - mu
    d_f = floor - mu
    mean = d_c * cdf_c - d_f * cdf_f + sigma * (phi_c - phi_f)
    delta = cdf_c - cdf_f
    m2 = (
        cap**2 * cdf_f
        + d_c**2 * delta
        - 2.0 * d_c * sigma * (phi_f - phi_c)
        + sigma**2 * (delta + z_f * phi_f - z_c * phi_c)
    )
    if mean.ndim == 0:
        return float(mean), float(m2)
    return mean, m2


@dataclass(frozen=True)
class ClampedDeficit(Distribution):
    """Law of min(max(crit - X, 0), crit - floor) for X ~ Normal(mu, sigma^2).

    Mixed law on [0, crit - floor]: an atom at 0 (no deficit), a normal
    body in between, and an atom at the cap where the deficit saturates.
    """

    mu: float
    sigma: float
    crit: float
    floor: float

    def __post_init__(self):
        _require(self.sigma > 0.0, f"sigma must be positive, got {self.sigma}")
        _require(
            self.floor < self.crit,
            f"floor must lie below crit, got floor={self.floor}, crit={self.crit}",
        )

    @property
    def cap(self) -> float:
        return self.crit - self.floor

    def atoms(self):
        p_zero = 1.0 - float(special.ndtr((self.crit - self.mu) / self.sigma))
        p_cap = float(special.ndtr((self.floor - self.mu) / self.sigma))
        return ((0.0, p_zero), (self.cap, p_cap))

    def cdf(self, x):
        if x < 0.0:
            return 0.0
        if x >= self.cap:
            return 1.0
        return 1.0 - float(special.ndtr((self.crit - x - self.mu) / self.sigma))

    def quantile(self, q):
        q = _check_level(q)
        if q <= self.cdf(0.0):
            return 0.0
        below_cap = 1.0 - float(special.ndtr((self.floor - self.mu) / self.sigma))
        if q > below_cap:
            return self.cap
        return self.crit - self.mu - self.sigma * float(special.ndtri(1.0 - q))

    def mean(self):
        mean, _ = clamped_deficit_moments(self.mu, self.sigma, self.crit, self.floor)
        return mean

    def partial_moment(self, x):
        if x < 0.0:
            return 0.0
        if x >= self.cap:
            return self.mean()
        z_c = (self.crit - self.mu) / self.sigma
        z_x = (self.crit - x - self.mu) / self.sigma
        d_c = self.crit - self.mu
        return float(
            d_c * (special.ndtr(z_c) - special.ndtr(z_x))
            + self.sigma * (_phi(z_c) - _phi(z_x))
        )

    def second_moment(self):
        _, m2 = clamped_deficit_moments(self.mu, self.sigma, self.crit, self.floor)
        return m2

    def pdf(self, x):
        """Density of the continuous part on (0, cap); atoms excluded."""
        x = np.asarray(x, dtype=float)
        inside = (x > 0.0) & (x < self.cap)
        z = (self.crit - x - self.mu) / self.sigma
        return np.where(inside, _phi(z) / self.sigma, 0.0)

    def sample(self, rng, n):
        draws = rng.normal(self.mu, self.sigma, size=n)
        return np.clip(self.crit - draws, 0.0, self.cap)


@dataclass(frozen=True)
class Discrete(Distribution):
    """Finite law given by values and probabilities."""

    values: tuple[float, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        probs = np.asarray(self.probs, dtype=float)
        _require(values.ndim == 1 and values.size > 0, "values must be a nonempty 1-d sequence")
        _require(values.shape == probs.shape, "values and probs must have equal length")
        _require(np.all(np.isfinite(values)), "values must be finite")
        _require(np.all(probs > 0.0), "probabilities must be positive")
        total = probs.sum()
        _require(abs(total - 1.0) <= 1e-9, f"probabilities must sum to 1, got {total}")
        order = np.argsort(values, kind="stable")
        object.__setattr__(self, "values", tuple(float(v) for v in values[order]))
        object.__setattr__(self, "probs", tuple(float(p) for p in probs[order] / total))

    def _arrays(self):
        v = np.asarray(self.values)
        p = np.asarray(self.probs)
        return v, p, np.cumsum(p)

    def atoms(self):
        return tuple(zip(self.values, self.probs))

    def cdf(self, x):
        v, _, cum = self._arrays()
        idx = int(np.searchsorted(v, x, side="right"))
        return float(cum[idx - 1]) if idx > 0 else 0.0

    def quantile(self, q):
        q = _check_level(q)
        v, _, cum = self._arrays()
        idx = int(np.searchsorted(cum, q - 1e-15, side="left"))
        return float(v[min(idx, len(v) - 1)])

    def mean(self):
        v, p, _ = self._arrays()
        return float(v @ p)

    def partial_moment(self, x):
        v, p, _ = self._arrays()
        idx = int(np.searchsorted(v, x, side="right"))
        return float((v[:idx] * p[:idx]).sum())

    def second_moment(self):
        v, p, _ = self._arrays()
        return float((v**2) @ p)

    def sample(self, rng, n):
        v, _, cum = self._arrays()
        idx = np.searchsorted(cum, rng.random(n), side="left")
        return v[np.minimum(idx, len(v) - 1)]

    def support(self):
        return self.values[0], self.values[-1]


@dataclass(frozen=True)
class Empirical(Distribution):
    """Uniform law over an observed sample."""

    samples: tuple[float, ...]

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        _require(arr.ndim == 1 and arr.size > 0, "samples must be a nonempty 1-d sequence")
        _require(np.all(np.isfinite(arr)), "samples must be finite")
        object.__setattr__(self, "samples", tuple(float(v) for v in np.sort(arr)))

    def _arrays(self):
        v = np.asarray(self.samples)
        return v, np.concatenate([[0.0], np.cumsum(v)])

    def atoms(self):
        v = np.asarray(self.samples)
        values, counts = np.unique(v, return_counts=True)
        return tuple(zip(values.tolist(), (counts / v.size).tolist()))

    def cdf(self, x):
        v, _ = self._arrays()
        return float(np.searchsorted(v, x, side="right")) / v.size

    def quantile(self, q):
        q = _check_level(q)
        v, _ = self._arrays()
        levels = np.arange(1, v.size + 1) / v.size
        idx = int(np.searchsorted(levels, q - 1e-12, side="left"))
        return float(v[min(idx, v.size - 1)])

    def mean(self):
        v, _ = self._arrays()
        return float(v.mean())

    def partial_moment(self, x):
        v, prefix = self._arrays()
        idx = int(np.searchsorted(v, x, side="right"))
        return float(prefix[idx]) / v.size

    def second_moment(self):
        v, _ = self._arrays()
        return float(np.mean(v**2))

    def sample(self, rng, n):
        v, _ = self._arrays()
        return v[rng.integers(0, v.size, size=n)]

    def support(self):
        return self.samples[0], self.samples[-1]


_FAMILIES = {
    "normal": (Normal, ("mu", "sigma")),
    "lognormal": (LogNormal, ("mu", "sigma")),
    "gamma": (Gamma, ("shape", "scale")),
    "truncated-lognormal": (TruncatedLogNormal, ("mu", "sigma")),
    "truncated-gamma": (TruncatedGamma, ("shape", "scale")),
    "clamped-deficit": (ClampedDeficit, ("mu", "sigma", "crit", "floor")),
    "discrete": (Discrete, ("values", "probs")),
    "empirical": (Empirical, ("samples",)),
}


def make_distribution(config: dict) -> Distribution:
    """Build a distribution from a config mapping.

    Parameters
    ----------
    config : dict
        Must contain ``family`` plus the family's parameters, e.g.
        ``{"family": "lognormal", "mu": 0.9, "sigma": 1.6}``.  Truncated
        families take either ``lower`` (threshold) or ``level`` (base-law
        quantile level to truncate at).

    Raises
    ------
    ParameterError
        On an unknown family, missing or extra parameters, or parameter
        values violating the family's constraints.
    """
    if not isinstance(config, dict) or "family" not in config:
        raise ParameterError("distribution config must be a mapping with a 'family' key")
    family = config["family"]
    if family not in _FAMILIES:
        known = ", ".join(sorted(_FAMILIES))
        raise ParameterError(f"unknown distribution family '{family}'; known families: {known}")
    cls, base_params = _FAMILIES[family]
    params = {k: v for k, v in config.items() if k != "family"}
    if family in ("truncated-lognormal", "truncated-gamma"):
        has_lower, has_level = "lower" in params, "level" in params
        _require(
            has_lower != has_level,
            f"family '{family}' needs exactly one of 'lower' or 'level'",
        )
        extra = set(params) - set(base_params) - {"lower", "level"}
        _require(not extra, f"unexpected parameters for '{family}': {sorted(extra)}")
        missing = set(base_params) - set(params)
        _require(not missing, f"missing parameters for '{family}': {sorted(missing)}")
        if has_level:
            return cls.at_quantile(*(params[k] for k in base_params), level=params["level"])
        return cls(*(params[k] for k in base_params), lower=params["lower"])
    extra = set(params) - set(base_params)
    _require(not extra, f"unexpected parameters for '{family}': {sorted(extra)}")
    missing = set(base_params) - set(params)
    _require(not missing, f"missing parameters for '{family}': {sorted(missing)}")
    return cls(**params)
