"""Cloud-outage simulation study: arrivals, durations, losses, payouts.

Outages at each cloud service follow an inhomogeneous Poisson process
with power-law intensity lam(s) = scale * s**(-exponent), sampled by
time rescaling: a unit-rate path on [0, Lambda(T)] mapped back through
Lambda^{-1}.  Outage durations are lognormal with log-linear yearly
parameter drift, or a gamma law matched to the same mean and variance
per year.  A policyholder's loss per incident is affine in the
duration plus Gaussian noise, floored at zero; the flooring count is
carried in each record so its (astronomically small) frequency can be
reported.

Contracts trigger when the duration exceeds the p-quantile of the
duration law and then pay a fixed amount: the cost map applied to the
gamma-expectile of the duration conditional on exceeding the
threshold.  Static contracts price thresholds and payments off year-0
parameters for every policy year; dynamic contracts re-price each
year.  Study output is a stream of per-incident records; `collect`
reduces them to per-(family, run, year, gamma, threshold-level)
deviation, payout, and loss sums, and `aggregate` turns those into
across-run summaries (mean, stderr, density histogram, lower-tail
mean).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .distributions import Distribution, Gamma, LogNormal, TruncatedGamma, TruncatedLogNormal
from .errors import ParameterError
from .expectiles import expectile
from .rng import stream

SECTORS = ("FI", "HC", "BR", "EDU", "GOV", "MAN")
SIZES = (1, 2, 3)
FAMILIES = ("lognormal", "gamma")
MODES = ("static", "dynamic")
NOISE_SD = 2.5

DEFAULT_GAMMAS = (0.4, 0.5, 0.6, 0.9)
DEFAULT_P_LEVELS = tuple(round(0.05 * i, 2) for i in range(1, 11))

# fixed-cost bumps by sector, variable-cost bumps by size (log scale)
_SECTOR_BUMP = {"GOV": 0.0, "BR": 0.095, "MAN": 0.095, "EDU": 0.095, "FI": 0.18, "HC": 0.18}
_SIZE_BUMP = {1: 0.0, 2: 0.095, 3: 0.18}


@dataclass(frozen=True)
class ServiceParams:
    """Power-law outage intensity lam(s) = scale * s**(-exponent)."""

    scale: float
    exponent: float

    def __post_init__(self):
        if not (np.isfinite(self.scale) and self.scale > 0.0):
            raise ParameterError(f"intensity scale must be positive, got {self.scale}")
        if not (np.isfinite(self.exponent) and self.exponent < 1.0):
            raise ParameterError(f"intensity exponent must be below 1, got {self.exponent}")

    def cumulative(self, t):
        """Expected event count Lambda(t) = scale * t**(1-exponent) / (1-exponent)."""
        t = np.asarray(t, dtype=float)
        return self.scale * t ** (1.0 - self.exponent) / (1.0 - self.exponent)

    def inverse_cumulative(self, u):
        u = np.asarray(u, dtype=float)
        return ((1.0 - self.exponent) * u / self.scale) ** (1.0 / (1.0 - self.exponent))

    def interarrival_survival(self, t, x):
        """P(no event in (t, t+x]) = exp(-(Lambda(t+x) - Lambda(t)))."""
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        return np.exp(-(self.cumulative(t + x) - self.cumulative(t)))


DEFAULT_SERVICES = (
    ServiceParams(6.8, -0.6),
    ServiceParams(4.25, 0.0),
    ServiceParams(2.635, 0.38),
)


def simulate_arrivals(service: ServiceParams, horizon: float, rng) -> np.ndarray:
    """Sorted event times in (0, horizon] of the power-law Poisson process.

    rng may be a numpy Generator or an integer seed.
    """
    if not horizon > 0.0:
        raise ParameterError(f"horizon must be positive, got {horizon}")
    if not isinstance(rng, np.random.Generator):
        rng = stream(int(rng), 0)
    total = float(service.cumulative(horizon))
    count = rng.poisson(total)
    u = np.sort(rng.random(count)) * total
    return service.inverse_cumulative(u)


def _check_year(year) -> int:
    year = int(year)
    if year < 0:
        raise ParameterError(f"year must be nonnegative, got {year}")
    return year


def _check_mode(mode: str) -> str:
    if mode not in MODES:
        raise ParameterError(f"mode must be one of {MODES}, got {mode!r}")
    return mode


def _resolve_year(year, mode: str) -> int:
    """Static contracts price every policy year off year-0 parameters."""
    return 0 if _check_mode(mode) == "static" else _check_year(year)


def _lognormal_params(years):
    mu = np.exp(-0.105 + 0.119 * np.asarray(years))
    sigma = np.exp(0.482 + 0.018 * np.asarray(years))
    return mu, sigma


def _gamma_params(years):
    mu, sigma = _lognormal_params(years)
    expm1 = np.expm1(sigma**2)
    return 1.0 / expm1, expm1 * np.exp(mu + sigma**2 / 2.0)


@dataclass(frozen=True)
class DurationModel:
    """Year-indexed outage-duration law: lognormal, or moment-matched gamma."""

    family: str

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParameterError(f"family must be one of {FAMILIES}, got {self.family!r}")

    def lognormal_params(self, year: int) -> tuple[float, float]:
        mu, sigma = _lognormal_params(_check_year(year))
        return float(mu), float(sigma)

    def gamma_params(self, year: int) -> tuple[float, float]:
        shape, scale = _gamma_params(_check_year(year))
        return float(shape), float(scale)

    def law(self, year: int) -> Distribution:
        if self.family == "lognormal":
            return LogNormal(*self.lognormal_params(year))
        return Gamma(*self.gamma_params(year))

    def truncated_law(self, year: int, lower: float) -> Distribution:
        if self.family == "lognormal":
            mu, sigma = self.lognormal_params(year)
            return TruncatedLogNormal(mu, sigma, lower)
        shape, scale = self.gamma_params(year)
        return TruncatedGamma(shape, scale, lower)


def sample_duration(model: DurationModel, t, rng: np.random.Generator):
    """Draw one duration per event time from that time's year-floor law."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise ParameterError("event times must be nonnegative")
    years = np.floor(t)
    if model.family == "lognormal":
        mu, sigma = _lognormal_params(years)
        return rng.lognormal(mu, sigma)
    shape, scale = _gamma_params(years)
    return rng.gamma(shape, scale)


@dataclass(frozen=True)
class Policyholder:
    """Contract holder: sector and size set costs, p_level sets the trigger."""

    sector: str
    size: int
    p_level: float
    c_fix: float = field(init=False)
    c_var: float = field(init=False)

    def __post_init__(self):
        if self.sector not in SECTORS:
            raise ParameterError(f"sector must be one of {SECTORS}, got {self.sector!r}")
        if self.size not in SIZES:
            raise ParameterError(f"size must be one of {SIZES}, got {self.size}")
        if not 0.0 < self.p_level < 1.0:
            raise ParameterError(f"p_level must lie in (0, 1), got {self.p_level}")
        object.__setattr__(self, "c_fix", math.exp(2.996 + _SECTOR_BUMP[self.sector]))
        object.__setattr__(self, "c_var", math.exp(0.784 + _SIZE_BUMP[self.size]))


def loss(ph: Policyholder, duration, rng: np.random.Generator):
    """Realized loss c_fix + c_var * duration + noise, floored at zero."""
    duration = np.asarray(duration, dtype=float)
    if np.any(duration < 0.0):
        raise ParameterError("durations must be nonnegative")
    eps = rng.normal(0.0, NOISE_SD, size=duration.shape)
    return np.maximum(ph.c_fix + ph.c_var * duration + eps, 0.0)


# sector blocks of the 50-policyholder baseline book
_BASELINE_SECTORS = ("FI",) * 15 + ("HC",) * 15 + ("BR",) * 5 + ("EDU",) * 5 + ("GOV",) * 5 + ("MAN",) * 5
# repeating size mix: 6 small, 3 medium, 1 large per block of ten
_SIZE_PATTERN = (1, 1, 1, 1, 1, 1, 2, 2, 2, 3)


def baseline_portfolio(p_level: float) -> tuple[Policyholder, ...]:
    """The 50-policyholder template: sectors 15/15/5/5/5/5, sizes 30/15/5."""
    sizes = _SIZE_PATTERN * (len(_BASELINE_SECTORS) // len(_SIZE_PATTERN))
    return tuple(
        Policyholder(sector, size, p_level)
        for sector, size in zip(_BASELINE_SECTORS, sizes)
    )


def full_portfolio(p_levels=DEFAULT_P_LEVELS) -> tuple[Policyholder, ...]:
    """Baseline copies over the threshold levels: 500 policyholders by default."""
    return tuple(ph for p in p_levels for ph in baseline_portfolio(p))


def threshold(model: DurationModel, p: float, year: int, mode: str) -> float:
    """Trigger level: the p-quantile of the mode-appropriate year's law."""
    if not 0.0 < p < 1.0:
        raise ParameterError(f"threshold level must lie in (0, 1), got {p}")
    return float(model.law(_resolve_year(year, mode)).quantile(p))


def optimal_fixed_payout(
    ph: Policyholder, model: DurationModel, gamma: float, year: int, mode: str
) -> float:
    """Fixed payment: cost map applied to the truncated duration expectile."""
    use_year = _resolve_year(year, mode)
    thr = threshold(model, ph.p_level, year, mode)
    law = model.truncated_law(use_year, thr)
    return ph.c_fix + ph.c_var * expectile(law, gamma)


@dataclass(frozen=True)
class StudyConfig:
    """Portfolio, event model, and scenario grid for one simulation study."""

    portfolio: tuple[Policyholder, ...] = field(default_factory=full_portfolio)
    services: tuple[ServiceParams, ...] = DEFAULT_SERVICES
    families: tuple[str, ...] = FAMILIES
    gammas: tuple[float, ...] = DEFAULT_GAMMAS
    years: int = 5
    runs: int = 1000
    seed: int = 0
    mode: str = "static"

    def __post_init__(self):
        if not self.portfolio:
            raise ParameterError("portfolio must not be empty")
        if not self.services:
            raise ParameterError("at least one service is required")
        if not self.families or len(set(self.families)) != len(self.families):
            raise ParameterError("families must be nonempty and distinct")
        for family in self.families:
            if family not in FAMILIES:
                raise ParameterError(f"family must be one of {FAMILIES}, got {family!r}")
        if not self.gammas or len(set(self.gammas)) != len(self.gammas):
            raise ParameterError("gammas must be nonempty and distinct")
        for gamma in self.gammas:
            if not 0.0 < gamma < 1.0:
                raise ParameterError(f"gamma must lie in (0, 1), got {gamma}")
        if int(self.years) < 1:
            raise ParameterError(f"years must be at least 1, got {self.years}")
        if int(self.runs) < 1:
            raise ParameterError(f"runs must be at least 1, got {self.runs}")
        _check_mode(self.mode)

    @property
    def p_levels(self) -> tuple[float, ...]:
        return tuple(sorted({ph.p_level for ph in self.portfolio}))


@dataclass(frozen=True)
class BasisRiskRecord:
    """One incident: per-policyholder losses, per-(policyholder, gamma) payouts."""

    run: int
    family: str
    service: int
    time: float
    year: int
    duration: float
    losses: np.ndarray
    payouts: np.ndarray
    triggered: np.ndarray
    floored: int

    @property
    def deviations(self) -> np.ndarray:
        """Signed basis risk per policyholder and gamma: payout minus loss."""
        return self.payouts - self.losses[:, None]


@dataclass(frozen=True)
class _PayoutTables:
    """Per-year trigger and payment lookups for a fixed (config, model)."""

    c_fix: np.ndarray        # (K,)
    c_var: np.ndarray        # (K,)
    thresholds: np.ndarray   # (years, K)
    payouts: np.ndarray      # (years, K, n_gammas)


def _payout_tables(config: StudyConfig, model: DurationModel) -> _PayoutTables:
    p_values = list(config.p_levels)
    p_index = np.array([p_values.index(ph.p_level) for ph in config.portfolio])
    c_fix = np.array([ph.c_fix for ph in config.portfolio])
    c_var = np.array([ph.c_var for ph in config.portfolio])
    use_years = [_resolve_year(y, config.mode) for y in range(config.years)]

    quantiles = {}
    eterms = {}
    for uy in sorted(set(use_years)):
        law = model.law(uy)
        quantiles[uy] = [float(law.quantile(p)) for p in p_values]
        eterms[uy] = [
            [expectile(model.truncated_law(uy, thr), g) for g in config.gammas]
            for thr in quantiles[uy]
        ]

    thresholds = np.array([np.take(quantiles[uy], p_index) for uy in use_years])
    eterm = np.array([np.take(eterms[uy], p_index, axis=0) for uy in use_years])
    payouts = c_fix[None, :, None] + c_var[None, :, None] * eterm
    return _PayoutTables(c_fix, c_var, thresholds, payouts)


def _run_once(
    config: StudyConfig,
    model: DurationModel,
    tables: _PayoutTables,
    family: str,
    run: int,
    rng: np.random.Generator,
) -> Iterator[BasisRiskRecord]:
    arrivals = [simulate_arrivals(svc, float(config.years), rng) for svc in config.services]
    times = np.concatenate(arrivals)
    services = np.concatenate([np.full(a.size, j, dtype=int) for j, a in enumerate(arrivals)])
    order = np.argsort(times, kind="stable")
    times, services = times[order], services[order]
    if times.size == 0:
        return

    years = np.minimum(np.floor(times).astype(int), config.years - 1)
    durations = sample_duration(model, times, rng)
    n_inc = times.size
    n_ph = len(config.portfolio)
    base = tables.c_fix[None, :] + tables.c_var[None, :] * durations[:, None]
    raw = base + rng.normal(0.0, NOISE_SD, size=(n_inc, n_ph))
    losses = np.maximum(raw, 0.0)
    floored = np.count_nonzero(raw < 0.0, axis=1)
    triggered = durations[:, None] > tables.thresholds[years]

    for i in range(n_inc):
        payouts = np.where(triggered[i][:, None], tables.payouts[years[i]], 0.0)
        yield BasisRiskRecord(
            run=run,
            family=family,
            service=int(services[i]),
            time=float(times[i]),
            year=int(years[i]),
            duration=float(durations[i]),
            losses=losses[i],
            payouts=payouts,
            triggered=triggered[i],
            floored=int(floored[i]),
        )


def run_study(config: StudyConfig) -> Iterator[BasisRiskRecord]:
    """Stream per-incident records; deterministic given config.seed.

    Runs are independent with derived per-(family, run) RNG streams, so
    any subset of runs can be reproduced or farmed out without replaying
    the rest; record order is fixed (family, then run, then event time).
    """
    for f_idx, family in enumerate(config.families):
        model = DurationModel(family)
        tables = _payout_tables(config, model)
        for run in range(config.runs):
            rng = stream(config.seed, f_idx, run)
            yield from _run_once(config, model, tables, family, run, rng)


@dataclass(frozen=True)
class StudySums:
    """Per-(family, run, year, gamma, p-level) reductions of a record stream."""

    config: StudyConfig
    deviation: np.ndarray       # (F, R, Y, G, P)
    payout: np.ndarray          # (F, R, Y, G, P)
    loss: np.ndarray            # (F, R, Y, P)
    incidents: np.ndarray       # (F, R, Y)
    floored: np.ndarray         # (F,)
    service_counts: np.ndarray  # (F, R, S), events inside the count window
    count_window: float         # years; min(4, horizon) for the count pins

    @property
    def families(self) -> tuple[str, ...]:
        return self.config.families

    @property
    def p_levels(self) -> tuple[float, ...]:
        return self.config.p_levels


def collect(records: Iterable[BasisRiskRecord], config: StudyConfig) -> StudySums:
    """Reduce a record stream to the grouped sums used for reporting."""
    p_values = list(config.p_levels)
    family_index = {family: i for i, family in enumerate(config.families)}
    # one-hot masks: p-level partition of the portfolio
    masks = np.array(
        [[1.0 if ph.p_level == p else 0.0 for ph in config.portfolio] for p in p_values]
    )
    shape = (len(config.families), config.runs, config.years, len(config.gammas), len(p_values))
    deviation = np.zeros(shape)
    payout = np.zeros(shape)
    loss_sums = np.zeros(shape[:3] + (len(p_values),))
    incidents = np.zeros(shape[:3], dtype=int)
    floored = np.zeros(len(config.families), dtype=int)
    service_counts = np.zeros(shape[:2] + (len(config.services),), dtype=int)
    window = min(4.0, float(config.years))

    for rec in records:
        f = family_index[rec.family]
        deviation[f, rec.run, rec.year] += (masks @ rec.deviations).T
        payout[f, rec.run, rec.year] += (masks @ rec.payouts).T
        loss_sums[f, rec.run, rec.year] += masks @ rec.losses
        incidents[f, rec.run, rec.year] += 1
        floored[f] += rec.floored
        if rec.time <= window:
            service_counts[f, rec.run, rec.service] += 1

    return StudySums(
        config, deviation, payout, loss_sums, incidents, floored, service_counts, window
    )


@dataclass(frozen=True)
class GroupSummary:
    """Across-run statistics of one group's per-run summed deviations."""

    n_runs: int
    mean: float
    stderr: float
    tail_mean: float
    payout_mean: float
    hist_edges: tuple[float, ...]
    hist_density: tuple[float, ...]


def _histogram(values: np.ndarray, bin_width):
    if bin_width is not None:
        if not bin_width > 0.0:
            raise ParameterError(f"bin width must be positive, got {bin_width}")
        lo, hi = float(values.min()), float(values.max())
        edges = np.arange(lo, hi + bin_width, bin_width)
        if edges.size < 2:
            edges = np.array([lo, lo + bin_width])
        density, edges = np.histogram(values, bins=edges, density=True)
    else:
        density, edges = np.histogram(values, bins="fd", density=True)
    return tuple(edges.tolist()), tuple(density.tolist())


def _summary(dev_values: np.ndarray, pay_values: np.ndarray, bin_width) -> GroupSummary:
    n = dev_values.size
    tail = max(1, math.ceil(0.01 * n))
    edges, density = _histogram(dev_values, bin_width)
    return GroupSummary(
        n_runs=n,
        mean=float(dev_values.mean()),
        stderr=float(dev_values.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0,
        tail_mean=float(np.sort(dev_values)[:tail].mean()),
        payout_mean=float(pay_values.mean()),
        hist_edges=edges,
        hist_density=density,
    )


def _index_of(options, value, label: str) -> int:
    matches = [i for i, v in enumerate(options) if v == value]
    if not matches:
        raise ParameterError(f"{label} {value!r} not in study grid {tuple(options)}")
    return matches[0]


GROUP_KEYS = ("p_level", "year", "gamma", "family")


def aggregate(
    source,
    group_by: str,
    *,
    config: StudyConfig = None,
    family: str = None,
    gamma: float = None,
    year: int = None,
    bin_width: float = None,
) -> dict:
    """Across-run summaries of per-run summed deviations, one per group.

    source is a StudySums or a record iterable (config required then).
    Non-grouped dimensions are fixed: family and gamma default to the
    first configured family and the 0.5-closest gamma; year defaults to
    the first policy year, the reporting convention for one-year views,
    except when grouping by year.
    """
    if not isinstance(source, StudySums):
        if config is None:
            raise ParameterError("aggregating raw records requires the study config")
        source = collect(source, config)
    sums = source
    cfg = sums.config
    if group_by not in GROUP_KEYS:
        raise ParameterError(f"group_by must be one of {GROUP_KEYS}, got {group_by!r}")

    gammas = np.asarray(cfg.gammas)
    f_idx = _index_of(cfg.families, family, "family") if family is not None else 0
    g_idx = (
        _index_of(cfg.gammas, gamma, "gamma")
        if gamma is not None
        else int(np.argmin(np.abs(gammas - 0.5)))
    )
    if year is not None:
        y_idx = _check_year(year)
        if y_idx >= cfg.years:
            raise ParameterError(f"year {year} outside study horizon {cfg.years}")
    else:
        y_idx = 0

    dev, pay = sums.deviation, sums.payout
    out = {}
    if group_by == "p_level":
        for j, p in enumerate(cfg.p_levels):
            out[p] = _summary(dev[f_idx, :, y_idx, g_idx, j], pay[f_idx, :, y_idx, g_idx, j], bin_width)
    elif group_by == "year":
        for y in range(cfg.years):
            values = dev[f_idx, :, y, g_idx, :].sum(axis=-1)
            pays = pay[f_idx, :, y, g_idx, :].sum(axis=-1)
            out[y] = _summary(values, pays, bin_width)
    elif group_by == "gamma":
        for g, gamma_value in enumerate(cfg.gammas):
            values = dev[f_idx, :, y_idx, g, :].sum(axis=-1)
            pays = pay[f_idx, :, y_idx, g, :].sum(axis=-1)
            out[gamma_value] = _summary(values, pays, bin_width)
    else:
        for f, family_name in enumerate(cfg.families):
            values = dev[f, :, y_idx, g_idx, :].sum(axis=-1)
            pays = pay[f, :, y_idx, g_idx, :].sum(axis=-1)
            out[family_name] = _summary(values, pays, bin_width)
    return out


def study_summary(sums: StudySums) -> dict:
    """JSON-ready study report: scenario echo, calibration, groupings."""
    cfg = sums.config
    summary = {
        "n_policyholders": len(cfg.portfolio),
        "n_runs": cfg.runs,
        "years": cfg.years,
        "mode": cfg.mode,
        "families": list(cfg.families),
        "gammas": list(cfg.gammas),
        "p_levels": list(cfg.p_levels),
        "incidents": {
            family: int(sums.incidents[f].sum()) for f, family in enumerate(cfg.families)
        },
        "floored_losses": {
            family: int(sums.floored[f]) for f, family in enumerate(cfg.families)
        },
        "service_count_window_years": sums.count_window,
        "service_mean_counts": [
            float(sums.service_counts[:, :, j].mean()) for j in range(len(cfg.services))
        ],
        "groups": {},
    }
    for key in GROUP_KEYS:
        grouped = aggregate(sums, key)
        summary["groups"][key] = {
            str(value): {
                "n_runs": g.n_runs,
                "mean": g.mean,
                "stderr": g.stderr,
                "tail_mean": g.tail_mean,
                "payout_mean": g.payout_mean,
                "hist_edges": list(g.hist_edges),
                "hist_density": list(g.hist_density),
            }
            for value, g in grouped.items()
        }
    return summary


@dataclass(frozen=True)
class OutageLossModel:
    """Joint (duration, loss) sampler for one policyholder in one year."""

    policyholder: Policyholder
    model: DurationModel
    year: int = 0

    def __post_init__(self):
        _check_year(self.year)

    def sample(self, rng: np.random.Generator, n: int):
        years = np.full(n, float(self.year))
        durations = sample_duration(self.model, years, rng)
        losses = loss(self.policyholder, durations, rng)
        return durations, years, losses

    def conditional_mean(self, theta, t=None):
        # the zero floor is ignored: at these costs the noise would need
        # an eight-sigma excursion, far below Monte Carlo resolution
        return self.policyholder.c_fix + self.policyholder.c_var * np.asarray(theta, dtype=float)

    def conditional_variance(self, theta, t=None):
        return np.full(np.asarray(theta, dtype=float).shape, NOISE_SD**2)
