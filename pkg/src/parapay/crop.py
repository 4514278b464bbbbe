"""Area-yield crop insurance on a spatially correlated farm portfolio.

Farm yields are jointly normal with a common mean and variance and a
distance-decaying correlation, locations drawn uniformly on a disk.
The index is the regional yield sum theta; the contract pays when
theta falls below a threshold.  Conditioning the joint normal on the
sum gives farm k's yield law N(mu*, sigma*^2) with

    mu*    = mu + (1' Sigma e_k / 1' Sigma 1) * (theta - K * mu)
    sigma*^2 = sigma^2 - (1' Sigma e_k)^2 / (1' Sigma 1),

so the farm's conditional loss is the clamped deficit law of that
normal below the critical yield.  Payment curves tabulate the
conditional-loss expectile per index value; higher index covariance
with the region (central farms) means more index information, smaller
conditional variance, and steeper payment response.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distributions import ClampedDeficit, clamped_deficit_moments
from .errors import ConditioningError, ParameterError
from .payments import CurvePayout, TriggerArea, optimal_index_curve
from .rng import stream


@dataclass(frozen=True)
class CropConfig:
    """Portfolio geometry, yield law, loss clamps, and trigger threshold."""

    n_farms: int = 50
    radius: float = 5.0
    yield_mean: float = 50.0
    yield_sd: float = 5.0
    crit: float = 40.0
    floor: float = 10.0
    threshold: float = 3000.0
    corr_scale: float = 0.868
    seed: int = 0

    def __post_init__(self):
        if self.n_farms < 1:
            raise ParameterError(f"n_farms must be at least 1, got {self.n_farms}")
        if self.radius <= 0.0:
            raise ParameterError(f"radius must be positive, got {self.radius}")
        if self.yield_sd <= 0.0:
            raise ParameterError(f"yield_sd must be positive, got {self.yield_sd}")
        if self.floor >= self.crit:
            raise ParameterError(
                f"floor must lie below crit, got floor={self.floor}, crit={self.crit}"
            )
        if self.corr_scale <= 0.0:
            raise ParameterError(f"corr_scale must be positive, got {self.corr_scale}")


def correlation_from_locations(locations: np.ndarray, radius: float, corr_scale: float) -> np.ndarray:
    """Pairwise Corr = exp(-||x - x'|| / (corr_scale * radius))."""
    pts = np.asarray(locations, dtype=float)
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt(np.sum(np.square(diff), axis=-1))
    return np.exp(-dist / (corr_scale * radius))


@dataclass(frozen=True)
class CropPortfolio:
    config: CropConfig
    locations: np.ndarray
    correlation: np.ndarray
    index_cov: np.ndarray = field(init=False)
    index_var: float = field(init=False)

    def __post_init__(self):
        k = self.config.n_farms
        if self.locations.shape != (k, 2):
            raise ParameterError(f"locations must have shape ({k}, 2)")
        if self.correlation.shape != (k, k):
            raise ParameterError(f"correlation must have shape ({k}, {k})")
        cov = self.config.yield_sd**2 * self.correlation
        object.__setattr__(self, "index_cov", cov @ np.ones(k))
        object.__setattr__(self, "index_var", float(np.sum(cov)))

    @property
    def n_farms(self) -> int:
        return self.config.n_farms


def portfolio_from_locations(config: CropConfig, locations) -> CropPortfolio:
    locations = np.asarray(locations, dtype=float)
    corr = correlation_from_locations(locations, config.radius, config.corr_scale)
    return CropPortfolio(config, locations, corr)


def generate_portfolio(config: CropConfig) -> CropPortfolio:
    """Sample farm locations uniformly on the disk (polar, radius sqrt-scaled)."""
    rng = stream(config.seed, 0)
    r = config.radius * np.sqrt(rng.random(config.n_farms))
    angle = 2.0 * np.pi * rng.random(config.n_farms)
    locations = np.column_stack([r * np.cos(angle), r * np.sin(angle)])
    return portfolio_from_locations(config, locations)


def _check_farm(portfolio: CropPortfolio, farm: int) -> int:
    farm = int(farm)
    if not 0 <= farm < portfolio.n_farms:
        raise ParameterError(f"farm index {farm} out of range [0, {portfolio.n_farms})")
    return farm


def conditional_yield_params(portfolio: CropPortfolio, farm: int, theta):
    """(mu*, sigma*) of farm yield given the regional sum theta.

    theta may be a scalar or an array; sigma* does not depend on theta.
    Raises ConditioningError when the index determines the farm yield
    exactly (residual variance numerically nonpositive).
    """
    farm = _check_farm(portfolio, farm)
    cfg = portfolio.config
    s_k = float(portfolio.index_cov[farm])
    total = portfolio.index_var
    theta = np.asarray(theta, dtype=float)
    mu_star = cfg.yield_mean + (s_k / total) * (theta - cfg.n_farms * cfg.yield_mean)
    var_star = cfg.yield_sd**2 - s_k**2 / total
    if var_star <= 0.0:
        raise ConditioningError(
            f"index determines farm {farm} yield exactly (residual variance {var_star:.3g})"
        )
    sigma_star = float(np.sqrt(var_star))
    if mu_star.ndim == 0:
        return float(mu_star), sigma_star
    return mu_star, sigma_star


def conditional_loss_law(portfolio: CropPortfolio, farm: int, theta: float) -> ClampedDeficit:
    """Farm loss law given the index: clamped deficit of the conditional yield."""
    mu_star, sigma_star = conditional_yield_params(portfolio, farm, float(theta))
    cfg = portfolio.config
    return ClampedDeficit(mu_star, sigma_star, cfg.crit, cfg.floor)


def conditional_loss_moments(portfolio: CropPortfolio, farm: int, theta):
    """Vectorized (mean, variance) of the conditional loss over theta values."""
    mu_star, sigma_star = conditional_yield_params(portfolio, farm, theta)
    cfg = portfolio.config
    mean, m2 = clamped_deficit_moments(mu_star, sigma_star, cfg.crit, cfg.floor)
    return mean, m2 - np.square(mean)


def default_theta_grid(lo: float = 500.0, hi: float = 3000.0, n: int = 101) -> np.ndarray:
    return np.linspace(lo, hi, n)


def payment_curve(
    portfolio: CropPortfolio, farm: int, alpha: float, theta_grid=None
) -> CurvePayout:
    """Optimal index-contingent payments for one farm, tabulated over theta."""
    if theta_grid is None:
        theta_grid = default_theta_grid(hi=portfolio.config.threshold)
    trigger = TriggerArea.below(portfolio.config.threshold)
    nodes = [
        (float(theta), conditional_loss_law(portfolio, farm, float(theta)))
        for theta in np.asarray(theta_grid, dtype=float)
    ]
    return optimal_index_curve(nodes, alpha, trigger)


def select_showcase_farms(portfolio: CropPortfolio) -> tuple[int, int]:
    """(most central, most peripheral) farm by covariance with the index."""
    return int(np.argmax(portfolio.index_cov)), int(np.argmin(portfolio.index_cov))


@dataclass(frozen=True)
class CropIncidentModel:
    """Joint sampler of (index, loss) for one farm; time is not used."""

    portfolio: CropPortfolio
    farm: int

    def __post_init__(self):
        _check_farm(self.portfolio, self.farm)
        cov = self.portfolio.config.yield_sd**2 * self.portfolio.correlation
        object.__setattr__(self, "_chol", np.linalg.cholesky(cov))

    def sample(self, rng: np.random.Generator, n: int):
        cfg = self.portfolio.config
        z = rng.standard_normal((n, cfg.n_farms))
        yields = cfg.yield_mean + z @ self._chol.T
        theta = yields.sum(axis=1)
        loss = np.clip(cfg.crit - yields[:, self.farm], 0.0, cfg.crit - cfg.floor)
        return theta, np.zeros(n), loss

    def conditional_mean(self, theta, t=None):
        return conditional_loss_moments(self.portfolio, self.farm, theta)[0]

    def conditional_variance(self, theta, t=None):
        return conditional_loss_moments(self.portfolio, self.farm, theta)[1]

    def conditional_mean_payment(self, trigger: TriggerArea):
        """Callable paying the conditional expected loss on the trigger area."""

        def pay(theta, t=None):
            theta = np.asarray(theta, dtype=float)
            return np.where(trigger.contains(theta), self.conditional_mean(theta), 0.0)

        return pay
