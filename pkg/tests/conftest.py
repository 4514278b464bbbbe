import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

from parapay.distributions import (
    ClampedDeficit,
    Discrete,
    Empirical,
    Gamma,
    LogNormal,
    Normal,
    TruncatedGamma,
    TruncatedLogNormal,
)
from parapay.rng import stream

settings.register_profile(
    "ci",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


def corpus_laws() -> list[tuple[str, object]]:
    """The 20-law corpus exercised by the solver acceptance criterion."""
    emp_large = Empirical(tuple(np.round(stream(2024, 1).gamma(2.0, 1.5, size=57), 6)))
    return [
        ("normal-std", Normal(0.0, 1.0)),
        ("normal-wide", Normal(-3.0, 2.5)),
        ("normal-tight", Normal(10.0, 0.1)),
        ("lognormal-half", LogNormal(0.0, 0.5)),
        ("lognormal-unit", LogNormal(0.3, 1.0)),
        ("lognormal-heavy", LogNormal(0.9, 1.2)),
        ("gamma-2-3", Gamma(2.0, 3.0)),
        ("gamma-sub1", Gamma(0.6, 1.5)),
        ("gamma-5", Gamma(5.0, 0.4)),
        ("tlognormal-low", TruncatedLogNormal.at_quantile(0.0, 0.8, 0.1)),
        ("tlognormal-med", TruncatedLogNormal.at_quantile(0.5, 1.0, 0.5)),
        ("tgamma-med", TruncatedGamma.at_quantile(2.0, 3.0, 0.3)),
        ("tgamma-low", TruncatedGamma.at_quantile(0.9, 2.0, 0.05)),
        ("clamped-mild", ClampedDeficit(45.0, 4.0, 40.0, 10.0)),
        ("clamped-croplike", ClampedDeficit(50.0, 5.0, 40.0, 10.0)),
        ("clamped-body", ClampedDeficit(42.0, 6.0, 40.0, 10.0)),
        ("discrete-3pt", Discrete((-2.0, 0.0, 1.0), (0.25, 0.25, 0.5))),
        ("discrete-4pt", Discrete((1.0, 2.0, 3.0, 5.0), (0.4, 0.3, 0.2, 0.1))),
        ("empirical-small", Empirical((1.0, 2.0, 4.0))),
        ("empirical-large", emp_large),
    ]


GAMMA_GRID = tuple(np.round(np.linspace(0.05, 0.95, 19), 2))


@pytest.fixture(scope="session")
def corpus():
    return corpus_laws()


@pytest.fixture(scope="session")
def gamma_grid():
    return GAMMA_GRID
