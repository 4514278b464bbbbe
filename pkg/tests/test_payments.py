"""Triggers, payment schemes, basis risk, optimal payments, MC estimators."""

import numpy as np
import pytest

from parapay.distributions import ClampedDeficit, Gamma, Normal
from parapay.errors import ParameterError, TriggerError
from parapay.expectiles import expectile, gamma_from_alpha
from parapay.payments import (
    CurvePayout,
    FixedPayout,
    LinearPayout,
    StepPayout,
    TriggerArea,
    basis_risk,
    expected_basis_risk,
    min_basis_risk_decomposition,
    optimal_index_curve,
    optimal_pure_payment,
    payment_without_incident,
    scheme_from_config,
    scheme_to_config,
    trigger_from_config,
    trigger_to_config,
)

# ---------------------------------------------------------------------------
# trigger areas
# ---------------------------------------------------------------------------


def test_scalar_interval_triggers():
    above = TriggerArea.above(2.0)
    assert above.contains(3.0) is True
    assert above.contains(2.0) is False  # open at the threshold
    assert above.contains(1.0) is False
    below = TriggerArea.below(245.0)
    assert below.contains(244.9) is True
    assert below.contains(245.0) is False
    between = TriggerArea.between(1.0, 2.0)
    np.testing.assert_array_equal(
        between.contains([0.5, 1.5, 2.5]), [False, True, False]
    )


def test_union_of_boxes_any_component():
    area = TriggerArea.any_component_above(4.0, 3)
    assert area.n_components == 3
    assert area.contains([0.0, 0.0, 5.0]) is True
    assert area.contains([0.0, 0.0, 3.0]) is False
    points = np.array([[5.0, 0.0, 0.0], [0.0, 0.0, 0.0], [4.5, 9.0, 0.0]])
    np.testing.assert_array_equal(area.contains(points), [True, False, True])


def test_component_count_mismatch_is_rejected():
    area = TriggerArea.any_component_above(4.0, 3)
    with pytest.raises(ParameterError, match="components"):
        area.contains(np.zeros((5, 2)))


def test_trigger_config_roundtrip():
    for trig in (
        TriggerArea.above(3.0),
        TriggerArea.below(245.0),
        TriggerArea.between(1.0, 2.0),
        TriggerArea.any_component_above(4.0, 3),
    ):
        rebuilt = trigger_from_config(trigger_to_config(trig))
        assert rebuilt == trig
    with pytest.raises(ParameterError, match="unknown trigger kind"):
        trigger_from_config({"kind": "inside"})


# ---------------------------------------------------------------------------
# payment schemes
# ---------------------------------------------------------------------------


def test_fixed_payout():
    scheme = FixedPayout(10.0, TriggerArea.above(2.0))
    assert scheme.payout(1.0) == 0.0
    assert scheme.payout(3.0) == 10.0
    np.testing.assert_array_equal(scheme.payout(np.array([1.0, 3.0])), [0.0, 10.0])
    with pytest.raises(ParameterError, match="nonnegative"):
        FixedPayout(-1.0, TriggerArea.above(2.0))


def test_linear_payout_clamps_at_zero():
    scheme = LinearPayout(-5.0, 1.0, TriggerArea.above(0.0))
    assert scheme.payout(2.0) == 0.0
    assert scheme.payout(10.0) == 5.0
    assert scheme.payout(-3.0) == 0.0  # off trigger


def test_step_payout_cells():
    scheme = StepPayout((2.0, 4.0), (1.0, 5.0, 9.0), TriggerArea.above(0.0))
    np.testing.assert_array_equal(
        scheme.payout(np.array([1.0, 2.0, 3.0, 4.0, 5.0])), [1.0, 1.0, 5.0, 5.0, 9.0]
    )
    with pytest.raises(ParameterError, match="levels"):
        StepPayout((2.0,), (1.0,), TriggerArea.above(0.0))


def test_curve_payout_interpolates_and_zeroes_off_trigger():
    scheme = CurvePayout((1.0, 2.0, 3.0), (0.0, 10.0, 30.0), TriggerArea.below(3.0))
    assert scheme.payout(1.5) == 5.0
    assert scheme.payout(2.5) == 20.0
    assert scheme.payout(0.5) == 0.0  # held at the end value, on trigger
    assert scheme.payout(3.5) == 0.0  # off trigger
    with pytest.raises(ParameterError, match="nonnegative"):
        CurvePayout((1.0, 2.0), (0.0, -1.0), TriggerArea.below(3.0))
    with pytest.raises(ParameterError, match="increasing"):
        CurvePayout((2.0, 1.0), (0.0, 1.0), TriggerArea.below(3.0))


def test_scheme_config_roundtrip():
    schemes = [
        FixedPayout(12.5, TriggerArea.above(3.0)),
        LinearPayout(1.0, 2.0, TriggerArea.above(0.0)),
        StepPayout((2.0, 4.0), (1.0, 5.0, 9.0), TriggerArea.between(0.0, 10.0)),
        CurvePayout((1.0, 2.0), (0.5, 1.5), TriggerArea.below(3.0)),
    ]
    for scheme in schemes:
        rebuilt = scheme_from_config(scheme_to_config(scheme))
        assert rebuilt == scheme
    with pytest.raises(ParameterError, match="unknown scheme kind"):
        scheme_from_config({"kind": "exotic", "trigger": {"kind": "above", "threshold": 1.0}})


# ---------------------------------------------------------------------------
# basis risk
# ---------------------------------------------------------------------------


def test_basis_risk_hand_values():
    assert basis_risk(10.0, 7.0, 0.6) == pytest.approx(0.36 * 9.0)
    assert basis_risk(2.0, 5.0, 0.6) == pytest.approx(0.16 * 9.0)
    assert basis_risk(4.0, 4.0, 0.3) == 0.0
    assert basis_risk(3.0, 1.0, 0.5) == pytest.approx(0.25 * 4.0)


def test_basis_risk_scaling_and_validation():
    loss = np.array([1.0, 4.0])
    payout = np.array([2.0, 1.0])
    np.testing.assert_allclose(
        basis_risk(3.0 * loss, 3.0 * payout, 0.7), 9.0 * basis_risk(loss, payout, 0.7)
    )
    with pytest.raises(ParameterError, match="losses"):
        basis_risk(-1.0, 0.0, 0.5)
    with pytest.raises(ParameterError, match="payouts"):
        basis_risk(1.0, -2.0, 0.5)
    with pytest.raises(ParameterError, match="alpha"):
        basis_risk(1.0, 1.0, 1.5)


# ---------------------------------------------------------------------------
# optimal payments
# ---------------------------------------------------------------------------


def test_optimal_pure_payment_is_the_expectile():
    law = Gamma(2.0, 3.0)
    for alpha in (0.3, 0.5, 0.75):
        expected = expectile(law, gamma_from_alpha(alpha))
        assert optimal_pure_payment(law, alpha) == pytest.approx(expected, abs=1e-12)


def test_optimal_index_curve_tabulates_conditional_expectiles():
    trigger = TriggerArea.below(3000.0)
    nodes = [
        (theta, ClampedDeficit(40.0 + 0.004 * theta, 4.0, 40.0, 10.0))
        for theta in (500.0, 1000.0, 1500.0)
    ]
    curve = optimal_index_curve(nodes, 0.5, trigger)
    for (theta, law), value in zip(nodes, curve.values):
        assert value == pytest.approx(max(law.mean(), 0.0), abs=1e-10)
        assert curve.payout(theta) == pytest.approx(value, abs=1e-12)
    mid = curve.payout(750.0)
    assert min(curve.values[0], curve.values[1]) <= mid <= max(curve.values[0], curve.values[1])


def test_payment_without_incident_matches_grid_search():
    law = Gamma(2.0, 3.0)
    check = payment_without_incident(law, 0.7, miss_prob=0.3, n=150_000, seed=5)
    assert abs(check.payment - check.grid_argmin) <= check.grid_step + 1e-12
    with pytest.raises(ParameterError, match="miss probability"):
        payment_without_incident(law, 0.7, miss_prob=0.0)


# ---------------------------------------------------------------------------
# Monte Carlo estimators
# ---------------------------------------------------------------------------


class DoublingModel:
    """theta ~ Gamma(2,3), loss = 2 * theta, no time structure."""

    def sample(self, rng, n):
        theta = rng.gamma(2.0, 3.0, size=n)
        return theta, np.zeros(n), 2.0 * theta


class NoisySquareModel:
    """theta ~ N(0,1), loss = (theta + eps)^2 with eps ~ N(0, tau^2)."""

    tau = 0.5

    def sample(self, rng, n):
        theta = rng.normal(size=n)
        eps = rng.normal(scale=self.tau, size=n)
        return theta, np.zeros(n), np.square(theta + eps)

    def conditional_mean(self, theta, t):
        return np.square(theta) + self.tau**2

    def conditional_variance(self, theta, t):
        return 2.0 * self.tau**4 + 4.0 * self.tau**2 * np.square(theta)


def test_perfect_hedge_has_zero_basis_risk():
    scheme = LinearPayout(0.0, 2.0, TriggerArea.above(0.0))
    result = expected_basis_risk(scheme, DoublingModel(), 0.5, n=5000, seed=3)
    assert result.estimate == 0.0
    assert result.stderr == 0.0
    assert result.n == 5000


def test_expected_basis_risk_is_deterministic_per_seed_and_workers():
    scheme = FixedPayout(5.0, TriggerArea.above(3.0))
    a = expected_basis_risk(scheme, DoublingModel(), 0.5, n=20000, seed=11, workers=4)
    b = expected_basis_risk(scheme, DoublingModel(), 0.5, n=20000, seed=11, workers=4)
    assert a == b
    c = expected_basis_risk(scheme, DoublingModel(), 0.5, n=20000, seed=11, workers=2)
    # different chunking draws different streams but estimates agree statistically
    assert abs(a.estimate - c.estimate) < 6.0 * (a.stderr + c.stderr)


def test_expected_basis_risk_collects_records():
    scheme = FixedPayout(5.0, TriggerArea.above(3.0))
    result, records = expected_basis_risk(
        scheme, DoublingModel(), 0.5, n=100, seed=7, collect=True
    )
    assert result.n == 100
    assert set(records) == {"time", "theta", "loss", "payout", "deviation"}
    assert all(len(v) == 100 for v in records.values())
    np.testing.assert_allclose(records["deviation"], records["payout"] - records["loss"])


def test_decomposition_identity_on_noisy_square_model():
    model = NoisySquareModel()
    trigger = TriggerArea.above(1.0)

    def scheme(theta, t):
        return np.where(trigger.contains(theta), model.conditional_mean(theta, t), 0.0)

    result = min_basis_risk_decomposition(model, trigger, scheme, n=60_000, seed=13)
    assert abs(result.lhs - result.rhs) <= 4.0 * result.combined_se
    assert result.lhs_se > 0.0 and result.rhs_se > 0.0


def test_decomposition_requires_both_trigger_sides():
    model = NoisySquareModel()
    never = TriggerArea.above(1e9)

    def pay_nothing(theta, t):
        return np.zeros(np.shape(theta))

    with pytest.raises(TriggerError, match="trigger fired"):
        min_basis_risk_decomposition(model, never, pay_nothing, n=1000, seed=1)
    always = TriggerArea.above(-1e9)
    with pytest.raises(TriggerError, match="trigger fired"):
        min_basis_risk_decomposition(model, always, pay_nothing, n=1000, seed=1)
