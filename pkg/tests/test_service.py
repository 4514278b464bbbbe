"""Endpoint tests for the HTTP service facade.

The service wraps the library; these tests pin the envelope contract
(status codes, error kinds, response shapes) and spot-check that each
endpoint returns the same numbers as the underlying functions.
"""

import warnings

import numpy as np
import pytest

from parapay import __version__
from parapay.client import ServiceClient
from parapay.distributions import Normal, make_distribution
from parapay.errors import NumericalError, ParameterError
from parapay.expectiles import empirical_expectile, expectile, gamma_from_alpha
from parapay.rng import stream
from parapay.service import create_app

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    from fastapi.testclient import TestClient

NORMAL = {"family": "normal", "mu": 0.0, "sigma": 1.0}
# effectively infinite mean: the expectile bracket search cannot close
UNBRACKETABLE = {"family": "lognormal", "mu": 0.0, "sigma": 60.0}


@pytest.fixture(scope="module")
def api():
    return TestClient(create_app())


def validation_message(resp) -> str:
    assert resp.status_code == 422
    detail = resp.json()["detail"]
    assert detail["kind"] == "validation"
    return detail["message"]


class TestHealth:
    def test_health(self, api):
        resp = api.get("/health")
        assert resp.status_code == 200
        assert resp.json() == {"status": "ok", "version": __version__}


class TestExpectileEndpoint:
    def test_normal_mean_at_half(self, api):
        resp = api.post("/expectile", json={"distribution": NORMAL, "gammas": [0.5]})
        assert resp.status_code == 200
        (item,) = resp.json()["results"]
        assert item["gamma"] == 0.5
        assert item["alpha"] == 0.5
        assert abs(item["value"]) <= 1e-10

    def test_alpha_is_mapped_to_gamma(self, api):
        resp = api.post("/expectile", json={"distribution": NORMAL, "alphas": [0.75]})
        (item,) = resp.json()["results"]
        assert item["gamma"] == pytest.approx(0.9, abs=1e-12)
        assert item["value"] == pytest.approx(expectile(Normal(0.0, 1.0), 0.9), abs=1e-12)

    def test_samples_path(self, api):
        resp = api.post("/expectile", json={"samples": [1.0, 2.0, 3.0], "gammas": [0.5]})
        (item,) = resp.json()["results"]
        assert item["value"] == pytest.approx(2.0, abs=1e-12)

    def test_samples_match_library(self, api):
        x = stream(11, 0).normal(5.0, 2.0, 400)
        resp = api.post("/expectile", json={"samples": x.tolist(), "gammas": [0.7]})
        (item,) = resp.json()["results"]
        assert item["value"] == pytest.approx(empirical_expectile(x, 0.7), abs=1e-12)

    def test_rejects_both_inputs(self, api):
        resp = api.post(
            "/expectile",
            json={"distribution": NORMAL, "samples": [1.0], "gammas": [0.5]},
        )
        assert "exactly one" in validation_message(resp)

    def test_rejects_neither_input(self, api):
        resp = api.post("/expectile", json={"gammas": [0.5]})
        assert "exactly one" in validation_message(resp)

    def test_rejects_no_levels(self, api):
        resp = api.post("/expectile", json={"distribution": NORMAL})
        assert "at least one" in validation_message(resp)

    def test_gamma_bound_named(self, api):
        resp = api.post("/expectile", json={"distribution": NORMAL, "gammas": [1.5]})
        assert "(0, 1)" in validation_message(resp)

    def test_unknown_family(self, api):
        resp = api.post(
            "/expectile",
            json={"distribution": {"family": "cauchy", "mu": 0.0}, "gammas": [0.5]},
        )
        assert "cauchy" in validation_message(resp)

    def test_extra_field_rejected(self, api):
        resp = api.post("/expectile", json={"samples": [1.0], "gammas": [0.5], "bogus": 1})
        assert resp.status_code == 422

    def test_numerical_failure_maps_to_500(self, api):
        with np.errstate(over="ignore", invalid="ignore"):
            resp = api.post(
                "/expectile", json={"distribution": UNBRACKETABLE, "gammas": [0.9]}
            )
        assert resp.status_code == 500
        detail = resp.json()["detail"]
        assert detail["kind"] == "numerical"
        assert "bracket" in detail["message"]


def ols_coefficients(columns, response):
    columns = np.asarray(columns, dtype=float)
    response = np.asarray(response, dtype=float)
    return np.linalg.solve(columns.T @ columns, columns.T @ response)


class TestFitEndpoint:
    def test_linear_fit_is_ols_at_half(self, api):
        rng = stream(21, 0)
        theta = rng.uniform(0.0, 10.0, 500)
        s = 1.5 + 0.8 * theta + rng.normal(0.0, 0.4, 500)
        resp = api.post(
            "/fit",
            json={
                "theta": theta.tolist(),
                "response": s.tolist(),
                "design": {"kind": "linear"},
                "gamma": 0.5,
            },
        )
        assert resp.status_code == 200
        body = resp.json()
        assert body["converged"]
        expected = ols_coefficients(np.column_stack([np.ones(500), theta]), s)
        assert np.allclose(body["coefficients"], expected, rtol=0.0, atol=1e-8)

    def test_covariate_columns_enter_the_design(self, api):
        rng = stream(21, 1)
        theta = rng.uniform(0.0, 5.0, 300)
        z = rng.uniform(1.0, 2.0, 300)
        s = 2.0 * z + 0.5 * z * theta + rng.normal(0.0, 0.1, 300)
        resp = api.post(
            "/fit",
            json={
                "theta": theta.tolist(),
                "response": s.tolist(),
                "design": {"kind": "linear"},
                "covariates": [[v] for v in z],
                "gamma": 0.5,
            },
        )
        expected = ols_coefficients(np.column_stack([z, z * theta]), s)
        assert np.allclose(resp.json()["coefficients"], expected, rtol=0.0, atol=1e-8)

    def test_intercept_only_equals_empirical_expectile(self, api):
        x = stream(21, 2).gamma(2.0, 3.0, 800)
        resp = api.post(
            "/fit",
            json={
                "theta": np.zeros(800).tolist(),
                "response": x.tolist(),
                # trigger never fires: the indicator block is all-zero,
                # leaving an intercept-only regression
                "design": {"kind": "pure", "trigger": {"kind": "above", "threshold": 1.0}},
                "gamma": 0.7,
            },
        )
        body = resp.json()
        assert body["rank_deficient"]
        assert body["coefficients"][0] == pytest.approx(empirical_expectile(x, 0.7), abs=1e-9)
        assert body["coefficients"][1] == 0.0

    def test_pure_design_requires_trigger(self, api):
        resp = api.post(
            "/fit",
            json={
                "theta": [0.0, 1.0],
                "response": [1.0, 2.0],
                "design": {"kind": "pure"},
                "gamma": 0.5,
            },
        )
        assert "trigger" in validation_message(resp)

    def test_step_design_requires_bins(self, api):
        resp = api.post(
            "/fit",
            json={
                "theta": [0.0, 1.0],
                "response": [1.0, 2.0],
                "design": {"kind": "step"},
                "gamma": 0.5,
            },
        )
        assert "bin" in validation_message(resp)


class TestDesignEndpoint:
    def test_pure_fixed_payout(self, api):
        resp = api.post(
            "/design",
            json={
                "alpha": 0.75,
                "trigger": {"kind": "above", "threshold": 2.0},
                "loss": {"family": "gamma", "shape": 2.0, "scale": 3.0},
            },
        )
        assert resp.status_code == 200
        body = resp.json()
        assert body["gamma"] == pytest.approx(0.9, abs=1e-12)
        law = make_distribution({"family": "gamma", "shape": 2.0, "scale": 3.0})
        assert body["scheme"]["kind"] == "fixed"
        assert body["scheme"]["amount"] == pytest.approx(expectile(law, 0.9), abs=1e-10)
        assert body["scheme"]["trigger"] == {"kind": "above", "threshold": 2.0}

    def test_curve_from_nodes(self, api):
        nodes = [
            {"theta": t, "loss": {"family": "normal", "mu": 10.0 - t, "sigma": 1.0}}
            for t in (0.0, 1.0, 2.0)
        ]
        resp = api.post(
            "/design",
            json={"alpha": 0.5, "trigger": {"kind": "below", "threshold": 3.0}, "nodes": nodes},
        )
        body = resp.json()
        assert body["scheme"]["kind"] == "curve"
        assert body["scheme"]["values"] == pytest.approx([10.0, 9.0, 8.0], abs=1e-10)

    def test_rejects_both_loss_and_nodes(self, api):
        resp = api.post(
            "/design",
            json={
                "alpha": 0.5,
                "trigger": {"kind": "above", "threshold": 0.0},
                "loss": NORMAL,
                "nodes": [{"theta": 0.0, "loss": NORMAL}],
            },
        )
        assert "exactly one" in validation_message(resp)

    def test_rejects_neither_loss_nor_nodes(self, api):
        resp = api.post(
            "/design", json={"alpha": 0.5, "trigger": {"kind": "above", "threshold": 0.0}}
        )
        assert "exactly one" in validation_message(resp)

    def test_alpha_bound_named(self, api):
        resp = api.post(
            "/design",
            json={"alpha": 1.2, "trigger": {"kind": "above", "threshold": 0.0}, "loss": NORMAL},
        )
        assert "(0, 1)" in validation_message(resp)

    def test_bad_trigger_kind(self, api):
        resp = api.post(
            "/design",
            json={"alpha": 0.5, "trigger": {"kind": "inside"}, "loss": NORMAL},
        )
        assert "inside" in validation_message(resp)


class TestEvaluateEndpoint:
    SCHEME = {"kind": "fixed", "amount": 5.0, "trigger": {"kind": "above", "threshold": 2.0}}

    def test_hand_computed_basis_risk(self, api):
        # obs 1 off-trigger with zero loss; obs 2 underpays by 4
        resp = api.post(
            "/evaluate",
            json={"scheme": self.SCHEME, "alpha": 0.5, "theta": [1.0, 3.0], "loss": [0.0, 9.0]},
        )
        body = resp.json()
        assert body["n"] == 2
        assert body["mean_basis_risk"] == pytest.approx(0.25 * 16.0 / 2.0, abs=1e-12)
        assert body["mean_loss"] == pytest.approx(4.5)
        assert body["mean_payout"] == pytest.approx(2.5)

    def test_perfect_payout_has_zero_risk(self, api):
        resp = api.post(
            "/evaluate",
            json={"scheme": self.SCHEME, "alpha": 0.3, "theta": [3.0, 4.0], "loss": [5.0, 5.0]},
        )
        body = resp.json()
        assert body["mean_basis_risk"] == 0.0
        assert body["stderr"] == 0.0

    def test_design_evaluate_roundtrip(self, api):
        design = api.post(
            "/design",
            json={
                "alpha": 0.5,
                "trigger": {"kind": "above", "threshold": 0.0},
                "loss": {"family": "normal", "mu": 7.0, "sigma": 0.5},
            },
        ).json()
        resp = api.post(
            "/evaluate",
            json={
                "scheme": design["scheme"],
                "alpha": 0.5,
                "theta": [1.0, 2.0],
                "loss": [7.0, 7.0],
            },
        )
        assert resp.json()["mean_basis_risk"] == pytest.approx(0.0, abs=1e-10)

    def test_length_mismatch(self, api):
        resp = api.post(
            "/evaluate",
            json={"scheme": self.SCHEME, "alpha": 0.5, "theta": [1.0], "loss": [1.0, 2.0]},
        )
        assert "equal length" in validation_message(resp)

    def test_empty_data(self, api):
        resp = api.post(
            "/evaluate", json={"scheme": self.SCHEME, "alpha": 0.5, "theta": [], "loss": []}
        )
        assert "at least one" in validation_message(resp)


class TestCropEndpoint:
    def test_small_portfolio_payload(self, api):
        resp = api.post(
            "/crop-case",
            json={
                "config": {"n_farms": 8, "threshold": 400.0, "seed": 2},
                "alphas": [0.3, 0.7],
                "theta": [100.0, 200.0, 300.0],
            },
        )
        assert resp.status_code == 200
        body = resp.json()
        assert len(body["locations"]) == 8
        assert len(body["index_cov"]) == 8
        assert body["central"] != body["peripheral"]
        assert body["theta"] == [100.0, 200.0, 300.0]
        for role in ("central", "peripheral"):
            assert sorted(body["curves"][role]) == ["0.3", "0.7"]
            for values in body["curves"][role].values():
                assert len(values) == 3

    def test_default_grid_spans_lo_to_threshold(self, api):
        resp = api.post("/crop-case", json={"config": {"n_farms": 4, "seed": 0}})
        grid = resp.json()["theta"]
        assert len(grid) == 101
        assert grid[0] == 500.0
        assert grid[-1] == 3000.0

    def test_unknown_config_key(self, api):
        resp = api.post("/crop-case", json={"config": {"n_farms": 4, "acreage": 2.0}})
        assert "crop config" in validation_message(resp)

    def test_bad_config_value(self, api):
        resp = api.post("/crop-case", json={"config": {"n_farms": 0}})
        assert resp.status_code == 422


class TestCyberEndpoint:
    TINY = {
        "p_levels": [0.1, 0.4],
        "gammas": [0.5, 0.9],
        "years": 2,
        "runs": 3,
        "seed": 7,
    }

    def test_records_and_summary(self, api):
        resp = api.post("/cyber-sim", json=self.TINY)
        assert resp.status_code == 200
        body = resp.json()
        assert body["gammas"] == [0.5, 0.9]
        summary = body["summary"]
        assert summary["n_policyholders"] == 100
        assert summary["n_runs"] == 3
        assert summary["mode"] == "static"
        assert len(summary["service_mean_counts"]) == 3
        assert body["records"]
        for rec in body["records"]:
            assert len(rec["payout_sum"]) == 2
            # summed deviations must tie out against summed payouts and losses
            for dev, pay in zip(rec["deviation_sum"], rec["payout_sum"]):
                assert dev == pytest.approx(pay - rec["loss_sum"], abs=1e-9)

    def test_records_can_be_suppressed(self, api):
        resp = api.post("/cyber-sim", json={**self.TINY, "include_records": False})
        body = resp.json()
        assert body["records"] == []
        assert body["summary"]["n_policyholders"] == 100

    def test_service_override(self, api):
        resp = api.post(
            "/cyber-sim", json={**self.TINY, "runs": 2, "services": [[4.25, 0.0]]}
        )
        assert len(resp.json()["summary"]["service_mean_counts"]) == 1

    def test_bad_mode_rejected(self, api):
        resp = api.post("/cyber-sim", json={**self.TINY, "mode": "adaptive"})
        assert resp.status_code == 422

    def test_zero_runs_rejected(self, api):
        resp = api.post("/cyber-sim", json={**self.TINY, "runs": 0})
        assert resp.status_code == 422

    def test_bad_gamma_rejected(self, api):
        resp = api.post("/cyber-sim", json={**self.TINY, "gammas": [1.5]})
        assert resp.status_code == 422


class TestServiceClient:
    def test_in_process_roundtrip(self):
        with ServiceClient() as client:
            assert client.get("/health")["status"] == "ok"
            out = client.post("/expectile", {"samples": [1.0, 2.0, 3.0], "gammas": [0.5]})
            assert out["results"][0]["value"] == pytest.approx(2.0)

    def test_validation_maps_to_parameter_error(self):
        with ServiceClient() as client:
            with pytest.raises(ParameterError, match="exactly one"):
                client.post("/expectile", {"gammas": [0.5]})

    def test_pydantic_envelope_also_maps(self):
        with ServiceClient() as client:
            with pytest.raises(ParameterError, match="bogus"):
                client.post("/expectile", {"samples": [1.0], "gammas": [0.5], "bogus": 1})

    def test_numerical_maps_to_numerical_error(self):
        with ServiceClient() as client:
            with np.errstate(over="ignore", invalid="ignore"):
                with pytest.raises(NumericalError, match="bracket"):
                    client.post(
                        "/expectile", {"distribution": UNBRACKETABLE, "gammas": [0.9]}
                    )
