import json
import math

import numpy as np
import pytest

from delaywarp import (
    FourierSeries,
    InvalidDelayError,
    PeriodicDelay,
    delay_from_config,
    load_delay,
    sinusoid_delay,
)


class TestEvalTau:
    def test_sinusoid_at_zero(self, sin_delay):
        assert sin_delay(0.1).tau(0.0) == pytest.approx(3.0, abs=1e-14)

    def test_zero_perturbation_constant(self, sin_delay):
        d = sin_delay(0.0)
        for t in (-5.0, 0.0, 0.3, 17.0):
            assert d.tau(t) == pytest.approx(3.0, abs=1e-15)

    def test_quarter_period(self, sin_delay):
        # sin(5 * pi/10) = sin(pi/2) = 1
        assert sin_delay(0.1).tau(math.pi / 10) == pytest.approx(3.1, abs=1e-12)

    def test_vectorized(self, sin_delay):
        d = sin_delay(0.1)
        ts = np.linspace(0, 5, 50)
        vals = d.tau(ts)
        assert vals.shape == ts.shape
        assert np.allclose(vals, [d.tau(float(t)) for t in ts])


class TestEvalTauDot:
    def test_at_zero(self, sin_delay):
        # eps * omega * cos(0)
        assert sin_delay(0.1).tau_dot(0.0) == pytest.approx(0.5, abs=1e-14)

    def test_zero_perturbation(self, sin_delay):
        assert sin_delay(0.0).tau_dot(1.23) == 0.0

    def test_quarter_period(self, sin_delay):
        assert sin_delay(0.1).tau_dot(math.pi / 10) == pytest.approx(0.0, abs=1e-12)

    def test_matches_central_difference(self, sin_delay):
        d = sin_delay(0.1)
        step = 1e-4
        for t in np.linspace(0.0, d.period, 17):
            fd = (d.tau(t + step) - d.tau(t - step)) / (2 * step)
            assert d.tau_dot(t) == pytest.approx(fd, rel=1e-6)


class TestInvariants:
    def test_periodicity(self, sin_delay):
        d = sin_delay(0.1)
        ts = np.linspace(0.0, d.period, 300)
        assert np.max(np.abs(d.tau(ts) - d.tau(ts + d.period))) < 1e-12

    def test_realness_multiharmonic(self):
        coeffs = {
            1: 0.2 - 0.1j, -1: 0.2 + 0.1j,
            2: 0.05 + 0.02j, -2: 0.05 - 0.02j,
            3: -0.01j, -3: 0.01j,
        }
        shape = FourierSeries(omega=2.0, coeffs=coeffs)
        d = PeriodicDelay(tau0=2.0, eps=0.3, shape=shape)
        ts = np.linspace(0.0, d.period, 400)
        vals = d.tau(ts)
        # independent complex-sum oracle
        oracle = np.zeros_like(ts, dtype=complex)
        for k, ak in coeffs.items():
            oracle += ak * np.exp(1j * k * 2.0 * ts)
        assert np.max(np.abs(oracle.imag)) < 1e-10
        assert np.allclose(vals, 2.0 + 0.3 * oracle.real, atol=1e-12)

    def test_non_hermitian_rejected(self):
        with pytest.raises(InvalidDelayError):
            FourierSeries(omega=1.0, coeffs={1: 1.0 + 0.0j, -1: 0.5 + 0.0j})

    def test_positivity_enforced(self):
        with pytest.raises(InvalidDelayError):
            sinusoid_delay(1.0, 2.0, 5.0)

    def test_bad_tau0(self):
        with pytest.raises(InvalidDelayError):
            sinusoid_delay(-1.0, 0.1, 5.0)

    def test_tau_bounds_bracket(self, sin_delay):
        d = sin_delay(0.1)
        lo, hi = d.tau_bounds()
        ts = np.linspace(0.0, d.period, 1000)
        vals = d.tau(ts)
        assert lo <= np.min(vals) and np.max(vals) <= hi


class TestValidateHypotheses:
    def test_reference_config_passes(self, sin_delay):
        rep = sin_delay(0.1).validate_hypotheses()
        assert rep.passed
        assert rep.tau_dot_ok and rep.eps_ratio_ok and rep.mean_coeff_ok
        assert rep.resonance_ok and not rep.resonance_warn
        # raw margin is 15 mod pi, computed independently
        assert rep.resonance_margin == pytest.approx(math.fmod(15.0, math.pi), abs=1e-12)
        assert rep.resonance_margin == pytest.approx(2.4336, abs=1e-4)
        # the pass/fail decision uses the distance to the nearest multiple
        assert rep.resonance_distance == pytest.approx(math.pi - math.fmod(15.0, math.pi), abs=1e-12)

    def test_exact_resonance_fails(self):
        rep = sinusoid_delay(math.pi, 0.01, 1.0).validate_hypotheses()
        assert not rep.resonance_ok
        assert not rep.passed

    def test_tau_dot_bound_violated(self, sin_delay):
        # eps * omega = 1.25: sufficient bound fails, dense sampling decides
        rep = sin_delay(0.25).validate_hypotheses()
        assert not rep.tau_dot_ok
        assert rep.tau_dot_method == "sampled"
        assert rep.tau_dot_sup == pytest.approx(1.25, rel=1e-6)

    def test_sufficient_bound_used_when_decisive(self, sin_delay):
        rep = sin_delay(0.1).validate_hypotheses()
        assert rep.tau_dot_method == "coefficient-sum"
        assert rep.tau_dot_sup == pytest.approx(0.5, abs=1e-12)

    def test_eps_ratio_threshold(self):
        rep = sinusoid_delay(3.0, 0.7, 5.0 / 3.0).validate_hypotheses()
        assert not rep.eps_ratio_ok
        assert rep.eps_ratio == pytest.approx(0.7 / 3.0)

    def test_mean_coefficient_flagged(self):
        shape = FourierSeries(omega=2.0, coeffs={0: 0.1 + 0j, 1: -0.25j, -1: 0.25j})
        rep = PeriodicDelay(tau0=3.0, eps=0.05, shape=shape).validate_hypotheses()
        assert not rep.mean_coeff_ok

    def test_shape_bound_informational(self):
        # sup > 1 flags the report but passed stays True (informational)
        shape = FourierSeries(omega=2.0, coeffs={1: -0.6j, -1: 0.6j})
        rep = PeriodicDelay(tau0=5.0, eps=0.1, shape=shape).validate_hypotheses()
        assert not rep.shape_within_unit
        assert rep.passed

    def test_as_dict_roundtrips_json(self, sin_delay):
        rep = sin_delay(0.1).validate_hypotheses()
        blob = json.dumps(rep.as_dict())
        assert json.loads(blob)["passed"] is True


class TestConfigIngestion:
    def test_sin_sugar(self):
        d = delay_from_config({"tau0": 3.0, "eps": 0.1, "omega": 5.0, "kind": "sin"})
        assert d.tau(math.pi / 10) == pytest.approx(3.1, abs=1e-12)

    def test_explicit_coeffs_match_sugar(self):
        cfg = {
            "tau0": 3.0, "eps": 0.1, "omega": 5.0,
            "coeffs": [[1, 0.0, -0.5], [-1, 0.0, 0.5]],
        }
        d = delay_from_config(cfg)
        ref = sinusoid_delay(3.0, 0.1, 5.0)
        ts = np.linspace(0, 2, 50)
        assert np.allclose(d.tau(ts), ref.tau(ts), atol=1e-15)

    def test_missing_field_errors(self):
        with pytest.raises(InvalidDelayError):
            delay_from_config({"tau0": 3.0, "eps": 0.1})

    def test_json_file(self, tmp_path):
        path = tmp_path / "delay.json"
        path.write_text(json.dumps({"tau0": 3.0, "eps": 0.05, "omega": 5.0, "kind": "sin"}))
        d = load_delay(path)
        assert d.eps == 0.05

    def test_toml_file(self, tmp_path):
        path = tmp_path / "delay.toml"
        path.write_text('tau0 = 3.0\neps = 0.05\nomega = 5.0\nkind = "sin"\n')
        d = load_delay(path)
        assert d.tau0 == 3.0 and d.omega == 5.0
