"""Energy-detector ROC: closed forms, oracles, monotonicity, inversion."""

import math

import mpmath as mp
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from osabench.detection import (
    NodeDetectionProbs,
    PhyParams,
    detection_prob,
    false_alarm_prob,
    log_reg_lower_gamma,
    node_probs,
    reg_upper_gamma,
    threshold_for_false_alarm,
)
from osabench.errors import ValidationError

from conftest import quad_detection, quad_false_alarm

GAMMA_MINUS_5_DB = 10 ** (-0.5)


class TestIncompleteGamma:
    @pytest.mark.parametrize("a", [1, 2, 5, 10, 100, 1000, 10000])
    @pytest.mark.parametrize("x_scale", [1e-6, 0.2, 0.5, 0.8, 0.95, 1.0, 1.05, 1.2, 2.0, 5.0])
    def test_matches_scipy(self, a, x_scale):
        x = a * x_scale
        ref = special.gammaincc(a, x)
        if ref < 1e-290:
            return
        assert reg_upper_gamma(a, x) == pytest.approx(ref, rel=2e-12)

    def test_matches_mpmath_to_1e12(self):
        mp.mp.dps = 40
        for a in (3, 50, 1000, 10000):
            for x in (0.5 * a, a, 1.5 * a):
                ref = float(mp.gammainc(a, x, mp.inf, regularized=True))
                assert reg_upper_gamma(a, x) == pytest.approx(ref, rel=1e-12)

    def test_log_lower_tail_stays_finite(self):
        # deep left tail where the plain value underflows
        value = log_reg_lower_gamma(999, 1.0)
        assert math.isfinite(value) and value < -5000

    def test_domain_errors(self):
        with pytest.raises(ValidationError):
            reg_upper_gamma(0.0, 1.0)
        with pytest.raises(ValidationError):
            reg_upper_gamma(2.0, -1.0)


class TestFalseAlarm:
    def test_zero_threshold_is_certain(self):
        assert false_alarm_prob(0.0, 4) == 1.0

    def test_unit_epsilon_closed_form(self):
        assert false_alarm_prob(2.0, 1) == pytest.approx(math.exp(-1.0), abs=1e-14)

    def test_quadrature_oracle(self):
        # frozen from the independent quadrature of the gamma density
        assert quad_false_alarm(5.0, 3) == pytest.approx(0.5438131158833295, abs=1e-12)
        assert false_alarm_prob(5.0, 3) == pytest.approx(0.5438131158833295, rel=1e-10)

    def test_domain_errors(self):
        with pytest.raises(ValidationError):
            false_alarm_prob(1.0, 0)
        with pytest.raises(ValidationError):
            false_alarm_prob(-0.1, 3)


class TestDetection:
    def test_zero_threshold_always_detects(self):
        for eps in (1, 3, 17):
            for gamma in (0.05, 1.0, 30.0):
                assert detection_prob(0.0, eps, gamma) == 1.0

    def test_unit_epsilon_closed_form(self):
        assert detection_prob(2.0, 1, 1.0) == pytest.approx(math.exp(-0.5), abs=1e-14)

    def test_vanishing_snr_collapses_to_false_alarm(self):
        assert detection_prob(2.0, 1, 1e-12) == pytest.approx(math.exp(-1.0), rel=1e-9)

    @pytest.mark.parametrize(
        "theta,eps,gamma",
        [(2.0, 1, 1.0), (5.0, 3, GAMMA_MINUS_5_DB), (10.0, 5, 1.0), (20.0, 10, 0.5),
         (30.0, 20, GAMMA_MINUS_5_DB), (8.0, 4, 10.0)],
    )
    def test_quadrature_oracle(self, theta, eps, gamma):
        assert detection_prob(theta, eps, gamma) == pytest.approx(
            quad_detection(theta, eps, gamma), rel=1e-8
        )

    def test_textbook_sum_form_high_precision(self):
        # The finite-sum-plus-scaled-correction form is catastrophically
        # unstable in doubles, so the reference is evaluated in mpmath.
        mp.mp.dps = 60

        def textbook(theta, eps, g):
            theta, g = mp.mpf(theta), mp.mpf(g)
            s1 = mp.fsum(theta**h / (mp.factorial(h) * 2**h) for h in range(eps - 1))
            s2 = mp.fsum(
                (theta * g) ** j / (mp.factorial(j) * (2 + 2 * g) ** j) for j in range(eps - 1)
            )
            return mp.e ** (-theta / 2) * (
                s1 + ((1 + g) / g) ** (eps - 1) * (mp.e ** (theta * g / (2 + 2 * g)) - s2)
            )

        for eps in (2, 5, 20, 100):
            for theta_scale in (0.2, 1.0, 2.0):
                theta = theta_scale * 2 * eps
                for g in (0.1, GAMMA_MINUS_5_DB, 1.0, 10.0):
                    ref = textbook(theta, eps, g)
                    if ref < mp.mpf(1e-280):
                        continue
                    assert detection_prob(theta, eps, g) == pytest.approx(
                        float(ref), rel=1e-11
                    )

    def test_large_time_bandwidth_is_stable(self):
        # the scaled-correction term overflows naively around eps ~ a few hundred
        for eps in (500, 2000, 10000):
            theta = threshold_for_false_alarm(0.1, eps)
            value = detection_prob(theta, eps, GAMMA_MINUS_5_DB)
            assert 0.0 <= value <= 1.0

    def test_domain_errors(self):
        with pytest.raises(ValidationError):
            detection_prob(1.0, 3, 0.0)
        with pytest.raises(ValidationError):
            detection_prob(1.0, 3, -0.5)


class TestMonotonicityAndDominance:
    THETAS = [0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 35.0, 50.0]

    @pytest.mark.parametrize("eps", range(1, 21))
    def test_false_alarm_decreasing_in_theta(self, eps):
        values = [false_alarm_prob(t, eps) for t in self.THETAS]
        assert all(a > b for a, b in zip(values, values[1:]))

    @pytest.mark.parametrize("eps", range(1, 21))
    @pytest.mark.parametrize("gamma", [0.1, GAMMA_MINUS_5_DB, 1.0])
    def test_detection_decreasing_in_theta(self, eps, gamma):
        values = [detection_prob(t, eps, gamma) for t in self.THETAS]
        assert all(a > b for a, b in zip(values, values[1:]))

    @pytest.mark.parametrize("eps", [1, 4, 12])
    def test_detection_increasing_in_gamma(self, eps):
        gammas = [0.05, 0.1, 0.5, 1.0, 5.0, 20.0]
        values = [detection_prob(6.0, eps, g) for g in gammas]
        assert all(a < b for a, b in zip(values, values[1:]))

    @pytest.mark.parametrize("eps", range(1, 21))
    @pytest.mark.parametrize("gamma", [0.1, GAMMA_MINUS_5_DB, 1.0])
    def test_detection_dominates_false_alarm(self, eps, gamma):
        for theta in self.THETAS:
            p11 = detection_prob(theta, eps, gamma)
            p10 = false_alarm_prob(theta, eps)
            assert 0.0 <= p10 <= 1.0 and 0.0 <= p11 <= 1.0
            assert p11 >= p10 - 1e-15


class TestThresholdInversion:
    def test_certain_false_alarm_means_zero_threshold(self):
        assert threshold_for_false_alarm(1.0, 7) == 0.0

    def test_unit_epsilon_inverse(self):
        assert threshold_for_false_alarm(math.exp(-1.0), 1) == pytest.approx(2.0, abs=1e-10)

    @pytest.mark.parametrize("target", [0.01, 0.1, 0.5])
    @pytest.mark.parametrize("eps", [1, 10, 100])
    def test_roundtrip(self, target, eps):
        theta = threshold_for_false_alarm(target, eps)
        assert abs(false_alarm_prob(theta, eps) - target) <= 1e-10

    @given(
        target=st.floats(min_value=1e-6, max_value=1.0, exclude_max=True),
        eps=st.integers(min_value=1, max_value=300),
    )
    @settings(max_examples=60, deadline=None)
    def test_roundtrip_property(self, target, eps):
        theta = threshold_for_false_alarm(target, eps)
        assert abs(false_alarm_prob(theta, eps) - target) <= 1e-10

    def test_domain_errors(self):
        for bad in (0.0, -0.1, 1.5):
            with pytest.raises(ValidationError):
                threshold_for_false_alarm(bad, 4)


class TestPhyParams:
    def test_epsilon_floor(self):
        phy = PhyParams(t_e=20.0, alpha=1.0 / 3.0, M=3, b=1.0, gamma=1.0, theta=1.0)
        assert phy.epsilon == 20
        assert phy.collected_gamma == pytest.approx(20.0)

    def test_empty_time_bandwidth_product_rejected(self):
        with pytest.raises(ValidationError):
            PhyParams(t_e=0.4, alpha=1.0 / 3.0, M=3, b=1.0, gamma=1.0, theta=1.0)

    def test_narrow_radio_rejected(self):
        with pytest.raises(ValidationError):
            PhyParams(t_e=10.0, alpha=0.1, M=3, b=1.0, gamma=1.0, theta=1.0)

    def test_node_probs_in_range(self):
        phy = PhyParams(t_e=50.0, alpha=1.0 / 3.0, M=3, b=1.0,
                        gamma=GAMMA_MINUS_5_DB, theta=60.0)
        probs = node_probs(phy)
        assert 0.0 <= probs.p10 <= probs.p11 <= 1.0
        assert probs.p00 == pytest.approx(1.0 - probs.p10)
        assert probs.p01 == pytest.approx(1.0 - probs.p11)

    def test_probability_bounds_enforced(self):
        with pytest.raises(ValidationError):
            NodeDetectionProbs(p10=1.2, p11=0.5)
