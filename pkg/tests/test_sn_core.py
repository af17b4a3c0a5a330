"""Skew-normal and truncated skew-normal evaluation.

Frozen reference values were computed once with mpmath at 40 digits
(direct quadrature of the defining integrals), not with this package.
"""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate as sci_integrate

from tsnkit import (
    DataOutsideWindowError,
    DegenerateWindowError,
    InvalidParameterError,
    SnParams,
    TruncationWindow,
    TsnModel,
    owen_t,
    sn_cdf,
    sn_pdf,
    sn_quantile,
    std_normal_cdf,
    std_normal_pdf,
    tsn_cdf,
    tsn_loglik,
    tsn_pdf,
)
from tsnkit.sn_core import sn_sf, tsn_loglik_many

xi_s = st.floats(-3, 3)
omega_s = st.floats(0.2, 5)
alpha_s = st.floats(-10, 10)


class TestParameterTypes:
    def test_omega_must_be_positive(self):
        with pytest.raises(InvalidParameterError):
            SnParams(0.0, 0.0, 1.0)
        with pytest.raises(InvalidParameterError):
            SnParams(0.0, -1.0, 1.0)

    @pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
    def test_fields_must_be_finite(self, bad):
        with pytest.raises(InvalidParameterError):
            SnParams(bad, 1.0, 0.0)
        with pytest.raises(InvalidParameterError):
            SnParams(0.0, 1.0, bad)

    def test_window_ordering(self):
        with pytest.raises(InvalidParameterError):
            TruncationWindow(1.0, 1.0)
        with pytest.raises(InvalidParameterError):
            TruncationWindow(2.0, 1.0)
        with pytest.raises(InvalidParameterError):
            TruncationWindow(math.inf, math.inf)
        assert TruncationWindow().is_unbounded
        assert not TruncationWindow(0.0).is_unbounded

    def test_degenerate_window_is_rejected(self):
        with pytest.raises(DegenerateWindowError):
            TsnModel(SnParams(0, 1, 0), TruncationWindow(10.0, math.inf))

    def test_model_mass(self):
        m = TsnModel(SnParams(0, 1, 0), TruncationWindow(0.0, math.inf))
        assert m.mass == pytest.approx(0.5, abs=1e-15)


class TestStandardNormal:
    def test_pdf_values(self):
        assert std_normal_pdf(0.0) == pytest.approx(0.3989422804014327, abs=1e-15)
        assert std_normal_pdf(1.0) == pytest.approx(0.24197072451914335, abs=1e-15)
        assert std_normal_pdf(-1.0) == std_normal_pdf(1.0)

    def test_cdf_values(self):
        assert std_normal_cdf(0.0) == 0.5
        assert std_normal_cdf(math.inf) == 1.0
        assert std_normal_cdf(-math.inf) == 0.0
        assert std_normal_cdf(1.2816) == pytest.approx(0.90000849990232483, abs=1e-15)

    def test_cdf_monotone(self):
        z = np.linspace(-40, 40, 2001)
        assert np.all(np.diff(std_normal_cdf(z)) >= 0)


class TestOwenT:
    @pytest.mark.parametrize(
        "h, a, expected",
        [
            (1.0, 1.0, 0.066741882165700966623),
            (0.5, 2.0, 0.14158060365397839347),
            (2.5, 0.3, 0.0018660157678000370886),
            (-1.2, 7.0, 0.057534835110854138253),
            (0.1, -40.0, -0.23008601049357707691),
        ],
    )
    def test_against_quadrature_oracle(self, h, a, expected):
        assert owen_t(h, a) == pytest.approx(expected, abs=1e-14)

    def test_simple_values(self):
        assert owen_t(3.0, 0.0) == 0.0
        assert owen_t(0.0, 1.0) == pytest.approx(0.125, abs=1e-15)

    @given(st.floats(-8, 8), st.floats(-50, 50))
    def test_symmetries(self, h, a):
        t = owen_t(h, a)
        assert owen_t(h, -a) == pytest.approx(-t, abs=1e-15)
        assert owen_t(-h, a) == pytest.approx(t, abs=1e-15)


class TestSkewNormal:
    def test_pdf_values(self):
        assert sn_pdf(0.0, SnParams(0, 1, 7)) == pytest.approx(0.3989422804014327, abs=1e-15)
        assert sn_pdf(1.0, SnParams(0, 1, 0)) == pytest.approx(0.24197072451914335, abs=1e-15)
        assert sn_pdf(1.0, SnParams(0, 1, 2)) == pytest.approx(0.47293171721747263368, abs=1e-14)

    @pytest.mark.parametrize(
        "x, p, expected",
        [
            (0.7, SnParams(0.2, 1.5, -3.0), 0.9804088998029267606),
            (-1.1, SnParams(0.5, 0.8, 4.0), 1.9215348329889647112e-18),
            (2.0, SnParams(-1.0, 2.0, 10.0), 0.86638559746228386799),
        ],
    )
    def test_cdf_against_quadrature_oracle(self, x, p, expected):
        assert sn_cdf(x, p) == pytest.approx(expected, rel=1e-10, abs=1e-15)

    def test_cdf_values(self):
        assert sn_cdf(1.3, SnParams(1.3, 2.0, 0.0)) == pytest.approx(0.5, abs=1e-15)
        assert sn_cdf(0.0, SnParams(0, 1, 1)) == pytest.approx(0.25, abs=1e-15)
        assert sn_cdf(math.inf, SnParams(0.3, 2.0, -4.0)) == 1.0
        assert sn_cdf(-math.inf, SnParams(0.3, 2.0, -4.0)) == 0.0

    def test_upper_tail_keeps_precision(self):
        p = SnParams(0, 1, 3)
        # survival in the far upper tail, where 1 - cdf would underflow to 0
        assert sn_sf(9.0, p) == pytest.approx(2 * std_normal_cdf(-9.0), rel=1e-10)

    def test_quantile_values(self):
        assert sn_quantile(0.5, SnParams(0, 1, 0)) == pytest.approx(0.0, abs=1e-12)
        assert sn_quantile(0.25, SnParams(0, 1, 1)) == pytest.approx(0.0, abs=1e-8)
        assert sn_quantile(0.9, SnParams(0, 1, 0)) == pytest.approx(1.281551565544600467, abs=1e-9)

    @pytest.mark.parametrize("prob", [0.0, 1.0, -0.1, 1.5, math.nan])
    def test_quantile_domain(self, prob):
        with pytest.raises(InvalidParameterError):
            sn_quantile(prob, SnParams(0, 1, 0))

    @given(xi_s, omega_s, alpha_s)
    def test_pdf_integrates_to_one(self, xi, omega, alpha):
        p = SnParams(xi, omega, alpha)
        val, _ = sci_integrate.quad(lambda x: sn_pdf(x, p), -np.inf, xi, epsabs=1e-13)
        val2, _ = sci_integrate.quad(lambda x: sn_pdf(x, p), xi, np.inf, epsabs=1e-13)
        assert val + val2 == pytest.approx(1.0, abs=1e-8)

    @given(xi_s, omega_s, alpha_s, st.floats(-4, 4))
    def test_cdf_derivative_is_pdf(self, xi, omega, alpha, z):
        p = SnParams(xi, omega, alpha)
        x = xi + omega * z
        h = 1e-5 * omega
        fd = (sn_cdf(x + h, p) - sn_cdf(x - h, p)) / (2 * h)
        assert fd == pytest.approx(sn_pdf(x, p), abs=1e-6)

    @given(xi_s, omega_s, st.floats(-6, 6))
    def test_alpha_zero_is_normal(self, xi, omega, z):
        p = SnParams(xi, omega, 0.0)
        x = xi + omega * z
        assert sn_pdf(x, p) == pytest.approx(std_normal_pdf(z) / omega, abs=1e-12)
        assert sn_cdf(x, p) == pytest.approx(std_normal_cdf(z), abs=1e-12)

    @given(xi_s, omega_s, alpha_s, st.floats(-6, 6))
    def test_reflection(self, xi, omega, alpha, z):
        x = xi + omega * z
        a = sn_pdf(x, SnParams(xi, omega, alpha))
        b = sn_pdf(2 * xi - x, SnParams(xi, omega, -alpha))
        assert a == pytest.approx(b, abs=1e-12)

    @given(xi_s, omega_s, alpha_s)
    def test_cdf_monotone_and_bounded(self, xi, omega, alpha):
        x = xi + omega * np.linspace(-20, 20, 801)
        f = sn_cdf(x, SnParams(xi, omega, alpha))
        assert np.all((f >= 0) & (f <= 1))
        # nondecreasing up to roundoff of the cancelling lower-tail difference
        assert np.all(np.diff(f) >= -1e-15)

    @given(xi_s, omega_s, alpha_s, st.floats(0.001, 0.999))
    def test_quantile_round_trip(self, xi, omega, alpha, prob):
        p = SnParams(xi, omega, alpha)
        assert abs(sn_cdf(sn_quantile(prob, p), p) - prob) <= 1e-9

    def test_quantile_monotone(self):
        p = SnParams(0.4, 1.3, -6.0)
        q = sn_quantile(np.linspace(0.001, 0.999, 999), p)
        assert np.all(np.diff(q) > 0)


class TestTruncated:
    def test_untruncated_pdf_equals_parent(self):
        p = SnParams(0.2, 1.4, -2.0)
        m = TsnModel(p, TruncationWindow())
        x = np.linspace(-4, 4, 17)
        np.testing.assert_allclose(tsn_pdf(x, m), sn_pdf(x, p), rtol=1e-14)

    def test_half_normal_pdf(self):
        m = TsnModel(SnParams(0, 1, 0), TruncationWindow(0.0, math.inf))
        assert tsn_pdf(0.5, m) == pytest.approx(0.70413065352859894, abs=1e-14)
        assert tsn_pdf(-1.0, m) == 0.0

    def test_cdf_endpoints_and_symmetry(self):
        w = TruncationWindow(-1.2816, 1.2816)
        m = TsnModel(SnParams(0, 1, 0), w)
        assert tsn_cdf(w.lower, m) == 0.0
        assert tsn_cdf(w.upper, m) == 1.0
        assert tsn_cdf(0.0, m) == pytest.approx(0.5, abs=1e-15)
        assert tsn_cdf(-5.0, m) == 0.0
        assert tsn_cdf(5.0, m) == 1.0

    @given(xi_s, omega_s, alpha_s, st.floats(-2, 1), st.floats(0.2, 3))
    def test_truncated_pdf_integrates_to_one(self, xi, omega, alpha, lo, width):
        L = xi + omega * lo
        U = L + omega * width
        try:
            m = TsnModel(SnParams(xi, omega, alpha), TruncationWindow(L, U))
        except DegenerateWindowError:
            return
        val, _ = sci_integrate.quad(lambda x: tsn_pdf(x, m), L, U, epsabs=1e-13, epsrel=1e-12, limit=200)
        assert val == pytest.approx(1.0, abs=1e-8)

    def test_loglik_values(self):
        m = TsnModel(SnParams(0, 1, 5), TruncationWindow())
        assert tsn_loglik([0.0], m) == pytest.approx(-0.9189385332046727, abs=1e-14)
        assert tsn_loglik([0.0, 0.0], m) == pytest.approx(2 * -0.9189385332046727, abs=1e-14)

    def test_loglik_against_oracle(self):
        m = TsnModel(SnParams(0.3, 1.7, 2.5), TruncationWindow(-1.0, 2.2))
        assert tsn_loglik([0.0, 0.5, 1.5], m) == pytest.approx(-3.2483406938438550984, abs=1e-12)

    def test_loglik_untruncated_is_sum_of_log_pdf(self):
        p = SnParams(-0.5, 0.8, 3.0)
        x = np.array([-0.7, -0.2, 0.1, 0.9, 2.0])
        m = TsnModel(p, TruncationWindow())
        assert tsn_loglik(x, m) == pytest.approx(float(np.sum(np.log(sn_pdf(x, p)))), rel=1e-13)

    def test_loglik_deep_tail_is_finite(self):
        # alpha * z far below -10: log Phi must not underflow
        m = TsnModel(SnParams(0, 1, 50), TruncationWindow())
        assert math.isfinite(tsn_loglik([-1.0], m))

    def test_loglik_rejects_outside_data(self):
        m = TsnModel(SnParams(0, 1, 0), TruncationWindow(0.0, 1.0))
        with pytest.raises(DataOutsideWindowError):
            tsn_loglik([0.5, 1.5], m)

    def test_loglik_many_matches_scalar(self):
        w = TruncationWindow(-1.0, 2.2)
        x = np.array([0.0, 0.5, 1.5])
        xi = np.array([0.3, -0.2, 0.0])
        om = np.array([1.7, 0.9, 1.1])
        al = np.array([2.5, -1.0, 0.0])
        many = tsn_loglik_many(x, w, xi, om, al)
        for k in range(3):
            m = TsnModel(SnParams(xi[k], om[k], al[k]), w)
            assert many[k] == pytest.approx(tsn_loglik(x, m), rel=1e-13)
