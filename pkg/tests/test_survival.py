import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from arrivalnet.survival import (
    CensorObservation,
    WeibullParams,
    excess_density,
    excess_survival,
    log_likelihood,
    step_log_likelihood,
    step_log_likelihood_gradient,
    weibull_density,
    weibull_survival,
)

scales = st.floats(0.2, 50.0)
shapes = st.floats(0.2, 9.5)
times = st.floats(0.0, 60.0)


class TestWeibull:
    def test_survival_at_zero(self):
        assert weibull_survival(0.0, WeibullParams(3.0, 2.5)) == 1.0

    @pytest.mark.parametrize("k", [0.5, 1.0, 2.0, 7.0])
    def test_survival_at_scale(self, k):
        assert weibull_survival(4.0, WeibullParams(4.0, k)) == pytest.approx(math.exp(-1), abs=1e-15)

    def test_survival_value(self):
        assert weibull_survival(3.0, WeibullParams(2.0, 2.0)) == pytest.approx(0.1053992, abs=1e-7)

    def test_density_values(self):
        assert weibull_density(0.0, WeibullParams(2.0, 1.0)) == pytest.approx(0.5, rel=1e-9)
        assert weibull_density(2.0, WeibullParams(2.0, 2.0)) == pytest.approx(0.3678794, abs=1e-7)
        assert weibull_density(1.0, WeibullParams(1.0, 3.0)) == pytest.approx(1.1036383, abs=1e-7)

    def test_density_below_one_shape_is_finite_at_zero(self):
        assert np.isfinite(weibull_density(0.0, WeibullParams(1.0, 0.5)))

    def test_negative_time_rejected(self):
        p = WeibullParams(1.0, 1.0)
        with pytest.raises(ValueError):
            weibull_survival(-1.0, p)
        with pytest.raises(ValueError):
            weibull_density(-0.5, p)
        with pytest.raises(ValueError):
            excess_survival(-0.5, 1.0, p)

    @pytest.mark.parametrize("scale,shape", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (1.0, 10.0)])
    def test_invalid_params(self, scale, shape):
        with pytest.raises(ValueError):
            WeibullParams(scale, shape)

    def test_vectorized(self):
        y = np.array([0.0, 1.0, 2.0])
        out = weibull_survival(y, WeibullParams(1.0, 1.0))
        np.testing.assert_allclose(out, np.exp(-y))


class TestExcess:
    def test_memoryless(self):
        p = WeibullParams(2.0, 1.0)
        for s in (0.0, 1.0, 7.5):
            assert excess_survival(1.5, s, p) == pytest.approx(math.exp(-0.75), abs=1e-15)

    def test_no_conditioning(self):
        p = WeibullParams(2.0, 1.7)
        assert excess_survival(2.3, 0.0, p) == pytest.approx(weibull_survival(2.3, p), abs=1e-15)
        assert excess_density(2.3, 0.0, p) == pytest.approx(weibull_density(2.3, p), rel=1e-12)

    def test_value(self):
        assert excess_survival(1.0, 1.0, WeibullParams(2.0, 2.0)) == pytest.approx(0.4723665, abs=1e-7)

    def test_density_memoryless(self):
        assert excess_density(1.0, 5.0, WeibullParams(2.0, 1.0)) == pytest.approx(0.3032653, abs=1e-7)

    @pytest.mark.parametrize("s,lam,k", [(0.0, 2.0, 1.5), (3.0, 2.0, 2.0), (1.0, 5.0, 0.7)])
    def test_density_integrates_to_one(self, s, lam, k):
        p = WeibullParams(lam, k)
        total, _ = integrate.quad(lambda t: excess_density(t, s, p), 0, np.inf, limit=200)
        assert total == pytest.approx(1.0, abs=1e-6)

    @given(scales, shapes, times, times)
    def test_factorization(self, lam, k, s, t):
        p = WeibullParams(lam, k)
        lhs = excess_survival(t, s, p) * weibull_survival(s, p)
        assert lhs == pytest.approx(weibull_survival(s + t, p), abs=1e-12)

    @given(scales, times, times, times)
    def test_memoryless_property(self, lam, s1, s2, t):
        p = WeibullParams(lam, 1.0)
        assert abs(excess_survival(t, s1, p) - excess_survival(t, s2, p)) <= 1e-12

    @given(scales, shapes, times, st.floats(0.0, 30.0), st.floats(0.0, 30.0))
    def test_nonincreasing(self, lam, k, s, t1, dt):
        p = WeibullParams(lam, k)
        assert excess_survival(0.0, s, p) == 1.0
        assert excess_survival(t1 + dt, s, p) <= excess_survival(t1, s, p)


class TestStepLikelihood:
    def test_censored_at_zero(self):
        assert step_log_likelihood(CensorObservation(0, 0, False), WeibullParams(3.0, 2.0)) == 0.0

    def test_uncensored_exponential_bin(self):
        ll = step_log_likelihood(CensorObservation(0, 0, True), WeibullParams(1.0, 1.0))
        assert ll == pytest.approx(-0.4586751, abs=1e-7)

    def test_censored_exact(self):
        ll = step_log_likelihood(CensorObservation(1, 1, False), WeibullParams(2.0, 2.0))
        assert ll == pytest.approx(-0.75, abs=1e-15)

    def test_uncensored_matches_bin_mass(self):
        p = WeibullParams(3.0, 1.8)
        obs = CensorObservation(2, 4, True)
        mass = excess_survival(4, 2, p) - excess_survival(5, 2, p)
        assert step_log_likelihood(obs, p) == pytest.approx(math.log(mass), rel=1e-12)

    def test_floor_keeps_loss_finite(self):
        ll = step_log_likelihood(CensorObservation(0, 500, False), WeibullParams(1.0, 3.0))
        assert ll == pytest.approx(math.log(1e-12))

    def test_negative_observation_rejected(self):
        with pytest.raises(ValueError):
            CensorObservation(-1, 0, True)

    @given(scales, shapes, st.integers(0, 40), st.integers(0, 40), st.booleans())
    def test_never_positive(self, lam, k, tse, tte, unc):
        assert step_log_likelihood(CensorObservation(tse, tte, unc), WeibullParams(lam, k)) <= 0.0

    def test_bins_sum_to_one(self):
        # integer bins partition [0, inf) without double counting
        p = WeibullParams(2.5, 1.3)
        total = sum(math.exp(step_log_likelihood(CensorObservation(1, j, True), p)) for j in range(200))
        assert total == pytest.approx(1.0, abs=1e-9)  # floored tail bins add <= 200 * 1e-12


def fd_grad(obs, lam, k, h=1e-5):
    f = lambda a, b: step_log_likelihood(obs, WeibullParams(a, b))
    return (f(lam + h, k) - f(lam - h, k)) / (2 * h), (f(lam, k + h) - f(lam, k - h)) / (2 * h)


class TestGradient:
    def test_matches_finite_differences(self):
        obs = CensorObservation(1, 2, False)
        analytic = step_log_likelihood_gradient(obs, WeibullParams(2.0, 1.5))
        numeric = fd_grad(obs, 2.0, 1.5)
        np.testing.assert_allclose(analytic, numeric, rtol=1e-5)

    def test_exponential_tail(self):
        lam, t = 3.0, 4.0
        d_lam, _ = step_log_likelihood_gradient(CensorObservation(2, t, False), WeibullParams(lam, 1.0))
        assert d_lam == pytest.approx(t / lam**2, rel=1e-12)

    def test_unconditioned_equals_plain_log_survival(self):
        lam, k, y = 2.0, 1.7, 3.0
        d_lam, d_k = step_log_likelihood_gradient(CensorObservation(0, y, False), WeibullParams(lam, k))
        # d/dθ of -(y/λ)^k
        H = (y / lam) ** k
        assert d_lam == pytest.approx(k * H / lam, rel=1e-12)
        assert d_k == pytest.approx(-H * math.log(y / lam), rel=1e-12)

    @settings(max_examples=300)
    @given(st.floats(0.5, 20.0), st.floats(0.3, 6.0), st.integers(0, 10), st.integers(0, 10), st.booleans())
    def test_randomized_grid(self, lam, k, tse, tte, unc):
        obs = CensorObservation(tse, tte, unc)
        ll = step_log_likelihood(obs, WeibullParams(lam, k))
        if ll < math.log(1e-12) + 1e-3:
            return  # floored region has zero gradient by construction
        analytic = np.array(step_log_likelihood_gradient(obs, WeibullParams(lam, k)))
        numeric = np.array(fd_grad(obs, lam, k))
        err = np.abs(analytic - numeric)
        ok = (err <= 1e-4 * np.maximum(np.abs(analytic), np.abs(numeric))) | (err <= 1e-7)
        assert ok.all(), (analytic, numeric)

    def test_vectorized_grad_shape(self):
        ll, dl, dk = log_likelihood(np.zeros((2, 3)), np.ones((2, 3)), np.ones((2, 3), bool), 2.0, 1.5, with_grad=True)
        assert ll.shape == dl.shape == dk.shape == (2, 3)
