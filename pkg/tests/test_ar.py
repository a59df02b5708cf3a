import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from avgerr.ar import (PAPER_AR6, PRESETS, WHITE_NOISE, ArModel, ar_autocovariance,
                       ar_error_estimate, ar_log_likelihood, ar_long_run_variance,
                       ar_recursion, fit_ar_mle, levinson_durbin, pacf_to_coeffs,
                       simulate_ar, yule_walker_truth)
from avgerr.errors import InvalidInputError
from avgerr.rng import make_rng
from avgerr.series import empirical_autocorrelation

from oracles import ar_autocovariance_ma, gaussian_ar1_loglik

pacf_lists = st.lists(st.floats(-0.95, 0.95), min_size=1, max_size=6)


class TestModel:
    def test_presets(self):
        assert PRESETS["paper-ar6"] is PAPER_AR6
        assert PAPER_AR6.order == 6 and PAPER_AR6.noise_variance == 0.1
        assert PAPER_AR6.is_stationary and WHITE_NOISE.is_stationary

    def test_ar6_poles_inside_unit_circle(self):
        assert np.max(np.abs(PAPER_AR6.poles())) < 1.0

    def test_validation(self):
        with pytest.raises(InvalidInputError):
            ArModel((0.5,), 0.0)
        with pytest.raises(InvalidInputError):
            ArModel((np.nan,), 1.0)

    def test_unstable_refused(self):
        bad = ArModel((1.2,), 1.0)
        assert not bad.is_stationary
        with pytest.raises(InvalidInputError):
            simulate_ar(bad, 10)
        with pytest.raises(InvalidInputError):
            yule_walker_truth(bad, 3)
        with pytest.raises(InvalidInputError):
            simulate_ar(ArModel((1.0,), 1.0), 10)  # unit root


class TestSimulation:
    def test_white_noise_is_iid_normal(self):
        x = simulate_ar(ArModel((0.0,), 1.0), 1000, init=[5.0], seed=4)
        np.testing.assert_array_equal(x.samples, make_rng(4).standard_normal(1000))

    def test_noise_free_recursion(self):
        a = (0.5, 0.3, 0.2)
        out = ar_recursion(a, np.zeros(5), init=[1.0, 2.0, 4.0])
        hist = [1.0, 2.0, 4.0]
        for _ in range(5):
            hist.append(0.5 * hist[-1] + 0.3 * hist[-2] + 0.2 * hist[-3])
        np.testing.assert_allclose(out, hist[3:], rtol=1e-15)

    def test_recursion_with_mean(self):
        out = ar_recursion((0.5,), [1.0, 0.0], init=[12.0], mean=10.0)
        np.testing.assert_allclose(out, [10 + 0.5 * 2 + 1.0, 10 + 0.5 * 2.0])

    def test_deterministic(self):
        a = simulate_ar(PAPER_AR6, 500, seed=9).samples
        b = simulate_ar(PAPER_AR6, 500, seed=9).samples
        c = simulate_ar(PAPER_AR6, 500, seed=10).samples
        assert a.tobytes() == b.tobytes()
        assert not np.array_equal(a, c)

    def test_init_length(self):
        with pytest.raises(InvalidInputError):
            simulate_ar(PAPER_AR6, 10, init=[1.0, 2.0])

    def test_ar6_decays_from_100(self):
        runs = np.array([simulate_ar(PAPER_AR6, 200, init=np.full(6, 100.0), seed=j).samples
                         for j in range(200)])
        mean = runs.mean(axis=0)
        assert mean[0] > 90
        assert np.all(np.abs(mean[80:]) < 15)


class TestYuleWalker:
    @given(st.floats(-0.95, 0.95), st.floats(0.1, 5.0))
    def test_ar1_closed_form(self, a, v):
        stats = yule_walker_truth(ArModel((a,), v), 10)
        assert stats.sigma2 == pytest.approx(v / (1 - a * a), rel=1e-12)
        np.testing.assert_allclose(stats.rho, a ** np.arange(11), rtol=1e-10, atol=1e-14)

    def test_matches_ma_representation(self):
        gamma = ar_autocovariance(PAPER_AR6.coeffs, 0.1, 30)
        oracle = ar_autocovariance_ma(PAPER_AR6.coeffs, 0.1, 30)
        np.testing.assert_allclose(gamma, oracle, rtol=1e-9)

    def test_recursion_holds(self):
        a = np.array(PAPER_AR6.coeffs)
        g = ar_autocovariance(a, 0.1, 400)
        for h in range(1, 401):
            pred = sum(a[j] * g[abs(h - j - 1)] for j in range(6))
            assert pred == pytest.approx(g[h], rel=1e-10, abs=1e-10 * g[0])

    def test_ar6_statistics_sensitivity_to_rounding(self):
        # the printed coefficients are rounded to 4 decimals; the statistics are
        # so sensitive to them that a perturbation of a few 1e-6 moves sigma by 0.07
        printed = yule_walker_truth(PAPER_AR6, 8)
        assert math.sqrt(printed.sigma2) == pytest.approx(24.8979, abs=1e-3)
        close = (3.1378027256020866, -3.9788978644091664, 2.678801770328144,
                 -1.0400976008642664, 0.2139018831868268, -0.013298713970886814)
        assert np.max(np.abs(np.array(close) - PAPER_AR6.coeffs)) < 5e-5
        alt = yule_walker_truth(ArModel(close, 0.1), 8)
        assert math.sqrt(alt.sigma2) == pytest.approx(24.97, abs=0.01)
        table = [0.9967, 0.9870, 0.9716, 0.9516, 0.9277, 0.9010, 0.8722, 0.8418]
        np.testing.assert_allclose(alt.rho[1:], table, atol=5e-4)
        # the printed-coefficient values still agree to about 1e-3
        np.testing.assert_allclose(printed.rho[1:], table, atol=1.1e-3)

    def test_long_run_variance(self):
        stats = yule_walker_truth(PAPER_AR6, 200000)
        s = 200000
        from avgerr.series import exact_sq_averaging_error
        assert s * exact_sq_averaging_error(stats, s) == pytest.approx(
            ar_long_run_variance(PAPER_AR6), rel=5e-3)

    def test_matches_long_simulation(self):
        x = simulate_ar(ArModel((0.7, -0.2), 1.0), 10 ** 6, seed=2)
        emp = empirical_autocorrelation(x, 20)
        exact = yule_walker_truth(ArModel((0.7, -0.2), 1.0), 20)
        # Monte Carlo band: about 5 / sqrt(N)
        np.testing.assert_allclose(emp.rho, exact.rho, atol=5e-3)


class TestErrorEstimate:
    def test_white(self):
        for s in (1, 7, 100):
            assert ar_error_estimate(ArModel((0.0,), 2.0), s) == pytest.approx(2.0 / s)

    def test_ar1_rational(self):
        assert ar_error_estimate(ArModel((0.9,), 1.0), 100) == pytest.approx(
            0.9052656742377894, rel=1e-12)

    def test_bad_s(self):
        with pytest.raises(InvalidInputError):
            ar_error_estimate(WHITE_NOISE, 0)


class TestLevinson:
    @given(pacf_lists)
    def test_pacf_round_trip(self, pacf):
        coeffs = pacf_to_coeffs(pacf)
        assert np.max(np.abs(np.roots(np.r_[1.0, -coeffs]))) < 1.0
        gamma = ar_autocovariance(coeffs, 1.0, len(pacf))
        phi, kap, v = levinson_durbin(gamma, len(pacf))
        np.testing.assert_allclose(phi, coeffs, atol=1e-8)
        np.testing.assert_allclose(kap, pacf, atol=1e-8)
        assert v == pytest.approx(1.0, rel=1e-8)


class TestLikelihood:
    @given(st.floats(-0.9, 0.9), st.floats(0.2, 3.0))
    def test_ar1_exact(self, a, v):
        x = make_rng(1).standard_normal(50) + 0.3
        model = ArModel((a,), v, mean=0.3)
        assert ar_log_likelihood(model, x) == pytest.approx(
            gaussian_ar1_loglik(x, a, v, 0.3), rel=1e-10)

    def test_against_statsmodels(self):
        sm = pytest.importorskip("statsmodels.tsa.arima.model")
        x = simulate_ar(ArModel((0.6, -0.3, 0.2), 0.5), 300, seed=5).samples
        for coeffs, v in [((0.6, -0.3, 0.2), 0.5), ((0.1, 0.2, -0.1), 1.3)]:
            ref = sm.ARIMA(x, order=(3, 0, 0), trend="n").loglike(np.r_[coeffs, v])
            assert ar_log_likelihood(ArModel(coeffs, v), x) == pytest.approx(ref, rel=1e-8)


class TestMle:
    def test_ar1_consistency(self):
        x = simulate_ar(ArModel((0.8,), 1.0), 10 ** 5, seed=3)
        fit = fit_ar_mle(x, 1)
        assert fit.converged
        assert fit.coeffs[0] == pytest.approx(0.8, abs=0.01)
        assert fit.noise_variance == pytest.approx(1.0, rel=0.02)

    def test_white_noise(self):
        n = 4000
        x = simulate_ar(WHITE_NOISE, n, seed=8)
        assert abs(fit_ar_mle(x, 1).coeffs[0]) < 3 / math.sqrt(n)

    def test_improves_on_yule_walker(self):
        x = simulate_ar(PAPER_AR6, 2000, seed=1).samples
        fit = fit_ar_mle(x, 3)
        d = x - x.mean()
        gamma = np.array([np.dot(d[k:], d[: d.size - k]) for k in range(4)]) / d.size
        phi, _, v = levinson_durbin(gamma, 3)
        yw = ArModel(tuple(phi), v, mean=float(x.mean()))
        assert fit.is_stationary
        assert fit.log_likelihood >= ar_log_likelihood(yw, x) - 1e-9
        assert fit.log_likelihood == pytest.approx(ar_log_likelihood(fit, x), rel=1e-10)

    def test_matches_statsmodels_fit(self):
        sm = pytest.importorskip("statsmodels.tsa.arima.model")
        x = simulate_ar(ArModel((0.5, 0.2), 1.0), 2000, seed=12).samples
        d = x - x.mean()
        ref = sm.ARIMA(d, order=(2, 0, 0), trend="n").fit()
        fit = fit_ar_mle(x, 2)
        np.testing.assert_allclose(fit.coeffs, ref.params[:2], atol=2e-3)

    def test_ar6_misfit_persists(self):
        # an AR(3) cannot represent the AR(6) dynamics: its long-run variance stays off
        x = simulate_ar(PAPER_AR6, 2 ** 16, seed=0)
        fit = fit_ar_mle(x, 3)
        truth = ar_long_run_variance(PAPER_AR6)
        assert abs(ar_long_run_variance(fit) / truth - 1) > 0.2

    def test_requires_enough_samples(self):
        with pytest.raises(InvalidInputError):
            fit_ar_mle(np.arange(30.0), 3)
        with pytest.raises(InvalidInputError):
            fit_ar_mle(np.ones(100), 2)
