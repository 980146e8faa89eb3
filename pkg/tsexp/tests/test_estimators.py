import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from core.mechanisms import BernoulliConstant, BernoulliPiecewise, HistoryDependent, OutcomeSignRule
from core.paths import sample_paths
from estimators.dispatch import estimand_terms, estimate, running_estimate
from estimators.horvitz_thompson import (
    EstimationError,
    average_estimate,
    ht_lag_estimate,
    ht_step_estimate,
    ht_terms,
    one_step_factors,
    step_sizes,
    suffix_propensity,
    variance_bound,
)
from estimators.m_period import m_period_estimate, m_period_terms
from estimators.proxy import lagged_outcome, proxy_adjusted_estimate, proxy_adjusted_terms, proxy_values, zero_proxy
from estimators.standardized import null_variance, null_variance_terms, standardized_estimate, standardized_terms
from models import EstimandSpec, PotentialProcessSpec
from process.estimands import true_lag_effect
from process.simulator import draw_noise, outcomes_along, simulate_experiment


class TestLagEstimator:
    def test_immediate_effect_single_time(self, make_unit):
        e = make_unit([2.0], [1])
        assert_allclose(ht_lag_estimate(e, 0), [4.0])
        assert_allclose(variance_bound(e, 0), [16.0])

    def test_zero_outcome(self, make_unit):
        e = make_unit([0.0, 0.0, 0.0], [1, 0, 1])
        assert_array_equal(ht_lag_estimate(e, 0), 0.0)
        assert_array_equal(variance_bound(e, 1), 0.0)

    def test_lag_one_plug_in(self, make_unit):
        e = make_unit([1.0, 3.0], [0, 1])
        assert_allclose(ht_lag_estimate(e, 1), [-6.0])
        assert_allclose(variance_bound(e, 1), [6.0 * 9.0])

    def test_lag_zero_bound_is_square(self, make_unit):
        e = make_unit([1.5, -2.0, 0.7, 3.1], [1, 0, 0, 1], pi=0.3)
        tau, sigma2 = ht_terms(e.y, e.w, e.p1, 0)
        assert_allclose(sigma2, tau ** 2)

    def test_sign_follows_switched_assignment(self, make_unit):
        e = make_unit([1.0, 1.0, 1.0, 1.0], [1, 0, 0, 1])
        assert_array_equal(np.sign(ht_lag_estimate(e, 2)), [1.0, -1.0])

    def test_lag_must_be_below_T(self, make_unit):
        with pytest.raises(EstimationError):
            ht_lag_estimate(make_unit([1.0, 2.0], [0, 1]), 2)

    def test_propensity_outside_unit_interval(self):
        with pytest.raises(EstimationError):
            one_step_factors(np.array([1, 0]), np.array([0.5, 1.0]))


class TestStepEstimator:
    def test_q_zero_is_lag(self, simulated):
        e = simulated(T=40)
        assert_array_equal(ht_step_estimate(e, 2, 0), ht_lag_estimate(e, 2))

    def test_plug_in(self, make_unit):
        e = make_unit([5.0, 2.0], [1, 1])
        assert_allclose(ht_step_estimate(e, 0, 1)[-1], 4.0)

    def test_boundary_time_uses_no_steps(self, simulated):
        e = simulated(T=30)
        assert ht_step_estimate(e, 1, 2)[0] == pytest.approx(ht_lag_estimate(e, 1)[0])

    def test_step_sizes(self):
        assert_array_equal(step_sizes(7, 1, 2), [1, 2, 3, 3, 3, 3])

    def test_numerator_does_not_depend_on_q(self, simulated):
        e = simulated(T=50)
        p, q = 1, 2
        f = one_step_factors(e.w, e.p1)
        lag = ht_lag_estimate(e, p) * 2.0 ** p * suffix_propensity(f, p, 0)
        step = ht_step_estimate(e, p, q) * 2.0 ** step_sizes(e.T, p, q) * suffix_propensity(f, p, q)
        assert_allclose(step, lag)

    def test_suffix_propensity_piecewise(self):
        p1 = BernoulliPiecewise(((1, 0.5), (3, 0.2))).schedule(4)
        w = np.array([1, 0, 1, 0])
        f = one_step_factors(w, p1)
        assert_allclose(suffix_propensity(f, 1, 1), [0.5 * 0.5, 0.5 * 0.5 * 0.2, 0.5 * 0.2 * 0.8])

    def test_batched_rows_match(self, simulated):
        e = simulated(T=30)
        W, P1 = sample_paths(e.mechanism, None, e.T, [1, 2, 3])
        tau, sigma2 = ht_terms(e.y, W, P1, 1, 1)
        for r in range(3):
            t_r, s_r = ht_terms(e.y, W[r], P1[r], 1, 1)
            assert_allclose(tau[r], t_r)
            assert_allclose(sigma2[r], s_r)


class TestAverage:
    def test_constant_series(self):
        res = average_estimate(np.full(5, 2.5), np.ones(5), 0)
        assert res.tau_bar_hat == pytest.approx(2.5)
        assert res.T_effective == 5

    def test_two_terms(self):
        res = average_estimate(np.array([4.0, -6.0]), np.array([16.0, 16.0]), 1)
        assert res.tau_bar_hat == pytest.approx(-1.0)
        assert res.gamma_hat == pytest.approx(8.0)
        assert [c.t for c in res.per_t] == [2, 3]

    def test_interval(self):
        res = average_estimate(np.array([1.0, 3.0]), np.array([4.0, 4.0]), 0)
        assert res.ci_low == pytest.approx(2.0 - 1.959963984540054 * np.sqrt(2.0))
        assert res.ci_high == pytest.approx(2.0 + 1.959963984540054 * np.sqrt(2.0))

    def test_empty(self):
        with pytest.raises(EstimationError):
            average_estimate(np.array([]), np.array([]), 0)


class TestProxy:
    def test_zero_proxy_is_plain_estimator(self, simulated):
        e = simulated(T=40)
        assert_allclose(proxy_adjusted_estimate(e, 1, zero_proxy), ht_lag_estimate(e, 1))

    def test_perfect_proxy(self, make_unit):
        e = make_unit([5.0, 5.0, 5.0], [1, 0, 1])
        assert_allclose(proxy_adjusted_estimate(e, 0), [10.0, 0.0, 0.0])

    def test_lagged_outcome_proxy_values(self):
        y = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        assert_allclose(proxy_values(y, 1, 0), [0.0, 1.0, 2.0, 3.0])
        assert_allclose(proxy_values(y, 0, 2), [0.0, 0.0, 0.0, 1.0, 2.0])

    def test_rule_sees_only_past(self):
        seen = []

        def spy(history):
            seen.append(history.copy())
            return 0.0

        y = np.arange(1.0, 7.0)
        proxy_values(y, 2, 0, spy)
        for i, hist in enumerate(seen):
            assert hist.size == i  # t - p - 1 outcomes for t = p+1..T

    def test_rule_cannot_write(self):
        def vandal(history):
            history[...] = 0.0
            return 0.0

        with pytest.raises(ValueError):
            proxy_values(np.arange(1.0, 5.0), 0, 0, vandal)

    def test_reduces_variance_on_random_walk(self):
        rng = np.random.default_rng(3)
        y = 10.0 + np.cumsum(rng.standard_normal(100))
        W, P1 = sample_paths(BernoulliConstant(0.5), None, 100, list(range(3000)))
        plain, _ = ht_terms(y, W, P1, 0)
        adjusted, _ = proxy_adjusted_terms(y, W, P1, 0, 0, lagged_outcome)
        assert adjusted.mean(axis=-1).var() < plain.mean(axis=-1).var()


class TestStandardized:
    @pytest.mark.parametrize("w, expected", [(1, 1.0), (0, -1.0)])
    def test_symmetric_bernoulli(self, make_unit, w, expected):
        assert_allclose(standardized_estimate(make_unit([2.5], [w]), 0), [expected])

    def test_zero_outcome(self, make_unit):
        assert_array_equal(standardized_estimate(make_unit([0.0, 1.0], [1, 1]), 0), [0.0, 1.0])

    def test_asymmetric_probability(self, make_unit):
        v = standardized_estimate(make_unit([3.0, -1.0], [1, 0], pi=0.3), 0)
        assert_allclose(v, [np.sqrt(0.7 / 0.3), np.sqrt(0.3 / 0.7)])

    def test_bernoulli_null_variance(self, make_unit):
        e = make_unit([1.0, 2.0, 3.0], [0, 1, 1], pi=0.25)
        inv = 1.0 / (0.25 * 0.75)
        assert_allclose(null_variance(e, 1), [4.0 * inv ** 2 / 4.0, 9.0 * inv ** 2 / 4.0])

    def test_history_dependent_enumeration(self):
        mech = HistoryDependent(OutcomeSignRule(base=0.3, shift=0.4))
        y = np.array([1.0, -2.0, 0.5, 1.5, -0.3])
        w = np.array([1, 0, 0, 1, 1])
        p1 = mech.probabilities(w, y)
        for p in (0, 1, 2):
            assert_allclose(
                null_variance_terms(y, w, p1, p, mech), null_variance_terms(y, w, p1, p, None), rtol=1e-12,
            )

    def test_null_moments(self):
        rng = np.random.default_rng(8)
        y = rng.standard_normal(50)
        W, P1 = sample_paths(BernoulliConstant(0.3), None, 50, list(range(5000)))
        v, _ = standardized_terms(y, W, P1, 0)
        v = v.ravel()
        se_mean = v.std() / np.sqrt(v.size)
        assert abs(v.mean()) < 4 * se_mean
        se_var = np.sqrt(np.var(v ** 2) / v.size)
        assert abs(v.var() - 1.0) < 4 * se_var


class TestMPeriod:
    def test_m_zero_is_lag_zero(self, simulated):
        e = simulated(T=40)
        assert_allclose(m_period_estimate(e, 0, (1,), (0,)), ht_lag_estimate(e, 0))

    def test_neither_suffix_observed(self, make_unit):
        e = make_unit([1.0, 2.0], [0, 1])
        assert_array_equal(m_period_estimate(e, 1, (1, 1), (0, 0)), [0.0])

    def test_plug_in(self, make_unit):
        e = make_unit([1.0, 2.0], [1, 1])
        tau, sigma2 = m_period_terms(e.y, e.w, e.p1, 1, (1, 1), (0, 0))
        assert_allclose(tau, [8.0])
        assert_allclose(sigma2, [64.0])

    def test_comparison_hit_is_negative(self, make_unit):
        e = make_unit([1.0, 2.0], [0, 0])
        assert_allclose(m_period_estimate(e, 1, (1, 1), (0, 0)), [-8.0])

    def test_suffix_length(self, make_unit):
        with pytest.raises(EstimationError):
            m_period_estimate(make_unit([1.0, 2.0, 3.0], [0, 1, 1]), 1, (1,), (0, 0))

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            EstimandSpec(m=1, w_target=(1, 1), w_comparison=(1, 1))
        with pytest.raises(ValueError):
            EstimandSpec(m=1, p=1, w_target=(1, 1), w_comparison=(0, 0))


class TestDispatch:
    def test_estimate_result(self, simulated):
        e = simulated(T=60)
        est = EstimandSpec(p=1, q=1)
        res = estimate(e, est)
        tau, sigma2 = estimand_terms(e.y, e.w, e.p1, est)
        assert res.tau_bar_hat == pytest.approx(tau.mean())
        assert res.gamma_hat == pytest.approx(sigma2.sum() / tau.size ** 2)
        assert res.T_effective == 59
        assert res.per_t[0].t == 2
        assert res.unit_id == "sim"
        assert (res.p, res.q) == (1, 1)

    def test_proxy_flag_routes_to_proxy(self, simulated):
        e = simulated(T=30)
        tau, _ = estimand_terms(e.y, e.w, e.p1, EstimandSpec(p=0, proxy="lagged-outcome"))
        assert_allclose(tau, proxy_adjusted_estimate(e, 0))

    def test_standardized_flag(self, simulated):
        e = simulated(T=30)
        tau, _ = estimand_terms(e.y, e.w, e.p1, EstimandSpec(p=1, standardized=True), e.mechanism)
        assert_allclose(tau, standardized_estimate(e, 1))

    def test_m_period_horizon(self, simulated):
        e = simulated(T=30)
        res = estimate(e, EstimandSpec(m=2, w_target=(1, 1, 1), w_comparison=(0, 0, 0)))
        assert res.T_effective == 28
        assert res.per_t[0].t == 3

    def test_running_estimate_ends_at_average(self, simulated):
        res = estimate(simulated(T=80), EstimandSpec(p=0))
        frame = running_estimate(res)
        assert frame["running_mean"].iloc[-1] == pytest.approx(res.tau_bar_hat)
        assert frame["running_gamma"].iloc[-1] == pytest.approx(res.gamma_hat)
        assert (frame["upper"] >= frame["lower"]).all()
        assert list(frame["t"])[:2] == [1, 2]


def _resampled_averages(spec, T, R, p, seed):
    noise = draw_noise(spec, T, seed)
    W, P1 = sample_paths(BernoulliConstant(0.5), None, T, [seed * 100_000 + r for r in range(R)])
    Y = outcomes_along(spec, noise.epsilon, W)
    tau, sigma2 = ht_terms(Y, W, P1, p)
    n = tau.shape[-1]
    return tau.mean(axis=-1), sigma2.sum(axis=-1) / n ** 2


class TestSamplingProperties:
    @pytest.mark.parametrize("p", [0, 1, 2])
    def test_unbiased_with_fixed_outcomes(self, ar_spec, p):
        tau_bar, _ = _resampled_averages(ar_spec, 100, 20_000, p, seed=1)
        truth = 0.5 * 0.5 ** p
        se = tau_bar.std(ddof=1) / np.sqrt(tau_bar.size)
        assert abs(tau_bar.mean() - truth) <= 3 * se

    @pytest.mark.parametrize("p", [0, 1, 2])
    def test_bound_dominates_variance(self, p):
        spec = PotentialProcessSpec(mu1=2.0, phi=0.5)
        tau_bar, gamma = _resampled_averages(spec, 100, 5000, p, seed=2)
        assert tau_bar.var(ddof=1) < gamma.mean()

    @pytest.mark.parametrize("p", [0, 1])
    def test_errors_are_martingale_differences(self, ar_spec, half, p):
        # u_t is centred given the path up to t-p-1, so u_t * u_{t-p-1} averages to zero
        T = 20_000
        noise = draw_noise(ar_spec, T, 31)
        e = simulate_experiment(ar_spec, noise, half, 32)
        tau_hat, _ = estimand_terms(e.y, e.w, e.p1, EstimandSpec(p=p))
        u = tau_hat - true_lag_effect(ar_spec, noise, e.treatments, p)
        lag = p + 1
        cross = u[lag:] * u[:-lag]
        var = np.sum(cross ** 2)
        if p > 0:
            var += 2.0 * np.sum(cross[1:] * cross[:-1])
        z = cross.sum() / np.sqrt(var)
        assert abs(z) < 3.0
