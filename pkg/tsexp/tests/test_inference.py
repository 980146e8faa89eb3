import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy.stats import norm

from core.mechanisms import BernoulliConstant, HistoryDependent, OutcomeSignRule
from core.experiment import UnitExperiment
from inference.conservative import conservative_test, normal_p_value
from inference.power import STANDARDIZED_EXACT, GridPoint, power_curve
from inference.randomization import (
    InferenceError,
    exact_test,
    null_distribution,
    randomization_p_value,
    replicate_statistics,
)
from models import Alternative, EstimandSpec, PotentialProcessSpec, TestMethod, TieRule
from process.simulator import draw_noise, simulate_experiment
from seeding import derive_seed

DRAWS = np.array([0.5, 1.0, 1.5, -2.0])


class TestPValue:
    def test_strict_two_sided(self):
        assert randomization_p_value(1.0, DRAWS) == pytest.approx(0.5)

    def test_add_one(self):
        assert randomization_p_value(1.0, DRAWS, tie_rule=TieRule.ADD_ONE) == pytest.approx(0.8)

    def test_one_sided(self):
        assert randomization_p_value(1.0, DRAWS, alternative=Alternative.GREATER) == pytest.approx(0.25)
        assert randomization_p_value(1.0, DRAWS, alternative=Alternative.LESS) == pytest.approx(0.5)

    def test_add_one_never_zero(self):
        assert randomization_p_value(100.0, DRAWS, tie_rule=TieRule.ADD_ONE) == pytest.approx(1 / 5)
        assert randomization_p_value(100.0, DRAWS) == 0.0

    def test_no_draws(self):
        with pytest.raises(InferenceError):
            randomization_p_value(1.0, np.array([]))


class TestExactTest:
    def test_reproducible(self, simulated):
        e = simulated(T=60)
        a = exact_test(e, EstimandSpec(p=1), 300, 17)
        b = exact_test(e, EstimandSpec(p=1), 300, 17)
        assert a.p_value == b.p_value
        assert a.statistic == b.statistic

    def test_threads_and_chunks_do_not_change_result(self, simulated):
        e = simulated(T=60)
        est = EstimandSpec(p=0)
        base = exact_test(e, est, 250, 5, keep_draws=True, threads=1, chunk=256)
        other = exact_test(e, est, 250, 5, keep_draws=True, threads=3, chunk=7)
        assert_array_equal(base.null_draws, other.null_draws)
        assert base.p_value == other.p_value

    def test_draws_follow_replicate_seeds(self, simulated):
        e = simulated(T=40)
        est = EstimandSpec(p=1, q=1)
        res = exact_test(e, est, 20, 9, keep_draws=True)
        expected = replicate_statistics(e, est, [derive_seed(9, m) for m in range(1, 21)])
        assert_allclose(res.null_draws, expected)

    def test_result_fields(self, simulated):
        e = simulated(T=40)
        res = exact_test(e, EstimandSpec(p=0), 50, 1, tie_rule=TieRule.ADD_ONE)
        assert res.method is TestMethod.EXACT
        assert res.replicates == 50 and res.seed == 1
        assert res.statistic == pytest.approx(res.estimate)
        assert res.null_draws is None
        assert 1 / 51 <= res.p_value <= 1.0

    def test_zero_replicates(self, simulated):
        with pytest.raises(InferenceError):
            exact_test(simulated(T=20), EstimandSpec(p=0), 0, 1)
        with pytest.raises(InferenceError):
            null_distribution(0, lambda ms: np.zeros(len(ms)))

    def test_detects_strong_effect(self):
        spec = PotentialProcessSpec(mu1=3.0, phi=0.5)
        noise = draw_noise(spec, 100, 4)
        e = simulate_experiment(spec, noise, BernoulliConstant(0.5), 5)
        assert exact_test(e, EstimandSpec(p=0), 400, 6).p_value < 0.05

    def test_null_rejection_rate(self, null_spec, half):
        rejections = 0
        R = 200
        for r in range(R):
            noise = draw_noise(null_spec, 50, derive_seed(77, r, 0))
            e = simulate_experiment(null_spec, noise, half, derive_seed(77, r, 1))
            rejections += exact_test(e, EstimandSpec(p=0), 200, derive_seed(77, r, 2)).p_value <= 0.05
        se = np.sqrt(0.05 * 0.95 / R)
        assert rejections / R <= 0.05 + 3 * se

    def test_history_dependent_mechanism(self, simulated):
        e0 = simulated(T=40)
        mech = HistoryDependent(OutcomeSignRule(base=0.3, shift=0.4))
        e = UnitExperiment(e0.unit_id, e0.times, e0.y, e0.treatments, mech, mech.probabilities(e0.w, e0.y))
        res = exact_test(e, EstimandSpec(p=0), 30, 3, keep_draws=True)
        assert len(res.null_draws) == 30
        assert 0.0 <= res.p_value <= 1.0


class TestConservative:
    def test_hand_computed(self, make_unit):
        e = make_unit([2.0, -1.0], [1, 1])
        res = conservative_test(e, EstimandSpec(p=0))
        z = 1.0 / np.sqrt(5.0)
        assert res.estimate == pytest.approx(1.0)
        assert res.gamma_hat == pytest.approx(5.0)
        assert res.statistic == pytest.approx(z)
        assert res.p_value == pytest.approx(2 * norm.sf(z))
        assert res.conservative

    def test_alternatives(self):
        assert normal_p_value(1.2, Alternative.GREATER) == pytest.approx(norm.sf(1.2))
        assert normal_p_value(1.2, Alternative.LESS) == pytest.approx(norm.cdf(1.2))
        assert normal_p_value(0.0) == pytest.approx(1.0)

    def test_zero_bound_gives_no_statistic(self, make_unit):
        res = conservative_test(make_unit([0.0] * 40, [1, 0] * 20), EstimandSpec(p=0))
        assert res.statistic is None and res.p_value is None
        assert "zero" in res.note

    def test_small_sample_warning(self, make_unit, caplog):
        conservative_test(make_unit([1.0, 2.0, 3.0], [1, 0, 1]), EstimandSpec(p=0))
        assert "normal approximation" in caplog.text


class TestPower:
    def test_curve_shape(self):
        base = PotentialProcessSpec(phi=0.5)
        grid = [
            GridPoint(x=0.0, spec=base, label="mu1"),
            GridPoint(x=1.5, spec=base.model_copy(update={"mu1": 1.5}), label="mu1"),
        ]
        frame = power_curve(grid, EstimandSpec(p=0), 100, 20, 3, T=60, standardized=True)
        assert set(frame["method"]) == {TestMethod.EXACT.value, TestMethod.CONSERVATIVE.value, STANDARDIZED_EXACT}
        assert len(frame) == 6
        assert frame["rejection_rate"].between(0.0, 1.0).all()
        exact = frame[frame["method"] == TestMethod.EXACT.value].set_index("x")["rejection_rate"]
        assert exact[1.5] >= 0.5
        assert exact[1.5] >= exact[0.0]

    def test_threads_do_not_change_curve(self):
        grid = [GridPoint(x=0.5, spec=PotentialProcessSpec(mu1=0.5, phi=0.5))]
        a = power_curve(grid, EstimandSpec(p=1), 40, 6, 9, T=30)
        b = power_curve(grid, EstimandSpec(p=1), 40, 6, 9, T=30, threads=3)
        assert a.equals(b)

    def test_empty_grid(self):
        with pytest.raises(InferenceError):
            power_curve([], EstimandSpec(p=0), 10, 5, 1)

    def test_noiseless_grid_point_refused(self):
        flat = PotentialProcessSpec(mu1=1.0, phi=0.5, sigma0=0.0, sigma1=0.0)
        grid = [GridPoint(x=0.0, spec=PotentialProcessSpec(phi=0.5)), GridPoint(x=1.0, spec=flat)]
        with pytest.raises(InferenceError, match="sigma0 = sigma1 = 0"):
            power_curve(grid, EstimandSpec(p=0), 10, 5, 1)

    def test_one_zero_scale_still_runs(self):
        grid = [GridPoint(x=0.0, spec=PotentialProcessSpec(phi=0.5, sigma0=0.0, sigma1=1.0))]
        frame = power_curve(grid, EstimandSpec(p=0), 20, 4, 2, T=30)
        assert frame["rejection_rate"].between(0.0, 1.0).all()
