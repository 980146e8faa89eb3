import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose

from core.mechanisms import BernoulliConstant
from models import EstimandSpec, NoiseKind, TieRule
from process.simulator import draw_noise
from study.harness import (
    ALTERNATIVE_DESIGN,
    STUDIES,
    ReplicateScale,
    qq_correlation,
    resample_fixed_outcomes,
    run_replication,
    study_clt,
)

TINY = ReplicateScale(
    T=20, M=19, outer=6, resamples=40, power_outer=3,
    clt_lengths=(50,), mu1_grid=(0.0, 0.5), phi_grid=(0.0, 0.5),
    stepped=((0, 0), (1, 1)),
)


class TestResampleFixedOutcomes:
    def test_thread_invariance(self):
        noise = draw_noise(ALTERNATIVE_DESIGN, 30, 4)
        ests = [EstimandSpec(p=0), EstimandSpec(p=1, q=1)]
        a = resample_fixed_outcomes(ALTERNATIVE_DESIGN, noise.epsilon, BernoulliConstant(0.5), ests, 50, 9)
        b = resample_fixed_outcomes(ALTERNATIVE_DESIGN, noise.epsilon, BernoulliConstant(0.5), ests, 50, 9,
                                    threads=3, chunk=7)
        for label in ("tau_p0", "tau_p1_q1"):
            assert_allclose(a[label][0], b[label][0], rtol=0, atol=0)
            assert_allclose(a[label][1], b[label][1], rtol=0, atol=0)
            assert np.all(a[label][1] >= 0.0)

    def test_qq_correlation_of_normal_draws(self):
        draws = np.random.default_rng(0).standard_normal(2000)
        assert qq_correlation(draws) > 0.99


class TestRunReplication:
    def test_all_studies_write_tables(self):
        written: dict[str, pd.DataFrame] = {}

        def _write(name, frame):
            written[name] = frame
            return name

        outputs = run_replication(TINY, 2024, write=_write)
        assert [o.name for o in outputs] == list(STUDIES)
        assert set(written) == {
            "study_clt_draws", "study_clt_summary",
            "study_uniformity_pvalues", "study_uniformity_summary",
            "study_power_mu1", "study_power_phi",
            "study_stepped_draws", "study_stepped_summary",
            "study_pooled_draws", "study_pooled_summary",
        }
        assert len(written["study_uniformity_pvalues"]) == TINY.outer
        assert written["study_clt_summary"]["T"].tolist() == [20, 50]
        assert set(written["study_stepped_summary"]["estimator"]) == {"tau_p0", "tau_p1_q1"}
        power = written["study_power_mu1"]
        assert power["rejection_rate"].between(0.0, 1.0).all()
        assert set(power["x"]) == {0.0, 0.5}

    def test_pooled_lies_between_units(self):
        (out,) = run_replication(TINY, 5, studies=["pooled"])
        draws = out.frames["draws"]
        lo = draws[["unit1", "unit2"]].min(axis=1)
        hi = draws[["unit1", "unit2"]].max(axis=1)
        assert ((draws["pooled"] >= lo - 1e-12) & (draws["pooled"] <= hi + 1e-12)).all()

    def test_deterministic_in_seed_and_threads(self):
        (a,) = run_replication(TINY, 11, studies=["uniformity"])
        (b,) = run_replication(TINY, 11, studies=["uniformity"], threads=3)
        pd.testing.assert_frame_equal(a.frames["pvalues"], b.frames["pvalues"])

    def test_unknown_study(self):
        with pytest.raises(ValueError, match="unknown studies"):
            run_replication(TINY, 1, studies=["bootstrap"])


NULL_SCALE = ReplicateScale(T=100, M=399, outer=4000, tie_rule=TieRule.ADD_ONE)


@pytest.fixture(scope="module")
def null_study():
    (out,) = run_replication(NULL_SCALE, 2718, studies=["uniformity"], threads=4)
    return out.frames["pvalues"], out.frames["summary"].set_index("method")


class TestNullCalibration:
    def test_exact_pvalues_near_uniform(self, null_study):
        _, summary = null_study
        assert summary.loc["exact", "ks_distance"] <= 0.03
        assert 0.035 <= summary.loc["exact", "rejection_rate"] <= 0.065

    def test_add_one_pvalues_on_grid(self, null_study):
        pvalues, _ = null_study
        scaled = pvalues["exact_p"].to_numpy() * (NULL_SCALE.M + 1)
        assert_allclose(scaled, np.round(scaled), atol=1e-9)
        assert pvalues["exact_p"].min() >= 1.0 / (NULL_SCALE.M + 1)

    @pytest.mark.parametrize("alpha", [0.01, 0.05, 0.1])
    def test_add_one_rejection_bounded_by_alpha(self, null_study, alpha):
        pvalues, _ = null_study
        p = pvalues["exact_p"].to_numpy()
        rate = np.mean(p <= alpha)
        assert rate <= alpha + 3.0 * np.sqrt(alpha * (1.0 - alpha) / p.size)

    def test_conservative_rate_at_most_nominal(self, null_study):
        _, summary = null_study
        assert 0.0 < summary.loc["conservative", "rejection_rate"] <= 0.06


class TestStudyShapes:
    def test_pooling_shrinks_variance(self):
        scale = ReplicateScale(T=50, resamples=1000)
        (out,) = run_replication(scale, 77, studies=["pooled"], threads=2)
        var = out.frames["summary"].set_index("estimator")["variance"]
        assert var["pooled"] < min(var["unit1"], var["unit2"])

    def test_gaussian_draws_line_up_cauchy_do_not(self):
        scale = ReplicateScale(T=100, resamples=2000, clt_lengths=(100,))
        summary = study_clt(scale, 404, threads=2).frames["summary"]
        qq = summary.set_index("noise")["qq_r"]
        assert qq[NoiseKind.GAUSSIAN.value] >= 0.995
        assert qq[NoiseKind.CAUCHY.value] < qq[NoiseKind.GAUSSIAN.value]
