"""Simulation-study harness behind `tsexp replicate`.

Five studies on the potential AR(1) design, each written as plot-ready CSVs:

  clt        fixed potential outcomes, resampled paths: distribution of the
             average lag-0 estimate, Q-Q correlation against the normal, for
             Gaussian (T = 100) and Cauchy (T = 100, 1000, 10000) noise
  uniformity null design, outer replications: exact and conservative
             p-values, rejection rate at alpha, KS distance from uniform
  power      rejection rates over mu1 (lag 0) and over phi (lag 1), for the
             exact, conservative and standardized exact tests
  stepped    fixed potential outcomes: lag and stepped estimator draws with
             their variance-bound means
  pooled     two independent units: unit and pooled estimator draws

"Fixed potential outcomes" means one noise draw per design; each resample
redraws the treatment path and re-evaluates the process along it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field
from scipy.stats import kstest, probplot

from core.mechanisms import AssignmentMechanism, BernoulliConstant
from core.paths import TreatmentPath, sample_paths
from estimators.dispatch import estimand_terms
from inference.conservative import conservative_test
from inference.power import GridPoint, power_curve
from inference.randomization import exact_test, null_distribution
from models import EstimandSpec, NoiseKind, PotentialProcessSpec, TieRule
from parallel import gather_sync
from process.estimands import true_lag_effect
from process.simulator import draw_noise, outcomes_along, simulate_experiment
from seeding import derive_seed

log = logging.getLogger(__name__)

STUDIES = ("clt", "uniformity", "power", "stepped", "pooled")

# Study keys folded into the master seed so studies never share draws.
_STUDY_KEY = {name: i + 1 for i, name in enumerate(STUDIES)}

ALTERNATIVE_DESIGN = PotentialProcessSpec(mu0=0.0, mu1=0.5, phi=0.5, sigma0=1.0, sigma1=1.0)
NULL_DESIGN = PotentialProcessSpec(mu0=0.0, mu1=0.0, phi=0.5, sigma0=1.0, sigma1=1.0)


class ReplicateScale(BaseModel):
    """Sizes of the studies. The defaults are the desk scale."""

    T: int = Field(default=100, ge=2)
    M: int = Field(default=1000, ge=1)
    outer: int = Field(default=2000, ge=1)
    resamples: int = Field(default=5000, ge=2)
    power_outer: int = Field(default=500, ge=1)
    clt_lengths: tuple[int, ...] = (100, 1000, 10000)
    mu1_grid: tuple[float, ...] = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)
    phi_grid: tuple[float, ...] = (0.0, 0.2, 0.4, 0.6, 0.8)
    stepped: tuple[tuple[int, int], ...] = ((0, 0), (1, 0), (1, 1), (1, 2), (2, 0))
    alpha: float = Field(default=0.05, gt=0.0, lt=1.0)
    tie_rule: TieRule = TieRule.STRICT


@dataclass
class StudyOutput:
    name: str
    frames: dict[str, pd.DataFrame] = field(default_factory=dict)


def resample_fixed_outcomes(
    spec: PotentialProcessSpec,
    eps: np.ndarray,
    mechanism: AssignmentMechanism,
    estimands: Sequence[EstimandSpec],
    R: int,
    seed: int,
    *,
    threads: int = 1,
    chunk: int | None = None,
) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Average estimate and gamma_hat per resample, keyed by estimand label.

    Resample r draws its path from derive_seed(seed, r) and re-evaluates the
    outcomes along it with the fixed noise `eps`.
    """
    T = eps.size
    labels = [est.label for est in estimands]

    def _chunk(rs: list[int]) -> np.ndarray:
        W, P1 = sample_paths(mechanism, None, T, [derive_seed(seed, r) for r in rs])
        Y = outcomes_along(spec, eps, W)
        cols = []
        for est in estimands:
            tau, sigma2 = estimand_terms(Y, W, P1, est, mechanism)
            n = tau.shape[-1]
            cols.append(tau.mean(axis=-1))
            cols.append(sigma2.sum(axis=-1) / n ** 2)
        return np.stack(cols, axis=-1)

    table = null_distribution(R, _chunk, threads=threads, chunk=chunk)
    return {label: (table[:, 2 * k], table[:, 2 * k + 1]) for k, label in enumerate(labels)}


def qq_correlation(draws: np.ndarray) -> float:
    (_, _), (_, _, r) = probplot(draws, dist="norm")
    return float(r)


def study_clt(scale: ReplicateScale, seed: int, threads: int) -> StudyOutput:
    mech = BernoulliConstant(0.5)
    est = EstimandSpec(p=0)
    designs = [(NoiseKind.GAUSSIAN, scale.T)] + [(NoiseKind.CAUCHY, n) for n in scale.clt_lengths]
    draws, summary = [], []
    for k, (noise_kind, T) in enumerate(designs):
        spec = ALTERNATIVE_DESIGN.model_copy(update={"noise": noise_kind})
        noise = draw_noise(spec, T, derive_seed(seed, k, 0))
        res = resample_fixed_outcomes(spec, noise.epsilon, mech, [est], scale.resamples,
                                      derive_seed(seed, k, 1), threads=threads)
        tau_bar, gamma = res[est.label]
        truth = float(np.mean(true_lag_effect(spec, noise, _any_path(T), 0)))
        draws.append(pd.DataFrame({"noise": noise_kind.value, "T": T, "tau_bar_hat": tau_bar}))
        summary.append({
            "noise": noise_kind.value, "T": T, "resamples": scale.resamples,
            "mean": float(tau_bar.mean()), "variance": float(tau_bar.var(ddof=1)),
            "mean_gamma_hat": float(gamma.mean()), "true_tau_bar": truth,
            "mc_se": float(tau_bar.std(ddof=1) / np.sqrt(tau_bar.size)),
            "qq_r": qq_correlation(tau_bar),
        })
        log.info("clt study %s T=%d done", noise_kind.value, T)
    return StudyOutput("clt", {"draws": pd.concat(draws, ignore_index=True), "summary": pd.DataFrame(summary)})


def _any_path(T: int) -> TreatmentPath:
    # closed-form ar1 effects do not depend on the observed path
    return TreatmentPath(np.zeros(T, dtype=np.int8))


def _null_replication(scale: ReplicateScale, seed: int) -> dict:
    est = EstimandSpec(p=0)
    noise = draw_noise(NULL_DESIGN, scale.T, derive_seed(seed, 0))
    e = simulate_experiment(NULL_DESIGN, noise, BernoulliConstant(0.5), derive_seed(seed, 1))
    exact = exact_test(e, est, scale.M, derive_seed(seed, 2), tie_rule=scale.tie_rule)
    clt = conservative_test(e, est)
    return {"exact_p": exact.p_value, "conservative_p": clt.p_value, "tau_bar_hat": exact.estimate}


def study_uniformity(scale: ReplicateScale, seed: int, threads: int) -> StudyOutput:
    calls: list[Callable[[], dict]] = [
        (lambda r=r: _null_replication(scale, derive_seed(seed, r))) for r in range(scale.outer)
    ]
    rows = pd.DataFrame(gather_sync(calls, threads=threads))
    rows.insert(0, "replication", np.arange(1, scale.outer + 1))
    summary = []
    for method in ("exact_p", "conservative_p"):
        p = rows[method].dropna().to_numpy()
        rate = float(np.mean(p <= scale.alpha))
        summary.append({
            "method": method.removesuffix("_p"), "n": p.size, "alpha": scale.alpha,
            "rejection_rate": rate, "se": float(np.sqrt(rate * (1 - rate) / max(p.size, 1))),
            "ks_distance": float(kstest(p, "uniform").statistic),
        })
    return StudyOutput("uniformity", {"pvalues": rows, "summary": pd.DataFrame(summary)})


def study_power(scale: ReplicateScale, seed: int, threads: int) -> StudyOutput:
    mu_grid = [GridPoint(x=m, spec=ALTERNATIVE_DESIGN.model_copy(update={"mu1": m}), label="mu1")
               for m in scale.mu1_grid]
    phi_grid = [GridPoint(x=f, spec=ALTERNATIVE_DESIGN.model_copy(update={"phi": f}), label="phi")
                for f in scale.phi_grid]
    common = dict(T=scale.T, alpha=scale.alpha, tie_rule=scale.tie_rule, standardized=True, threads=threads)
    by_mu = power_curve(mu_grid, EstimandSpec(p=0), scale.M, scale.power_outer, derive_seed(seed, 1), **common)
    by_phi = power_curve(phi_grid, EstimandSpec(p=1), scale.M, scale.power_outer, derive_seed(seed, 2), **common)
    return StudyOutput("power", {"mu1": by_mu, "phi": by_phi})


def study_stepped(scale: ReplicateScale, seed: int, threads: int) -> StudyOutput:
    mech = BernoulliConstant(0.5)
    ests = [EstimandSpec(p=p, q=q) for p, q in scale.stepped]
    noise = draw_noise(ALTERNATIVE_DESIGN, scale.T, derive_seed(seed, 0))
    res = resample_fixed_outcomes(ALTERNATIVE_DESIGN, noise.epsilon, mech, ests, scale.resamples,
                                  derive_seed(seed, 1), threads=threads)
    draws, summary = [], []
    for est in ests:
        tau_bar, gamma = res[est.label]
        draws.append(pd.DataFrame({"estimator": est.label, "p": est.p, "q": est.q, "tau_bar_hat": tau_bar}))
        summary.append({
            "estimator": est.label, "p": est.p, "q": est.q,
            "mean": float(tau_bar.mean()), "variance": float(tau_bar.var(ddof=1)),
            "mean_gamma_hat": float(gamma.mean()),
        })
    return StudyOutput("stepped", {"draws": pd.concat(draws, ignore_index=True), "summary": pd.DataFrame(summary)})


def study_pooled(scale: ReplicateScale, seed: int, threads: int) -> StudyOutput:
    mech = BernoulliConstant(0.5)
    est = EstimandSpec(p=0)
    units = {}
    for i, uid in enumerate(("unit1", "unit2")):
        noise = draw_noise(ALTERNATIVE_DESIGN, scale.T, derive_seed(seed, i, 0))
        units[uid] = resample_fixed_outcomes(ALTERNATIVE_DESIGN, noise.epsilon, mech, [est], scale.resamples,
                                             derive_seed(seed, i, 1), threads=threads)[est.label]
    (t1, g1), (t2, g2) = units["unit1"], units["unit2"]
    c1 = (1.0 / g1) / (1.0 / g1 + 1.0 / g2)
    pooled = c1 * t1 + (1.0 - c1) * t2
    draws = pd.DataFrame({"unit1": t1, "unit2": t2, "pooled": pooled})
    summary = pd.DataFrame([
        {"estimator": col, "mean": float(draws[col].mean()), "variance": float(draws[col].var(ddof=1))}
        for col in draws.columns
    ])
    return StudyOutput("pooled", {"draws": draws, "summary": summary})


_RUNNERS: dict[str, Callable[[ReplicateScale, int, int], StudyOutput]] = {
    "clt": study_clt,
    "uniformity": study_uniformity,
    "power": study_power,
    "stepped": study_stepped,
    "pooled": study_pooled,
}


def run_replication(
    scale: ReplicateScale,
    seed: int,
    *,
    studies: Sequence[str] = STUDIES,
    threads: int = 1,
    write: Callable[[str, pd.DataFrame], Path] | None = None,
) -> list[StudyOutput]:
    """Run the requested studies in order; `write(name, frame)` persists each table."""
    unknown = [s for s in studies if s not in _RUNNERS]
    if unknown:
        raise ValueError(f"unknown studies {unknown}; choose from {list(STUDIES)}")
    outputs = []
    for name in studies:
        log.info("study %s starting", name)
        out = _RUNNERS[name](scale, derive_seed(seed, _STUDY_KEY[name]), threads)
        if write is not None:
            for table, frame in out.frames.items():
                write(f"study_{name}_{table}", frame)
        outputs.append(out)
    return outputs
