"""Inverse-variance pooling of unit-level average estimates.

Unit i contributes tau_bar_i with weight c_i proportional to
(T_i - p) / gamma2_i, normalized so that sum c_i = 1. The pooled exact test
uses the sharp-null variance gamma2_i (fixed under the null, computed once
from the observed outcomes); the pooled conservative test uses the
variance-bound aggregate instead and refers

    Z = tau_bar_pooled * sqrt(sum_i 1 / gamma_hat_i)

to N(0, 1). Units are always processed in unit_id order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from core.experiment import Panel, UnitExperiment
from core.paths import SampledPath
from estimators.dispatch import estimand_terms
from estimators.proxy import ProxyRule, lagged_outcome, proxy_values
from estimators.standardized import null_variance_terms
from inference.conservative import normal_p_value
from inference.randomization import (
    null_distribution,
    randomization_p_value,
    replicate_statistics,
)
from models import (
    Alternative,
    EstimandSpec,
    PooledResult,
    PoolMethod,
    TieRule,
    UnitSummary,
)
from seeding import derive_seed

log = logging.getLogger(__name__)

# (units in unit_id order, replicate seed) -> one SampledPath per unit
JointSampler = Callable[[Sequence[UnitExperiment], int], Sequence[SampledPath]]


class PanelError(ValueError):
    """Pooling refused: dependence not handled, no usable units, or bad p-values."""


@dataclass(frozen=True)
class _UnitTerm:
    index: int
    unit: UnitExperiment
    tau_bar: float
    gamma_hat: float
    t_eff: int
    variance: float


def unit_null_variance(
    e: UnitExperiment, estimand: EstimandSpec, proxy_rule: ProxyRule | None = None
) -> float:
    """Sharp-null variance of a unit's per-t lag estimate, averaged over t."""
    if estimand.standardized:
        return 1.0
    if estimand.is_m_period or estimand.q:
        raise PanelError("pooled exact weights are defined for lag estimands (q = 0, no m-period)")
    y = e.y
    if estimand.proxy is not None or proxy_rule is not None:
        y = np.array(e.y, copy=True)
        y[estimand.p:] -= proxy_values(e.y, estimand.p, 0, proxy_rule or lagged_outcome)
    return float(np.mean(null_variance_terms(y, e.w, e.p1, estimand.p, e.mechanism)))


def _unit_terms(
    panel: Panel,
    estimand: EstimandSpec,
    variance_of: Callable[[UnitExperiment, float], float],
    proxy_rule: ProxyRule | None,
) -> tuple[list[_UnitTerm], list[str]]:
    kept: list[_UnitTerm] = []
    excluded: list[str] = []
    for index, unit in enumerate(panel.units):
        tau, sigma2 = estimand_terms(unit.y, unit.w, unit.p1, estimand, unit.mechanism, proxy_rule)
        n = tau.size
        gamma_hat = float(np.sum(sigma2) / n ** 2)
        variance = variance_of(unit, gamma_hat)
        if not variance > 0.0:
            log.warning("unit %s has zero variance (all-zero outcomes?); excluded from pooling", unit.unit_id)
            excluded.append(unit.unit_id)
            continue
        kept.append(_UnitTerm(index, unit, float(np.sum(tau) / n), gamma_hat, n, variance))
    if not kept:
        raise PanelError("no unit with positive variance left to pool")
    return kept, excluded


def pooling_weights(t_eff: Sequence[int], variances: Sequence[float]) -> np.ndarray:
    """c_i = ((T_i - p) / gamma2_i) / sum_j ((T_j - p) / gamma2_j)."""
    raw = np.asarray(t_eff, dtype=float) / np.asarray(variances, dtype=float)
    return raw / raw.sum()


def _summaries(terms: list[_UnitTerm], c: np.ndarray) -> list[UnitSummary]:
    return [
        UnitSummary(
            unit_id=u.unit.unit_id,
            tau_bar_hat=u.tau_bar,
            gamma_hat=u.gamma_hat,
            weight=float(ci),
            T_effective=u.t_eff,
        )
        for u, ci in zip(terms, c)
    ]


def pooled_exact_test(
    panel: Panel,
    estimand: EstimandSpec,
    M: int,
    seed: int,
    *,
    tie_rule: TieRule = TieRule.STRICT,
    alternative: Alternative = Alternative.TWO_SIDED,
    joint_sampler: JointSampler | None = None,
    keep_draws: bool = False,
    threads: int = 1,
    chunk: int | None = None,
    proxy_rule: ProxyRule | None = None,
) -> PooledResult:
    """Randomization test of the pooled statistic; every replicate redraws every unit.

    Independent panels draw unit i of replicate m from derive_seed(seed, m, i).
    A dependent panel needs `joint_sampler`, called once per replicate with
    derive_seed(seed, m).
    """
    if not panel.independent and joint_sampler is None:
        raise PanelError(
            "panel is not flagged independent; pooled exact test needs a joint sampler "
            "for dependent assignment"
        )
    terms, excluded = _unit_terms(
        panel, estimand, lambda u, _g: unit_null_variance(u, estimand, proxy_rule), proxy_rule
    )
    c = pooling_weights([u.t_eff for u in terms], [u.variance for u in terms])
    observed = float(np.dot(c, [u.tau_bar for u in terms]))

    def _independent(ms: list[int]) -> np.ndarray:
        total = np.zeros(len(ms))
        for ci, u in zip(c, terms):
            seeds = [derive_seed(seed, m, u.index) for m in ms]
            total += ci * replicate_statistics(u.unit, estimand, seeds, proxy_rule)
        return total

    def _joint(ms: list[int]) -> np.ndarray:
        out = np.empty(len(ms))
        for k, m in enumerate(ms):
            paths = joint_sampler(panel.units, derive_seed(seed, m))
            stat = 0.0
            for ci, u in zip(c, terms):
                drawn = paths[u.index]
                tau, _ = estimand_terms(
                    u.unit.y, drawn.path.values, drawn.p1, estimand, u.unit.mechanism, proxy_rule
                )
                stat += ci * float(tau.mean())
            out[k] = stat
        return out

    draw_chunk = _independent if joint_sampler is None else _joint
    draws = null_distribution(M, draw_chunk, threads=threads, chunk=chunk)
    p = randomization_p_value(observed, draws, tie_rule=tie_rule, alternative=alternative)
    return PooledResult(
        method=PoolMethod.POOLED_EXACT,
        tau_bar_pooled=observed,
        statistic=observed,
        p_value=p,
        weights_used={u.unit.unit_id: float(ci) for u, ci in zip(terms, c)},
        per_unit=_summaries(terms, c),
        excluded_units=excluded,
        replicates=M,
        seed=seed,
        estimand=estimand,
        null_draws=draws.tolist() if keep_draws else None,
    )


def pooled_conservative_test(
    panel: Panel,
    estimand: EstimandSpec,
    *,
    alternative: Alternative = Alternative.TWO_SIDED,
    proxy_rule: ProxyRule | None = None,
) -> PooledResult:
    if not panel.independent:
        raise PanelError(
            "pooled conservative test needs independent assignment across units; "
            "set the independence flag only if it holds"
        )
    # (T_i - p) / (T_i - p)^2 gamma_hat_i reduces to 1 / gamma_hat_i once normalized.
    terms, excluded = _unit_terms(panel, estimand, lambda u, g: g * (u.T - estimand.horizon), proxy_rule)
    c = pooling_weights([u.t_eff for u in terms], [u.variance for u in terms])
    pooled = float(np.dot(c, [u.tau_bar for u in terms]))
    precision = float(sum(1.0 / u.gamma_hat for u in terms))
    z = pooled * np.sqrt(precision)
    return PooledResult(
        method=PoolMethod.POOLED_CONSERVATIVE,
        tau_bar_pooled=pooled,
        statistic=float(z),
        p_value=normal_p_value(float(z), alternative),
        weights_used={u.unit.unit_id: float(ci) for u, ci in zip(terms, c)},
        per_unit=_summaries(terms, c),
        excluded_units=excluded,
        estimand=estimand,
    )
