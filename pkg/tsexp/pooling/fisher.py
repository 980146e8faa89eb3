"""Fisher's method over unit-level p-values: X^2 = -2 sum log p_i ~ chi2(2n)."""

from __future__ import annotations

import logging
from typing import Sequence

import numpy as np
from scipy.stats import combine_pvalues

from core.experiment import Panel
from estimators.dispatch import estimand_terms
from inference.randomization import exact_test
from models import EstimandSpec, PooledResult, PoolMethod, TestResult, TieRule, UnitSummary
from pooling.pooled import PanelError
from seeding import derive_seed

log = logging.getLogger(__name__)


def fisher_combine(
    p_values: Sequence[float],
    *,
    replicates: int | None = None,
    unit_ids: Sequence[str] | None = None,
) -> PooledResult:
    """Combine independent p-values. A p-value of 0 is clamped to 1 / (M + 1),
    which needs the replicate count M that produced it."""
    p = np.asarray(p_values, dtype=float)
    if p.size == 0:
        raise PanelError("need at least one p-value")
    if np.any(np.isnan(p)) or np.any(p < 0.0) or np.any(p > 1.0):
        raise PanelError(f"p-values must lie in [0, 1], got {p.tolist()}")
    ids = list(unit_ids) if unit_ids is not None else [f"unit{i + 1}" for i in range(p.size)]
    if len(ids) != p.size:
        raise PanelError(f"{len(ids)} unit ids for {p.size} p-values")
    zeros = p == 0.0
    if np.any(zeros):
        if replicates is None:
            raise PanelError("p-value of 0 can only be clamped when the replicate count is known")
        floor = 1.0 / (replicates + 1)
        log.warning(
            "clamping zero p-values to 1/(M+1)=%.3g for units %s",
            floor, [i for i, z in zip(ids, zeros) if z],
        )
        p = np.where(zeros, floor, p)
    statistic, combined = combine_pvalues(p, method="fisher")
    return PooledResult(
        method=PoolMethod.FISHER,
        tau_bar_pooled=None,
        statistic=max(0.0, float(statistic)),
        p_value=float(min(1.0, combined)),
        per_unit=[UnitSummary(unit_id=i, p_value=float(v)) for i, v in zip(ids, p)],
        replicates=replicates,
    )


def fisher_panel_test(
    panel: Panel,
    estimand: EstimandSpec,
    M: int,
    seed: int,
    *,
    tie_rule: TieRule = TieRule.ADD_ONE,
    threads: int = 1,
) -> PooledResult:
    """Fisher's method over the units whose variance-bound aggregate is positive.

    An all-zero unit has a degenerate null distribution and would enter with
    p = 0; such units are excluded the same way the pooled tests exclude them.
    Unit i keeps the seed derive_seed(seed, i) of its position in the panel.
    """
    tests: list[TestResult] = []
    excluded: list[str] = []
    for i, unit in enumerate(panel.units):
        _, sigma2 = estimand_terms(unit.y, unit.w, unit.p1, estimand, unit.mechanism)
        if not np.sum(sigma2) > 0.0:
            log.warning("unit %s has zero variance (all-zero outcomes?); excluded from Fisher's method", unit.unit_id)
            excluded.append(unit.unit_id)
            continue
        tests.append(exact_test(unit, estimand, M, derive_seed(seed, i), tie_rule=tie_rule, threads=threads))
    if not tests:
        raise PanelError("no unit with positive variance left to combine")
    combined = fisher_combine(
        [t.p_value for t in tests], replicates=M, unit_ids=[t.unit_id for t in tests],
    )
    return combined.model_copy(update={"excluded_units": excluded, "seed": seed, "estimand": estimand})
