"""Rejection rates of the tests over a grid of simulated designs."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd

from core.mechanisms import AssignmentMechanism, BernoulliConstant
from inference.conservative import conservative_test
from inference.randomization import InferenceError, exact_test
from models import EstimandSpec, PotentialProcessSpec, TestMethod, TieRule
from parallel import gather_sync
from process.simulator import draw_noise, simulate_experiment
from seeding import derive_seed

log = logging.getLogger(__name__)

STANDARDIZED_EXACT = "standardized-exact"


@dataclass(frozen=True)
class GridPoint:
    """One design in a power study; `x` is the value plotted on the horizontal axis."""

    x: float
    spec: PotentialProcessSpec
    label: str = field(default="")


def _one_replication(
    point: GridPoint,
    estimand: EstimandSpec,
    mechanism: AssignmentMechanism,
    T: int,
    M: int,
    seed: int,
    alpha: float,
    tie_rule: TieRule,
    standardized: bool,
) -> dict[str, bool]:
    noise = draw_noise(point.spec, T, derive_seed(seed, 0))
    e = simulate_experiment(point.spec, noise, mechanism, derive_seed(seed, 1))
    exact = exact_test(e, estimand, M, derive_seed(seed, 2), tie_rule=tie_rule)
    clt = conservative_test(e, estimand)
    out = {
        TestMethod.EXACT.value: exact.p_value <= alpha,
        TestMethod.CONSERVATIVE.value: clt.p_value is not None and clt.p_value <= alpha,
    }
    if standardized:
        v_spec = EstimandSpec(p=estimand.p, standardized=True)
        v = exact_test(e, v_spec, M, derive_seed(seed, 3), tie_rule=tie_rule)
        out[STANDARDIZED_EXACT] = v.p_value <= alpha
    return out


def power_curve(
    grid: Sequence[GridPoint],
    estimand: EstimandSpec,
    M: int,
    outer_replications: int,
    seed: int,
    *,
    T: int = 100,
    mechanism: AssignmentMechanism | None = None,
    alpha: float = 0.05,
    tie_rule: TieRule = TieRule.STRICT,
    standardized: bool = False,
    threads: int = 1,
) -> pd.DataFrame:
    """Rejection rate per (grid point, method) with its binomial standard error.

    Outer replication r at grid point g uses seeds derived from (seed, g, r).
    Columns: x, label, method, rejections, n, rejection_rate, se.
    """
    if not grid:
        raise InferenceError("power grid must be non-empty")
    if outer_replications < 1:
        raise InferenceError(f"outer_replications must be >= 1, got {outer_replications}")
    flat = [point.x for point in grid if point.spec.is_degenerate]
    if flat:
        raise InferenceError(f"grid points {flat} have sigma0 = sigma1 = 0; no randomness to test against")
    mechanism = mechanism or BernoulliConstant(0.5)
    do_standardized = standardized and not estimand.is_m_period and estimand.q == 0

    rows: list[dict] = []
    for g, point in enumerate(grid):
        calls = [
            (
                lambda r=r: _one_replication(
                    point, estimand, mechanism, T, M, derive_seed(seed, g, r),
                    alpha, tie_rule, do_standardized,
                )
            )
            for r in range(outer_replications)
        ]
        results = gather_sync(calls, threads=threads)
        for method in results[0]:
            hits = int(sum(res[method] for res in results))
            rate = hits / outer_replications
            rows.append(
                {
                    "x": point.x,
                    "label": point.label,
                    "method": method,
                    "rejections": hits,
                    "n": outer_replications,
                    "rejection_rate": rate,
                    "se": float(np.sqrt(rate * (1.0 - rate) / outer_replications)),
                }
            )
        log.info("power grid point x=%s done (%d replications)", point.x, outer_replications)
    return pd.DataFrame(rows)
