"""Exact Monte Carlo randomization test of the sharp null.

Under the sharp null every potential outcome equals the observed one, so a
replicate redraws the treatment path from the mechanism, keeps y^obs, and
recomputes the average estimate with the replicate's own probability path.

Replicate m (1-based) draws its path from `derive_seed(seed, m)`. Replicates
are evaluated in fixed chunks of `chunk` rows (one vectorized call per
chunk), and the chunks may run on several threads; the p-value is a count
and does not depend on either.
"""

from __future__ import annotations

import logging
from typing import Callable

import numpy as np

import config
from core.experiment import UnitExperiment
from core.paths import sample_paths
from estimators.dispatch import estimand_terms
from estimators.proxy import ProxyRule
from models import Alternative, EstimandSpec, TestMethod, TestResult, TieRule
from parallel import chunk_ranges, gather_sync
from seeding import derive_seed

log = logging.getLogger(__name__)


class InferenceError(ValueError):
    """Bad test input, e.g. zero replicates."""


def exceedances(
    observed: float, draws: np.ndarray, *, tie_rule: TieRule, alternative: Alternative
) -> int:
    if alternative is Alternative.TWO_SIDED:
        obs, d = abs(observed), np.abs(draws)
    elif alternative is Alternative.GREATER:
        obs, d = observed, draws
    else:
        obs, d = -observed, -draws
    if tie_rule is TieRule.STRICT:
        return int(np.count_nonzero(d > obs))
    return int(np.count_nonzero(d >= obs))


def randomization_p_value(
    observed: float,
    draws: np.ndarray,
    *,
    tie_rule: TieRule = TieRule.STRICT,
    alternative: Alternative = Alternative.TWO_SIDED,
) -> float:
    """strict: #{d > obs} / M.   add-one: (1 + #{d >= obs}) / (M + 1)."""
    M = len(draws)
    if M == 0:
        raise InferenceError("need at least one null draw")
    count = exceedances(observed, np.asarray(draws), tie_rule=tie_rule, alternative=alternative)
    if tie_rule is TieRule.STRICT:
        return count / M
    return (1 + count) / (M + 1)


def replicate_statistics(
    e: UnitExperiment,
    estimand: EstimandSpec,
    seeds: list[int],
    proxy_rule: ProxyRule | None = None,
) -> np.ndarray:
    """Average estimate under each resampled path, one per seed."""
    W, P1 = sample_paths(e.mechanism, e.y, e.T, seeds)
    tau, _ = estimand_terms(e.y, W, P1, estimand, e.mechanism, proxy_rule)
    return tau.mean(axis=-1)


def null_distribution(
    M: int,
    draw_chunk: Callable[[list[int]], np.ndarray],
    *,
    threads: int = 1,
    chunk: int | None = None,
) -> np.ndarray:
    """Run `draw_chunk` over replicates 1..M in fixed chunks; returns M draws in order.

    `draw_chunk` receives the replicate indices of one chunk.
    """
    if M < 1:
        raise InferenceError(f"replicate count M must be >= 1, got {M}")
    chunk = chunk or config.REPLICATE_CHUNK
    blocks = chunk_ranges(M, chunk)
    calls = [(lambda a=a, b=b: draw_chunk(list(range(a + 1, b + 1)))) for a, b in blocks]
    return np.concatenate(gather_sync(calls, threads=threads))


def exact_test(
    e: UnitExperiment,
    estimand: EstimandSpec,
    M: int,
    seed: int,
    *,
    tie_rule: TieRule = TieRule.STRICT,
    alternative: Alternative = Alternative.TWO_SIDED,
    keep_draws: bool = False,
    threads: int = 1,
    chunk: int | None = None,
    proxy_rule: ProxyRule | None = None,
) -> TestResult:
    if M < 1:
        raise InferenceError(f"replicate count M must be >= 1, got {M}")
    if not e.mechanism.is_bernoulli:
        log.info("resampling a history-dependent mechanism with observed outcomes (sharp null only)")
    tau, sigma2 = estimand_terms(e.y, e.w, e.p1, estimand, e.mechanism, proxy_rule)
    observed = float(tau.mean())

    def _chunk(ms: list[int]) -> np.ndarray:
        return replicate_statistics(e, estimand, [derive_seed(seed, m) for m in ms], proxy_rule)

    draws = null_distribution(M, _chunk, threads=threads, chunk=chunk)
    p = randomization_p_value(observed, draws, tie_rule=tie_rule, alternative=alternative)
    log.debug("exact test %s: statistic=%.6g p=%.6g M=%d", estimand.label, observed, p, M)
    return TestResult(
        method=TestMethod.EXACT,
        statistic=observed,
        p_value=p,
        estimate=observed,
        gamma_hat=float(sigma2.sum() / sigma2.size ** 2),
        replicates=M,
        seed=seed,
        tie_rule=tie_rule,
        alternative=alternative,
        estimand=estimand,
        unit_id=e.unit_id,
        null_draws=draws.tolist() if keep_draws else None,
    )
