"""Conservative CLT test of no average effect.

    Z~ = sqrt(n) * tau_bar_hat / sqrt(n^-1 * sum sigma2_hat_t)   (n = T_eff)

which equals tau_bar_hat / sqrt(gamma_hat). The bound overstates the
variance, so the test rejects at or below the nominal level.
"""

from __future__ import annotations

import logging

import numpy as np
from scipy.stats import norm

from core.experiment import UnitExperiment
from estimators.dispatch import estimand_terms
from estimators.proxy import ProxyRule
from models import Alternative, EstimandSpec, TestMethod, TestResult

log = logging.getLogger(__name__)

MIN_EFFECTIVE_T = 30


def normal_p_value(z: float, alternative: Alternative = Alternative.TWO_SIDED) -> float:
    if alternative is Alternative.GREATER:
        return float(norm.sf(z))
    if alternative is Alternative.LESS:
        return float(norm.cdf(z))
    return float(min(1.0, 2.0 * norm.sf(abs(z))))


def conservative_test(
    e: UnitExperiment,
    estimand: EstimandSpec,
    *,
    alternative: Alternative = Alternative.TWO_SIDED,
    proxy_rule: ProxyRule | None = None,
) -> TestResult:
    tau, sigma2 = estimand_terms(e.y, e.w, e.p1, estimand, e.mechanism, proxy_rule)
    n = tau.size
    if n < MIN_EFFECTIVE_T:
        log.warning(
            "unit %s: only %d contributing times (< %d); normal approximation may be poor",
            e.unit_id, n, MIN_EFFECTIVE_T,
        )
    tau_bar = float(np.sum(tau) / n)
    gamma = float(np.sum(sigma2) / n ** 2)
    common = dict(
        method=TestMethod.CONSERVATIVE,
        estimate=tau_bar,
        gamma_hat=gamma,
        alternative=alternative,
        conservative=True,
        estimand=estimand,
        unit_id=e.unit_id,
    )
    if gamma == 0.0:
        return TestResult(
            statistic=None,
            p_value=None,
            note="statistic undefined: every variance-bound term is zero",
            **common,
        )
    z = tau_bar / np.sqrt(gamma)
    return TestResult(statistic=float(z), p_value=normal_p_value(z, alternative), **common)
