"""One entry point from an EstimandSpec to per-t terms and an EstimateResult."""

from __future__ import annotations

import numpy as np
import pandas as pd

from core.experiment import UnitExperiment
from core.mechanisms import AssignmentMechanism
from estimators.horvitz_thompson import average_estimate, ht_terms
from estimators.m_period import m_period_terms
from estimators.proxy import ProxyRule, lagged_outcome, proxy_adjusted_terms
from estimators.standardized import standardized_terms
from models import EstimandSpec, EstimateResult


def estimand_terms(
    y: np.ndarray,
    w: np.ndarray,
    p1: np.ndarray,
    estimand: EstimandSpec,
    mechanism: AssignmentMechanism | None = None,
    proxy_rule: ProxyRule | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """(tau_hat, sigma2_hat) for the estimand; w and p1 may carry a batch axis."""
    if estimand.is_m_period:
        return m_period_terms(y, w, p1, estimand.m, estimand.w_target, estimand.w_comparison)
    if estimand.standardized:
        return standardized_terms(y, w, p1, estimand.p, mechanism)
    if estimand.proxy is not None or proxy_rule is not None:
        return proxy_adjusted_terms(y, w, p1, estimand.p, estimand.q, proxy_rule or lagged_outcome)
    return ht_terms(y, w, p1, estimand.p, estimand.q)


def estimate(
    e: UnitExperiment,
    estimand: EstimandSpec,
    *,
    proxy_rule: ProxyRule | None = None,
    ci_level: float = 0.95,
) -> EstimateResult:
    tau, sigma2 = estimand_terms(e.y, e.w, e.p1, estimand, e.mechanism, proxy_rule)
    return average_estimate(
        tau, sigma2, estimand.horizon, estimand=estimand, unit_id=e.unit_id, ci_level=ci_level
    )


def running_estimate(result: EstimateResult, z: float | None = None) -> pd.DataFrame:
    """Running average of the per-t contributions with a +-z*sqrt(gamma) band."""
    z = result.ci_z if z is None else z
    frame = pd.DataFrame([c.model_dump() for c in result.per_t])
    k = np.arange(1, len(frame) + 1)
    frame["running_mean"] = frame["tau_hat"].cumsum() / k
    frame["running_gamma"] = frame["sigma2_hat"].cumsum() / k ** 2
    half = z * np.sqrt(frame["running_gamma"])
    frame["lower"] = frame["running_mean"] - half
    frame["upper"] = frame["running_mean"] + half
    return frame
