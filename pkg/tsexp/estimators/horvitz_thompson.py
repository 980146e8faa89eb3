"""Horvitz-Thompson lag and stepped estimators with their variance bounds.

For t = p+1..T (0-based index i = t-1) with q_i = min(q, i - p) stepped
assignments available,

    tau_hat_t    = a * y_t * s_t / prop_t
    sigma2_hat_t = a^2 * y_t^2 * [1 + 2 * prop_t * (2^(p+q_i) - 1)] / prop_t^2

where a = 2^-(p+q_i), s_t = +1 if w_{t-p} = 1 else -1, and prop_t is the
propensity of the observed suffix w_{t-p-q_i : t}, a product of one-step
factors w*p1 + (1-w)*(1-p1).

The kernels take arrays whose last axis is time, so a (M, T) stack of
resampled paths is handled in one call by the randomization tests.
"""

from __future__ import annotations

import logging

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.stats import norm

from core.experiment import UnitExperiment
from models import EstimandSpec, EstimateResult, PerTimeContribution

log = logging.getLogger(__name__)


class EstimationError(ValueError):
    """Bad estimator input: p + q >= T, empty series, or propensities outside (0, 1)."""


def check_lag(T: int, p: int, q: int = 0) -> None:
    if p < 0 or q < 0:
        raise EstimationError(f"lag and step must be non-negative, got p={p}, q={q}")
    if p + q >= T:
        raise EstimationError(f"p + q = {p + q} must be smaller than T = {T}")


def one_step_factors(w: np.ndarray, p1: np.ndarray) -> np.ndarray:
    """Pr(W_t = w_t | F_{t-1}) along the path; any leading batch axes allowed."""
    f = np.where(w == 1, p1, 1.0 - p1)
    if np.any(f <= 0.0) or np.any(f >= 1.0):
        raise EstimationError("one-step propensities must lie strictly inside (0, 1)")
    return f


def suffix_propensity(factors: np.ndarray, p: int, q: int = 0) -> np.ndarray:
    """Propensity of the observed suffix ending at each i = p..T-1.

    Times whose full window w_{t-p-q:t} fits use a sliding-window product;
    the first q times use the cumulative product from t = 1 (the boundary rule).
    """
    T = factors.shape[-1]
    n_boundary = min(q, T - p)
    head = np.cumprod(factors[..., : p + n_boundary], axis=-1)[..., p:]
    if T < p + q + 1:
        return head
    full = sliding_window_view(factors, p + q + 1, axis=-1).prod(axis=-1)
    return np.concatenate([head, full], axis=-1)


def step_sizes(T: int, p: int, q: int) -> np.ndarray:
    """Effective (p + q_i) at every i = p..T-1."""
    return p + np.minimum(q, np.arange(p, T) - p)


def ht_terms(
    y: np.ndarray, w: np.ndarray, p1: np.ndarray, p: int, q: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """(tau_hat, sigma2_hat) for t = p+1..T along the last axis."""
    T = w.shape[-1]
    check_lag(T, p, q)
    prop = suffix_propensity(one_step_factors(w, p1), p, q)
    k = step_sizes(T, p, q)
    a = 2.0 ** -k
    y_t = y[..., p:]
    sign = np.where(w[..., : T - p] == 1, 1.0, -1.0)
    tau = a * y_t * sign / prop
    sigma2 = a ** 2 * y_t ** 2 * (1.0 + 2.0 * prop * (2.0 ** k - 1.0)) / prop ** 2
    return tau, sigma2


def ht_lag_estimate(e: UnitExperiment, p: int) -> np.ndarray:
    return ht_terms(e.y, e.w, e.p1, p)[0]


def ht_step_estimate(e: UnitExperiment, p: int, q: int) -> np.ndarray:
    return ht_terms(e.y, e.w, e.p1, p, q)[0]


def variance_bound(e: UnitExperiment, p: int, q: int = 0) -> np.ndarray:
    return ht_terms(e.y, e.w, e.p1, p, q)[1]


def average_estimate(
    tau: np.ndarray,
    sigma2: np.ndarray,
    p: int,
    *,
    estimand: EstimandSpec | None = None,
    unit_id: str | None = None,
    ci_level: float = 0.95,
) -> EstimateResult:
    """Temporal average and variance-bound aggregate, summed in index order."""
    tau = np.asarray(tau, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    n = tau.size
    if n == 0:
        raise EstimationError("cannot average an empty series")
    if sigma2.size != n:
        raise EstimationError(f"bound series length {sigma2.size} != estimate length {n}")
    estimand = estimand or EstimandSpec(p=p)
    start = estimand.horizon + 1
    per_t = [
        PerTimeContribution(t=start + i, tau_hat=float(tau[i]), sigma2_hat=float(sigma2[i]))
        for i in range(n)
    ]
    return EstimateResult(
        estimand=estimand,
        unit_id=unit_id,
        per_t=per_t,
        tau_bar_hat=float(np.sum(tau) / n),
        gamma_hat=float(np.sum(sigma2) / n ** 2),
        T_effective=n,
        ci_level=ci_level,
        ci_z=float(norm.ppf(0.5 + ci_level / 2.0)),
    )
