"""Sharp-null variances and the standardized lag statistic v_{t,p}.

Under the sharp null the outcomes are fixed, so the randomization variance
of tau_hat_{t,p} is

    y_t^2 * 2^(-2p) * sum_w [1/p_t(1, w) + 1/p_t(0, w)],   w in {0,1}^p.

For Bernoulli mechanisms the sum factorizes into prod_s 1/(pi_s (1 - pi_s))
over s = t-p..t. Dividing tau_hat by the square root gives v_{t,p}, which has
mean 0 and variance 1 under the null. v is 0 where y_t = 0.
"""

from __future__ import annotations

import itertools

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from core.experiment import UnitExperiment
from core.mechanisms import AssignmentMechanism, path_propensity
from estimators.horvitz_thompson import check_lag, ht_terms


def _enumerated_inverse_mass(
    mechanism: AssignmentMechanism, w: np.ndarray, y: np.ndarray, p: int
) -> np.ndarray:
    T = w.size
    out = np.empty(T - p)
    tails = list(itertools.product((0, 1), repeat=p))
    for i in range(p, T):
        hist = w[: i - p]
        out[i - p] = sum(
            1.0 / path_propensity(mechanism, hist, (lead, *tail), y)
            for tail in tails
            for lead in (0, 1)
        )
    return out


def null_variance_terms(
    y: np.ndarray,
    w: np.ndarray,
    p1: np.ndarray,
    p: int,
    mechanism: AssignmentMechanism | None = None,
) -> np.ndarray:
    """Sharp-null variance of tau_hat_{t,p} for t = p+1..T along the last axis."""
    T = w.shape[-1]
    check_lag(T, p)
    scale = np.asarray(y, dtype=float)[..., p:] ** 2 * 4.0 ** -p
    if mechanism is None or mechanism.is_bernoulli:
        inv = 1.0 / (p1 * (1.0 - p1))
        mass = sliding_window_view(inv, p + 1, axis=-1).prod(axis=-1)
        return scale * mass
    if w.ndim == 1:
        return scale * _enumerated_inverse_mass(mechanism, w, y, p)
    mass = np.stack([_enumerated_inverse_mass(mechanism, row, y, p) for row in w])
    return scale * mass


def null_variance(e: UnitExperiment, p: int) -> np.ndarray:
    return null_variance_terms(e.y, e.w, e.p1, p, e.mechanism)


def standardized_terms(
    y: np.ndarray,
    w: np.ndarray,
    p1: np.ndarray,
    p: int,
    mechanism: AssignmentMechanism | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """(v_{t,p}, scaled variance bound) with both set to 0 where y_t = 0."""
    tau, sigma2 = ht_terms(y, w, p1, p)
    nv = null_variance_terms(y, w, p1, p, mechanism)
    safe = np.where(nv > 0.0, nv, 1.0)
    v = np.where(nv > 0.0, tau / np.sqrt(safe), 0.0)
    s2 = np.where(nv > 0.0, sigma2 / safe, 0.0)
    return v, s2


def standardized_estimate(e: UnitExperiment, p: int) -> np.ndarray:
    return standardized_terms(e.y, e.w, e.p1, p, e.mechanism)[0]
