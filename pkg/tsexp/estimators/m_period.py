"""m-period impact estimator: compares two fixed treatment suffixes of length m + 1.

    tau_hat_t(w, w') = (1{suffix = w} - 1{suffix = w'}) * y_t / p_t(suffix)

Only the observed suffix's propensity is ever needed: when an indicator is
on, the suffix equals that target. The variance bound per t is tau_hat_t^2,
an unbiased estimate of Y(w)^2 / p(w) + Y(w')^2 / p(w').
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from core.experiment import UnitExperiment
from estimators.horvitz_thompson import EstimationError, check_lag, one_step_factors, suffix_propensity


def _check_suffixes(m: int, w_target: Sequence[int], w_comparison: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    target = np.asarray(w_target, dtype=np.int8)
    comparison = np.asarray(w_comparison, dtype=np.int8)
    if target.size != m + 1 or comparison.size != m + 1:
        raise EstimationError(
            f"suffixes must have length m + 1 = {m + 1}, got {target.size} and {comparison.size}"
        )
    if np.array_equal(target, comparison):
        raise EstimationError("target and comparison suffixes must differ")
    return target, comparison


def m_period_terms(
    y: np.ndarray,
    w: np.ndarray,
    p1: np.ndarray,
    m: int,
    w_target: Sequence[int],
    w_comparison: Sequence[int],
) -> tuple[np.ndarray, np.ndarray]:
    T = w.shape[-1]
    check_lag(T, m)
    target, comparison = _check_suffixes(m, w_target, w_comparison)
    prop = suffix_propensity(one_step_factors(w, p1), m)
    windows = sliding_window_view(w, m + 1, axis=-1)
    hit = np.all(windows == target, axis=-1).astype(float)
    miss = np.all(windows == comparison, axis=-1).astype(float)
    tau = (hit - miss) * np.asarray(y, dtype=float)[..., m:] / prop
    return tau, tau ** 2


def m_period_estimate(
    e: UnitExperiment, m: int, w_target: Sequence[int], w_comparison: Sequence[int]
) -> np.ndarray:
    return m_period_terms(e.y, e.w, e.p1, m, w_target, w_comparison)[0]
