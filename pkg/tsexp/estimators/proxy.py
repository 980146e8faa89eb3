"""Proxy-adjusted estimators: subtract a predictable part of y_t before weighting.

A proxy rule sees only the observed outcomes up to t - p - q_t - 1. It is
handed exactly that read-only slice, so it cannot look ahead.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from core.experiment import UnitExperiment
from estimators.horvitz_thompson import ht_terms, step_sizes

ProxyRule = Callable[[np.ndarray], float]


def lagged_outcome(history: np.ndarray) -> float:
    """Last observed outcome; 0 when nothing has been observed yet."""
    return float(history[-1]) if history.size else 0.0


def zero_proxy(history: np.ndarray) -> float:
    return 0.0


def proxy_values(y: np.ndarray, p: int, q: int = 0, rule: ProxyRule = lagged_outcome) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    view = y.view()
    view.setflags(write=False)
    T = y.size
    k = step_sizes(T, p, q)
    return np.array([rule(view[: i - ki]) for i, ki in zip(range(p, T), k)], dtype=float)


def proxy_adjusted_terms(
    y: np.ndarray,
    w: np.ndarray,
    p1: np.ndarray,
    p: int,
    q: int = 0,
    rule: ProxyRule = lagged_outcome,
) -> tuple[np.ndarray, np.ndarray]:
    """HT terms with y_t replaced by y_t - proxy_t. `y` is 1-d; w, p1 may be batched."""
    adjusted = np.array(y, dtype=float, copy=True)
    adjusted[p:] -= proxy_values(y, p, q, rule)
    return ht_terms(adjusted, w, p1, p, q)


def proxy_adjusted_estimate(
    e: UnitExperiment, p: int, rule: ProxyRule = lagged_outcome, *, q: int = 0
) -> np.ndarray:
    return proxy_adjusted_terms(e.y, e.w, e.p1, p, q, rule)[0]
