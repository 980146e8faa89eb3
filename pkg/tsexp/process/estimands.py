"""True lag and stepped causal effects of a simulated process.

The lag effect at time t compares switching w_{t-p} from 0 to 1, averaging
uniformly over the p later assignments and holding the observed history
w_{1:t-p-1} fixed. The stepped effect additionally averages over the q
assignments before the switched one.

For ar1 processes with arm-only drift and scale there is a closed form,

    tau_{t,p} = phi^p * {(mu1 - mu0) + (sigma1 - sigma0) * eps_{t-p}},

(for impulse ar1 the drift gap is sigma * (mu1 - mu0) and the scale gap is 0).
Everything else is evaluated by enumerating the 2^p (or 2^(p+q)) paths.
"""

from __future__ import annotations

import itertools
import logging

import numpy as np

from core.paths import TreatmentPath
from models import BoundaryRule, PotentialProcessSpec, ProcessFamily
from process.simulator import NoisePath, ProcessError, outcomes_along

log = logging.getLogger(__name__)

ENUMERATION_CAP = 20


def _check_lag(T: int, p: int, q: int = 0, *, enumerated: bool = True) -> None:
    if p < 0 or q < 0:
        raise ProcessError(f"lag and step must be non-negative, got p={p}, q={q}")
    if p >= T:
        raise ProcessError(f"lag p={p} must be smaller than T={T}")
    if enumerated and p + q > ENUMERATION_CAP:
        raise ProcessError(f"enumeration over 2^(p+q) paths is capped at p+q <= {ENUMERATION_CAP}")


def steps_at(t: int, p: int, q: int, boundary: BoundaryRule = BoundaryRule.LAG_MINUS_ONE) -> int:
    """Number of stepped assignments averaged over at time t (1-based).

    Away from the start this is q. Near the start only t - p - 1 earlier
    assignments exist. The literal rule asks for t - p + 1 of them; positions
    before t = 1 carry no outcome effect, so both readings collapse onto the
    t - p - 1 available ones.
    """
    available = t - p - 1
    if boundary is BoundaryRule.LITERAL and t <= p + q + 1:
        requested = t - p + 1
    else:
        requested = q if t > p + q else available
    return min(requested, available)


def _closed_form_applies(spec: PotentialProcessSpec) -> bool:
    return spec.family is ProcessFamily.AR1


def _closed_form_lag(spec: PotentialProcessSpec, eps: np.ndarray, T: int, p: int) -> np.ndarray:
    if spec.impulse:
        drift_gap = spec.sigma0 * (spec.mu1 - spec.mu0)
        scale_gap = 0.0
    else:
        drift_gap = spec.mu1 - spec.mu0
        scale_gap = spec.sigma1 - spec.sigma0
    return spec.phi ** p * (drift_gap + scale_gap * eps[: T - p])


def _enumerated_effect(
    spec: PotentialProcessSpec, eps: np.ndarray, w_obs: np.ndarray, t: int, p: int, qt: int
) -> float:
    prefix = w_obs[: t - p - qt - 1]
    total = 0.0
    n = 0
    for before in itertools.product((0, 1), repeat=qt):
        for after in itertools.product((0, 1), repeat=p):
            treated = np.concatenate([prefix, before, [1], after])
            control = np.concatenate([prefix, before, [0], after])
            total += outcomes_along(spec, eps, treated)[-1] - outcomes_along(spec, eps, control)[-1]
            n += 1
    return total / n


def enumerate_step_effect(
    spec: PotentialProcessSpec,
    noise: NoisePath,
    w_obs: TreatmentPath,
    p: int,
    q: int = 0,
    *,
    boundary: BoundaryRule = BoundaryRule.LAG_MINUS_ONE,
) -> np.ndarray:
    """tau^{(q)}_{t,p} for t = p+1..T by direct path enumeration."""
    T = len(w_obs)
    _check_lag(T, p, q)
    if T > len(noise):
        raise ProcessError(f"path length {T} exceeds noise length {len(noise)}")
    w = w_obs.values
    return np.array(
        [
            _enumerated_effect(spec, noise.epsilon, w, t, p, steps_at(t, p, q, boundary))
            for t in range(p + 1, T + 1)
        ]
    )


def true_lag_effect(
    spec: PotentialProcessSpec, noise: NoisePath, w_obs: TreatmentPath, p: int
) -> np.ndarray:
    """tau_{t,p} for t = p+1..T (closed form when available, enumeration otherwise)."""
    T = len(w_obs)
    closed = _closed_form_applies(spec)
    _check_lag(T, p, enumerated=not closed)
    if closed:
        return _closed_form_lag(spec, noise.epsilon, T, p)
    return enumerate_step_effect(spec, noise, w_obs, p, 0)


def true_step_effect(
    spec: PotentialProcessSpec,
    noise: NoisePath,
    w_obs: TreatmentPath,
    p: int,
    q: int,
    *,
    boundary: BoundaryRule = BoundaryRule.LAG_MINUS_ONE,
) -> np.ndarray:
    if q == 0:
        return true_lag_effect(spec, noise, w_obs, p)
    return enumerate_step_effect(spec, noise, w_obs, p, q, boundary=boundary)
