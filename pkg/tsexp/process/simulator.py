"""Coupled potential-outcome processes.

One noise draw eps_{1:T} is shared by every counterfactual path, so
Y_t(w) and Y_t(w') differ only through the treatments. Outcomes are
evaluated lazily along whichever path is requested; the 2^T tree of
potential outcomes is never built.

    ar1:  Y_t = mu(w_t) + phi * Y_{t-1} + sigma(w_t) * eps_t,     Y_0 = y0
    ma1:  Y_t = mu(w_t) + sigma(w_t) * eps_t + theta * sigma(w_{t-1}) * eps_{t-1}

Impulse variants replace the arm drift by mu + sigma * m(w_t) (see
`PotentialProcessSpec.drift`); the impulse MA then depends on w_{t-1:t} only.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from core.mechanisms import AssignmentMechanism
from core.experiment import UnitExperiment
from core.paths import TreatmentPath, sample_path
from models import NoiseKind, PotentialProcessSpec, ProcessFamily

log = logging.getLogger(__name__)


class ProcessError(ValueError):
    """Bad process input: length mismatch, p >= T, or an oversized enumeration."""


@dataclass(frozen=True, eq=False)
class NoisePath:
    epsilon: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        arr = np.array(self.epsilon, dtype=float, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "epsilon", arr)

    def __len__(self) -> int:
        return int(self.epsilon.size)


def draw_noise(spec: PotentialProcessSpec, T: int, seed: int) -> NoisePath:
    if T < 1:
        raise ProcessError(f"noise length must be >= 1, got {T}")
    rng = np.random.default_rng(seed)
    if spec.noise is NoiseKind.CAUCHY:
        eps = rng.standard_cauchy(T)
    else:
        eps = rng.standard_normal(T)
    return NoisePath(eps, seed)


def _arm_arrays(spec: PotentialProcessSpec, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    treated = w == 1
    drift = np.where(treated, spec.drift(1), spec.drift(0))
    scale = np.where(treated, spec.scale(1), spec.scale(0))
    return drift, scale


def _lagged(x: np.ndarray) -> np.ndarray:
    pad = np.zeros(x.shape[:-1] + (1,))
    return np.concatenate([pad, x[..., :-1]], axis=-1)


def outcomes_along(spec: PotentialProcessSpec, eps: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Y_{1:n}(w) for a raw 0/1 array w whose last axis has length n <= len(eps).

    Leading axes of `w` index separate paths sharing the same noise.
    """
    w = np.asarray(w)
    eps = eps[: w.shape[-1]]
    drift, scale = _arm_arrays(spec, w)
    shock = scale * eps
    if spec.family is ProcessFamily.AR1:
        zi = np.full(w.shape[:-1] + (1,), spec.phi * spec.y0)
        y, _ = lfilter([1.0], [1.0, -spec.phi], drift + shock, axis=-1, zi=zi)
        return y
    if spec.impulse:
        # theta multiplies the whole lagged impulse sigma * (eps + m(w))
        return drift + shock + spec.theta * _lagged(drift - spec.mu + shock)
    return drift + shock + spec.theta * _lagged(shock)


def evaluate_path(spec: PotentialProcessSpec, noise: NoisePath, w: TreatmentPath) -> np.ndarray:
    if len(w) > len(noise):
        raise ProcessError(f"path length {len(w)} exceeds noise length {len(noise)}")
    return outcomes_along(spec, noise.epsilon, w.values)


def simulate_experiment(
    spec: PotentialProcessSpec,
    noise: NoisePath,
    mechanism: AssignmentMechanism,
    seed: int,
    *,
    unit_id: str = "sim",
) -> UnitExperiment:
    """Draw w under `mechanism` and return the observed experiment.

    Bernoulli mechanisms use `sample_path` directly. History-dependent ones are
    stepped with the same uniforms, each step seeing the simulated outcomes.
    """
    T = len(noise)
    if mechanism.is_bernoulli:
        sampled = sample_path(mechanism, None, T, seed)
        y = evaluate_path(spec, noise, sampled.path)
        w, p1 = sampled.path, sampled.p1
    else:
        u = np.random.default_rng(seed).random(T)
        w_arr = np.zeros(T, dtype=np.int8)
        p1 = np.empty(T)
        y = np.empty(T)
        for t in range(T):
            p1[t] = mechanism.probability(t + 1, w_arr[:t], y[:t])
            w_arr[t] = u[t] < p1[t]
            y[t] = outcomes_along(spec, noise.epsilon, w_arr[: t + 1])[-1]
        w = TreatmentPath(w_arr)
    return UnitExperiment(
        unit_id=unit_id,
        times=np.arange(1, T + 1),
        outcomes=y,
        treatments=w,
        mechanism=mechanism,
        probabilities=p1,
    )
