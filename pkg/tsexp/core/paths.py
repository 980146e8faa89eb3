"""Treatment paths and the path sampler used by the randomization tests."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from core.mechanisms import AssignmentError, AssignmentMechanism

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TreatmentPath:
    """Binary assignment path w_{1:T}; stored as a read-only int8 array."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=np.int8, copy=True)
        if arr.ndim != 1 or arr.size == 0:
            raise AssignmentError("treatment path must be a non-empty 1-d sequence")
        raw = np.asarray(self.values)
        if not np.all((raw == 0) | (raw == 1)):
            raise AssignmentError("treatment path values must be 0 or 1")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def of(cls, values: Sequence[int] | np.ndarray) -> "TreatmentPath":
        return cls(np.asarray(values))

    def __len__(self) -> int:
        return int(self.values.size)

    def __iter__(self) -> Iterator[int]:
        return iter(int(v) for v in self.values)

    def __getitem__(self, i):
        return self.values[i]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TreatmentPath):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    def __hash__(self) -> int:
        return hash(self.values.tobytes())

    def __repr__(self) -> str:
        return f"TreatmentPath(T={len(self)}, treated={int(self.values.sum())})"


@dataclass(frozen=True, eq=False)
class SampledPath:
    """A drawn path together with the realized probabilities p_t(1)."""

    path: TreatmentPath
    p1: np.ndarray


def sample_path(
    mechanism: AssignmentMechanism, y_obs: np.ndarray | None, T: int, seed: int
) -> SampledPath:
    """Draw w_{1:T} from the mechanism; deterministic given (mechanism, y_obs, T, seed).

    One uniform u_t per step and w_t = 1{u_t < p_t(1)}. Bernoulli mechanisms
    are drawn in one vectorized step; history-dependent ones are stepped
    sequentially, fed (w_{1:t-1}, y^obs_{1:t-1}).
    """
    W, P1 = sample_paths(mechanism, y_obs, T, [seed])
    return SampledPath(TreatmentPath(W[0]), P1[0])


def sample_paths(
    mechanism: AssignmentMechanism,
    y_obs: np.ndarray | None,
    T: int,
    seeds: Sequence[int],
) -> tuple[np.ndarray, np.ndarray]:
    """Draw one path per seed; returns (W, P1), both shaped (len(seeds), T).

    Row r equals `sample_path(mechanism, y_obs, T, seeds[r])`.
    """
    if T < 1:
        raise AssignmentError(f"path length must be >= 1, got {T}")
    U = np.stack([np.random.default_rng(s).random(T) for s in seeds])
    if mechanism.is_bernoulli:
        P1 = np.broadcast_to(mechanism.schedule(T), U.shape).copy()
        return (U < P1).astype(np.int8), P1

    if y_obs is None or len(y_obs) < T - 1:
        raise AssignmentError("history-dependent sampling needs observed outcomes covering 1..T-1")
    W = np.zeros(U.shape, dtype=np.int8)
    P1 = np.empty(U.shape)
    for r in range(U.shape[0]):
        for t in range(T):
            P1[r, t] = mechanism.probability(t + 1, W[r, :t], y_obs[:t])
            W[r, t] = U[r, t] < P1[r, t]
    return W, P1
