"""Assignment mechanisms: the design-based probability law of W_t.

A mechanism gives p_t(1) = Pr(W_t = 1 | F_{t-1}), the one-step treatment
probability conditional on the past treatments and observed outcomes. Time
labels are 1-based throughout: `probability(t, w_hist, y_hist)` is asked for
step t with histories of length t - 1.

Bernoulli mechanisms ignore the history, so their probabilities form a fixed
schedule that can be sampled in one vectorized draw. History-dependent
mechanisms must be stepped sequentially.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence, runtime_checkable

import numpy as np
import pandas as pd

from models import MechanismKind, MechanismSpec

log = logging.getLogger(__name__)

# Interior of (0, 1) accepted as a valid treatment probability.
PROB_FLOOR = 1e-12


class AssignmentError(ValueError):
    """A treatment probability fell outside (0, 1) or a path had zero mass."""


def check_probability(p: float, *, t: int | None = None) -> float:
    p = float(p)
    if not (PROB_FLOOR <= p <= 1.0 - PROB_FLOOR):
        where = f" at t={t}" if t is not None else ""
        raise AssignmentError(f"treatment probability {p!r}{where} must lie strictly inside (0, 1)")
    return p


@runtime_checkable
class AssignmentMechanism(Protocol):
    kind: MechanismKind

    @property
    def is_bernoulli(self) -> bool: ...

    def probability(self, t: int, w_hist: np.ndarray, y_hist: np.ndarray | None) -> float: ...

    def probabilities(self, w: np.ndarray, y: np.ndarray | None) -> np.ndarray: ...

    def to_spec(self) -> MechanismSpec: ...


@dataclass(frozen=True)
class BernoulliConstant:
    pi: float
    kind: MechanismKind = MechanismKind.BERNOULLI_CONSTANT

    def __post_init__(self) -> None:
        check_probability(self.pi)

    @property
    def is_bernoulli(self) -> bool:
        return True

    def schedule(self, T: int) -> np.ndarray:
        return np.full(T, self.pi, dtype=float)

    def probability(self, t: int, w_hist: np.ndarray, y_hist: np.ndarray | None) -> float:
        return self.pi

    def probabilities(self, w: np.ndarray, y: np.ndarray | None) -> np.ndarray:
        return self.schedule(len(w))

    def to_spec(self) -> MechanismSpec:
        return MechanismSpec(kind=self.kind, pi=self.pi)


@dataclass(frozen=True)
class BernoulliPiecewise:
    """Piecewise-constant schedule. `breakpoints` holds (start_t, pi) pairs;
    regime k applies from its start until the next start. The first regime
    must start at t = 1."""

    breakpoints: tuple[tuple[int, float], ...]
    kind: MechanismKind = MechanismKind.BERNOULLI_PIECEWISE

    def __post_init__(self) -> None:
        if not self.breakpoints:
            raise AssignmentError("piecewise schedule needs at least one breakpoint")
        ordered = tuple(sorted((int(s), float(p)) for s, p in self.breakpoints))
        starts = [s for s, _ in ordered]
        if starts[0] != 1:
            raise AssignmentError(f"first breakpoint must start at t=1, got t={starts[0]}")
        if len(set(starts)) != len(starts):
            raise AssignmentError(f"duplicate breakpoint starts in {starts}")
        for s, p in ordered:
            check_probability(p, t=s)
        object.__setattr__(self, "breakpoints", ordered)

    @property
    def is_bernoulli(self) -> bool:
        return True

    def schedule(self, T: int) -> np.ndarray:
        starts = np.array([s for s, _ in self.breakpoints])
        pis = np.array([p for _, p in self.breakpoints])
        regime = np.searchsorted(starts, np.arange(1, T + 1), side="right") - 1
        return pis[regime]

    def probability(self, t: int, w_hist: np.ndarray, y_hist: np.ndarray | None) -> float:
        return float(self.schedule(t)[-1])

    def probabilities(self, w: np.ndarray, y: np.ndarray | None) -> np.ndarray:
        return self.schedule(len(w))

    def to_spec(self) -> MechanismSpec:
        return MechanismSpec(
            kind=self.kind,
            breakpoints=[{"start": s, "pi": p} for s, p in self.breakpoints],
        )


@dataclass(frozen=True)
class OutcomeSignRule:
    """p_t(1) = base + shift * 1{y_{t-1} > 0}, clipped inside (0, 1).

    At t = 1 there is no previous outcome and the rule returns `base`.
    """

    base: float
    shift: float

    def __call__(self, w_hist: np.ndarray, y_hist: np.ndarray | None) -> float:
        if y_hist is None:
            raise AssignmentError("outcome-sign rule needs the observed outcomes")
        bump = self.shift if len(y_hist) and y_hist[-1] > 0 else 0.0
        return float(np.clip(self.base + bump, PROB_FLOOR, 1.0 - PROB_FLOOR))


@dataclass(frozen=True)
class HistoryDependent:
    """Mechanism whose probability is an arbitrary function of (w_{1:t-1}, y_{1:t-1}).

    Resampling such a mechanism with the observed outcomes is valid only
    under the sharp null, where outcomes do not react to treatment.
    """

    rule: Callable[[np.ndarray, np.ndarray | None], float]
    kind: MechanismKind = MechanismKind.HISTORY_DEPENDENT

    @property
    def is_bernoulli(self) -> bool:
        return False

    def probability(self, t: int, w_hist: np.ndarray, y_hist: np.ndarray | None) -> float:
        return check_probability(self.rule(w_hist, y_hist), t=t)

    def probabilities(self, w: np.ndarray, y: np.ndarray | None) -> np.ndarray:
        w = np.asarray(w)
        return np.array(
            [self.probability(t + 1, w[:t], None if y is None else y[:t]) for t in range(len(w))]
        )

    def to_spec(self) -> MechanismSpec:
        if not isinstance(self.rule, OutcomeSignRule):
            raise AssignmentError("only outcome-sign rules have a JSON form")
        return MechanismSpec(
            kind=self.kind, rule="outcome-sign", base=self.rule.base, shift=self.rule.shift
        )


def path_propensity(
    mechanism: AssignmentMechanism,
    w_history: Sequence[int] | np.ndarray,
    w_suffix: Sequence[int] | np.ndarray,
    y_obs: np.ndarray | None = None,
) -> float:
    """Pr(W_{s+1 : s+k} = w_suffix | F_s) where s = len(w_history).

    The product of sequential one-step probabilities along the suffix.
    History-dependent rules are fed the observed outcomes `y_obs`, which must
    cover at least the times before the last suffix step.
    """
    suffix = np.asarray(w_suffix, dtype=np.int8)
    if suffix.size == 0:
        raise AssignmentError("treatment suffix must be non-empty")
    w = np.concatenate([np.asarray(w_history, dtype=np.int8), suffix])
    start = len(w) - len(suffix)
    prob = 1.0
    for j, wj in enumerate(suffix):
        t = start + j + 1
        y_hist = None if y_obs is None else y_obs[: t - 1]
        p1 = mechanism.probability(t, w[: t - 1], y_hist)
        prob *= p1 if wj == 1 else 1.0 - p1
    if prob <= 0.0:
        raise AssignmentError(f"path propensity underflowed to zero for suffix of length {len(suffix)}")
    return prob


def compress_schedule(p1: np.ndarray) -> AssignmentMechanism:
    """Smallest Bernoulli mechanism reproducing a per-time probability column."""
    p1 = np.asarray(p1, dtype=float)
    if p1.size == 0:
        raise AssignmentError("empty probability column")
    if np.all(p1 == p1[0]):
        return BernoulliConstant(float(p1[0]))
    change = np.flatnonzero(np.diff(p1)) + 1
    starts = np.concatenate([[0], change])
    return BernoulliPiecewise(tuple((int(s) + 1, float(p1[s])) for s in starts))


def mechanism_from_spec(
    spec: MechanismSpec, timestamps: Sequence | pd.DatetimeIndex | None = None
) -> AssignmentMechanism:
    """Build a mechanism from its JSON form.

    Timestamp breakpoints are resolved to the first time label whose
    timestamp is at or after the breakpoint.
    """
    if spec.kind is MechanismKind.BERNOULLI_CONSTANT:
        return BernoulliConstant(spec.pi)
    if spec.kind is MechanismKind.HISTORY_DEPENDENT:
        return HistoryDependent(OutcomeSignRule(spec.base, spec.shift))

    stamps = None
    if timestamps is not None:
        stamps = pd.DatetimeIndex(pd.to_datetime(list(timestamps), format="ISO8601"))
    pairs: list[tuple[int, float]] = []
    for bp in spec.breakpoints:
        if isinstance(bp.start, int):
            pairs.append((bp.start, bp.pi))
            continue
        if stamps is None:
            raise AssignmentError(f"timestamp breakpoint {bp.start!r} needs an experiment calendar")
        at = stamps.searchsorted(pd.Timestamp(bp.start), side="left")
        if at >= len(stamps):
            log.warning("breakpoint %s is after the last observation; ignored", bp.start)
            continue
        pairs.append((int(at) + 1, bp.pi))
    return BernoulliPiecewise(tuple(pairs))
