"""Observed single-unit experiments, panels of units, and their validation."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from core.mechanisms import PROB_FLOOR, AssignmentError, AssignmentMechanism
from core.paths import SampledPath, TreatmentPath
from models import ArmSummary, Violation

CONSISTENCY_TOL = 1e-12


class ExperimentError(ValueError):
    """Malformed experiment or panel construction."""


@dataclass(frozen=True, eq=False)
class UnitExperiment:
    """One unit's observed series (t, y_t, w_t) plus its assignment mechanism.

    Construction does not validate; call `validate_experiment` for a report.
    `probabilities` are the stored p_t(1) values when the data carries them;
    otherwise they are derived from the mechanism along the observed path.
    """

    unit_id: str
    times: np.ndarray
    outcomes: np.ndarray
    treatments: TreatmentPath
    mechanism: AssignmentMechanism
    probabilities: np.ndarray | None = None
    timestamps: tuple | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        for name, dtype in (("times", np.int64), ("outcomes", float)):
            arr = np.array(getattr(self, name), dtype=dtype, copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.probabilities is not None:
            arr = np.array(self.probabilities, dtype=float, copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, "probabilities", arr)

    @property
    def T(self) -> int:
        return int(self.outcomes.size)

    @property
    def y(self) -> np.ndarray:
        return self.outcomes

    @property
    def w(self) -> np.ndarray:
        return self.treatments.values

    @cached_property
    def p1(self) -> np.ndarray:
        if self.probabilities is not None:
            return self.probabilities
        return self.mechanism.probabilities(self.w, self.y)

    def with_path(self, sampled: SampledPath) -> "UnitExperiment":
        """Same outcomes under a resampled path (the sharp-null counterfactual)."""
        return UnitExperiment(
            unit_id=self.unit_id,
            times=self.times,
            outcomes=self.outcomes,
            treatments=sampled.path,
            mechanism=self.mechanism,
            probabilities=sampled.p1,
            timestamps=self.timestamps,
        )


@dataclass(frozen=True)
class Panel:
    """Multiple units. `independent` asserts cross-unit independent assignment."""

    units: tuple[UnitExperiment, ...]
    independent: bool = False

    def __post_init__(self) -> None:
        if not self.units:
            raise ExperimentError("panel must contain at least one unit")
        ids = [u.unit_id for u in self.units]
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        if dupes:
            raise ExperimentError(f"duplicate unit ids in panel: {dupes}")
        ordered = tuple(sorted(self.units, key=lambda u: u.unit_id))
        object.__setattr__(self, "units", ordered)

    @classmethod
    def of(cls, units: Sequence[UnitExperiment], *, independent: bool = False) -> "Panel":
        return cls(tuple(units), independent=independent)

    def __len__(self) -> int:
        return len(self.units)

    @property
    def unit_ids(self) -> list[str]:
        return [u.unit_id for u in self.units]


def validate_experiment(e: UnitExperiment) -> list[Violation]:
    """Report every broken invariant of `e`; an empty list means well-formed."""
    out: list[Violation] = []
    T = e.T
    lengths = {"outcomes": T, "times": e.times.size, "treatments": len(e.treatments)}
    if e.probabilities is not None:
        lengths["probabilities"] = e.probabilities.size
    if len(set(lengths.values())) > 1:
        detail = ", ".join(f"{k}={v}" for k, v in lengths.items())
        out.append(Violation(rule="length-mismatch", message=f"series lengths differ: {detail}"))
        return out
    if T == 0:
        out.append(Violation(rule="empty", message="experiment has no observations"))
        return out

    if np.any(np.diff(e.times) <= 0):
        bad = int(np.flatnonzero(np.diff(e.times) <= 0)[0]) + 1
        out.append(
            Violation(rule="times-increasing", index=int(e.times[bad]), message="time labels must strictly increase")
        )
    elif not np.array_equal(e.times, np.arange(1, T + 1)):
        out.append(Violation(rule="times-labels", message="time labels must be 1..T"))

    for i in np.flatnonzero(~np.isfinite(e.outcomes)):
        out.append(Violation(rule="finite-outcome", index=int(e.times[i]), message="outcome is missing or not finite"))

    flagged: set[int] = set()
    if e.probabilities is not None:
        stored = e.probabilities
        bad = ~((stored >= PROB_FLOOR) & (stored <= 1.0 - PROB_FLOOR))
        for i in np.flatnonzero(bad):
            flagged.add(int(i))
            out.append(
                Violation(
                    rule="probabilistic-assignment",
                    index=int(e.times[i]),
                    message=f"stored p_t(1)={stored[i]!r} is not strictly inside (0, 1)",
                )
            )
        try:
            implied = e.mechanism.probabilities(e.w, e.outcomes)
        except AssignmentError as exc:
            out.append(Violation(rule="mechanism", message=str(exc)))
        else:
            off = np.abs(implied - stored) > CONSISTENCY_TOL
            for i in np.flatnonzero(off):
                if int(i) in flagged:
                    continue
                out.append(
                    Violation(
                        rule="mechanism-consistency",
                        index=int(e.times[i]),
                        message=f"stored p_t(1)={stored[i]!r} but mechanism gives {implied[i]!r}",
                    )
                )
    return out


def arm_summary(e: UnitExperiment) -> ArmSummary:
    treated = e.w == 1
    n1 = int(treated.sum())
    n0 = e.T - n1
    return ArmSummary(
        unit_id=e.unit_id,
        n_control=n0,
        n_treated=n1,
        mean_control=float(e.y[~treated].mean()) if n0 else None,
        mean_treated=float(e.y[treated].mean()) if n1 else None,
    )
