"""Read and write the CSV / JSON inputs of the CLI.

Column names are fixed and case-sensitive:

    experiment CSV   t, ts (optional), y, w, p1, unit_id (panel files only)
    orders CSV       order_id, ts, side, mid_price, method, trade_ts,
                     trade_price, volume_fraction   (one row per fill)

Missing columns and unparseable cells raise SchemaError, which the CLI maps to
exit code 3. Data that parses but breaks an experiment invariant (NaN
outcomes, probabilities of 0) is left for `validate_experiment` to report.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import jsonschema
import numpy as np
import pandas as pd
from pydantic import ValidationError

from core.experiment import Panel, UnitExperiment
from core.mechanisms import PROB_FLOOR, AssignmentMechanism, compress_schedule, mechanism_from_spec
from core.paths import TreatmentPath
from export.results import load_schema
from models import MechanismSpec, OrderRecord, PotentialProcessSpec, Trade

log = logging.getLogger(__name__)

EXPERIMENT_COLUMNS = ("t", "y", "w", "p1")
ORDER_COLUMNS = (
    "order_id", "ts", "side", "mid_price", "method", "trade_ts", "trade_price", "volume_fraction",
)


class SchemaError(ValueError):
    """An input file is missing a column or holds a value of the wrong type."""


def _require(df: pd.DataFrame, columns: tuple[str, ...], path: Path) -> None:
    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")


def _read_csv(path: Path) -> pd.DataFrame:
    try:
        return pd.read_csv(path, float_precision="round_trip")
    except FileNotFoundError:
        raise
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise SchemaError(f"{path}: cannot parse CSV ({exc})") from exc


def _numeric(df: pd.DataFrame, column: str, path: Path) -> np.ndarray:
    try:
        return pd.to_numeric(df[column], errors="raise").to_numpy(dtype=float)
    except (ValueError, TypeError) as exc:
        raise SchemaError(f"{path}: column {column} must be numeric ({exc})") from exc


def _load_model(path: Path, model, schema: str | None = None):
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        if schema is not None:
            jsonschema.validate(raw, load_schema(schema))
        return model.model_validate(raw)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    except jsonschema.ValidationError as exc:
        raise SchemaError(f"{path}: {exc.message}") from exc
    except ValidationError as exc:
        raise SchemaError(f"{path}: {exc}") from exc


def read_process_spec(path: Path) -> PotentialProcessSpec:
    return _load_model(path, PotentialProcessSpec, "process_spec.schema.json")


def read_mechanism_spec(path: Path) -> MechanismSpec:
    return _load_model(path, MechanismSpec)


def frame_to_experiment(
    df: pd.DataFrame,
    unit_id: str,
    *,
    mechanism: MechanismSpec | AssignmentMechanism | None = None,
    source: Path = Path("<frame>"),
) -> UnitExperiment:
    """Build one unit from its rows.

    Rows are ordered by `ts` when present (stable on ties), else by `t`, and
    relabelled 1..T. Without a mechanism the p1 column defines a Bernoulli
    schedule.
    """
    _require(df, EXPERIMENT_COLUMNS, source)
    if "ts" in df.columns and df["ts"].notna().any():
        try:
            stamps = pd.to_datetime(df["ts"], errors="raise", format="ISO8601")
        except (ValueError, TypeError) as exc:
            raise SchemaError(f"{source}: unparseable ts value ({exc})") from exc
        order = np.argsort(stamps.to_numpy(), kind="stable")
        timestamps = tuple(pd.DatetimeIndex(stamps.to_numpy()[order]))
    else:
        order = np.argsort(_numeric(df, "t", source), kind="stable")
        timestamps = None
    y = _numeric(df, "y", source)[order]
    w = _numeric(df, "w", source)[order]
    p1 = _numeric(df, "p1", source)[order]
    if np.any(np.isnan(w)):
        raise SchemaError(f"{source}: column w has missing values")

    if mechanism is None:
        if not np.all(np.isfinite(p1)):
            raise SchemaError(f"{source}: column p1 has missing values")
        # out-of-range values stay in `probabilities` for validate_experiment to report
        mech = compress_schedule(np.clip(p1, PROB_FLOOR, 1.0 - PROB_FLOOR))
    elif isinstance(mechanism, MechanismSpec):
        mech = mechanism_from_spec(mechanism, timestamps)
    else:
        mech = mechanism
    return UnitExperiment(
        unit_id=unit_id,
        times=np.arange(1, len(df) + 1),
        outcomes=y,
        treatments=TreatmentPath(w),
        mechanism=mech,
        probabilities=p1,
        timestamps=timestamps,
    )


def read_experiment(path: Path, *, mechanism: MechanismSpec | None = None, unit_id: str | None = None) -> UnitExperiment:
    df = _read_csv(path)
    uid = unit_id or (str(df["unit_id"].iloc[0]) if "unit_id" in df.columns and len(df) else Path(path).stem)
    return frame_to_experiment(df, uid, mechanism=mechanism, source=Path(path))


def read_panel(path: Path, *, mechanism: MechanismSpec | None = None, independent: bool = False) -> Panel:
    df = _read_csv(path)
    _require(df, ("unit_id",), Path(path))
    units = [
        frame_to_experiment(group.reset_index(drop=True), str(uid), mechanism=mechanism, source=Path(path))
        for uid, group in df.groupby("unit_id", sort=True)
    ]
    return Panel.of(units, independent=independent)


def experiment_frame(e: UnitExperiment) -> pd.DataFrame:
    frame = pd.DataFrame({"t": e.times, "y": e.y, "w": e.w.astype(int), "p1": e.p1})
    if e.timestamps is not None:
        frame.insert(1, "ts", [pd.Timestamp(s).isoformat() for s in e.timestamps])
    return frame


def write_experiment_csv(e: UnitExperiment, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    experiment_frame(e).to_csv(path, index=False)
    return path


def read_orders(path: Path) -> list[OrderRecord]:
    """One OrderRecord per order_id; fills keep their file order."""
    df = _read_csv(path)
    _require(df, ORDER_COLUMNS, Path(path))
    df = df.astype({"order_id": str})
    orders: list[OrderRecord] = []
    for order_id, rows in df.groupby("order_id", sort=False):
        head = rows.iloc[0]
        try:
            orders.append(
                OrderRecord(
                    order_id=order_id,
                    randomization_time=pd.Timestamp(head["ts"]).to_pydatetime(),
                    side=str(head["side"]).lower(),
                    mid_price=float(head["mid_price"]),
                    method=str(head["method"]).upper(),
                    trades=[
                        Trade(
                            trade_time=pd.Timestamp(r.trade_ts).to_pydatetime(),
                            price=float(r.trade_price),
                            volume_fraction=float(r.volume_fraction),
                        )
                        for r in rows.itertuples(index=False)
                    ],
                )
            )
        except (ValidationError, ValueError, TypeError) as exc:
            raise SchemaError(f"{path}: order {order_id}: {exc}") from exc
    return orders
