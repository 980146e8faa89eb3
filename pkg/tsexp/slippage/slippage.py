"""Execution slippage of randomized orders, and the experiment built from it.

For an order with fills (P_j, v_j) and mid price P^mid at randomization,

    r = 10000 * (VWAP - P^mid) / P^mid,   VWAP = sum_j v_j * P_j
    Y = b * r,                            b = +1 for sell, -1 for buy

in basis points. Volume fractions must sum to one; they are never
renormalized.
"""

from __future__ import annotations

import logging
from typing import Sequence

import numpy as np

from core.experiment import UnitExperiment
from core.mechanisms import AssignmentMechanism
from core.paths import TreatmentPath
from models import OrderRecord, Side

log = logging.getLogger(__name__)

BPS = 10000.0
VOLUME_TOL = 1e-9
VOLUME_HARD_TOL = 1e-6


class SlippageError(ValueError):
    """An order violates a data invariant; the message names the order."""


def check_order(o: OrderRecord) -> None:
    if not o.mid_price > 0.0:
        raise SlippageError(f"order {o.order_id}: mid price must be positive, got {o.mid_price}")
    fractions = np.array([t.volume_fraction for t in o.trades])
    if np.any(fractions <= 0.0):
        raise SlippageError(f"order {o.order_id}: volume fractions must be positive")
    drift = abs(float(fractions.sum()) - 1.0)
    if drift > VOLUME_HARD_TOL:
        raise SlippageError(
            f"order {o.order_id}: volume fractions sum to {fractions.sum():.12g}, expected 1"
        )
    if drift > VOLUME_TOL:
        log.warning("order %s: volume fractions off 1 by %.3g (not renormalized)", o.order_id, drift)
    early = [t.trade_time for t in o.trades if t.trade_time < o.randomization_time]
    if early:
        raise SlippageError(f"order {o.order_id}: trade at {early[0]} precedes randomization")
    if any(not t.price > 0.0 for t in o.trades):
        raise SlippageError(f"order {o.order_id}: trade prices must be positive")


def compute_slippage(o: OrderRecord) -> float:
    """Signed slippage in basis points."""
    check_order(o)
    vwap = sum(t.volume_fraction * t.price for t in o.trades)
    b = 1.0 if o.side is Side.SELL else -1.0
    return b * BPS * (vwap - o.mid_price) / o.mid_price


def orders_to_experiment(
    orders: Sequence[OrderRecord], unit_id: str, mechanism: AssignmentMechanism
) -> UnitExperiment:
    """Sort orders by (randomization_time, order_id) and index them t = 1..T.

    w_t = 1 for execution method B, y_t = slippage. The mechanism supplies p_t(1).
    """
    if not orders:
        raise SlippageError("no orders to convert")
    ids = [o.order_id for o in orders]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        raise SlippageError(f"duplicate order ids: {dupes}")
    ordered = sorted(orders, key=lambda o: (o.randomization_time, o.order_id))
    y = np.array([compute_slippage(o) for o in ordered])
    w = TreatmentPath(np.array([o.treatment for o in ordered]))
    T = len(ordered)
    return UnitExperiment(
        unit_id=unit_id,
        times=np.arange(1, T + 1),
        outcomes=y,
        treatments=w,
        mechanism=mechanism,
        probabilities=mechanism.probabilities(w.values, y),
        timestamps=tuple(o.randomization_time for o in ordered),
    )
