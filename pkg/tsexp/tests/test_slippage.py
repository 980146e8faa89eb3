from datetime import datetime, timedelta

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from core.mechanisms import BernoulliConstant
from models import OrderRecord, Trade
from slippage.slippage import SlippageError, check_order, compute_slippage, orders_to_experiment

T0 = datetime(2016, 7, 11, 9, 30)


def order(order_id="o1", side="buy", mid=100.0, fills=((100.5, 1.0),), method="A", at=T0):
    return OrderRecord(
        order_id=order_id,
        randomization_time=at,
        side=side,
        mid_price=mid,
        method=method,
        trades=[
            Trade(trade_time=at + timedelta(seconds=j + 1), price=p, volume_fraction=v)
            for j, (p, v) in enumerate(fills)
        ],
    )


class TestComputeSlippage:
    def test_buy_above_mid(self):
        assert compute_slippage(order(side="buy", mid=100.0, fills=((100.5, 1.0),))) == -50.0

    def test_symmetric_sell_fills(self):
        assert compute_slippage(order(side="sell", mid=100.0, fills=((100.2, 0.5), (99.8, 0.5)))) == 0.0

    def test_sell_plug_in(self):
        assert compute_slippage(order(side="sell", mid=200.0, fills=((201.0, 1.0),))) == 50.0

    def test_sign_flips_with_side(self):
        fills = ((101.0, 0.3), (100.4, 0.7))
        buy = compute_slippage(order(side="buy", fills=fills))
        sell = compute_slippage(order(side="sell", fills=fills))
        assert buy == pytest.approx(-sell)

    def test_scale_equivariance(self):
        rng = np.random.default_rng(10)
        for k in range(1000):
            n = int(rng.integers(1, 5))
            v = rng.dirichlet(np.ones(n))
            v[-1] = 1.0 - v[:-1].sum()
            mid = float(rng.uniform(1.0, 500.0))
            prices = mid * (1.0 + rng.normal(0.0, 0.002, n))
            c = float(rng.uniform(0.01, 100.0))
            side = "buy" if k % 2 else "sell"
            base = compute_slippage(order(side=side, mid=mid, fills=tuple(zip(prices, v))))
            scaled = compute_slippage(order(side=side, mid=c * mid, fills=tuple(zip(c * prices, v))))
            assert scaled == pytest.approx(base, rel=1e-8, abs=1e-8)

    def test_linear_in_volume_fractions(self):
        prices = (100.3, 99.9)
        mid = 100.0
        a = compute_slippage(order(mid=mid, fills=((prices[0], 1.0),)))
        b = compute_slippage(order(mid=mid, fills=((prices[1], 1.0),)))
        mixed = compute_slippage(order(mid=mid, fills=((prices[0], 0.25), (prices[1], 0.75))))
        assert mixed == pytest.approx(0.25 * a + 0.75 * b, abs=1e-9)


class TestCheckOrder:
    def test_volume_sum_error_names_order(self):
        with pytest.raises(SlippageError, match="o9"):
            check_order(order(order_id="o9", fills=((100.0, 0.5), (100.1, 0.4))))

    def test_small_volume_drift_warns(self, caplog):
        check_order(order(fills=((100.0, 0.5), (100.1, 0.5 + 5e-8))))
        assert "not renormalized" in caplog.text

    def test_mid_price(self):
        with pytest.raises(SlippageError):
            check_order(order(mid=0.0))

    def test_trade_before_randomization(self):
        o = order()
        early = o.model_copy(update={"trades": [Trade(trade_time=T0 - timedelta(minutes=1), price=100.0, volume_fraction=1.0)]})
        with pytest.raises(SlippageError, match="precedes"):
            check_order(early)

    def test_needs_a_trade(self):
        with pytest.raises(ValueError):
            OrderRecord(order_id="x", randomization_time=T0, side="buy", mid_price=1.0, method="A", trades=[])


class TestOrdersToExperiment:
    def test_methods_map_to_treatments(self):
        orders = [order(f"o{i}", method=m, at=T0 + timedelta(hours=i)) for i, m in enumerate("ABA")]
        e = orders_to_experiment(orders, "desk", BernoulliConstant(0.5))
        assert_array_equal(e.w, [0, 1, 0])
        assert_array_equal(e.times, [1, 2, 3])
        assert_allclose(e.p1, 0.5)
        assert e.unit_id == "desk"

    def test_sorted_by_time_then_id(self):
        orders = [
            order("c", fills=((100.3, 1.0),), at=T0 + timedelta(hours=2)),
            order("b", fills=((100.2, 1.0),), at=T0),
            order("a", fills=((100.1, 1.0),), at=T0),
        ]
        e = orders_to_experiment(orders, "desk", BernoulliConstant(0.5))
        assert_allclose(e.y, [-10.0, -20.0, -30.0])
        assert e.timestamps == (T0, T0, T0 + timedelta(hours=2))

    def test_empty(self):
        with pytest.raises(SlippageError):
            orders_to_experiment([], "desk", BernoulliConstant(0.5))

    def test_duplicate_ids(self):
        with pytest.raises(SlippageError, match="duplicate"):
            orders_to_experiment([order("x"), order("x")], "desk", BernoulliConstant(0.5))

    def test_single_order(self):
        e = orders_to_experiment([order()], "desk", BernoulliConstant(0.5))
        assert e.T == 1
