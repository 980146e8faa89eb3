from slippage.slippage import SlippageError, check_order, compute_slippage, orders_to_experiment

__all__ = ["SlippageError", "check_order", "compute_slippage", "orders_to_experiment"]
