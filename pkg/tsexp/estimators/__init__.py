from estimators.dispatch import estimand_terms, estimate, running_estimate
from estimators.horvitz_thompson import (
    EstimationError,
    average_estimate,
    ht_lag_estimate,
    ht_step_estimate,
    ht_terms,
    variance_bound,
)
from estimators.m_period import m_period_estimate
from estimators.proxy import ProxyRule, lagged_outcome, proxy_adjusted_estimate, zero_proxy
from estimators.standardized import null_variance, standardized_estimate

__all__ = [
    "EstimationError",
    "ProxyRule",
    "average_estimate",
    "estimand_terms",
    "estimate",
    "ht_lag_estimate",
    "ht_step_estimate",
    "ht_terms",
    "lagged_outcome",
    "m_period_estimate",
    "null_variance",
    "proxy_adjusted_estimate",
    "running_estimate",
    "standardized_estimate",
    "variance_bound",
    "zero_proxy",
]
