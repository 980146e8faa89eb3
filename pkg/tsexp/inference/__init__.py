from inference.conservative import MIN_EFFECTIVE_T, conservative_test, normal_p_value
from inference.power import STANDARDIZED_EXACT, GridPoint, power_curve
from inference.randomization import (
    InferenceError,
    exact_test,
    null_distribution,
    randomization_p_value,
    replicate_statistics,
)

__all__ = [
    "MIN_EFFECTIVE_T",
    "STANDARDIZED_EXACT",
    "GridPoint",
    "InferenceError",
    "conservative_test",
    "exact_test",
    "normal_p_value",
    "null_distribution",
    "power_curve",
    "randomization_p_value",
    "replicate_statistics",
]
