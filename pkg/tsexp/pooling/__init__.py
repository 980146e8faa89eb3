from pooling.fisher import fisher_combine, fisher_panel_test
from pooling.pooled import (
    JointSampler,
    PanelError,
    pooled_conservative_test,
    pooled_exact_test,
    pooling_weights,
    unit_null_variance,
)

__all__ = [
    "JointSampler",
    "PanelError",
    "fisher_combine",
    "fisher_panel_test",
    "pooled_conservative_test",
    "pooled_exact_test",
    "pooling_weights",
    "unit_null_variance",
]
