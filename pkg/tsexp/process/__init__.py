from process.estimands import enumerate_step_effect, steps_at, true_lag_effect, true_step_effect
from process.simulator import (
    NoisePath,
    ProcessError,
    draw_noise,
    evaluate_path,
    outcomes_along,
    simulate_experiment,
)

__all__ = [
    "NoisePath",
    "ProcessError",
    "draw_noise",
    "enumerate_step_effect",
    "evaluate_path",
    "outcomes_along",
    "simulate_experiment",
    "steps_at",
    "true_lag_effect",
    "true_step_effect",
]
