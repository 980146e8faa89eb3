from core.experiment import ExperimentError, Panel, UnitExperiment, arm_summary, validate_experiment
from core.mechanisms import (
    PROB_FLOOR,
    AssignmentError,
    AssignmentMechanism,
    BernoulliConstant,
    BernoulliPiecewise,
    HistoryDependent,
    OutcomeSignRule,
    compress_schedule,
    mechanism_from_spec,
    path_propensity,
)
from core.paths import SampledPath, TreatmentPath, sample_path, sample_paths

__all__ = [
    "PROB_FLOOR",
    "AssignmentError",
    "AssignmentMechanism",
    "BernoulliConstant",
    "BernoulliPiecewise",
    "ExperimentError",
    "HistoryDependent",
    "OutcomeSignRule",
    "Panel",
    "SampledPath",
    "TreatmentPath",
    "UnitExperiment",
    "arm_summary",
    "compress_schedule",
    "mechanism_from_spec",
    "path_propensity",
    "sample_path",
    "sample_paths",
    "validate_experiment",
]
