"""Evaluation reports, the data selection experiment, density check and CLI."""

from .config import ConfigError, EvalConfig, ExperimentConfig
from .density import DensityResult, density_uncertainty_check
from .evaluate import EvaluationError, MetricsReport, evaluate, evaluate_predictions
from .experiment import ExperimentResult, importance_sampling_experiment

__all__ = [
    "ConfigError", "EvalConfig", "ExperimentConfig",
    "DensityResult", "density_uncertainty_check",
    "EvaluationError", "MetricsReport", "evaluate", "evaluate_predictions",
    "ExperimentResult", "importance_sampling_experiment",
]
