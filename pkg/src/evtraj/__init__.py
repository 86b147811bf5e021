"""Evidential uncertainty for multi-modal trajectory prediction."""

from .aggregate import UncertaintyReport, build_report
from .evidist import DirichletEvidence, DomainError, NIGParams
from .evloss import LossBreakdown, LossWeights, Priors, total_loss
from .kernels import BACKEND
from .prediction import ScenePrediction

__version__ = "0.1.0"

__all__ = [
    "UncertaintyReport", "build_report",
    "DirichletEvidence", "DomainError", "NIGParams",
    "LossBreakdown", "LossWeights", "Priors", "total_loss",
    "BACKEND", "ScenePrediction",
]
