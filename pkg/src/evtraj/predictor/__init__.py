"""Trainable evidential trajectory predictor on a small numpy autodiff engine."""

from .api import Frame, Prediction, normalize, predict, predict_batch
from .checkpoint import CheckpointError, load, save
from .network import FORWARD_COUNTER, ModelConfig, ModelParams, forward, init_params
from .train import TrainConfig, TrainingError, TrainResult, train

__all__ = [
    "Frame", "Prediction", "normalize", "predict", "predict_batch",
    "CheckpointError", "load", "save",
    "FORWARD_COUNTER", "ModelConfig", "ModelParams", "forward", "init_params",
    "TrainConfig", "TrainingError", "TrainResult", "train",
]
