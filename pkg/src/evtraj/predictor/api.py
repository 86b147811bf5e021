"""Agent-centric normalisation and single-pass prediction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..aggregate import UncertaintyReport, build_report
from ..prediction import ScenePrediction
from . import network
from .network import ModelParams


@dataclass(frozen=True)
class Frame:
    """Rigid transform between world and agent frames: local = R (world - origin)."""

    origin: np.ndarray
    rotation: np.ndarray

    @classmethod
    def identity(cls) -> Frame:
        return cls(np.zeros(2), np.eye(2))

    def to_local(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.origin) @ self.rotation.T

    def to_world(self, points) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.rotation + self.origin


@dataclass(frozen=True)
class Normalized:
    features: np.ndarray
    frame: Frame


@dataclass(frozen=True)
class Prediction:
    pred_world: ScenePrediction
    pred_local: ScenePrediction
    report: UncertaintyReport
    frame: Frame


def normalize(record) -> Normalized:
    """Translate the last observed position to the origin and rotate its heading to +x.

    Only ``record.history`` is read. A zero final displacement keeps the
    identity rotation.
    """
    history = np.asarray(record.history, dtype=np.float64)
    origin = history[-1].copy()
    heading = history[-1] - history[-2]
    norm = float(np.hypot(*heading))
    if norm > 0.0:
        c, s = heading / norm
        rotation = np.array([[c, s], [-s, c]])
    else:
        rotation = np.eye(2)
    frame = Frame(origin, rotation)
    return Normalized(frame.to_local(history).ravel(), frame)


def _to_world(pred: ScenePrediction, frame: Frame) -> ScenePrediction:
    return pred.with_means(frame.to_world(pred.gamma))


def predict_batch(params: ModelParams, records, component: str = "total") -> list[Prediction]:
    """Predict many records with one network pass over the stacked batch."""
    normed = [normalize(r) for r in records]
    if not normed:
        return []
    feats = np.stack([n.features for n in normed])
    preds = network.forward(params, feats)
    return [
        Prediction(_to_world(p, n.frame), p, build_report(p, component), n.frame)
        for p, n in zip(preds, normed)
    ]


def predict(params: ModelParams, record, component: str = "total") -> Prediction:
    n = normalize(record)
    local = network.forward(params, n.features)
    return Prediction(_to_world(local, n.frame), local, build_report(local, component), n.frame)
