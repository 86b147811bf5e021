"""Uncertainty aggregation from per-axis NIG values up to one scalar per agent."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .evidist import AxisUncertainty, DirichletEvidence, DomainError, nig_uncertainty_arrays
from .prediction import ScenePrediction

COMPONENTS = ("total", "epistemic", "aleatoric")


@dataclass(frozen=True)
class UncertaintyReport:
    """Uncertainty at every aggregation level for one prediction.

    per_axis has shape (T', K, 2, 3) with the last axis holding
    (aleatoric, epistemic, total); per_point is (T', K); per_trajectory is (K,).
    """

    per_axis: np.ndarray
    per_point: np.ndarray
    per_trajectory: np.ndarray
    cls_uncertainty: float
    agent: float
    component: str = "total"

    def axis(self, t: int, k: int, axis: int) -> AxisUncertainty:
        a, e, tot = self.per_axis[t, k, axis]
        return AxisUncertainty(float(a), float(e), float(tot))

    def closest_final(self, k: int) -> float:
        """Final-step point uncertainty of mode ``k``."""
        return float(self.per_point[-1, k])

    def to_dict(self) -> dict:
        return {
            "component": self.component,
            "agent": self.agent,
            "cls_uncertainty": self.cls_uncertainty,
            "per_trajectory": self.per_trajectory.tolist(),
            "per_point": self.per_point.tolist(),
            "per_axis": {
                "aleatoric": self.per_axis[..., 0].tolist(),
                "epistemic": self.per_axis[..., 1].tolist(),
                "total": self.per_axis[..., 2].tolist(),
            },
        }


def point_uncertainty(x: AxisUncertainty, y: AxisUncertainty) -> float:
    return x.total + y.total


def trajectory_uncertainty(points) -> float:
    points = np.asarray(points, dtype=np.float64)
    if points.size == 0:
        raise ValueError("trajectory uncertainty needs at least one point")
    return float(points.mean())


def agent_uncertainty(trajs, d: DirichletEvidence) -> float:
    """Classification-uncertainty-weighted mean of the trajectory uncertainties."""
    trajs = np.asarray(trajs, dtype=np.float64)
    if trajs.shape != (d.K,):
        raise DomainError(f"got {trajs.shape[0] if trajs.ndim else 0} trajectories for K={d.K}")
    u_cls = d.K / d.strength
    return float(np.mean(u_cls * trajs))


def build_report(pred: ScenePrediction, component: str = "total") -> UncertaintyReport:
    """Aggregate a prediction's NIG parameters into an :class:`UncertaintyReport`.

    ``component`` selects what feeds the point level: the default ``"total"``
    or just the ``"epistemic"`` / ``"aleatoric"`` part.
    """
    if component not in COMPONENTS:
        raise ValueError(f"component must be one of {COMPONENTS}")
    aleatoric, epistemic = nig_uncertainty_arrays(pred.nu, pred.alpha, pred.beta)
    per_axis = np.stack([aleatoric, epistemic, aleatoric + epistemic], axis=-1)
    per_axis = per_axis.transpose(1, 0, 2, 3)  # (T', K, 2, 3)
    col = {"aleatoric": 0, "epistemic": 1, "total": 2}[component]
    per_point = per_axis[..., 0, col] + per_axis[..., 1, col]
    per_traj = per_point.mean(axis=0)
    d = pred.evidence
    return UncertaintyReport(
        per_axis=per_axis,
        per_point=per_point,
        per_trajectory=per_traj,
        cls_uncertainty=d.K / d.strength,
        agent=agent_uncertainty(per_traj, d),
        component=component,
    )
