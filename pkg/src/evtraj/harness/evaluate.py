"""Dataset-level evaluation: displacement, rejection AUC and calibration."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .. import metrics
from ..aggregate import UncertaintyReport
from ..prediction import ScenePrediction
from ..predictor.api import predict_batch
from .config import EvalConfig


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class MetricsReport:
    min_ade: float
    w_ade: float
    min_fde: float
    w_fde: float
    miss_rate: float
    min_ade_rauc: float
    w_ade_rauc: float
    ece: float
    n_samples: int
    config: dict = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self):
        values = (self.min_ade, self.w_ade, self.min_fde, self.w_fde, self.miss_rate,
                  self.min_ade_rauc, self.w_ade_rauc, self.ece)
        if not all(math.isfinite(v) for v in values):
            raise EvaluationError(f"non-finite metric in report: {values}")
        if not 0.0 <= self.miss_rate <= 1.0:
            raise EvaluationError("miss rate outside [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Evaluation:
    report: MetricsReport
    min_ade: np.ndarray
    w_ade: np.ndarray
    uncertainty: np.ndarray

    def rauc_errors(self, channel: str) -> np.ndarray:
        return self.min_ade if channel == "minade" else self.w_ade


def evaluate_predictions(preds: list[ScenePrediction], reports: list[UncertaintyReport],
                         futures, cfg: EvalConfig | None = None, seed=None) -> Evaluation:
    """Score world-frame predictions against ground-truth futures."""
    cfg = cfg or EvalConfig()
    if not preds:
        raise EvaluationError("nothing to evaluate: empty split")
    if not len(preds) == len(reports) == len(futures):
        raise EvaluationError("predictions, reports and futures differ in length")
    rows, probs, winners = [], [], []
    for pred, gt in zip(preds, futures):
        p = pred.probabilities
        d = metrics.displacement(pred.gamma, p, gt, cfg.miss_threshold)
        ade, _ = metrics.mode_errors(pred.gamma, gt)
        rows.append((d.min_ade, d.w_ade, d.min_fde, d.w_fde, float(d.miss)))
        probs.append(p)
        winners.append(int(np.argmin(ade)))
    rows = np.asarray(rows)
    unc = np.array([r.agent for r in reports])
    if len(preds) < 2:
        raise EvaluationError("rejection AUC needs at least two samples")
    min_rauc = metrics.rauc(rows[:, 0], unc)
    w_rauc = metrics.rauc(rows[:, 1], unc)
    report = MetricsReport(
        min_ade=float(rows[:, 0].mean()),
        w_ade=float(rows[:, 1].mean()),
        min_fde=float(rows[:, 2].mean()),
        w_fde=float(rows[:, 3].mean()),
        miss_rate=float(rows[:, 4].mean()),
        min_ade_rauc=min_rauc,
        w_ade_rauc=w_rauc,
        ece=metrics.ece(np.asarray(probs), np.asarray(winners), cfg.ece_bins),
        n_samples=len(preds),
        config=asdict(cfg),
        seed=seed,
    )
    return Evaluation(report, rows[:, 0], rows[:, 1], unc)


def evaluate(params, records, cfg: EvalConfig | None = None, seed=None) -> Evaluation:
    cfg = cfg or EvalConfig()
    subset = [r for r in records if r.split == cfg.eval_split]
    if not subset:
        raise EvaluationError(f"split {cfg.eval_split!r} is empty")
    out = predict_batch(params, subset, cfg.uncertainty_component)
    return evaluate_predictions([o.pred_world for o in out], [o.report for o in out],
                                [r.future for r in subset], cfg, seed)


def write_outputs(ev: Evaluation, out_dir, channel: str = "minade") -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report_path = out / "metrics.json"
    report_path.write_text(json.dumps(ev.report.to_dict(), indent=2, sort_keys=True) + "\n")
    curve_path = metrics.write_rejection_curve(out / "rejection_curve.csv",
                                               ev.rauc_errors(channel), ev.uncertainty)
    return report_path, curve_path
