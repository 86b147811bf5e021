"""Uncertainty-driven data selection experiment.

Per seed: train a base model on ``train_a``, score the ``train_b`` candidates,
add the top (or a random) share of them, fine-tune from the base checkpoint,
and compare against a model fine-tuned on all of ``train_b``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .. import metrics
from ..predictor.api import predict_batch
from ..predictor.train import TrainResult, train
from ..synthgen import MANEUVERS, subsample
from .config import ConfigError, ExperimentConfig
from .evaluate import evaluate

log = logging.getLogger(__name__)

ROWS = ("Base", "Random", "Error", "Uncertainty", "Full")
COLUMNS = ("min_ade", "w_ade", "min_fde", "w_fde", "miss_rate", "min_ade_rauc", "w_ade_rauc", "ece")
_ROW_OF = {"random": "Random", "error": "Error", "uncertainty": "Uncertainty"}
RARE_MANEUVERS = ("u_turn", "stop")


def uncertainty_scores(params, candidates, component: str = "total") -> np.ndarray:
    """Agent-level uncertainty per candidate; reads only the observed history."""
    return np.array([p.report.agent for p in predict_batch(params, candidates, component)])


def error_scores(params, candidates) -> np.ndarray:
    """Per-candidate minADE; needs ground-truth futures (oracle selector)."""
    preds = predict_batch(params, candidates)
    return np.array([metrics.mode_errors(p.pred_world.gamma, r.future)[0].min()
                     for p, r in zip(preds, candidates)])


def select(params, candidates, criterion: str, fraction: float, seed: int,
           component: str = "total") -> list:
    if fraction <= 0.0:
        return []
    if criterion == "random":
        return subsample(candidates, fraction, "random", seed)
    if criterion == "error":
        scores = error_scores(params, candidates)
    elif criterion == "uncertainty":
        scores = uncertainty_scores(params, candidates, component)
    else:
        raise ConfigError(f"unknown selection criterion {criterion!r}")
    return subsample(candidates, fraction, "by_score", seed, scores=scores)


def maneuver_fractions(records) -> dict:
    n = max(len(records), 1)
    return {m: sum(r.maneuver == m for r in records) / n for m in MANEUVERS}


@dataclass
class SeedRun:
    seed: int
    rows: dict = field(default_factory=dict)
    selection: dict = field(default_factory=dict)
    epochs: dict = field(default_factory=dict)
    # trained parameters per row; kept in memory only, never serialised
    params: dict = field(default_factory=dict, repr=False)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    runs: list

    def summary(self) -> dict:
        out = {}
        for row in ROWS:
            vals = [run.rows[row] for run in self.runs if row in run.rows]
            if not vals:
                continue
            out[row] = {c: {"mean": float(np.mean([v[c] for v in vals])),
                            "std": float(np.std([v[c] for v in vals]))} for c in COLUMNS}
        return out

    def to_dict(self) -> dict:
        return {
            "summary": self.summary(),
            "runs": [{"seed": r.seed, "rows": r.rows, "selection": r.selection, "epochs": r.epochs}
                     for r in self.runs],
        }

    def table(self) -> str:
        summary = self.summary()
        head = ["Model".ljust(12)] + [c.rjust(17) for c in COLUMNS]
        lines = [" ".join(head)]
        for row, vals in summary.items():
            label = row if row in ("Base", "Full") else f"{row} 75%"
            cells = [f"{vals[c]['mean']:.3f} ± {vals[c]['std']:.3f}".rjust(17) for c in COLUMNS]
            lines.append(" ".join([label.ljust(12)] + cells))
        return "\n".join(lines) + "\n"


def _metrics_row(result: TrainResult, records, cfg: ExperimentConfig, seed: int) -> dict:
    report = evaluate(result.params, records, cfg.evaluation, seed=seed).report
    return {c: getattr(report, c) for c in COLUMNS}


def run_seed(records, cfg: ExperimentConfig, seed: int) -> SeedRun:
    train_a = [r for r in records if r.split == "train_a"]
    train_b = [r for r in records if r.split == "train_b"]
    val = [r for r in records if r.split == cfg.train.val_split]
    test = [r for r in records if r.split == cfg.evaluation.eval_split]
    if not train_a or not train_b or not test:
        raise ConfigError("importance sampling needs non-empty train_a, train_b and eval splits")
    run = SeedRun(seed)
    base_cfg = replace(cfg.train, seed=seed, epochs=cfg.base_epochs, train_splits=("train_a",))
    base = train(train_a + val, base_cfg)
    run.rows["Base"] = _metrics_row(base, test, cfg, seed)
    run.epochs["Base"] = base.best_epoch
    run.params["Base"] = base.params
    log.info("seed %d base minADE %.3f", seed, run.rows["Base"]["min_ade"])

    fraction = cfg.added_fraction / (1.0 - cfg.initial_fraction) if cfg.initial_fraction < 1 else 0.0
    fraction = min(fraction, 1.0)
    retrain_cfg = replace(cfg.train, seed=seed, epochs=cfg.retrain_epochs,
                          train_splits=("train_a", "train_b"))
    for criterion in cfg.selection:
        chosen = select(base.params, train_b, criterion, fraction, seed,
                        cfg.evaluation.uncertainty_component)
        row = _ROW_OF[criterion]
        run.selection[row] = {"n": len(chosen), "maneuvers": maneuver_fractions(chosen)}
        if not chosen:
            # nothing added: the base checkpoint stands unchanged
            run.rows[row] = dict(run.rows["Base"])
            run.epochs[row] = 0
            run.params[row] = base.params
            continue
        res = train(train_a + chosen + val, retrain_cfg, init=base.params)
        run.rows[row] = _metrics_row(res, test, cfg, seed)
        run.epochs[row] = res.best_epoch
        run.params[row] = res.params
    full = train(train_a + train_b + val, retrain_cfg, init=base.params)
    run.rows["Full"] = _metrics_row(full, test, cfg, seed)
    run.epochs["Full"] = full.best_epoch
    run.params["Full"] = full.params
    return run


def importance_sampling_experiment(records, cfg: ExperimentConfig) -> ExperimentResult:
    return ExperimentResult(cfg, [run_seed(records, cfg, s) for s in cfg.seeds])


def write_result(result: ExperimentResult, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"json": out / "importance_sampling.json", "table": out / "importance_sampling.txt"}
    paths["json"].write_text(json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n")
    paths["table"].write_text(result.table())
    return paths
