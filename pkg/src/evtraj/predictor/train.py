"""Deterministic minibatch training with Adam and validation early stopping."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import kernels
from ..evloss import LossWeights, Priors
from .api import normalize
from .network import ModelConfig, ModelParams, PARAM_NAMES, forward_raw, graph_parameters, init_params
from .objective import PART_NAMES, _REG_MODE, batch_loss

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    weights: LossWeights = field(default_factory=LossWeights)
    priors: Priors = field(default_factory=Priors)
    epochs: int = 200
    batch_size: int = 64
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    patience: int = 10
    min_delta: float = 1e-3
    anneal_epochs: int = 10
    seed: int = 0
    train_splits: tuple[str, ...] = ("train_a", "train_b")
    val_split: str = "val"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["train_splits"] = list(self.train_splits)
        return d


@dataclass
class TrainResult:
    params: ModelParams
    history: list = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False


def prepare(records) -> tuple[np.ndarray, np.ndarray]:
    """Features (N, 2T) and agent-frame futures (N, T', 2) for supervised records."""
    feats, futures = [], []
    for r in records:
        n = normalize(r)
        feats.append(n.features)
        futures.append(n.frame.to_local(r.future))
    return np.asarray(feats), np.asarray(futures)


def evaluate_loss(params: ModelParams, feats, futures, w: LossWeights, priors: Priors,
                  batch_size: int = 1024) -> tuple[float, np.ndarray]:
    """Mean total loss and mean parts over a dataset without building a graph."""
    c = params.config
    parts_all = []
    for start in range(0, len(feats), batch_size):
        raw = forward_raw(params, feats[start:start + batch_size])
        parts, _, _ = kernels.head_loss(raw, futures[start:start + batch_size], c.n_modes, c.horizon,
                                        w.lambda1, w.lambda2, w.lambda3, w.lambda4,
                                        priors.nu0, priors.alpha0, _REG_MODE[w.regularizer])
        parts_all.append(parts)
    parts = np.concatenate(parts_all)
    total = (parts[:, 0] + w.lambda1 * parts[:, 1] + w.lambda2 * parts[:, 2]
             + w.lambda4 * (parts[:, 3] + w.lambda3 * parts[:, 4]))
    return float(total.mean()), parts.mean(0)


class Adam:
    def __init__(self, params: ModelParams, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {n: np.zeros_like(params[n]) for n in PARAM_NAMES}
        self.v = {n: np.zeros_like(params[n]) for n in PARAM_NAMES}
        self.t = 0

    def step(self, params: ModelParams, grads: dict):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for n in PARAM_NAMES:
            g = grads[n]
            self.m[n] = self.beta1 * self.m[n] + (1.0 - self.beta1) * g
            self.v[n] = self.beta2 * self.v[n] + (1.0 - self.beta2) * g * g
            params.arrays[n] = params[n] - self.lr * (self.m[n] / c1) / (np.sqrt(self.v[n] / c2) + self.eps)


def train(records, config: TrainConfig, init: ModelParams | None = None) -> TrainResult:
    """Fit the predictor on ``config.train_splits`` with early stopping on ``val_split``.

    Starting from ``init`` when given (a copy is trained), otherwise from a
    seeded initialisation. Returns the best-validation parameters.
    """
    train_recs = [r for r in records if r.split in config.train_splits]
    if not train_recs:
        raise TrainingError(f"no training records in splits {config.train_splits}")
    val_recs = [r for r in records if r.split == config.val_split]
    params = init.copy() if init is not None else init_params(config.model, config.seed)
    if params.config != config.model:
        raise TrainingError("initial parameters do not match the model config")
    x_tr, y_tr = prepare(train_recs)
    x_va, y_va = prepare(val_recs) if val_recs else (x_tr, y_tr)
    w_final, priors = config.weights, config.priors

    best_val, _ = evaluate_loss(params, x_va, y_va, w_final, priors)
    ref_val = best_val
    result = TrainResult(params.copy(), best_epoch=0)
    if config.epochs <= 0:
        return result
    opt = Adam(params, config.lr, config.beta1, config.beta2, config.adam_eps)
    rng = np.random.default_rng(config.seed)
    wait = 0
    n = len(x_tr)
    for epoch in range(config.epochs):
        w = w_final.annealed(epoch, config.anneal_epochs)
        order = rng.permutation(n)
        batch_losses, batch_parts = [], []
        for bi, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start:start + config.batch_size]
            gp = graph_parameters(params)
            loss, parts, _ = batch_loss(gp, x_tr[idx], y_tr[idx], config.model, w, priors)
            value = float(loss.data)
            if not math.isfinite(value):
                raise TrainingError(f"non-finite loss {value} at epoch {epoch}, batch {bi}")
            loss.backward()
            opt.step(params, {k: gp[k].grad for k in PARAM_NAMES})
            batch_losses.append(value * len(idx))
            batch_parts.append(parts.sum(0))
        val, val_parts = evaluate_loss(params, x_va, y_va, w_final, priors)
        if not math.isfinite(val):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}")
        entry = {
            "epoch": epoch + 1,
            "train_loss": sum(batch_losses) / n,
            "val_loss": val,
            "lambda3": w.lambda3,
            **{f"train_{k}": float(v) for k, v in zip(PART_NAMES, np.sum(batch_parts, 0) / n)},
        }
        result.history.append(entry)
        log.debug("epoch %d train %.5f val %.5f", epoch + 1, entry["train_loss"], val)
        if val < best_val:
            best_val = val
            result.params = params.copy()
            result.best_epoch = epoch + 1
        if val < ref_val - config.min_delta:
            ref_val = val
            wait = 0
        else:
            wait += 1
            if wait >= config.patience:
                result.stopped_early = True
                break
    return result
