"""Flat ``key = value`` configuration files.

One file can carry generator, training and experiment keys; unknown keys are
rejected so typos do not silently fall back to defaults. ``EVTRAJ_SEED``
overrides every seed-like key.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..evloss import LossWeights, Priors
from ..predictor.network import ModelConfig
from ..predictor.train import TrainConfig
from ..synthgen import GeneratorConfig

SEED_ENV = "EVTRAJ_SEED"


class ConfigError(ValueError):
    pass


def _floats(v: str) -> tuple[float, ...]:
    return tuple(float(x) for x in v.split(",") if x.strip())


def _ints(v: str) -> tuple[int, ...]:
    return tuple(int(x) for x in v.split(",") if x.strip())


def _strs(v: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in v.split(",") if x.strip())


GENERATOR_KEYS = {
    "n_scenes": int, "maneuver_weights": _floats, "speed_min": float, "speed_max": float,
    "noise_sigma": float, "seed": int, "history_steps": int, "future_steps": int,
    "lead_in_steps": int, "split_fractions": _floats,
}
TRAIN_KEYS = {
    "n_modes": int, "hidden": int, "input_scale": float, "pos_scale": float,
    "epochs": int, "batch_size": int, "lr": float, "patience": int, "min_delta": float,
    "anneal_epochs": int, "seed": int, "lambda1": float, "lambda2": float, "lambda3": float,
    "lambda4": float, "regularizer": str, "nu0": float, "alpha0": float,
    "train_splits": _strs, "val_split": str, "history_steps": int, "future_steps": int,
}
EXPERIMENT_KEYS = {
    "dataset": str, "initial_fraction": float, "added_fraction": float, "selection": _strs,
    "base_epochs": int, "retrain_epochs": int, "seeds": _ints, "uncertainty_component": str,
    "eval_split": str, "rauc_error": str, "miss_threshold": float, "ece_bins": int,
}
EVAL_KEYS = {"eval_split": str, "rauc_error": str, "miss_threshold": float, "ece_bins": int,
             "uncertainty_component": str}
ALL_KEYS = {**GENERATOR_KEYS, **TRAIN_KEYS, **EXPERIMENT_KEYS, **EVAL_KEYS}


def parse_text(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines into typed values; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in ALL_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            out[key] = ALL_KEYS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
    return out


def load(path) -> dict:
    if path is None:
        return {}
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_text(text, str(path))


def seed_override() -> int | None:
    v = os.environ.get(SEED_ENV)
    if v is None or v == "":
        return None
    try:
        return int(v)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {v!r}") from None


def _wrap(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def generator_config(kv: dict) -> GeneratorConfig:
    base = GeneratorConfig()
    kw = {k: kv[k] for k in ("n_scenes", "maneuver_weights", "noise_sigma", "seed",
                             "history_steps", "future_steps", "lead_in_steps", "split_fractions")
          if k in kv}
    if "speed_min" in kv or "speed_max" in kv:
        kw["speed_range"] = (kv.get("speed_min", base.speed_range[0]),
                             kv.get("speed_max", base.speed_range[1]))
    if (s := seed_override()) is not None:
        kw["seed"] = s
    return _wrap(replace, base, **kw)


def train_config(kv: dict) -> TrainConfig:
    model_kw = {k: kv[k] for k in ("n_modes", "hidden", "input_scale", "pos_scale", "history_steps")
                if k in kv}
    if "future_steps" in kv:
        model_kw["horizon"] = kv["future_steps"]
    weights_kw = {k: kv[k] for k in ("lambda1", "lambda2", "lambda3", "lambda4", "regularizer")
                  if k in kv}
    priors_kw = {k: kv[k] for k in ("nu0", "alpha0") if k in kv}
    kw = {k: kv[k] for k in ("epochs", "batch_size", "lr", "patience", "min_delta",
                             "anneal_epochs", "seed", "train_splits", "val_split") if k in kv}
    if (s := seed_override()) is not None:
        kw["seed"] = s
    return _wrap(TrainConfig, model=_wrap(ModelConfig, **model_kw),
                 weights=_wrap(LossWeights, **weights_kw), priors=_wrap(Priors, **priors_kw), **kw)


@dataclass(frozen=True)
class EvalConfig:
    eval_split: str = "test"
    rauc_error: str = "minade"
    miss_threshold: float = 2.0
    ece_bins: int = 10
    uncertainty_component: str = "total"

    def __post_init__(self):
        if self.rauc_error not in ("minade", "wade"):
            raise ConfigError("rauc_error must be 'minade' or 'wade'")
        if self.uncertainty_component not in ("total", "epistemic"):
            raise ConfigError("uncertainty_component must be 'total' or 'epistemic'")
        if self.ece_bins < 1:
            raise ConfigError("ece_bins must be >= 1")


def eval_config(kv: dict) -> EvalConfig:
    return _wrap(EvalConfig, **{k: kv[k] for k in EVAL_KEYS if k in kv})


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str = ""
    initial_fraction: float = 0.5
    added_fraction: float = 0.25
    selection: tuple[str, ...] = ("random", "error", "uncertainty")
    base_epochs: int = 200
    retrain_epochs: int = 40
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    train: TrainConfig = field(default_factory=TrainConfig)
    evaluation: EvalConfig = field(default_factory=EvalConfig)

    def __post_init__(self):
        if not 0.0 < self.initial_fraction <= 1.0:
            raise ConfigError("initial_fraction must lie in (0, 1]")
        if not 0.0 <= self.added_fraction <= 1.0:
            raise ConfigError("added_fraction must lie in [0, 1]")
        if self.initial_fraction + self.added_fraction > 1.0 + 1e-12:
            raise ConfigError("initial_fraction + added_fraction must be <= 1")
        bad = set(self.selection) - {"random", "error", "uncertainty"}
        if bad:
            raise ConfigError(f"unknown selection criteria {sorted(bad)}")
        if not self.seeds:
            raise ConfigError("need at least one seed")


def experiment_config(kv: dict) -> ExperimentConfig:
    kw = {k: kv[k] for k in ("dataset", "initial_fraction", "added_fraction", "selection",
                             "base_epochs", "retrain_epochs", "seeds") if k in kv}
    if (s := seed_override()) is not None:
        kw["seeds"] = (s,)
    return _wrap(ExperimentConfig, train=train_config(kv), evaluation=eval_config(kv), **kw)

