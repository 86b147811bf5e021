"""Feedforward evidential predictor: history features -> NIG modes + mode evidence."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .. import kernels
from ..prediction import ScenePrediction
from .autodiff import Tensor, parameter

PARAM_NAMES = ("W1", "b1", "W2", "b2", "W3", "b3", "Ws")


def _inv_softplus(y: float) -> float:
    return math.log(math.expm1(y))


@dataclass(frozen=True)
class ModelConfig:
    history_steps: int = 20
    horizon: int = 30
    n_modes: int = 5
    hidden: int = 64
    input_scale: float = 10.0
    pos_scale: float = 10.0
    init_nu: float = 1.0
    init_alpha: float = 2.0
    init_beta: float = 1.0
    output_init_gain: float = 0.1

    def __post_init__(self):
        if min(self.history_steps, self.horizon, self.n_modes, self.hidden) < 1:
            raise ValueError("model dimensions must be >= 1")
        if self.init_alpha <= 1 + kernels.EPS or self.init_nu <= kernels.EPS or self.init_beta <= kernels.EPS:
            raise ValueError("initial NIG values must satisfy nu > 0, alpha > 1, beta > 0")

    @property
    def n_inputs(self) -> int:
        return 2 * self.history_steps

    @property
    def n_nig(self) -> int:
        return self.n_modes * self.horizon * 8

    @property
    def n_outputs(self) -> int:
        return self.n_nig + self.n_modes

    def to_dict(self) -> dict:
        return asdict(self)


def param_shapes(c: ModelConfig) -> dict:
    return {
        "W1": (c.n_inputs, c.hidden), "b1": (c.hidden,),
        "W2": (c.hidden, c.hidden), "b2": (c.hidden,),
        "W3": (c.hidden, c.n_outputs), "b3": (c.n_outputs,),
        "Ws": (c.n_inputs, c.n_outputs),
    }


@dataclass
class ModelParams:
    """Weights of the two-hidden-layer tanh network plus a linear input skip."""

    config: ModelConfig
    arrays: dict

    def __post_init__(self):
        for name, shape in param_shapes(self.config).items():
            arr = np.asarray(self.arrays.get(name), dtype=np.float64)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
            self.arrays[name] = arr

    def __getitem__(self, name):
        return self.arrays[name]

    def copy(self) -> ModelParams:
        return ModelParams(self.config, {k: v.copy() for k, v in self.arrays.items()})

    def flat(self) -> np.ndarray:
        return np.concatenate([self.arrays[n].ravel() for n in PARAM_NAMES])

    @classmethod
    def from_flat(cls, config: ModelConfig, flat) -> ModelParams:
        flat = np.asarray(flat, dtype=np.float64)
        arrays, start = {}, 0
        for n, shape in param_shapes(config).items():
            size = math.prod(shape)
            arrays[n] = flat[start:start + size].reshape(shape).copy()
            start += size
        if start != flat.size:
            raise ValueError(f"expected {start} parameters, got {flat.size}")
        return cls(config, arrays)

    @property
    def size(self) -> int:
        return sum(a.size for a in self.arrays.values())


def init_params(config: ModelConfig, seed: int = 0) -> ModelParams:
    """Uniform fan-in initialisation; output biases give O(1) initial uncertainty."""
    rng = np.random.default_rng(seed)
    c = config

    def uniform(fan_in, shape, gain=1.0):
        bound = gain / math.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    b3 = np.zeros(c.n_outputs)
    nig = b3[:c.n_nig].reshape(c.n_modes, c.horizon, 2, 4)
    nig[..., 1] = _inv_softplus(c.init_nu - kernels.EPS)
    nig[..., 2] = _inv_softplus(c.init_alpha - 1.0 - kernels.EPS)
    nig[..., 3] = _inv_softplus(c.init_beta - kernels.EPS)
    arrays = {
        "W1": uniform(c.n_inputs, (c.n_inputs, c.hidden)),
        "b1": uniform(c.n_inputs, (c.hidden,)),
        "W2": uniform(c.hidden, (c.hidden, c.hidden)),
        "b2": uniform(c.hidden, (c.hidden,)),
        "W3": uniform(c.hidden, (c.hidden, c.n_outputs), c.output_init_gain),
        "b3": b3,
        "Ws": np.zeros((c.n_inputs, c.n_outputs)),
    }
    return ModelParams(config, arrays)


def column_scale(config: ModelConfig) -> np.ndarray:
    """Per-output multiplier: position means are emitted in units of pos_scale."""
    scale = np.ones(config.n_outputs)
    scale[:config.n_nig].reshape(config.n_modes, config.horizon, 2, 4)[..., 0] = config.pos_scale
    return scale


class ForwardCounter:
    """Counts network evaluations (calls and rows) for the single-pass contract."""

    def __init__(self):
        self.calls = 0
        self.rows = 0

    def reset(self):
        self.calls = 0
        self.rows = 0


FORWARD_COUNTER = ForwardCounter()


def forward_raw(params: ModelParams, features) -> np.ndarray:
    """Raw head outputs for a (B, 2T) feature batch."""
    c = params.config
    x = np.atleast_2d(np.asarray(features, dtype=np.float64)) / c.input_scale
    if x.shape[1] != c.n_inputs:
        raise ValueError(f"expected {c.n_inputs} features, got {x.shape[1]}")
    FORWARD_COUNTER.calls += 1
    FORWARD_COUNTER.rows += x.shape[0]
    h1 = np.tanh(x @ params["W1"] + params["b1"])
    h2 = np.tanh(h1 @ params["W2"] + params["b2"])
    out = h2 @ params["W3"] + params["b3"] + x @ params["Ws"]
    return out * column_scale(c)


def forward_graph(params: dict, features, config: ModelConfig) -> Tensor:
    """The same network on engine tensors; ``params`` maps names to Tensors."""
    x = Tensor(np.atleast_2d(np.asarray(features, dtype=np.float64)) / config.input_scale)
    h1 = (x @ params["W1"] + params["b1"]).tanh()
    h2 = (h1 @ params["W2"] + params["b2"]).tanh()
    out = h2 @ params["W3"] + params["b3"] + x @ params["Ws"]
    return out * column_scale(config)


def graph_parameters(params: ModelParams) -> dict:
    return {n: parameter(params[n]) for n in PARAM_NAMES}


def decode(raw, config: ModelConfig) -> dict:
    """Map raw outputs through the positivity transforms; arrays keep the batch axis."""
    raw = np.atleast_2d(np.asarray(raw, dtype=np.float64))
    b = raw.shape[0]
    nig = raw[:, :config.n_nig].reshape(b, config.n_modes, config.horizon, 2, 4)
    sp = kernels.softplus
    return {
        "gamma": nig[..., 0].copy(),
        "nu": sp(nig[..., 1]) + kernels.EPS,
        "alpha": 1.0 + sp(nig[..., 2]) + kernels.EPS,
        "beta": sp(nig[..., 3]) + kernels.EPS,
        "mode_alphas": 1.0 + sp(raw[:, config.n_nig:]),
    }


def to_predictions(decoded: dict) -> list[ScenePrediction]:
    n = decoded["gamma"].shape[0]
    return [ScenePrediction(decoded["gamma"][i], decoded["nu"][i], decoded["alpha"][i],
                            decoded["beta"][i], decoded["mode_alphas"][i]) for i in range(n)]


def forward(params: ModelParams, features) -> ScenePrediction | list[ScenePrediction]:
    """Predict from one feature vector (2T,) or a batch (B, 2T)."""
    raw = forward_raw(params, features)
    preds = to_predictions(decode(raw, params.config))
    return preds[0] if np.ndim(features) == 1 else preds
