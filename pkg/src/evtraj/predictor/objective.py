"""Batched evidential loss on top of network outputs.

Two routes compute the same value and gradient: ``fused`` calls the hot kernel
(compiled or numpy) as one primitive in the differentiation graph; ``graph``
spells every term out with engine operations. Training uses ``fused``; the
graph route is the reference it is checked against.
"""

from __future__ import annotations

import math

import numpy as np

from .. import kernels
from ..evloss import LossWeights, Priors
from .autodiff import Tensor, custom
from .network import ModelConfig, forward_graph

PART_NAMES = ("nll_reg", "r_reg", "kl_reg", "squared_cls", "kl_cls")
_REG_MODE = {"eq4": kernels.REG_EQ4, "omega": kernels.REG_OMEGA}


def fused_head(raw: Tensor, gt, config: ModelConfig, w: LossWeights, priors: Priors):
    """Per-sample totals (B,) as one engine node; also returns parts and winners."""
    parts, winners, grad = kernels.head_loss(
        raw.data, gt, config.n_modes, config.horizon, w.lambda1, w.lambda2, w.lambda3,
        w.lambda4, priors.nu0, priors.alpha0, _REG_MODE[w.regularizer])
    totals = (parts[:, 0] + w.lambda1 * parts[:, 1] + w.lambda2 * parts[:, 2]
              + w.lambda4 * (parts[:, 3] + w.lambda3 * parts[:, 4]))
    node = custom((raw,), totals, lambda g: (g[:, None] * grad,))
    return node, parts, winners


def graph_head(raw: Tensor, gt, config: ModelConfig, w: LossWeights, priors: Priors):
    """Reference route: the same per-sample totals built from engine primitives."""
    gt = np.asarray(gt, dtype=np.float64)
    b, k, t = raw.shape[0], config.n_modes, config.horizon
    nig = raw[:, :config.n_nig].reshape(b, k, t, 2, 4)
    winners = kernels.winner_modes(nig.data[..., 0], gt)
    mask = np.zeros((b, k, 1, 1))
    mask[np.arange(b), winners] = 1.0

    def pick(c):
        return (nig[..., c] * mask).sum(axis=1)

    gamma = pick(0)
    nu = pick(1).softplus() + kernels.EPS
    alpha = pick(2).softplus() + (1.0 + kernels.EPS)
    beta = pick(3).softplus() + kernels.EPS
    r = Tensor(gt) - gamma
    omega = 2.0 * beta * (1.0 + nu)
    nll = (0.5 * math.log(math.pi) - 0.5 * nu.log() - alpha * omega.log()
           + (alpha + 0.5) * (r * r * nu + omega).log() + alpha.lgamma() - (alpha + 0.5).lgamma())
    evidence = 2.0 * nu + alpha if w.regularizer == "eq4" else omega
    reg = r.abs() * evidence
    a0, nu0 = priors.alpha0, priors.nu0
    kl = ((alpha - a0) * alpha.digamma() - alpha.lgamma() + math.lgamma(a0)
          + 0.5 * (nu * (1.0 / nu0)).log() + nu0 / (2.0 * nu) - 0.5)
    n = 2.0 * t
    nll_m = nll.sum(axis=(1, 2)) * (1.0 / n)
    reg_m = reg.sum(axis=(1, 2)) * (1.0 / n)
    kl_m = kl.sum(axis=(1, 2)) * (1.0 / n)

    alphas = raw[:, config.n_nig:].softplus() + 1.0
    y = np.zeros((b, k))
    y[np.arange(b), winners] = 1.0
    s = alphas.sum(axis=1, keepdims=True)
    p = alphas / s
    diff = Tensor(y) - p
    sq = (diff * diff).sum(axis=1) + (alphas * (s - alphas)).sum(axis=1) / (s * s * (s + 1.0)).reshape(b)
    a_t = alphas * (1.0 - y) + y
    s_t = a_t.sum(axis=1, keepdims=True)
    klc = (s_t.lgamma().reshape(b) - a_t.lgamma().sum(axis=1) - math.lgamma(k)
           + ((a_t - 1.0) * (a_t.digamma() - s_t.digamma())).sum(axis=1))
    totals = nll_m + w.lambda1 * reg_m + w.lambda2 * kl_m + w.lambda4 * (sq + w.lambda3 * klc)
    parts = np.stack([nll_m.data, reg_m.data, kl_m.data, sq.data, klc.data], axis=1)
    return totals, parts, winners


def batch_loss(params: dict, features, gt, config: ModelConfig, w: LossWeights,
               priors: Priors | None = None, route: str = "fused"):
    """Mean total loss over a batch as an engine scalar, with per-sample parts."""
    priors = priors if priors is not None else Priors()
    raw = forward_graph(params, features, config)
    head = {"fused": fused_head, "graph": graph_head}[route]
    totals, parts, winners = head(raw, gt, config, w, priors)
    return totals.mean(), parts, winners
