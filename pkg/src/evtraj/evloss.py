"""Evidential training losses for positions (NIG) and mode probabilities (Dirichlet).

These are the reference, per-value implementations. Training uses the fused
batched kernel in :mod:`evtraj.kernels`, which is tested against them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gammaln

from .evidist import DirichletEvidence, DomainError, NIGParams, dirichlet_kl, nig_kl
from .prediction import ScenePrediction

REGULARIZERS = ("eq4", "omega")


@dataclass(frozen=True)
class LossWeights:
    """Loss term weights.

    ``lambda3`` is the post-annealing value; see :meth:`annealed`.
    ``regularizer`` picks the evidence multiplier of the residual penalty:
    ``"eq4"`` uses (2*nu + alpha), ``"omega"`` uses 2*beta*(1 + nu).
    """

    lambda1: float = 0.01
    lambda2: float = 0.0
    lambda3: float = 1.0
    lambda4: float = 1.0
    regularizer: str = "eq4"

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3", "lambda4"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")
        if self.regularizer not in REGULARIZERS:
            raise ValueError(f"regularizer must be one of {REGULARIZERS}")

    def annealed(self, epoch: int, anneal_epochs: int = 10) -> LossWeights:
        """Weights at ``epoch`` with lambda3 ramped linearly from 0."""
        if anneal_epochs <= 0:
            return self
        return replace(self, lambda3=self.lambda3 * min(1.0, epoch / anneal_epochs))


@dataclass(frozen=True)
class Priors:
    """Zero-evidence priors for the KL terms.

    The regression prior copies gamma and beta from the prediction itself so
    that only the evidence parameters (nu, alpha) are pulled toward the prior.
    """

    nu0: float = 0.1
    alpha0: float = 1.01

    def regression(self, p: NIGParams) -> NIGParams:
        return NIGParams(p.gamma, self.nu0, self.alpha0, p.beta)

    @staticmethod
    def classification(k: int) -> DirichletEvidence:
        return DirichletEvidence((1.0,) * k)


@dataclass(frozen=True)
class LossBreakdown:
    nll_reg: float
    r_reg: float
    kl_reg: float
    squared_cls: float
    kl_cls: float
    total: float
    winner: int = 0

    @staticmethod
    def compose(nll_reg, r_reg, kl_reg, squared_cls, kl_cls, w: LossWeights) -> float:
        return (nll_reg + w.lambda1 * r_reg + w.lambda2 * kl_reg
                + w.lambda4 * (squared_cls + w.lambda3 * kl_cls))


def reg_nll(p: NIGParams, y: float) -> float:
    """Negative log marginal likelihood of ``y`` under the NIG (Student-t)."""
    if not math.isfinite(y):
        raise DomainError(f"target must be finite, got {y}")
    omega = p.omega
    return float(
        0.5 * math.log(math.pi / p.nu)
        - p.alpha * math.log(omega)
        + (p.alpha + 0.5) * math.log((y - p.gamma) ** 2 * p.nu + omega)
        + gammaln(p.alpha) - gammaln(p.alpha + 0.5)
    )


def reg_regularizer(p: NIGParams, y: float, regularizer: str = "eq4") -> float:
    """Residual scaled by the predicted evidence; zero when ``y == gamma``."""
    if regularizer == "eq4":
        evidence = 2.0 * p.nu + p.alpha
    elif regularizer == "omega":
        evidence = p.omega
    else:
        raise ValueError(f"unknown regularizer {regularizer!r}")
    return abs(y - p.gamma) * evidence


def reg_loss(p: NIGParams, y: float, prior: NIGParams, w: LossWeights) -> float:
    total = reg_nll(p, y) + w.lambda1 * reg_regularizer(p, y, w.regularizer)
    if w.lambda2:
        total += w.lambda2 * nig_kl(p, prior)
    return total


def _cls_parts(d: DirichletEvidence, target_mode: int, prior: DirichletEvidence):
    if not 0 <= target_mode < d.K:
        raise IndexError(f"target_mode {target_mode} out of range for K={d.K}")
    a = np.asarray(d.alphas)
    y = np.zeros(d.K)
    y[target_mode] = 1.0
    s = a.sum()
    sq = float(((y - a / s) ** 2).sum() + (a * (s - a)).sum() / (s * s * (s + 1.0)))
    # the target component keeps no evidence: its concentration drops to 1
    a_tilde = y + (1.0 - y) * a
    kl = dirichlet_kl(DirichletEvidence(tuple(a_tilde)), prior)
    return sq, kl


def cls_loss(d: DirichletEvidence, target_mode: int, w: LossWeights,
             prior: DirichletEvidence | None = None) -> float:
    prior = prior if prior is not None else Priors.classification(d.K)
    sq, kl = _cls_parts(d, target_mode, prior)
    return sq + w.lambda3 * kl


def winner_mode(means, gt) -> int:
    """Mode with the least summed Euclidean displacement; lowest index wins ties."""
    means = np.asarray(means, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    dist = np.sqrt(((means - gt[None]) ** 2).sum(-1)).sum(-1)
    return int(np.argmin(dist))


def total_loss(pred: ScenePrediction, gt_future, w: LossWeights | None = None,
               priors: Priors | None = None) -> LossBreakdown:
    """Winner-takes-all evidential loss for one agent."""
    w = w if w is not None else LossWeights()
    priors = priors if priors is not None else Priors()
    gt = np.asarray(gt_future, dtype=np.float64)
    if gt.shape != (pred.horizon, 2):
        raise ValueError(f"ground truth shape {gt.shape} != ({pred.horizon}, 2)")
    if not np.all(np.isfinite(gt)):
        raise DomainError("ground truth contains non-finite values")
    k_star = winner_mode(pred.gamma, gt)
    nll = r = kl = 0.0
    n = 2 * pred.horizon
    for t in range(pred.horizon):
        for axis in range(2):
            p = pred.nig(k_star, t, axis)
            y = float(gt[t, axis])
            nll += reg_nll(p, y)
            r += reg_regularizer(p, y, w.regularizer)
            kl += nig_kl(p, priors.regression(p))
    nll, r, kl = nll / n, r / n, kl / n
    sq, klc = _cls_parts(pred.evidence, k_star, Priors.classification(pred.K))
    total = LossBreakdown.compose(nll, r, kl, sq, klc, w)
    return LossBreakdown(nll, r, kl, sq, klc, total, winner=k_star)
