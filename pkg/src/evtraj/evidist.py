"""Normal-Inverse-Gamma and Dirichlet evidential distributions.

Everything here is a pure function over immutable values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import digamma, gammaln


class DomainError(ValueError):
    """Raised when distribution parameters leave their valid domain."""


def _finite(*values: float) -> bool:
    return all(math.isfinite(v) for v in values)


@dataclass(frozen=True)
class NIGParams:
    """Evidential regression parameters for one position axis at one timestep.

    ``alpha`` only has to be positive to build the value (the likelihood and
    KL are defined there); uncertainty extraction additionally needs
    ``alpha > 1`` and enforces it itself.
    """

    gamma: float
    nu: float
    alpha: float
    beta: float

    def __post_init__(self):
        if not _finite(self.gamma, self.nu, self.alpha, self.beta):
            raise DomainError(f"non-finite NIG parameters: {self}")
        if self.nu <= 0 or self.beta <= 0 or self.alpha <= 0:
            raise DomainError(f"NIG parameters out of domain (nu, alpha, beta > 0): {self}")

    @property
    def omega(self) -> float:
        """Evidence-scaled dispersion 2*beta*(1 + nu) used by the NLL."""
        return 2.0 * self.beta * (1.0 + self.nu)


@dataclass(frozen=True)
class DirichletEvidence:
    """Concentration parameters over K trajectory modes (each >= 1)."""

    alphas: tuple[float, ...]

    def __post_init__(self):
        alphas = tuple(float(a) for a in np.asarray(self.alphas, dtype=np.float64).ravel())
        object.__setattr__(self, "alphas", alphas)
        if len(alphas) < 1:
            raise DomainError("Dirichlet evidence needs at least one mode")
        if not _finite(*alphas) or min(alphas) < 1.0:
            raise DomainError(f"Dirichlet concentrations must be finite and >= 1: {alphas}")

    @classmethod
    def from_evidence(cls, evidence) -> DirichletEvidence:
        return cls(tuple(1.0 + np.asarray(evidence, dtype=np.float64)))

    @property
    def K(self) -> int:
        return len(self.alphas)

    @property
    def strength(self) -> float:
        return math.fsum(self.alphas)

    @property
    def evidence(self) -> np.ndarray:
        return np.asarray(self.alphas) - 1.0


@dataclass(frozen=True)
class AxisUncertainty:
    aleatoric: float
    epistemic: float
    total: float


@dataclass(frozen=True)
class StudentT:
    location: float
    scale: float
    degrees_of_freedom: float

    @property
    def scale2(self) -> float:
        return self.scale * self.scale


@dataclass(frozen=True)
class DirichletStats:
    probabilities: np.ndarray
    total_evidence: float
    cls_uncertainty: float


def nig_uncertainties(p: NIGParams) -> AxisUncertainty:
    """Aleatoric beta/(alpha-1), epistemic beta/((alpha-1)*nu) and their sum."""
    if p.alpha <= 1.0:
        raise DomainError(f"uncertainties need alpha > 1, got {p.alpha}")
    aleatoric = p.beta / (p.alpha - 1.0)
    epistemic = aleatoric / p.nu
    return AxisUncertainty(aleatoric, epistemic, aleatoric + epistemic)


def nig_uncertainty_arrays(nu, alpha, beta):
    """Vectorised ``(aleatoric, epistemic)`` for arrays of NIG parameters."""
    nu = np.asarray(nu, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    if np.any(alpha <= 1.0) or np.any(nu <= 0.0):
        raise DomainError("uncertainties need alpha > 1 and nu > 0")
    aleatoric = beta / (alpha - 1.0)
    return aleatoric, aleatoric / nu


def student_t_marginal(p: NIGParams) -> StudentT:
    """Predictive marginal of y under the NIG: Student-t(2*alpha, gamma, scale)."""
    scale2 = p.beta * (1.0 + p.nu) / (p.nu * p.alpha)
    return StudentT(location=p.gamma, scale=math.sqrt(scale2), degrees_of_freedom=2.0 * p.alpha)


def student_t_nll(dist: StudentT, y: float) -> float:
    """Negative log density of a location-scale Student-t at ``y``."""
    d = dist.degrees_of_freedom
    z2 = (y - dist.location) ** 2 / dist.scale2
    return float(
        gammaln(d / 2.0) - gammaln((d + 1.0) / 2.0)
        + 0.5 * math.log(d * math.pi * dist.scale2)
        + (d + 1.0) / 2.0 * math.log1p(z2 / d)
    )


def dirichlet_stats(d: DirichletEvidence) -> DirichletStats:
    alphas = np.asarray(d.alphas)
    s = d.strength
    return DirichletStats(probabilities=alphas / s, total_evidence=s, cls_uncertainty=d.K / s)


def nig_kl(p: NIGParams, prior: NIGParams) -> float:
    """KL[NIG(p) || NIG(prior)] in closed form.

    Inverse-gamma KL plus the expected Gaussian KL under sigma^2 ~ IG(alpha, beta).
    """
    a, b, nu, g = p.alpha, p.beta, p.nu, p.gamma
    a0, b0, nu0, g0 = prior.alpha, prior.beta, prior.nu, prior.gamma
    kl_ig = ((a - a0) * digamma(a) - gammaln(a) + gammaln(a0)
             + a0 * math.log(b / b0) + a * (b0 - b) / b)
    kl_gauss = (0.5 * math.log(nu / nu0) + nu0 / (2.0 * nu) - 0.5
                + nu0 * (g - g0) ** 2 * a / (2.0 * b))
    return max(float(kl_ig + kl_gauss), 0.0)


def dirichlet_kl(d: DirichletEvidence, prior: DirichletEvidence) -> float:
    if d.K != prior.K:
        raise DomainError(f"dimension mismatch: K={d.K} vs prior K={prior.K}")
    a = np.asarray(d.alphas)
    a0 = np.asarray(prior.alphas)
    s, s0 = a.sum(), a0.sum()
    kl = (gammaln(s) - gammaln(a).sum() - gammaln(s0) + gammaln(a0).sum()
          + ((a - a0) * (digamma(a) - digamma(s))).sum())
    return max(float(kl), 0.0)
