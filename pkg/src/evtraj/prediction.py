"""Container for one agent's multi-modal evidential prediction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .evidist import DirichletEvidence, DomainError, NIGParams


@dataclass(frozen=True)
class ScenePrediction:
    """K modes x T' steps x 2 axes of NIG parameters plus mode evidence.

    The four NIG arrays have shape (K, T', 2); ``mode_alphas`` has shape (K,).
    """

    gamma: np.ndarray
    nu: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    mode_alphas: np.ndarray

    def __post_init__(self):
        arrays = {}
        for name in ("gamma", "nu", "alpha", "beta", "mode_alphas"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
            arrays[name] = arr
        shape = arrays["gamma"].shape
        if len(shape) != 3 or shape[2] != 2 or shape[0] < 1 or shape[1] < 1:
            raise DomainError(f"gamma must have shape (K, T', 2), got {shape}")
        for name in ("nu", "alpha", "beta"):
            if arrays[name].shape != shape:
                raise DomainError(f"{name} shape {arrays[name].shape} != gamma shape {shape}")
        if arrays["mode_alphas"].shape != (shape[0],):
            raise DomainError(f"mode_alphas must have shape ({shape[0]},)")
        if not all(np.all(np.isfinite(a)) for a in arrays.values()):
            raise DomainError("prediction contains non-finite values")
        if np.any(self.nu <= 0) or np.any(self.beta <= 0) or np.any(self.alpha <= 1):
            raise DomainError("NIG arrays violate nu > 0, alpha > 1, beta > 0")
        if np.any(self.mode_alphas < 1):
            raise DomainError("mode concentrations must be >= 1")

    @property
    def K(self) -> int:
        return self.gamma.shape[0]

    @property
    def horizon(self) -> int:
        return self.gamma.shape[1]

    @property
    def evidence(self) -> DirichletEvidence:
        return DirichletEvidence(tuple(self.mode_alphas))

    @property
    def probabilities(self) -> np.ndarray:
        return self.mode_alphas / self.mode_alphas.sum()

    def nig(self, k: int, t: int, axis: int) -> NIGParams:
        return NIGParams(
            float(self.gamma[k, t, axis]),
            float(self.nu[k, t, axis]),
            float(self.alpha[k, t, axis]),
            float(self.beta[k, t, axis]),
        )

    def with_means(self, gamma) -> ScenePrediction:
        return ScenePrediction(gamma, self.nu, self.alpha, self.beta, self.mode_alphas)
