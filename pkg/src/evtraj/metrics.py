"""Displacement, rejection and calibration metrics for multi-modal forecasts."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DEFAULT_MISS_THRESHOLD = 2.0
DEFAULT_ECE_BINS = 10


@dataclass(frozen=True)
class DisplacementResult:
    min_ade: float
    w_ade: float
    min_fde: float
    w_fde: float
    miss: bool


def _check_probs(probs, k: int) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    if probs.shape != (k,):
        raise ValueError(f"expected {k} mode probabilities, got shape {probs.shape}")
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
        raise ValueError(f"mode probabilities must be >= 0 and sum to 1, got sum {probs.sum()}")
    return probs


def mode_errors(pred_means, gt) -> tuple[np.ndarray, np.ndarray]:
    """Per-mode (ADE, FDE) for (K, T', 2) predictions against a (T', 2) truth."""
    pred_means = np.asarray(pred_means, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred_means.ndim != 3 or pred_means.shape[1:] != gt.shape or gt.shape[-1] != 2:
        raise ValueError(f"shape mismatch: predictions {pred_means.shape}, truth {gt.shape}")
    dist = np.linalg.norm(pred_means - gt[None], axis=-1)
    return dist.mean(axis=1), dist[:, -1]


def displacement(pred_means, probs, gt,
                 miss_threshold: float = DEFAULT_MISS_THRESHOLD) -> DisplacementResult:
    ade, fde = mode_errors(pred_means, gt)
    probs = _check_probs(probs, ade.shape[0])
    return DisplacementResult(
        min_ade=float(ade.min()),
        w_ade=float(probs @ ade),
        min_fde=float(fde.min()),
        w_fde=float(probs @ fde),
        miss=bool(fde.min() > miss_threshold),
    )


def rejection_curve(errors, uncertainties) -> tuple[np.ndarray, np.ndarray]:
    """Retained mean error after rejecting the most uncertain samples first.

    Returns ``(fractions, retained)`` with N+1 points; fraction i/N keeps the
    N-i least uncertain samples, and the fully rejected end point is 0.
    Ties in uncertainty are rejected in original index order.
    """
    errors = np.asarray(errors, dtype=np.float64)
    uncertainties = np.asarray(uncertainties, dtype=np.float64)
    if errors.shape != uncertainties.shape or errors.ndim != 1:
        raise ValueError("errors and uncertainties must be paired 1-d arrays")
    n = errors.shape[0]
    if n < 2:
        raise ValueError("rejection curve needs at least two samples")
    # lexsort keys: last is primary -> descending uncertainty, then ascending index
    order = np.lexsort((np.arange(n), -uncertainties))
    ranked = errors[order]
    tail_sums = np.cumsum(ranked[::-1])[::-1]
    retained = np.zeros(n + 1)
    retained[:n] = tail_sums / np.arange(n, 0, -1)
    return np.arange(n + 1) / n, retained


def rauc(errors, uncertainties) -> float:
    fractions, retained = rejection_curve(errors, uncertainties)
    return float(np.trapezoid(retained, fractions))


def write_rejection_curve(path, errors, uncertainties) -> Path:
    fractions, retained = rejection_curve(errors, uncertainties)
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["rejection_fraction", "retained_mean_error"])
        for f, r in zip(fractions, retained):
            writer.writerow([repr(float(f)), repr(float(r))])
    return path


def ece(prob_vectors, correct_modes, bins: int = DEFAULT_ECE_BINS) -> float:
    """Expected calibration error of the top mode, equal-width right-closed bins."""
    probs = np.asarray(prob_vectors, dtype=np.float64)
    correct_modes = np.asarray(correct_modes)
    if probs.ndim != 2 or correct_modes.shape != (probs.shape[0],):
        raise ValueError("prob_vectors must be (N, K) with one correct mode per row")
    if bins < 1:
        raise ValueError("bins must be >= 1")
    if probs.shape[0] == 0:
        raise ValueError("ece needs at least one sample")
    if np.any(probs < 0) or np.any(np.abs(probs.sum(1) - 1.0) > 1e-9):
        raise ValueError("each probability row must be >= 0 and sum to 1")
    conf = probs.max(1)
    hit = (probs.argmax(1) == correct_modes).astype(np.float64)
    edges = np.arange(bins + 1) / bins
    # first edge >= conf gives the right-closed bin; conf == 0 joins the first bin
    idx = np.clip(np.searchsorted(edges, conf, side="left") - 1, 0, bins - 1)
    n = conf.shape[0]
    count = np.bincount(idx, minlength=bins)
    acc = np.bincount(idx, weights=hit, minlength=bins)
    cnf = np.bincount(idx, weights=conf, minlength=bins)
    used = count > 0
    gap = np.abs(acc[used] / count[used] - cnf[used] / count[used])
    return float(np.sum(count[used] / n * gap))
