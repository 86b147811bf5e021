"""Rank correlation between maneuver frequency and predicted agent uncertainty."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..predictor.api import predict_batch
from ..synthgen import MANEUVERS

TRAIN_SPLITS = ("train_a", "train_b")


@dataclass
class DensityResult:
    """``spearman`` is per record; ``maneuver_spearman`` uses per-maneuver means.

    Either is NaN with ``defined=False`` when densities do not vary.
    """

    spearman: float
    maneuver_spearman: float
    defined: bool
    table: list = field(default_factory=list)

    def to_dict(self) -> dict:
        def num(v):
            return None if math.isnan(v) else v

        return {"spearman": num(self.spearman), "maneuver_spearman": num(self.maneuver_spearman),
                "defined": self.defined, "per_maneuver": self.table}

    def format_table(self) -> str:
        lines = [f"{'maneuver':<10} {'frequency':>10} {'count':>6} {'mean_uncertainty':>17}"]
        for row in self.table:
            lines.append(f"{row['maneuver']:<10} {row['frequency']:>10.4f} {row['count']:>6d} "
                         f"{row['mean_uncertainty']:>17.5f}")
        stat = "undefined" if not self.defined else f"{self.spearman:.4f}"
        mstat = "undefined" if not self.defined else f"{self.maneuver_spearman:.4f}"
        lines.append(f"spearman(per record) = {stat}; spearman(per maneuver) = {mstat}")
        return "\n".join(lines) + "\n"


def _spearman(a, b) -> float:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if len(a) < 2 or np.ptp(a) == 0 or np.ptp(b) == 0:
        return math.nan
    return float(stats.spearmanr(a, b).statistic)


def maneuver_density(records, splits=TRAIN_SPLITS) -> dict:
    train = [r for r in records if r.split in splits]
    if not train:
        raise ValueError(f"no records in density splits {splits}")
    n = len(train)
    return {m: sum(r.maneuver == m for r in train) / n for m in MANEUVERS}


def density_from_uncertainty(records, uncertainty, density: dict) -> DensityResult:
    for r in records:
        if not getattr(r, "maneuver", None):
            raise ValueError(f"record {r.scene_id} has no maneuver label")
    dens = np.array([density[r.maneuver] for r in records])
    unc = np.asarray(uncertainty, dtype=np.float64)
    table = []
    for m in MANEUVERS:
        mask = np.array([r.maneuver == m for r in records])
        if mask.any():
            table.append({"maneuver": m, "frequency": density[m], "count": int(mask.sum()),
                          "mean_uncertainty": float(unc[mask].mean())})
    freq = [row["frequency"] for row in table]
    means = [row["mean_uncertainty"] for row in table]
    per_record = _spearman(dens, unc)
    per_maneuver = _spearman(freq, means)
    defined = not math.isnan(per_record)
    return DensityResult(per_record, per_maneuver, defined, table)


def density_uncertainty_check(params, records, eval_split: str = "test",
                              component: str = "total") -> DensityResult:
    density = maneuver_density(records)
    subset = [r for r in records if r.split == eval_split]
    if not subset:
        raise ValueError(f"split {eval_split!r} is empty")
    unc = [p.report.agent for p in predict_batch(params, subset, component)]
    return density_from_uncertainty(subset, unc, density)
