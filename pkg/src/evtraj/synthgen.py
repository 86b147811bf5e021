"""Synthetic multi-modal driving scenarios with controllable maneuver rarity.

Every record follows a kinematic template (constant-speed straight line or
arc, or a linear deceleration to rest) placed at a random pose in the world
frame, plus i.i.d. Gaussian position noise. Each maneuver starts a short
lead-in before the present so the observed history carries a weak cue of the
intent; the sweep over the future horizon is exactly +-90 deg for turns and
180 deg for the u-turn.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MANEUVERS = ("straight", "left", "right", "u_turn", "stop")
SPLITS = ("train_a", "train_b", "val", "test")
DT = 0.1

_SWEEP = {"straight": 0.0, "left": math.pi / 2, "right": -math.pi / 2, "u_turn": math.pi, "stop": 0.0}
_KEYS = ("scene_id", "history", "future", "maneuver", "speed", "noise_sigma", "split")


class DatasetError(ValueError):
    """Malformed dataset file; ``line`` is the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    scene_id: str
    history: np.ndarray
    future: np.ndarray
    maneuver: str
    speed: float
    noise_sigma: float
    split: str

    def __post_init__(self):
        for name in ("history", "future"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 2 and name == "history":
                raise ValueError(f"{name} must be an (n, 2) array, got shape {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite coordinates")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.maneuver not in MANEUVERS:
            raise ValueError(f"unknown maneuver {self.maneuver!r}")
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")

    def to_json(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "history": self.history.tolist(),
            "future": self.future.tolist(),
            "maneuver": self.maneuver,
            "speed": float(self.speed),
            "noise_sigma": float(self.noise_sigma),
            "split": self.split,
        }


@dataclass(frozen=True)
class GeneratorConfig:
    n_scenes: int = 4000
    maneuver_weights: tuple[float, ...] = (0.80, 0.09, 0.09, 0.01, 0.01)
    speed_range: tuple[float, float] = (4.0, 12.0)
    noise_sigma: float = 0.05
    seed: int = 0
    history_steps: int = 20
    future_steps: int = 30
    lead_in_steps: int = 5
    split_fractions: tuple[float, ...] = (0.35, 0.35, 0.15, 0.15)
    world_extent: float = 100.0

    def __post_init__(self):
        w = np.asarray(self.maneuver_weights, dtype=np.float64)
        if w.shape != (len(MANEUVERS),) or np.any(w < 0) or not np.all(np.isfinite(w)) or w.sum() <= 0:
            raise ValueError("maneuver_weights needs 5 nonnegative weights, not all zero")
        lo, hi = self.speed_range
        if lo < 0 or hi < lo:
            raise ValueError("speed_range must satisfy 0 <= min <= max")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.n_scenes < 0:
            raise ValueError("n_scenes must be >= 0")
        if self.history_steps < 2 or self.future_steps < 1:
            raise ValueError("need at least 2 history steps and 1 future step")
        if not 0 <= self.lead_in_steps < self.history_steps:
            raise ValueError("lead_in_steps must lie in [0, history_steps)")
        f = np.asarray(self.split_fractions, dtype=np.float64)
        if f.shape != (len(SPLITS),) or np.any(f < 0) or abs(f.sum() - 1.0) > 1e-9:
            raise ValueError("split_fractions needs 4 nonnegative fractions summing to 1")


def template(maneuver: str, speed: float, history_steps: int, future_steps: int,
             lead_in_steps: int) -> np.ndarray:
    """Noise-free positions at t = -(T-1)..T' steps in the agent's own frame.

    The present (t = 0) sits at the origin heading along +x before the
    lead-in starts, so the maneuver onset is at t = -lead_in_steps.
    """
    steps = np.arange(-(history_steps - 1), future_steps + 1, dtype=np.float64)
    onset = -lead_in_steps * DT
    tau = steps * DT
    u = np.maximum(tau - onset, 0.0)  # time since onset
    pre = np.minimum(tau - onset, 0.0)  # time before onset (<= 0)
    x = speed * pre
    y = np.zeros_like(tau)
    span = (future_steps + lead_in_steps) * DT
    if maneuver == "stop":
        x = x + speed * (u - u * u / (2.0 * span))
    elif maneuver == "straight":
        x = x + speed * u
    else:
        omega = _SWEEP[maneuver] / (future_steps * DT)
        x = x + speed * np.sin(omega * u) / omega
        y = y + speed * (1.0 - np.cos(omega * u)) / omega
    pts = np.stack([x, y], axis=1)
    return pts - pts[history_steps - 1]


def generate(config: GeneratorConfig) -> list[TrajectoryRecord]:
    """Draw ``config.n_scenes`` records; identical configs give identical output."""
    rng = np.random.default_rng(config.seed)
    n = config.n_scenes
    weights = np.asarray(config.maneuver_weights, dtype=np.float64)
    labels = rng.choice(len(MANEUVERS), size=n, p=weights / weights.sum())
    speeds = rng.uniform(*config.speed_range, size=n)
    headings = rng.uniform(-math.pi, math.pi, size=n)
    origins = rng.uniform(-config.world_extent, config.world_extent, size=(n, 2))
    total = config.history_steps + config.future_steps
    noise = rng.normal(0.0, 1.0, size=(n, total, 2)) * config.noise_sigma
    split_of = _assign_splits(n, config.split_fractions, rng)
    records = []
    for i in range(n):
        local = template(MANEUVERS[labels[i]], speeds[i], config.history_steps,
                         config.future_steps, config.lead_in_steps)
        c, s = math.cos(headings[i]), math.sin(headings[i])
        world = local @ np.array([[c, s], [-s, c]]) + origins[i] + noise[i]
        records.append(TrajectoryRecord(
            scene_id=f"s{config.seed}-{i:06d}",
            history=world[:config.history_steps],
            future=world[config.history_steps:],
            maneuver=MANEUVERS[labels[i]],
            speed=float(speeds[i]),
            noise_sigma=float(config.noise_sigma),
            split=split_of[i],
        ))
    return records


def _assign_splits(n: int, fractions, rng) -> list[str]:
    counts = np.floor(np.asarray(fractions) * n).astype(int)
    counts[0] += n - counts.sum()
    order = rng.permutation(n)
    out = [""] * n
    start = 0
    for name, c in zip(SPLITS, counts):
        for j in order[start:start + c]:
            out[j] = name
        start += c
    return out


def split(records, *names) -> list[TrajectoryRecord]:
    return [r for r in records if r.split in names]


def write_dataset(records, path) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json(), separators=(",", ":")))
            fh.write("\n")
    return path


def read_dataset(path) -> list[TrajectoryRecord]:
    records = []
    with Path(path).open() as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(lineno, f"invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise DatasetError(lineno, "record must be a JSON object")
            missing = [k for k in _KEYS if k not in obj]
            if missing:
                raise DatasetError(lineno, f"missing keys {missing}")
            try:
                records.append(TrajectoryRecord(
                    scene_id=str(obj["scene_id"]),
                    history=obj["history"],
                    future=obj["future"],
                    maneuver=obj["maneuver"],
                    speed=float(obj["speed"]),
                    noise_sigma=float(obj["noise_sigma"]),
                    split=obj["split"],
                ))
            except (TypeError, ValueError) as exc:
                raise DatasetError(lineno, str(exc)) from None
    return records


def subsample(records, fraction: float, selector: str = "random", seed: int = 0,
              scores=None) -> list[TrajectoryRecord]:
    """Keep ``ceil(fraction * N)`` records, returned in their original order.

    ``random`` draws uniformly without replacement; ``by_score`` keeps the
    highest ``scores`` (ties broken by ascending scene_id).
    """
    records = list(records)
    if not records:
        raise ValueError("cannot subsample an empty record list")
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    n = len(records)
    k = min(n, math.ceil(fraction * n - 1e-9))
    if selector == "random":
        keep = np.random.default_rng(seed).choice(n, size=k, replace=False)
    elif selector == "by_score":
        if scores is None or len(scores) != n:
            raise ValueError("by_score needs one score per record")
        scores = np.asarray(scores, dtype=np.float64)
        ranked = sorted(range(n), key=lambda i: (-scores[i], records[i].scene_id))
        keep = ranked[:k]
    else:
        raise ValueError(f"unknown selector {selector!r}")
    return [records[i] for i in sorted(keep)]
