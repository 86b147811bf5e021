"""Versioned JSON checkpoints (model config + flattened float64 parameters)."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .network import ModelConfig, ModelParams

FORMAT = "evtraj-checkpoint"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save(params: ModelParams, path, extra: dict | None = None) -> Path:
    """Write ``params``; JSON float repr makes the round trip bit-exact."""
    path = Path(path)
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "model": params.config.to_dict(),
        "n_params": params.size,
        "params": [float(v) for v in params.flat()],
        "extra": extra or {},
    }
    path.write_text(json.dumps(doc, sort_keys=True))
    return path


def load(path) -> tuple[ModelParams, dict]:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    if doc.get("format") != FORMAT:
        raise CheckpointError(f"{path} is not an {FORMAT} file")
    if doc.get("version") != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {doc.get('version')}")
    try:
        config = ModelConfig(**doc["model"])
        params = ModelParams.from_flat(config, np.asarray(doc["params"], dtype=np.float64))
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"malformed checkpoint {path}: {exc}") from None
    return params, doc.get("extra", {})
