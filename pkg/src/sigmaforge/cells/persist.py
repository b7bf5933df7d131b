"""JSON persistence for fitted cells.

The envelope {"model", "variant", "config", "params", "training"} is shared
with the baseline estimators; parameter blocks are stored as flat lists with
shapes.  Floats survive the round trip bit-exactly (repr serialization).
"""

from __future__ import annotations

import json
from dataclasses import asdict
from math import prod
from pathlib import Path

import numpy as np

from ..errors import InvalidInputError
from .config import SigmaCellConfig, SigmaCellModel, param_blocks

__all__ = ["model_to_dict", "model_from_dict", "save_model", "load_model"]

MODEL_KIND = "sigma-cell"


def model_to_dict(model: SigmaCellModel) -> dict:
    cfg = model.config
    blocks = {}
    offset = 0
    for name, shape in param_blocks(cfg.variant, cfg.hidden, cfg.res_hidden):
        size = prod(shape)
        blocks[name] = {
            "shape": list(shape),
            "data": model.params[offset : offset + size].tolist(),
        }
        offset += size
    return {
        "model": MODEL_KIND,
        "variant": cfg.variant,
        "config": asdict(cfg),
        "params": blocks,
        "seed": cfg.seed,
        "training": dict(model.training),
    }


def model_from_dict(doc: dict) -> SigmaCellModel:
    if doc.get("model") != MODEL_KIND:
        raise InvalidInputError(f"not a {MODEL_KIND} document: model={doc.get('model')!r}")
    cfg = SigmaCellConfig(**doc["config"])
    parts = []
    for name, shape in param_blocks(cfg.variant, cfg.hidden, cfg.res_hidden):
        block = doc["params"][name]
        if tuple(block["shape"]) != shape:
            raise InvalidInputError(f"block {name!r} has shape {block['shape']}, expected {shape}")
        parts.append(np.asarray(block["data"], dtype=float).reshape(-1))
    return SigmaCellModel(cfg, np.concatenate(parts), dict(doc.get("training", {})))


def save_model(model: SigmaCellModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n", encoding="utf-8")


def load_model(path) -> SigmaCellModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
