"""JSON envelopes for fitted baselines, mirroring the cell model format."""

from __future__ import annotations

import json
from pathlib import Path

from ..errors import InvalidInputError
from .garch import GarchParams
from .har import HarParams
from .logsv import SvParams

__all__ = ["baseline_to_dict", "baseline_from_dict", "save_baseline", "load_baseline"]


def baseline_to_dict(params) -> dict:
    if isinstance(params, GarchParams):
        return {
            "model": "garch-family",
            "variant": params.variant,
            "params": {
                "omega": params.omega,
                "alpha": params.alpha,
                "beta": params.beta,
                "gamma": params.gamma,
            },
        }
    if isinstance(params, HarParams):
        return {
            "model": "har",
            "variant": "har",
            "params": {
                "c": params.c,
                "beta_d": params.beta_d,
                "beta_w": params.beta_w,
                "beta_m": params.beta_m,
            },
        }
    if isinstance(params, SvParams):
        return {
            "model": "log-sv",
            "variant": "log-sv",
            "params": {
                "mu_h": params.mu_h,
                "phi_h": params.phi_h,
                "sigma_eta": params.sigma_eta,
            },
        }
    raise InvalidInputError(f"not a baseline parameter record: {type(params).__name__}")


def baseline_from_dict(doc: dict):
    kind = doc.get("model")
    p = doc.get("params", {})
    if kind == "garch-family":
        return GarchParams(doc["variant"], p["omega"], p["alpha"], p["beta"], p["gamma"])
    if kind == "har":
        return HarParams(p["c"], p["beta_d"], p["beta_w"], p["beta_m"])
    if kind == "log-sv":
        return SvParams(p["mu_h"], p["phi_h"], p["sigma_eta"])
    raise InvalidInputError(f"unknown baseline document: model={kind!r}")


def save_baseline(params, path) -> None:
    Path(path).write_text(json.dumps(baseline_to_dict(params), indent=2) + "\n", encoding="utf-8")


def load_baseline(path):
    return baseline_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
