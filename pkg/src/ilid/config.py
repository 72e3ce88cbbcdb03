"""Run configuration: JSON in, validated and fully resolved dict out."""

from __future__ import annotations

import copy
import json
import os
from pathlib import Path

from ilid.attacks import AttackConfig
from ilid.calibration import ESTIMATORS
from ilid.forecasters import ForecasterSpec
from ilid.similarity import METRICS

ENDPOINT_ENV = "ILID_FORECAST_ENDPOINT"

DEFAULTS = {
    "dataset": {
        "csv": None,
        "column": None,
        "interval": "",
        "synthetic": None,
        "T": 96,
        "tau": 12,
        "step": None,
        "normalize": True,
    },
    "forecaster": {"kind": "random_feature", "params": {}},
    "subsample": {"kind": "stride", "stride": 2, "offsets": [0, 1]},
    "similarity": {"metric": "pearson", "subset": None, "sub_horizon": None},
    "threshold": {"estimator": "order_statistic", "preset_frr": 0.01, "dynamic": False,
                  "buffer_size": None},
    "attack": {"method": "pgd"},
    "split": {"calibration_fraction": 0.5},
    "report": {"bins": 20},
    "seed": 0,
}


class ConfigError(ValueError):
    pass


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict) and out[key]:
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def resolve(raw: dict, seed: int | None = None, base_dir=None) -> dict:
    """Fill defaults, apply overrides and validate every section."""
    unknown = set(raw) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    cfg = _merge(DEFAULTS, raw)
    if seed is not None:
        cfg["seed"] = int(seed)
    ds = cfg["dataset"]
    if (ds["csv"] is None) == (ds["synthetic"] is None):
        raise ConfigError("dataset needs exactly one of 'csv' or 'synthetic'")
    if ds["csv"] is not None:
        if not ds["column"]:
            raise ConfigError("dataset.column is required with dataset.csv")
        path = Path(ds["csv"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        ds["csv"] = str(path)
    T, tau = int(ds["T"]), int(ds["tau"])
    if not T >= tau >= 1:
        raise ConfigError(f"dataset needs T >= tau >= 1, got T={T}, tau={tau}")
    if ds["step"] is None:
        ds["step"] = T + tau

    fc = cfg["forecaster"]
    if fc.get("kind") == "remote" and os.environ.get(ENDPOINT_ENV):
        fc["params"]["endpoint"] = os.environ[ENDPOINT_ENV]
    try:
        ForecasterSpec.from_dict(fc)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid forecaster: {exc}") from exc

    sim = cfg["similarity"]
    if sim["metric"] not in METRICS:
        raise ConfigError(f"similarity.metric must be one of {METRICS}")
    if sim["sub_horizon"] is None:
        sim["sub_horizon"] = tau

    th = cfg["threshold"]
    if th["estimator"] not in ESTIMATORS:
        raise ConfigError(f"threshold.estimator must be one of {ESTIMATORS}")
    if not 0.0 <= float(th["preset_frr"]) < 1.0:
        raise ConfigError("threshold.preset_frr must be in [0, 1)")

    frac = float(cfg["split"]["calibration_fraction"])
    if not 0.0 < frac < 1.0:
        raise ConfigError("split.calibration_fraction must be in (0, 1)")
    try:
        AttackConfig(**cfg["attack"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid attack: {exc}") from exc
    return cfg


def load(path, seed: int | None = None) -> dict:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return resolve(raw, seed, base_dir=path.parent)
