"""Seeded synthetic benchmark and the dataset/forecaster/plan wiring shared by the CLI."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ilid.forecasters import ForecasterSpec
from ilid.subsample import plan_from_descriptor
from ilid.timeseries import (
    NormStats,
    TimeSeries,
    fit_norm_stats,
    load_csv,
    make_windows,
    znormalize,
)

GOLDEN_CONFIG = {
    "dataset": {
        "synthetic": {"n_windows": 200, "period": 24, "amplitude": 1.0, "level": 0.0,
                      "noise": 0.05, "seed": 0},
        "T": 96,
        "tau": 12,
        "normalize": True,
    },
    "forecaster": {"kind": "random_feature",
                   "params": {"seed": 7, "p": 12, "k": 64, "input_scale": 3.0,
                              "output_scale": 0.3, "season": 24}},
    "subsample": {"kind": "stride", "stride": 2, "offsets": [0, 1]},
    "similarity": {"metric": "pearson"},
    "threshold": {"estimator": "order_statistic", "preset_frr": 0.01, "dynamic": False},
    "attack": {"method": "pgd", "epsilon": 0.2, "steps": 40, "step_size": 0.025},
    "split": {"calibration_fraction": 0.5},
    "seed": 0,
}

# per-method schedules used for the efficacy comparison on the golden scenario
GOLDEN_ATTACKS = {
    "fgsm": {"method": "fgsm", "epsilon": 0.2},
    "bim": {"method": "bim", "epsilon": 0.2, "steps": 20},
    "pgd": {"method": "pgd", "epsilon": 0.2, "steps": 40, "step_size": 0.025},
    "dga": {"method": "dga", "epsilon": 0.2, "steps": 10, "dga_directions": 16, "dga_delta": 0.01},
}


def synthetic_series(length: int, period: float = 24, amplitude: float = 1.0, level: float = 0.0,
                     noise: float = 0.05, seed: int = 0, name: str = "synthetic") -> TimeSeries:
    """``level + amplitude * sin(2 pi t / period) + N(0, noise**2)``."""
    t = np.arange(length)
    rng = np.random.default_rng(seed)
    x = level + amplitude * np.sin(2 * np.pi * t / period) + noise * rng.standard_normal(length)
    return TimeSeries(name, x, "1h")


@dataclass
class Dataset:
    calibration: list
    online: list
    norm: NormStats | None


def load_dataset(cfg: dict) -> Dataset:
    """Window the configured series and split it; z-score with calibration-only stats."""
    ds = cfg["dataset"]
    T, tau, step = int(ds["T"]), int(ds["tau"]), int(ds["step"])
    if ds["synthetic"] is not None:
        syn = dict(ds["synthetic"])
        n = int(syn.pop("n_windows"))
        series = synthetic_series((n - 1) * step + T + tau, **syn)
    else:
        series = load_csv(ds["csv"], ds["column"], ds.get("interval", ""))
    windows = make_windows(series, T, tau, step)
    n_cal = int(len(windows) * float(cfg["split"]["calibration_fraction"]))
    if n_cal < 2 or n_cal >= len(windows):
        raise ValueError(
            f"{len(windows)} windows cannot be split into >= 2 calibration and >= 1 online windows"
        )
    norm = None
    if ds["normalize"]:
        last = windows[n_cal - 1]
        norm = fit_norm_stats(series.values[:last.origin_index + T + tau])
        windows = make_windows(znormalize(series, norm), T, tau, step)
    return Dataset(windows[:n_cal], windows[n_cal:], norm)


def build_forecaster(cfg: dict) -> ForecasterSpec:
    return ForecasterSpec.from_dict(cfg["forecaster"])


def build_plan(cfg: dict):
    return plan_from_descriptor(int(cfg["dataset"]["T"]), cfg["subsample"])


def attack_seed(run_seed: int, attack_seed: int, window_id: int) -> int:
    """Per-window attack seed, independent of the defender's plan seed."""
    return int(np.random.SeedSequence([run_seed, attack_seed, window_id]).generate_state(1)[0])
