"""Seeded golden scenario shared by the acceptance and regression tests."""

import copy
from functools import lru_cache

import numpy as np

from ilid import config
from ilid.attacks import AttackConfig, run_attack
from ilid.calibration import calibrate
from ilid.detector import evaluate, forecast_metrics, run_online, score_windows
from ilid.scenario import (
    GOLDEN_ATTACKS,
    GOLDEN_CONFIG,
    attack_seed,
    build_forecaster,
    build_plan,
    load_dataset,
)

METHODS = ("fgsm", "bim", "pgd", "dga")


def golden_config(**threshold):
    raw = copy.deepcopy(GOLDEN_CONFIG)
    raw["threshold"].update(threshold)
    return config.resolve(raw)


@lru_cache(maxsize=None)
def golden_run():
    cfg = golden_config()
    data = load_dataset(cfg)
    spec, plan = build_forecaster(cfg), build_plan(cfg)
    tau = cfg["dataset"]["tau"]
    n_cal = len(data.calibration)
    ids = list(range(n_cal, n_cal + len(data.online)))

    cal_scores = [s for s, _ in score_windows(data.calibration, spec, plan)]
    clean_mse = [forecast_metrics(spec.model.forecast(w.context, tau), w.truth)["mse"] for w in data.online]
    attacks = {}
    for method in METHODS:
        results = []
        for wid, w in zip(ids, data.online):
            acfg = AttackConfig(**{**GOLDEN_ATTACKS[method], "seed": attack_seed(cfg["seed"], 0, wid)})
            results.append(run_attack(w, spec, acfg))
        attacks[method] = {
            "results": results,
            "final_loss": np.array([r.final_loss for r in results]),
            "mse": [forecast_metrics(spec.model.forecast(r.perturbed_context, tau), w.truth)["mse"]
                    for r, w in zip(results, data.online)],
        }

    clean = list(zip(ids, data.online))
    adv = [(wid, w.with_context(r.perturbed_context))
           for wid, w, r in zip(ids, data.online, attacks["pgd"]["results"])]
    detection = {}
    for dynamic in (False, True):
        model = calibrate(cal_scores, 0.01, "order_statistic", dynamic, plan=cfg["subsample"],
                          metric="pearson", sub_horizon=tau)
        cv, av, _ = run_online(clean, adv, model, spec, plan)
        detection[dynamic] = {"model": model, "clean": cv, "adv": av, "report": evaluate(cv, av)}
    return {
        "cfg": cfg, "data": data, "spec": spec, "plan": plan,
        "cal_scores": cal_scores, "clean_mse": clean_mse, "attacks": attacks, "detection": detection,
    }
