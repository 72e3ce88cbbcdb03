"""Command-line driver: calibrate -> attack -> detect -> evaluate -> report.

Exit codes: 0 success, 2 usage/config error, 3 pipeline/runtime error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from ilid import config as config_mod
from ilid import report
from ilid.attacks import AttackConfig, run_attack
from ilid.calibration import ThresholdModel, calibrate
from ilid.detector import evaluate, forecast_metrics, full_forecast_agreement, run_online, score_windows
from ilid.forecasters import CapabilityError
from ilid.scenario import attack_seed, build_forecaster, build_plan, load_dataset
from ilid.timeseries import SampleWindow

log = logging.getLogger("ilid")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3


class ModelMismatchError(ValueError):
    pass


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _model_path(args, out):
    return Path(args.model) if args.model else out / "model.json"


def _settings(cfg):
    sim = cfg["similarity"]
    subset = sim["subset"]
    return dict(metric=sim["metric"], subset=None if subset is None else tuple(subset),
                sub_horizon=int(sim["sub_horizon"]))


def _echo(out, cfg):
    report.write_json(out / "run_config.json", cfg)


def cmd_calibrate(args) -> int:
    cfg = config_mod.load(args.config, args.seed)
    out = _out_dir(args)
    data = load_dataset(cfg)
    spec, plan = build_forecaster(cfg), build_plan(cfg)
    settings = _settings(cfg)
    scored = score_windows(data.calibration, spec, plan, jobs=args.jobs, **settings)
    scores = np.array([s for s, _ in scored])
    th = cfg["threshold"]
    model = calibrate(scores, float(th["preset_frr"]), th["estimator"], bool(th["dynamic"]),
                      th["buffer_size"], plan=cfg["subsample"],
                      norm=None if data.norm is None else {"mean": data.norm.mean, "std": data.norm.std},
                      **settings)
    n_cal = len(data.calibration)
    report.write_json(_model_path(args, out), {**model.to_dict(), "config": cfg})
    report.write_csv(out / "calibration_scores.csv", ["window_id", "score"],
                     [(wid, float(s)) for wid, s in enumerate(scores)])
    rows = []
    for wid, (_, ps) in enumerate(scored):
        rows.extend((wid, i, j, s) for (i, j), s in zip(ps.pairs, ps.scores))
    report.write_csv(out / "calibration_similarities.csv", ["window_id", "pair_i", "pair_j", "score"], rows)
    _echo(out, cfg)
    flagged = int(np.sum(scores < model.threshold))
    print(f"calibration samples N = {n_cal}")
    print(f"estimator = {model.estimator}, preset FRR = {model.preset_frr:g}")
    print(f"threshold = {model.threshold:.6f}")
    print(f"offline flagged = {flagged}/{n_cal} ({100 * flagged / n_cal:.1f}% offline FRR)")
    return EXIT_OK


def _attack_one(spec, acfg, run_seed, wid, window):
    cfg = AttackConfig(**{**acfg, "seed": attack_seed(run_seed, int(acfg.get("seed", 0)), wid)})
    return run_attack(window, spec, cfg)


def _mean_metrics(preds, truths):
    ms = [forecast_metrics(p, t) for p, t in zip(preds, truths)]
    return {k: float(np.mean([m[k] for m in ms])) for k in ("mae", "mse", "r2")}


def cmd_attack(args) -> int:
    cfg = config_mod.load(args.config, args.seed)
    if args.method:
        cfg["attack"]["method"] = args.method
        config_mod.resolve(cfg)
    out = _out_dir(args)
    data = load_dataset(cfg)
    spec = build_forecaster(cfg)
    acfg = dict(cfg["attack"])
    if spec.kind == "remote":
        acfg["record_losses"] = False
    if acfg["method"] in ("fgsm", "bim", "pgd") and not spec.differentiable:
        raise CapabilityError(
            f"attack {acfg['method']!r} is white-box but forecaster {spec.kind!r} exposes no gradients"
        )
    n_cal = len(data.calibration)
    ids = list(range(n_cal, n_cal + len(data.online)))

    def one(item):
        wid, w = item
        return _attack_one(spec, acfg, cfg["seed"], wid, w)

    items = list(zip(ids, data.online))
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(one, items))
    else:
        results = [one(it) for it in items]

    tau = int(cfg["dataset"]["tau"])
    truths = [w.truth for w in data.online]
    clean_pred = [spec.model.forecast(w.context, tau) for w in data.online]
    adv_pred = [spec.model.forecast(r.perturbed_context, tau) for r in results]
    clean_m, adv_m = _mean_metrics(clean_pred, truths), _mean_metrics(adv_pred, truths)
    eff = {"method": acfg["method"], **{f"clean_{k}": v for k, v in clean_m.items()},
           **{f"adv_{k}": v for k, v in adv_m.items()}}

    windows = []
    for wid, w, r in zip(ids, data.online, results):
        windows += [(wid, "clean", w.context), (wid, "truth", w.truth), (wid, "adversarial", r.perturbed_context)]
    report.write_windows(out / "windows.csv", windows)
    report.write_attacks(out / "attacks.csv",
                         [(wid, acfg["method"], float(acfg.get("epsilon", 0.2)), r) for wid, r in zip(ids, results)])
    report.write_csv(out / "efficacy.csv", list(eff), [list(eff.values())])
    _echo(out, cfg)
    print(report.efficacy_table([eff]))
    if acfg["method"] != "none" and adv_m["mse"] <= clean_m["mse"]:
        log.warning("attack did not increase MSE (clean %.4f, adversarial %.4f)", clean_m["mse"], adv_m["mse"])
    return EXIT_OK


def _check_compat(model: ThresholdModel, cfg):
    settings = _settings(cfg)
    problems = []
    if model.plan != cfg["subsample"]:
        problems.append(f"plan {model.plan} != config {cfg['subsample']}")
    if model.metric != settings["metric"]:
        problems.append(f"metric {model.metric!r} != config {settings['metric']!r}")
    if model.subset != settings["subset"]:
        problems.append(f"subset {model.subset} != config {settings['subset']}")
    if model.sub_horizon != settings["sub_horizon"]:
        problems.append(f"sub_horizon {model.sub_horizon} != config {settings['sub_horizon']}")
    if problems:
        raise ModelMismatchError("model was calibrated with different settings: " + "; ".join(problems))


def _load_windows(args, out):
    path = Path(args.windows) if args.windows else out / "windows.csv"
    if not path.is_file():
        raise FileNotFoundError(f"windows file not found: {path} (run 'attack' first)")
    roles = report.read_windows(path)
    truth = roles.get("truth", {})
    clean = [(wid, SampleWindow(ctx, truth.get(wid))) for wid, ctx in sorted(roles.get("clean", {}).items())]
    adv = [(wid, SampleWindow(ctx, truth.get(wid))) for wid, ctx in sorted(roles.get("adversarial", {}).items())]
    return clean, adv


def _load_model(args, out):
    path = _model_path(args, out)
    if not path.is_file():
        raise FileNotFoundError(f"model file not found: {path} (run 'calibrate' first)")
    return ThresholdModel.load(path)


def cmd_detect(args) -> int:
    cfg = config_mod.load(args.config, args.seed)
    out = _out_dir(args)
    model = _load_model(args, out)
    _check_compat(model, cfg)
    clean, adv = _load_windows(args, out)
    spec, plan = build_forecaster(cfg), build_plan(cfg)
    clean_v, adv_v, final = run_online(clean, adv, model, spec, plan, jobs=args.jobs)
    report.write_verdicts(out / "verdicts_clean.csv", clean_v)
    report.write_verdicts(out / "verdicts_adversarial.csv", adv_v)
    report.write_similarities(out / "similarities_clean.csv", clean_v)
    report.write_similarities(out / "similarities_adversarial.csv", adv_v)
    for v in clean_v + adv_v:
        for event in v.events:
            log.warning("window %d: %s", v.window_id, event)
    _echo(out, cfg)
    print(f"clean: {sum(v.adversarial for v in clean_v)}/{len(clean_v)} flagged")
    print(f"adversarial: {sum(not v.adversarial for v in adv_v)}/{len(adv_v)} passed")
    if model.dynamic:
        print(f"final dynamic threshold = {final.threshold:.6f}")
    return EXIT_OK


def _read_verdicts(out):
    paths = [out / "verdicts_clean.csv", out / "verdicts_adversarial.csv"]
    for p in paths:
        if not p.is_file():
            raise FileNotFoundError(f"verdicts file not found: {p} (run 'detect' first)")
    return report.read_verdicts(paths[0]), report.read_verdicts(paths[1])


def cmd_evaluate(args) -> int:
    cfg = config_mod.load(args.config, args.seed)
    out = _out_dir(args)
    model = _load_model(args, out)
    _check_compat(model, cfg)
    clean_v, adv_v = _read_verdicts(out)
    ev = evaluate(clean_v, adv_v)
    hist = report.histogram_rows([v.score for v in clean_v], [v.score for v in adv_v],
                                 model.threshold, int(cfg["report"]["bins"]))
    report.write_histogram(out / "histogram.csv", hist)

    # forecasting effect of every adversarial window that passed as benign
    clean, adv = _load_windows(args, out)
    spec = build_forecaster(cfg)
    tau = int(cfg["dataset"]["tau"])
    clean_by_id, adv_by_id = dict(clean), dict(adv)
    evaded = []
    for v in adv_v:
        if v.adversarial:
            continue
        w_c, w_a = clean_by_id[v.window_id], adv_by_id[v.window_id]
        mc = forecast_metrics(spec.model.forecast(w_c.context, tau), w_c.truth)
        ma = forecast_metrics(spec.model.forecast(w_a.context, tau), w_a.truth)
        no_effect = ma["mae"] <= mc["mae"] and ma["mse"] <= mc["mse"]
        evaded.append((v.window_id, v.score, mc["mae"], mc["mse"], ma["mae"], ma["mse"], int(no_effect)))
    report.write_csv(out / "evaded.csv", ["window_id", "score", "clean_mae", "clean_mse",
                                          "adv_mae", "adv_mse", "no_effect"], evaded)

    # diagnostic only: agreement of subsample forecasts with the full-context forecast
    plan, settings = build_plan(cfg), _settings(cfg)
    agreement = [(wid, role, full_forecast_agreement(w, spec, plan, settings["metric"], settings["sub_horizon"]))
                 for role, ws in (("clean", clean), ("adversarial", adv)) for wid, w in ws]
    report.write_csv(out / "full_agreement.csv", ["window_id", "role", "score"], agreement)

    result = {
        **ev.to_dict(),
        "threshold": {"estimator": model.estimator, "preset_frr": model.preset_frr,
                      "offline_threshold": model.threshold, "dynamic": model.dynamic},
        "evaded": {"count": len(evaded), "no_effect": sum(e[-1] for e in evaded)},
        "config": cfg,
        "seed": cfg["seed"],
    }
    report.write_json(out / "evaluation.json", result)
    _echo(out, cfg)
    c = ev.counts
    print(f"online FRR = {100 * ev.frr:.1f}% ({c['clean_flagged']}/{c['clean_total']})")
    print(f"online FAR = {100 * ev.far:.1f}% ({c['adversarial_passed']}/{c['adversarial_total']})")
    return EXIT_OK


def cmd_report(args) -> int:
    cfg = config_mod.load(args.config, args.seed)
    out = _out_dir(args)
    model = _load_model(args, out)
    figs = out / "figures"
    figs.mkdir(exist_ok=True)
    bins = int(cfg["report"]["bins"])
    cal_path = out / "calibration_scores.csv"
    if cal_path.is_file():
        cal = [float(r["score"]) for r in report.read_csv(cal_path)]
        offline = report.histogram_rows(cal, [], model.threshold, bins)
        report.write_histogram(out / "offline_histogram.csv", offline)
        report.plot_histogram(figs / "offline.png", offline, "Offline (calibration)")
        print(f"wrote {figs / 'offline.png'}")
    hist_path = out / "histogram.csv"
    if hist_path.is_file():
        rows = [(float(r["bin_left"]), float(r["bin_right"]), int(r["clean_count"]),
                 int(r["adv_count"]), float(r["threshold"])) for r in report.read_csv(hist_path)]
        report.plot_histogram(figs / "online.png", rows, "Online detection")
        print(f"wrote {figs / 'online.png'}")
        clean_v, adv_v = _read_verdicts(out)
        report.plot_threshold_trace(figs / "threshold_trace.png", clean_v, adv_v)
        print(f"wrote {figs / 'threshold_trace.png'}")
    eff_path = out / "efficacy.csv"
    if eff_path.is_file():
        rows = [{k: (v if k == "method" else float(v)) for k, v in r.items()} for r in report.read_csv(eff_path)]
        print(report.efficacy_table(rows))
    ev_path = out / "evaluation.json"
    if ev_path.is_file():
        ev = report.read_json(ev_path)
        print(f"online FRR = {100 * ev['frr']:.1f}%, FAR = {100 * ev['far']:.1f}%")
    return EXIT_OK


def cmd_run(args) -> int:
    for step in (cmd_calibrate, cmd_attack, cmd_detect, cmd_evaluate, cmd_report):
        code = step(args)
        if code:
            return code
    return EXIT_OK


COMMANDS = {
    "calibrate": (cmd_calibrate, "fit the detection threshold on the calibration split"),
    "attack": (cmd_attack, "generate adversarial versions of the online windows"),
    "detect": (cmd_detect, "judge clean and adversarial online windows"),
    "evaluate": (cmd_evaluate, "compute FRR/FAR, histogram data and evaded-sample analysis"),
    "report": (cmd_report, "render figures from the report files"),
    "run": (cmd_run, "calibrate, attack, detect, evaluate and report in one go"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ilid", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="run configuration JSON")
        p.add_argument("--model", help="threshold model JSON (default: <out>/model.json)")
        p.add_argument("--out", default="ilid-out", help="output directory")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--jobs", type=int, default=1, help="parallel windows")
        p.add_argument("--windows", help="windows CSV (default: <out>/windows.csv)")
        if name in ("attack", "run"):
            p.add_argument("--method", choices=["fgsm", "bim", "pgd", "dga", "none"],
                           help="override attack.method")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    if not hasattr(args, "method"):
        args.method = None
    try:
        return COMMANDS[args.command][0](args)
    except (config_mod.ConfigError, ModelMismatchError, CapabilityError, FileNotFoundError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        print(f"error: {exc}", file=sys.stderr)
        log.debug("pipeline failure", exc_info=True)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
