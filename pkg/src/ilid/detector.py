"""Online detection: subsample, forecast every variant, score agreement, threshold."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ilid.calibration import ThresholdModel, dynamic_update
from ilid.forecasters import as_model
from ilid.similarity import PairwiseScores, aggregate, pairwise_scores
from ilid.subsample import SubsamplePlan, apply_plan, plan_from_descriptor

log = logging.getLogger(__name__)


@dataclass
class Verdict:
    window_id: int
    score: float
    threshold: float
    adversarial: bool
    pair_scores: PairwiseScores | None = None
    events: list = field(default_factory=list)


@dataclass
class EvaluationReport:
    frr: float
    far: float
    counts: dict
    rows: list

    def to_dict(self) -> dict:
        return {"frr": self.frr, "far": self.far, "counts": dict(self.counts)}


def score_window_detail(window, forecaster, plan: SubsamplePlan, metric: str = "pearson",
                        subset=None, sub_horizon: int | None = None):
    """Return ``(score, PairwiseScores)``; undefined Pearson pairs score 0.0."""
    model = as_model(forecaster)
    ctx = np.asarray(getattr(window, "context", window), dtype=float)
    if plan.T != ctx.size:
        raise ValueError(f"plan built for T={plan.T} but the window context has length {ctx.size}")
    if sub_horizon is None:
        truth = getattr(window, "truth", None)
        if truth is None:
            raise ValueError("sub_horizon is required when the window carries no truth horizon")
        sub_horizon = truth.size
    if metric == "pearson" and sub_horizon < 2:
        raise ValueError("pearson scoring needs sub_horizon >= 2")
    if plan.length < model.min_context:
        raise ValueError(
            f"subsample length {plan.length} is below the forecaster's min_context {model.min_context}"
        )
    forecasts = []
    for i, variant in enumerate(apply_plan(ctx, plan)):
        try:
            forecasts.append(model.forecast(variant, sub_horizon))
        except Exception as exc:
            raise RuntimeError(f"forecasting subsample {i} failed: {exc}") from exc
    scores = pairwise_scores(forecasts, metric, undefined="zero")
    if scores.undefined_pairs:
        log.warning("undefined correlation for pairs %s scored as 0.0", scores.undefined_pairs)
    return aggregate(scores, subset), scores


def score_window(window, forecaster, plan: SubsamplePlan, metric: str = "pearson",
                 subset=None, sub_horizon: int | None = None) -> float:
    return score_window_detail(window, forecaster, plan, metric, subset, sub_horizon)[0]


def full_forecast_agreement(window, forecaster, plan: SubsamplePlan, metric: str = "pearson",
                            sub_horizon: int | None = None) -> float:
    """Mean similarity of each subsample forecast to the full-context forecast.

    Report-only diagnostic; detection scores use subsample pairs alone.
    """
    model = as_model(forecaster)
    ctx = np.asarray(getattr(window, "context", window), dtype=float)
    if sub_horizon is None:
        sub_horizon = window.truth.size
    full = model.forecast(ctx, sub_horizon)
    subs = [model.forecast(v, sub_horizon) for v in apply_plan(ctx, plan)]
    return float(np.mean([pairwise_scores([full, f], metric, undefined="zero").scores[0] for f in subs]))


def model_plan(model: ThresholdModel, T: int) -> SubsamplePlan:
    return plan_from_descriptor(T, model.plan)


def _verdict(window_id, score, pairs, threshold):
    events = [f"undefined correlation pair {p} scored 0.0" for p in pairs.undefined_pairs]
    return Verdict(window_id, score, threshold, score < threshold, pairs, events)


def detect(window, model: ThresholdModel, forecaster, plan: SubsamplePlan | None = None,
           window_id: int = 0):
    """Judge one window; returns ``(verdict, model)``.

    In dynamic mode a benign verdict is recorded first and only then folded into
    the returned model's buffer, so no sample shapes its own threshold.
    """
    if plan is None:
        plan = model_plan(model, np.asarray(getattr(window, "context", window)).size)
    score, pairs = score_window_detail(window, forecaster, plan, model.metric,
                                       model.subset, model.sub_horizon)
    verdict = _verdict(window_id, score, pairs, model.threshold)
    if model.dynamic and not verdict.adversarial:
        model = dynamic_update(model, score)
    return verdict, model


def verdict_from_score(window_id: int, score: float, model: ThresholdModel) -> Verdict:
    return Verdict(window_id, score, model.threshold, score < model.threshold)


def score_windows(windows, forecaster, plan, metric="pearson", subset=None,
                  sub_horizon=None, jobs: int = 1):
    """Score many windows, optionally in parallel; output order follows input order."""
    def one(w):
        return score_window_detail(w, forecaster, plan, metric, subset, sub_horizon)

    if jobs <= 1:
        return [one(w) for w in windows]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, windows))


def run_online(clean, adversarial, model: ThresholdModel, forecaster, plan=None, jobs: int = 1):
    """Judge a clean and an adversarial population.

    Windows are given as ``(window_id, window)`` pairs. With a fixed threshold
    windows are scored in parallel. With a dynamic threshold the stream is
    processed in order, interleaving clean and adversarial by position
    (clean 0, adversarial 0, clean 1, ...), which forces a single updater.
    Returns ``(clean_verdicts, adversarial_verdicts, final_model)``.
    """
    clean = list(clean)
    adversarial = list(adversarial)
    if plan is None:
        sample = clean[0][1] if clean else adversarial[0][1]
        plan = model_plan(model, np.asarray(sample.context).size)
    settings = dict(metric=model.metric, subset=model.subset, sub_horizon=model.sub_horizon)

    if not model.dynamic:
        scored = score_windows([w for _, w in clean + adversarial], forecaster, plan,
                               jobs=jobs, **settings)
        verdicts = [_verdict(wid, s, p, model.threshold)
                    for (wid, _), (s, p) in zip(clean + adversarial, scored)]
        return verdicts[:len(clean)], verdicts[len(clean):], model

    stream = []
    for n in range(max(len(clean), len(adversarial))):
        if n < len(clean):
            stream.append(("clean", clean[n]))
        if n < len(adversarial):
            stream.append(("adversarial", adversarial[n]))
    out = {"clean": [], "adversarial": []}
    for role, (wid, w) in stream:
        verdict, model = detect(w, model, forecaster, plan, wid)
        out[role].append(verdict)
    return out["clean"], out["adversarial"], model


def evaluate(clean_verdicts, adv_verdicts) -> EvaluationReport:
    """FRR = flagged clean / clean, FAR = passed adversarial / adversarial."""
    clean_verdicts = list(clean_verdicts)
    adv_verdicts = list(adv_verdicts)
    if not clean_verdicts or not adv_verdicts:
        raise ValueError("evaluation needs non-empty clean and adversarial verdict lists")
    clean_flagged = sum(v.adversarial for v in clean_verdicts)
    adv_passed = sum(not v.adversarial for v in adv_verdicts)
    counts = {
        "clean_total": len(clean_verdicts),
        "clean_flagged": clean_flagged,
        "adversarial_total": len(adv_verdicts),
        "adversarial_passed": adv_passed,
    }
    rows = [("clean", v.window_id, v.score, v.threshold, v.adversarial) for v in clean_verdicts]
    rows += [("adversarial", v.window_id, v.score, v.threshold, v.adversarial) for v in adv_verdicts]
    return EvaluationReport(clean_flagged / len(clean_verdicts), adv_passed / len(adv_verdicts),
                            counts, rows)


def forecast_metrics(pred, truth) -> dict:
    pred = np.asarray(pred, dtype=float).reshape(-1)
    truth = np.asarray(truth, dtype=float).reshape(-1)
    if pred.size != truth.size:
        raise ValueError(f"prediction length {pred.size} != truth length {truth.size}")
    if truth.size < 2:
        raise ValueError("metrics need at least two points")
    err = pred - truth
    ss_tot = float(np.sum((truth - truth.mean()) ** 2))
    if ss_tot == 0.0:
        raise ValueError("R^2 is undefined for a constant truth")
    return {
        "mae": float(np.mean(np.abs(err))),
        "mse": float(np.mean(err ** 2)),
        "r2": 1.0 - float(np.sum(err ** 2)) / ss_tot,
    }
