"""Detection thresholds from benign similarity scores at a preset false-rejection rate."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

ESTIMATORS = ("order_statistic", "gaussian")

# Acklam's rational approximation to the standard normal quantile.
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def norm_ppf(p: float) -> float:
    """Inverse standard normal CDF: rational approximation plus one Newton step."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must be in (0, 1), got {p}")
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        x = ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
             / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    elif p <= 1.0 - _P_LOW:
        q = p - 0.5
        r = q * q
        x = ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
             / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0))
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
              / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    pdf = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    return x - (norm_cdf(x) - p) / pdf


def _as_calibration(similarities) -> np.ndarray:
    s = np.asarray(similarities, dtype=float).reshape(-1)
    if s.size < 2:
        raise ValueError("calibration needs at least two benign similarities")
    if not np.all(np.isfinite(s)):
        raise ValueError("calibration similarities must be finite")
    return s


def frr_rank(frr: float, n: int) -> int:
    """``floor(frr * n)``, robust to binary round-off (0.29 * 100 -> 29)."""
    return math.floor(round(frr * n, 9))


def order_statistic_threshold(similarities, frr: float) -> float:
    """The (i+1)-th smallest similarity with ``i = floor(frr * N)``.

    Under the strict ``score < threshold`` rule exactly ``i`` distinct calibration
    values are rejected.
    """
    s = _as_calibration(similarities)
    if not 0.0 <= frr < 1.0:
        raise ValueError(f"preset FRR must be in [0, 1), got {frr}")
    i = frr_rank(frr, s.size)
    if i >= s.size:
        raise ValueError(f"FRR {frr} with N={s.size} rejects every calibration sample")
    return float(np.sort(s)[i])


def gaussian_threshold(similarities, frr: float) -> float:
    """``mean + std * norm_ppf(frr)`` with the sample (ddof=1) standard deviation."""
    s = _as_calibration(similarities)
    std = float(s.std(ddof=1))
    if std == 0.0:
        raise ValueError("benign similarities have zero variance")
    return float(s.mean()) + std * norm_ppf(frr)


def compute_threshold(similarities, frr: float, estimator: str) -> float:
    if estimator == "order_statistic":
        return order_statistic_threshold(similarities, frr)
    if estimator == "gaussian":
        return gaussian_threshold(similarities, frr)
    raise ValueError(f"unknown estimator {estimator!r}; expected one of {ESTIMATORS}")


@dataclass(frozen=True)
class ThresholdModel:
    estimator: str
    preset_frr: float
    threshold: float
    buffer: tuple = ()
    dynamic: bool = False
    # pipeline settings the threshold is only valid for
    metric: str = "pearson"
    plan: dict = field(default_factory=dict)
    subset: tuple | None = None
    sub_horizon: int | None = None
    norm: dict | None = None

    @property
    def capacity(self) -> int:
        return len(self.buffer)

    def is_adversarial(self, score: float) -> bool:
        return score < self.threshold

    def to_dict(self) -> dict:
        return {
            "estimator": self.estimator,
            "preset_frr": self.preset_frr,
            "threshold": self.threshold,
            "buffer": list(self.buffer),
            "dynamic": self.dynamic,
            "metric": self.metric,
            "plan": self.plan,
            "subset": None if self.subset is None else list(self.subset),
            "sub_horizon": self.sub_horizon,
            "norm": self.norm,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ThresholdModel":
        subset = d.get("subset")
        return cls(
            estimator=d["estimator"],
            preset_frr=float(d["preset_frr"]),
            threshold=float(d["threshold"]),
            buffer=tuple(float(v) for v in d.get("buffer", [])),
            dynamic=bool(d.get("dynamic", False)),
            metric=d.get("metric", "pearson"),
            plan=d.get("plan", {}),
            subset=None if subset is None else tuple(subset),
            sub_horizon=d.get("sub_horizon"),
            norm=d.get("norm"),
        )

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "ThresholdModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def calibrate(similarities, frr: float, estimator: str = "order_statistic",
              dynamic: bool = False, buffer_size: int | None = None, **settings) -> ThresholdModel:
    """Fit a ThresholdModel; the buffer keeps the most recent ``buffer_size`` scores."""
    s = _as_calibration(similarities)
    if estimator == "gaussian" and not 0.0 < frr < 1.0:
        raise ValueError("the gaussian estimator needs a preset FRR in (0, 1)")
    if buffer_size is None:
        buffer_size = s.size
    if not 2 <= buffer_size <= s.size:
        raise ValueError(f"buffer size must be in [2, {s.size}], got {buffer_size}")
    buffer = tuple(float(v) for v in s[s.size - buffer_size:])
    threshold = compute_threshold(s if not dynamic else buffer, frr, estimator)
    return ThresholdModel(estimator, float(frr), threshold, buffer, dynamic, **settings)


def dynamic_update(model: ThresholdModel, accepted_similarity: float) -> ThresholdModel:
    """Evict the oldest buffered score, append the new benign one, recompute the threshold."""
    if not model.dynamic:
        raise ValueError("dynamic_update called on a fixed-threshold model")
    if not math.isfinite(accepted_similarity):
        raise ValueError("similarity must be finite")
    if model.is_adversarial(accepted_similarity):
        raise ValueError(
            f"similarity {accepted_similarity} is below the threshold {model.threshold}; "
            "only benign-classified samples may enter the buffer"
        )
    buffer = model.buffer[1:] + (float(accepted_similarity),)
    threshold = compute_threshold(buffer, model.preset_frr, model.estimator)
    return replace(model, buffer=buffer, threshold=threshold)
