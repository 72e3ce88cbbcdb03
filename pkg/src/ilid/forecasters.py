"""Variable-length forecasting interface and reference forecasters.

Every forecaster maps a context of any length ``L >= min_context`` to a
``horizon``-long prediction. The two autoregressive reference models
(``fixed_linear`` and ``random_feature``) predict recursively, feeding each
prediction back as the newest lag, and expose the analytic gradient of the
targeted loss ``mean((f(x) - target)**2)`` with respect to the context.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import requests

FORECASTER_KINDS = ("seasonal_naive", "fixed_linear", "random_feature", "remote")


class CapabilityError(TypeError):
    """The forecaster does not support the requested operation (e.g. gradients)."""


class RemoteForecastError(RuntimeError):
    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status


@dataclass
class ForecasterSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in FORECASTER_KINDS:
            raise ValueError(f"unknown forecaster kind {self.kind!r}; expected one of {FORECASTER_KINDS}")
        self.params = dict(self.params)
        if self.min_context < 1:
            raise ValueError("min_context must be >= 1")

    @cached_property
    def model(self):
        return _build(self.kind, self.params)

    @property
    def min_context(self) -> int:
        return self.model.min_context

    @property
    def differentiable(self) -> bool:
        return hasattr(self.model, "loss_gradient")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "ForecasterSpec":
        return cls(d["kind"], d.get("params", {}))


def _build(kind, params):
    if kind == "seasonal_naive":
        return SeasonalNaive(int(params.get("m", 1)))
    if kind == "fixed_linear":
        return FixedLinear(params["weights"])
    if kind == "random_feature":
        return RandomFeature(
            seed=int(params.get("seed", 0)),
            p=int(params.get("p", 8)),
            k=int(params.get("k", 32)),
            input_scale=float(params.get("input_scale", 1.0)),
            season=int(params.get("season", 0)),
            output_scale=float(params.get("output_scale", 1.0)),
        )
    return RemoteForecaster(
        endpoint=params["endpoint"],
        model=params.get("model", ""),
        timeout=float(params.get("timeout", 30.0)),
        retries=int(params.get("retries", 0)),
        backoff=float(params.get("backoff", 0.5)),
        max_in_flight=int(params.get("max_in_flight", 4)),
        min_context=int(params.get("min_context", 1)),
    )


def _check_context(context, min_context):
    x = np.asarray(context, dtype=float).reshape(-1)
    if x.size < min_context:
        raise ValueError(f"context of length {x.size} is shorter than min_context={min_context}")
    if not np.all(np.isfinite(x)):
        raise ValueError("context contains non-finite values")
    return x


def _check_horizon(horizon):
    if int(horizon) != horizon or horizon < 1:
        raise ValueError(f"horizon must be a positive integer, got {horizon}")
    return int(horizon)


class SeasonalNaive:
    """Repeat the last ``m`` observations."""

    def __init__(self, m: int):
        if m < 1:
            raise ValueError("seasonal period m must be >= 1")
        self.m = m
        self.min_context = m

    def forecast(self, context, horizon):
        x = _check_context(context, self.min_context)
        horizon = _check_horizon(horizon)
        L = x.size
        idx = L - self.m + (np.arange(horizon) % self.m)
        return x[idx].copy()


class _RecursiveAR:
    """Shared recursion and reverse-mode gradient for one-step-ahead models.

    Subclasses define ``window`` (number of lags read per step), ``_step(lags)``
    and ``_step_grad(lags)``; lags are ordered oldest to newest.
    """

    window: int

    def forecast(self, context, horizon):
        x = _check_context(context, self.min_context)
        horizon = _check_horizon(horizon)
        seq = np.concatenate([x, np.zeros(horizon)])
        L, q = x.size, self.window
        for h in range(horizon):
            seq[L + h] = self._step(seq[L + h - q:L + h])
        return seq[L:].copy()

    def loss(self, context, horizon, target=0.0):
        y = self.forecast(context, horizon)
        return float(np.mean((y - target) ** 2))

    def loss_gradient(self, context, horizon, target=0.0):
        x = _check_context(context, self.min_context)
        horizon = _check_horizon(horizon)
        L, q = x.size, self.window
        seq = np.concatenate([x, self.forecast(x, horizon)])
        g = np.zeros_like(seq)
        g[L:] = 2.0 * (seq[L:] - target) / horizon
        for h in range(horizon - 1, -1, -1):
            if g[L + h] != 0.0:
                g[L + h - q:L + h] += g[L + h] * self._step_grad(seq[L + h - q:L + h])
        return g[:L]


class FixedLinear(_RecursiveAR):
    """``y = sum_k w[k] * x[t+1-k]``: ``weights[0]`` multiplies the most recent value."""

    def __init__(self, weights):
        w = np.asarray(weights, dtype=float).reshape(-1)
        if w.size < 1 or not np.all(np.isfinite(w)):
            raise ValueError("fixed_linear weights must be a non-empty finite vector")
        self.weights = w
        self._coef = w[::-1].copy()
        self.window = w.size
        self.min_context = w.size

    def _step(self, lags):
        return float(self._coef @ lags)

    def _step_grad(self, lags):
        return self._coef


class RandomFeature(_RecursiveAR):
    """Fixed random tanh features over the last ``p`` lags.

    ``y = v . tanh(W lags + b)``, plus ``x[t+1-season]`` when ``season > 0``.
    ``W ~ N(0, input_scale**2 / p)``, ``b ~ U(-1, 1)``, ``v ~ N(0, 1 / k)``,
    all drawn once from ``seed``.
    """

    def __init__(self, seed=0, p=8, k=32, input_scale=1.0, season=0, output_scale=1.0):
        if p < 1 or k < 1 or season < 0:
            raise ValueError("random_feature needs p >= 1, k >= 1, season >= 0")
        rng = np.random.default_rng(seed)
        self.p, self.k, self.season = p, k, season
        self.W = rng.normal(0.0, input_scale / np.sqrt(p), size=(k, p))
        self.b = rng.uniform(-1.0, 1.0, size=k)
        self.v = rng.normal(0.0, output_scale / np.sqrt(k), size=k)
        self.window = max(p, season)
        self.min_context = self.window

    def _step(self, lags):
        z = np.tanh(self.W @ lags[-self.p:] + self.b)
        y = float(self.v @ z)
        if self.season:
            y += lags[-self.season]
        return y

    def _step_grad(self, lags):
        z = np.tanh(self.W @ lags[-self.p:] + self.b)
        d = np.zeros(self.window)
        d[-self.p:] = (self.v * (1.0 - z * z)) @ self.W
        if self.season:
            d[-self.season] += 1.0
        return d


class RemoteForecaster:
    """JSON-over-HTTP adapter: POST ``{endpoint}/v1/forecast``."""

    def __init__(self, endpoint, model="", timeout=30.0, retries=0, backoff=0.5,
                 max_in_flight=4, min_context=1, session=None):
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.min_context = min_context
        self._slots = threading.BoundedSemaphore(max(1, max_in_flight))
        self._session = session or requests.Session()

    @property
    def url(self):
        return f"{self.endpoint}/v1/forecast"

    def forecast(self, context, horizon):
        x = _check_context(context, self.min_context)
        horizon = _check_horizon(horizon)
        body = {"series": x.tolist(), "horizon": horizon, "model": self.model}
        attempt = 0
        while True:
            try:
                with self._slots:
                    return self._post(body, horizon)
            except RemoteForecastError as exc:
                # payload errors are not transient
                if attempt >= self.retries or exc.status is None or exc.status < 500:
                    raise
            except requests.RequestException:
                if attempt >= self.retries:
                    raise
            attempt += 1
            time.sleep(self.backoff * 2 ** (attempt - 1))

    def _post(self, body, horizon):
        try:
            resp = self._session.post(self.url, json=body, timeout=self.timeout)
        except requests.Timeout as exc:
            raise RemoteForecastError(f"timeout after {self.timeout}s contacting {self.url}") from exc
        except requests.ConnectionError as exc:
            raise RemoteForecastError(f"cannot reach {self.url}: {exc}") from exc
        if not 200 <= resp.status_code < 300:
            raise RemoteForecastError(
                f"forecast service returned HTTP {resp.status_code}", status=resp.status_code
            )
        try:
            values = resp.json()["forecast"]
            y = np.asarray(values, dtype=float).reshape(-1)
        except (ValueError, KeyError, TypeError) as exc:
            raise RemoteForecastError(f"malformed forecast payload: {exc}", status=resp.status_code) from exc
        if y.size != horizon:
            raise RemoteForecastError(
                f"horizon mismatch: requested {horizon}, got {y.size} values", status=resp.status_code
            )
        if not np.all(np.isfinite(y)):
            raise RemoteForecastError("forecast payload contains non-finite values", status=resp.status_code)
        return y


def as_model(forecaster):
    """Accept a ForecasterSpec or any object with a ``forecast(context, horizon)`` method."""
    if isinstance(forecaster, ForecasterSpec):
        return forecaster.model
    return forecaster


def forecast(spec, context, horizon: int) -> np.ndarray:
    return as_model(spec).forecast(context, horizon)


def loss_gradient(spec, context, horizon: int, target: float = 0.0) -> np.ndarray:
    """Gradient of ``mean((forecast(context) - target)**2)`` w.r.t. the context."""
    model = as_model(spec)
    if not hasattr(model, "loss_gradient"):
        kind = spec.kind if isinstance(spec, ForecasterSpec) else type(model).__name__
        raise CapabilityError(f"forecaster {kind!r} does not expose gradients")
    return model.loss_gradient(context, horizon, target)


def targeted_loss(spec, context, horizon: int, target: float = 0.0) -> float:
    y = forecast(spec, context, horizon)
    return float(np.mean((y - target) ** 2))
