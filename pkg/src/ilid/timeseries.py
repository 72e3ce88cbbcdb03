"""Series container, CSV ingestion, fixed-size windowing and z-scoring."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


def _as_finite_array(values, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} contains non-finite values")
    return arr


@dataclass(frozen=True)
class TimeSeries:
    name: str
    values: np.ndarray
    interval: str = ""

    def __post_init__(self):
        arr = _as_finite_array(self.values, f"series {self.name!r}")
        if arr.size < 1:
            raise ValueError(f"series {self.name!r} is empty")
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class SampleWindow:
    """One detection unit: a context of length T plus an optional horizon of truth."""

    context: np.ndarray
    truth: np.ndarray | None = None
    origin_index: int = 0

    def __post_init__(self):
        ctx = _as_finite_array(self.context, "window context")
        if ctx.size < 1:
            raise ValueError("window context is empty")
        object.__setattr__(self, "context", ctx)
        if self.truth is not None:
            truth = _as_finite_array(self.truth, "window truth")
            if truth.size < 1:
                raise ValueError("window truth is empty")
            if truth.size > ctx.size:
                raise ValueError(
                    f"horizon {truth.size} exceeds context length {ctx.size}"
                )
            object.__setattr__(self, "truth", truth)

    @property
    def T(self) -> int:
        return self.context.size

    def with_context(self, context) -> "SampleWindow":
        return SampleWindow(context, self.truth, self.origin_index)


@dataclass(frozen=True)
class NormStats:
    mean: float
    std: float

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.std)):
            raise ValueError("normalization stats must be finite")
        if self.std <= 0:
            raise ValueError(f"normalization std must be > 0, got {self.std}")


def load_csv(path, column: str, interval: str = "") -> TimeSeries:
    """Read one numeric column of a headed CSV file, top to bottom.

    Empty or non-numeric cells are rejected with their 1-based file row number
    (the header is row 1). Nothing is imputed.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"CSV file not found: {path}")
    values = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        if column not in header:
            raise KeyError(f"{path}: column not found: {column!r}")
        col = header.index(column)
        for row_no, row in enumerate(reader, start=2):
            cell = row[col].strip() if col < len(row) else ""
            if cell == "":
                raise ValueError(f"{path}: empty cell in column {column!r} at row {row_no}")
            try:
                v = float(cell)
            except ValueError:
                raise ValueError(
                    f"{path}: non-numeric value {cell!r} in column {column!r} at row {row_no}"
                ) from None
            if not math.isfinite(v):
                raise ValueError(f"{path}: non-finite value {cell!r} at row {row_no}")
            values.append(v)
    if not values:
        raise ValueError(f"{path}: no data rows")
    return TimeSeries(column, np.array(values), interval)


def make_windows(series: TimeSeries, T: int, tau: int, step: int | None = None) -> list[SampleWindow]:
    """Cut ``series`` into (context, truth) windows starting every ``step`` points.

    ``step`` defaults to ``T + tau`` so windows do not overlap.
    """
    if step is None:
        step = T + tau
    if not (T >= tau >= 1):
        raise ValueError(f"need T >= tau >= 1, got T={T}, tau={tau}")
    if step < 1:
        raise ValueError(f"step must be >= 1, got {step}")
    x = series.values
    if x.size < T + tau:
        raise ValueError(
            f"series of length {x.size} is too short for a single window (T + tau = {T + tau})"
        )
    windows = []
    for start in range(0, x.size - (T + tau) + 1, step):
        windows.append(
            SampleWindow(x[start:start + T].copy(), x[start + T:start + T + tau].copy(), start)
        )
    return windows


def fit_norm_stats(values) -> NormStats:
    """Mean and population (ddof=0) standard deviation."""
    arr = _as_finite_array(values, "normalization source")
    return NormStats(float(arr.mean()), float(arr.std()))


def znormalize(series: TimeSeries, stats: NormStats) -> TimeSeries:
    if stats.std <= 0:
        raise ValueError("normalization std must be > 0")
    return TimeSeries(series.name, (series.values - stats.mean) / stats.std, series.interval)


def denormalize(series: TimeSeries, stats: NormStats) -> TimeSeries:
    return TimeSeries(series.name, series.values * stats.std + stats.mean, series.interval)
