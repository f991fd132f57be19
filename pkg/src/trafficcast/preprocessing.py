"""Outlier smoothing and seasonal adjustment for daily series.

Windowed filters use a centered window that shrinks symmetrically at the
series edges, so output length always equals input length.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .timeseries import DailySeries, SeriesError

FILTER_KINDS = ("median", "moving_average", "exponential", "deseasonalize")


class FilterConfigError(ValueError):
    pass


@dataclass(frozen=True)
class FilterConfig:
    kind: str = "median"
    window: int = 5
    alpha: float = 0.3
    period: int = 7

    def __post_init__(self):
        if self.kind not in FILTER_KINDS:
            raise FilterConfigError(f"unknown filter {self.kind!r}; choose from {', '.join(FILTER_KINDS)}")
        _check_window(self.window)
        _check_alpha(self.alpha)
        if self.period < 2:
            raise FilterConfigError("period must be >= 2")


@dataclass(frozen=True)
class SeasonalIndices:
    period: int
    indices: tuple[float, ...]

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=float)
        if idx.shape != (self.period,) or np.any(idx <= 0):
            raise ValueError("need `period` positive seasonal indices")
        if abs(idx.mean() - 1.0) > 1e-9:
            raise ValueError("seasonal indices must average to 1")


def _check_window(window: int) -> None:
    if window < 1 or window % 2 == 0:
        raise FilterConfigError(f"window must be a positive odd integer, got {window}")


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha <= 1.0:
        raise FilterConfigError(f"alpha must lie in (0, 1], got {alpha}")


def _windowed(series: DailySeries, window: int, reducer, what: str) -> DailySeries:
    series.require_complete(what)
    _check_window(window)
    n = len(series)
    if window > n:
        raise FilterConfigError(f"window {window} exceeds series length {n}")
    x = series.values
    half = window // 2
    out = np.empty(n)
    for i in range(n):
        # shrink symmetrically: never reach further than the nearer edge
        r = min(half, i, n - 1 - i)
        out[i] = reducer(x[i - r:i + r + 1])
    return series.replace(out)


def median_filter(series: DailySeries, window: int = 5) -> DailySeries:
    return _windowed(series, window, np.median, "median_filter")


def moving_average(series: DailySeries, window: int = 5) -> DailySeries:
    return _windowed(series, window, np.mean, "moving_average")


def exponential_moving_average(series: DailySeries, alpha: float) -> DailySeries:
    series.require_complete("exponential_moving_average")
    _check_alpha(alpha)
    x = series.values
    out = np.empty_like(x)
    if len(x):
        out[0] = x[0]
    for t in range(1, len(x)):
        out[t] = alpha * x[t] + (1.0 - alpha) * out[t - 1]
    return series.replace(out)


def deseasonalize(series: DailySeries, period: int = 7) -> tuple[DailySeries, SeasonalIndices]:
    """Remove a multiplicative periodic component.

    Each index is the mean of the values sharing a cycle position divided by
    the grand mean, renormalized to average exactly 1.
    """
    series.require_complete("deseasonalize")
    if period < 2:
        raise FilterConfigError("period must be >= 2")
    x = series.values
    if len(x) < 2 * period:
        raise SeriesError(f"need at least {2 * period} values to deseasonalize with period {period}")
    if np.any(x <= 0):
        raise SeriesError("multiplicative deseasonalization needs strictly positive values")
    pos = np.arange(len(x)) % period
    col_means = np.array([x[pos == k].mean() for k in range(period)])
    idx = col_means / x.mean()
    idx = idx / idx.mean()
    return series.replace(x / idx[pos]), SeasonalIndices(period, tuple(idx.tolist()))


def reseasonalize(series: DailySeries, indices: SeasonalIndices, phase: int = 0) -> DailySeries:
    idx = np.asarray(indices.indices)
    pos = (phase + np.arange(len(series))) % indices.period
    return series.replace(series.values * idx[pos])


def impute_missing(series: DailySeries) -> DailySeries:
    """Linear interpolation inside gaps, nearest-value extension at the ends."""
    x = series.values
    present = ~np.isnan(x)
    if not present.any():
        raise SeriesError("cannot impute a series with no observed values")
    if present.all():
        return series
    t = np.arange(len(x))
    # np.interp clamps to the end values outside the observed range
    return series.replace(np.interp(t, t[present], x[present]))


def apply_filter(series: DailySeries, config: FilterConfig,
                 impute: bool = True) -> DailySeries:
    """Impute (optionally) then run the configured filter; deseasonalized output drops the indices."""
    if impute:
        series = impute_missing(series)
    if config.kind == "median":
        return median_filter(series, config.window)
    if config.kind == "moving_average":
        return moving_average(series, config.window)
    if config.kind == "exponential":
        return exponential_moving_average(series, config.alpha)
    return deseasonalize(series, config.period)[0]


def clean(series: DailySeries, config: Optional[FilterConfig] = None) -> DailySeries:
    """Default training-side cleaning: impute then 5-day median."""
    return apply_filter(series, config or FilterConfig())
