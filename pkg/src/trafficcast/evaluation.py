"""SMAPE scoring, the seasonal-naive floor, and model comparison tables."""

from __future__ import annotations

import csv
import datetime as dt
import io
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .preprocessing import FilterConfig, apply_filter, impute_missing
from .timeseries import DailySeries


class LeakageError(RuntimeError):
    """A model saw data from the window it is being scored on."""


def smape(actual, forecast) -> float:
    """Symmetric MAPE in percent, range [0, 200].

    Uses the half-sum denominator; a day where both values are 0 scores 0.
    """
    a = np.asarray(actual, dtype=np.float64).reshape(-1)
    f = np.asarray(forecast, dtype=np.float64).reshape(-1)
    if a.shape != f.shape:
        raise ValueError(f"length mismatch: {a.size} actual vs {f.size} forecast")
    if a.size == 0:
        raise ValueError("smape of empty sequences is undefined")
    # |F - A| / ((|A| + |F|) / 2) written so that halving a subnormal sum cannot reach 0
    total = np.abs(a) + np.abs(f)
    num = np.abs(f - a)
    terms = 2.0 * np.divide(num, total, out=np.zeros_like(num), where=total > 0)
    return float(100.0 * terms.mean())


def naive_seasonal(train, horizon: int, period: int = 7) -> np.ndarray:
    """Repeat the last observed value at the same position of the cycle."""
    x = train.values if isinstance(train, DailySeries) else np.asarray(train, dtype=np.float64)
    n = len(x)
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if n < period:
        raise ValueError(f"need at least one full period ({period}) of history")
    out = np.empty(horizon)
    for h in range(1, horizon + 1):
        i = n - period + (h - 1) % period
        while i >= 0 and np.isnan(x[i]):
            i -= period
        if i < 0:
            raise ValueError("no observed value at this cycle position")
        out[h - 1] = x[i]
    return out


@dataclass(frozen=True)
class PipelineConfig:
    filter: Optional[FilterConfig] = field(default_factory=FilterConfig)
    score_against: str = "raw"  # or "filtered"
    lstm_mode: str = "multi_step"

    def __post_init__(self):
        if self.score_against not in ("raw", "filtered"):
            raise ValueError("score_against must be 'raw' or 'filtered'")
        if self.lstm_mode not in ("multi_step", "one_step"):
            raise ValueError("lstm_mode must be 'multi_step' or 'one_step'")
        if self.filter is not None and self.filter.kind == "deseasonalize":
            # forecasts would come out in deseasonalized units and be scored against raw counts
            raise ValueError("the deseasonalize filter is only available for cleaning, "
                             "not as a training filter")


def prepare_train(train: DailySeries, config: PipelineConfig) -> DailySeries:
    """Impute then filter the training window."""
    return apply_filter(train, config.filter) if config.filter else impute_missing(train)


@dataclass
class EvalReport:
    model: str
    smape: float
    dates: list[dt.date]
    actual: np.ndarray  # nan where the day was not observed
    forecast: np.ndarray
    train_start: dt.date
    train_end: dt.date
    scored_against: str = "raw"

    def __post_init__(self):
        if not len(self.dates) == len(self.actual) == len(self.forecast):
            raise ValueError("per-day records must align")

    @property
    def test_start(self) -> dt.date:
        return self.dates[0]

    @property
    def test_end(self) -> dt.date:
        return self.dates[-1]

    def daily_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["DATE", "ACTUAL", "FORECAST"])
        for d, a, f in zip(self.dates, self.actual, self.forecast):
            w.writerow([d.isoformat(), "" if np.isnan(a) else _fmt(a), _fmt(f)])
        return out.getvalue()


def _fmt(x: float) -> str:
    return f"{x:.6f}"


REPORT_HEADER = ["MODEL", "SMAPE_PCT", "TRAIN_START", "TRAIN_END", "TEST_START", "TEST_END"]


def _report_row(r: EvalReport) -> list[str]:
    return [r.model, f"{r.smape:.1f}", r.train_start.isoformat(), r.train_end.isoformat(),
            r.test_start.isoformat(), r.test_end.isoformat()]


def reports_csv(reports: Sequence[EvalReport]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(REPORT_HEADER)
    for r in reports:
        w.writerow(_report_row(r))
    return out.getvalue()


def reports_table(reports: Sequence[EvalReport]) -> str:
    rows = [REPORT_HEADER] + [_report_row(r) for r in reports]
    widths = [max(len(row[k]) for row in rows) for k in range(len(REPORT_HEADER))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def evaluate(model, train: DailySeries, test: DailySeries,
             config: PipelineConfig = PipelineConfig(), name: Optional[str] = None) -> EvalReport:
    """Fit (if needed) on the training window and score every test day.

    ``model`` follows the forecaster protocol of :mod:`trafficcast.forecasters`:
    ``fit(series)``, ``predict(dates, history)``, ``train_end`` and
    ``uses_realized_history``. It is given only the test dates plus the
    prepared training history, except for realized-history (one-step)
    models, which also receive the imputed test values as inputs.
    """
    if test.start_date <= train.end_date:
        raise LeakageError("test window must start after the training window")
    history = prepare_train(train, config)
    if getattr(model, "train_end", None) is None:
        model.fit(history)
    if model.train_end >= test.start_date:
        raise LeakageError(f"model was trained through {model.train_end}, "
                           f"which overlaps the test window starting {test.start_date}")
    dates = test.dates
    if getattr(model, "uses_realized_history", False):
        realized = impute_missing(test).values
        history = history.replace(np.concatenate([history.values, realized]))
    forecast = np.asarray(model.predict(dates, history), dtype=np.float64)
    if forecast.shape != (len(dates),):
        raise ValueError(f"model returned {forecast.shape} forecasts for {len(dates)} days")
    forecast = np.maximum(forecast, 0.0)

    if config.score_against == "filtered":
        actual = apply_filter(test, config.filter) if config.filter else impute_missing(test)
        actual = actual.values
    else:
        actual = test.values
    observed = ~np.isnan(actual)
    if not observed.any():
        raise ValueError("test window has no observed values to score")
    score = smape(actual[observed], forecast[observed])
    return EvalReport(name or getattr(model, "name", type(model).__name__), score, dates,
                      np.array(actual), forecast, train.start_date, train.end_date,
                      config.score_against)


def compare(models: Sequence, train: DailySeries, test: DailySeries,
            config: PipelineConfig = PipelineConfig(), names: Optional[Sequence[str]] = None,
            ) -> list[EvalReport]:
    """One report per model, sorted by SMAPE (stable, so ties keep input order)."""
    names = list(names) if names is not None else [None] * len(models)
    reports = [evaluate(m, train, test, config, name=n) for m, n in zip(models, names)]
    return sorted(reports, key=lambda r: r.smape)
