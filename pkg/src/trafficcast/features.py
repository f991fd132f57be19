"""Calendar learning matrix and feature scaling."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .timeseries import DailySeries

CALENDAR_COLUMNS = ("YEAR", "MONTH", "WEEK", "DAY", "DAY_OF_WEEK", "DAY_OF_YEAR", "IS_WEEKEND")
DOW_COLUMNS = tuple(f"DOW_{k}" for k in range(7))
FEATURE_COLUMNS = CALENDAR_COLUMNS + DOW_COLUMNS


@dataclass(frozen=True)
class CalendarRow:
    year: int
    month: int
    week: int
    day: int
    day_of_week: int
    day_of_year: int
    is_weekend: bool
    dow_onehot: tuple[int, ...]
    station_code: Optional[int] = None

    def as_vector(self) -> list[float]:
        return [self.year, self.month, self.week, self.day, self.day_of_week,
                self.day_of_year, float(self.is_weekend), *self.dow_onehot]


def explode_date(date: dt.date, week_start: int = 0) -> CalendarRow:
    """Split a date into the calendar attributes of the learning matrix.

    ``week_start`` is the weekday (Python numbering, Monday=0) that gets
    DAY_OF_WEEK 0; the weekend stays Saturday/Sunday either way.
    """
    dow = (date.weekday() - week_start) % 7
    onehot = [0] * 7
    onehot[dow] = 1
    return CalendarRow(
        year=date.year,
        month=date.month,
        week=date.isocalendar()[1],
        day=date.day,
        day_of_week=dow,
        day_of_year=date.timetuple().tm_yday,
        is_weekend=date.weekday() >= 5,
        dow_onehot=tuple(onehot),
    )


@dataclass(frozen=True)
class FeatureMatrix:
    column_names: tuple[str, ...]
    rows: np.ndarray
    targets: Optional[np.ndarray]
    dates: tuple[dt.date, ...]
    station_code: Optional[int] = None

    def __post_init__(self):
        n = len(self.dates)
        if self.rows.shape != (n, len(self.column_names)):
            raise ValueError(f"rows shape {self.rows.shape} does not match {n} dates x "
                             f"{len(self.column_names)} columns")
        if self.targets is not None and self.targets.shape != (n,):
            raise ValueError("targets must have one value per row")

    def __len__(self) -> int:
        return len(self.dates)

    def with_rows(self, rows: np.ndarray) -> "FeatureMatrix":
        return FeatureMatrix(self.column_names, rows, self.targets, self.dates, self.station_code)


def calendar_matrix(dates: Sequence[dt.date], week_start: int = 0) -> np.ndarray:
    """Feature rows for arbitrary dates (no targets needed)."""
    rows = np.array([explode_date(d, week_start).as_vector() for d in dates], dtype=np.float64)
    return rows.reshape(len(dates), len(FEATURE_COLUMNS))


def build_matrix(series: DailySeries, week_start: int = 0) -> FeatureMatrix:
    series.require_complete("build_matrix")
    dates = tuple(series.dates)
    return FeatureMatrix(FEATURE_COLUMNS, calendar_matrix(dates, week_start),
                         series.values.copy(), dates, series.station_code)


@dataclass(frozen=True)
class ScalerParams:
    mode: str
    # minmax01: (min, max); standardize: (mean, std)
    loc: np.ndarray
    spread: np.ndarray

    def to_dict(self) -> dict:
        return {"mode": self.mode, "loc": self.loc.tolist(), "spread": self.spread.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ScalerParams":
        return cls(d["mode"], np.asarray(d["loc"], dtype=float), np.asarray(d["spread"], dtype=float))


def _as_rows(matrix) -> np.ndarray:
    rows = matrix.rows if isinstance(matrix, FeatureMatrix) else np.asarray(matrix, dtype=float)
    return rows.reshape(rows.shape[0], -1) if rows.ndim == 1 else rows


def fit_scaler(matrix, mode: str = "minmax01") -> ScalerParams:
    rows = _as_rows(matrix)
    if rows.shape[0] == 0:
        raise ValueError("cannot fit a scaler on an empty matrix")
    if mode == "minmax01":
        return ScalerParams(mode, rows.min(axis=0), rows.max(axis=0))
    if mode == "standardize":
        return ScalerParams(mode, rows.mean(axis=0), rows.std(axis=0))  # population std
    raise ValueError(f"unknown scaler mode {mode!r}")


def _denominator(params: ScalerParams) -> tuple[np.ndarray, np.ndarray]:
    if params.mode == "minmax01":
        width = params.spread - params.loc
    else:
        width = params.spread
    constant = width == 0
    return np.where(constant, 1.0, width), constant


def transform_rows(rows: np.ndarray, params: ScalerParams) -> np.ndarray:
    rows = np.asarray(rows, dtype=float)
    width, constant = _denominator(params)
    out = (rows - params.loc) / width
    # constant training columns carry no information: map them to 0
    return np.where(constant, 0.0, out)


def inverse_transform_rows(rows: np.ndarray, params: ScalerParams) -> np.ndarray:
    width, constant = _denominator(params)
    return np.where(constant, params.loc, np.asarray(rows) * width + params.loc)


def apply_scaler(matrix, params: ScalerParams):
    if isinstance(matrix, FeatureMatrix):
        return matrix.with_rows(transform_rows(matrix.rows, params))
    return transform_rows(matrix, params)
