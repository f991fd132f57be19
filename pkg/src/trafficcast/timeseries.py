"""Daily toll-station series: CSV ingestion, gap-aware series, chronological splits."""

from __future__ import annotations

import csv
import datetime as dt
import enum
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

HEADER = ("STATION_CODE", "DATE", "TC1", "TC2", "TC3")


class ParseError(ValueError):
    """Malformed ingestion CSV; ``line`` is 1-based and counts the header."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SeriesError(ValueError):
    pass


class VehicleClass(enum.Enum):
    TC1 = "TC1"  # light: cars, bikes
    TC2 = "TC2"  # medium: vans, trucks
    TC3 = "TC3"  # heavy: trailer trucks, buses

    @classmethod
    def parse(cls, token: str) -> "VehicleClass":
        try:
            return cls(token.strip().upper())
        except ValueError:
            raise ValueError(f"unknown vehicle class {token!r}; expected TC1, TC2 or TC3") from None


@dataclass(frozen=True)
class TrafficRecord:
    station_code: int
    date: dt.date
    tc1: int
    tc2: int
    tc3: int

    def __post_init__(self):
        for name in ("tc1", "tc2", "tc3"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def count(self, vehicle_class: VehicleClass) -> int:
        return getattr(self, vehicle_class.value.lower())


@dataclass(frozen=True)
class DailySeries:
    """Consecutive daily values for one station and vehicle class.

    ``values`` is a float array with ``nan`` marking a missing observation;
    slot ``i`` is the day ``start_date + i``.
    """

    station_code: int
    vehicle_class: VehicleClass
    start_date: dt.date
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        present = values[~np.isnan(values)]
        if np.any(present < 0) or np.any(np.isinf(present)):
            raise SeriesError("series values must be finite and non-negative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def end_date(self) -> dt.date:
        return self.start_date + dt.timedelta(days=len(self) - 1)

    @property
    def dates(self) -> list[dt.date]:
        return [self.start_date + dt.timedelta(days=i) for i in range(len(self))]

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.values)

    def has_missing(self) -> bool:
        return bool(self.missing.any())

    def replace(self, values, start_date: Optional[dt.date] = None) -> "DailySeries":
        """Same station/class, new values (and optionally a new start date)."""
        return DailySeries(self.station_code, self.vehicle_class,
                           start_date or self.start_date, values)

    def index_of(self, date: dt.date) -> int:
        return (date - self.start_date).days

    def slice_dates(self, first: dt.date, last: dt.date) -> "DailySeries":
        i, j = self.index_of(first), self.index_of(last)
        if i < 0 or j >= len(self) or j < i:
            raise SeriesError(f"date range {first}..{last} outside {self.start_date}..{self.end_date}")
        return self.replace(self.values[i:j + 1], start_date=first)

    def require_complete(self, what: str = "this operation") -> None:
        if self.has_missing():
            raise SeriesError(f"{what} requires a series without missing values; impute first")


@dataclass(frozen=True)
class SplitSpec:
    cutoff_date: dt.date  # last training day, inclusive


def _parse_date(text: str) -> dt.date:
    text = text.strip()
    # fromisoformat alone accepts compact forms like 20140302 on newer Pythons
    if len(text) != 10 or text[4] != "-" or text[7] != "-":
        raise ValueError(f"date {text!r} is not YYYY-MM-DD")
    return dt.date.fromisoformat(text)


def _parse_count(text: str, name: str) -> int:
    text = text.strip()
    try:
        value = int(text)
    except ValueError:
        raise ValueError(f"{name} value {text!r} is not an integer") from None
    if value < 0:
        raise ValueError(f"{name} value {value} is negative")
    return value


def parse_csv(data: bytes | str | Iterable[str]) -> list[TrafficRecord]:
    """Parse ``STATION_CODE,DATE,TC1,TC2,TC3`` rows into records (file order kept)."""
    if isinstance(data, bytes):
        data = data.decode("utf-8-sig")
    if isinstance(data, str):
        data = io.StringIO(data, newline="")
    reader = csv.reader(data)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty input", 1) from None
    header = [h.strip().upper() for h in header]
    missing = [h for h in HEADER if h not in header]
    if missing:
        raise ParseError(f"missing column(s) {', '.join(missing)}", 1)
    pos = {h: header.index(h) for h in HEADER}

    records = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) < len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", lineno)
        try:
            station = int(row[pos["STATION_CODE"]].strip())
            date = _parse_date(row[pos["DATE"]])
            counts = [_parse_count(row[pos[c]], c) for c in ("TC1", "TC2", "TC3")]
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
        records.append(TrafficRecord(station, date, *counts))
    return records


def read_csv(path) -> list[TrafficRecord]:
    with open(path, "rb") as fh:
        try:
            return parse_csv(fh.read())
        except ParseError as exc:
            raise ParseError(f"{path}: {exc}") from None


def format_csv(records: Sequence[TrafficRecord]) -> str:
    """Serialize records in the ingestion format (LF line endings)."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(HEADER)
    for r in records:
        writer.writerow([r.station_code, r.date.isoformat(), r.tc1, r.tc2, r.tc3])
    return out.getvalue()


def to_series(records: Sequence[TrafficRecord], station: int,
              vehicle_class: VehicleClass) -> DailySeries:
    chosen = [r for r in records if r.station_code == station]
    if not chosen:
        raise SeriesError(f"no records for station {station}")
    by_date: dict[dt.date, int] = {}
    for r in chosen:
        if r.date in by_date:
            raise SeriesError(f"duplicate record for station {station} on {r.date}")
        by_date[r.date] = r.count(vehicle_class)
    start, end = min(by_date), max(by_date)
    values = np.full((end - start).days + 1, np.nan)
    for date, count in by_date.items():
        values[(date - start).days] = count
    return DailySeries(station, vehicle_class, start, values)


def series_to_records(series_by_class: dict[VehicleClass, DailySeries]) -> list[TrafficRecord]:
    """Inverse of :func:`to_series` for one station; days missing in any class are dropped.

    Values are rounded to the nearest integer count.
    """
    some = next(iter(series_by_class.values()))
    records = []
    for i, date in enumerate(some.dates):
        counts = []
        for vc in VehicleClass:
            s = series_by_class.get(vc)
            v = s.values[i] if s is not None else 0.0
            counts.append(v)
        if any(math.isnan(c) for c in counts):
            continue
        records.append(TrafficRecord(some.station_code, date, *(int(round(c)) for c in counts)))
    return records


def split_train_test(series: DailySeries, spec: SplitSpec) -> tuple[DailySeries, DailySeries]:
    k = series.index_of(spec.cutoff_date)
    if k < 0 or k >= len(series) - 1:
        raise SeriesError(
            f"cutoff {spec.cutoff_date} must lie in [{series.start_date}, "
            f"{series.end_date}) so both windows are non-empty")
    train = series.replace(series.values[:k + 1])
    test = series.replace(series.values[k + 1:], start_date=spec.cutoff_date + dt.timedelta(days=1))
    return train, test
