"""Synthetic toll-station traffic with a noise-free twin.

The deterministic level is a product of trend, weekly profile, annual
cosine and event multipliers. The observed series multiplies that level by
``1 + eps`` with Gaussian ``eps``; on outlier days ``eps`` is replaced by
+10 or -10 (a spike to 11x, or a drop clipped to zero). Missing spans
blank the observed series only.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

from .config import parse_value
from .timeseries import DailySeries, TrafficRecord, VehicleClass, series_to_records

OUTLIER_EPS = 10.0


class SynthConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Event:
    date: dt.date
    duration_days: int
    multiplier: float


@dataclass(frozen=True)
class SynthConfig:
    start_date: dt.date = dt.date(2013, 6, 1)
    n_days: int = 1461
    base_level: float = 12000.0
    weekly_amplitudes: tuple[float, ...] = (1.0,) * 7  # Monday first
    annual_amplitude: float = 0.0
    peak_doy: float = 213.0
    trend: float = 0.0  # relative growth per year
    events: tuple[Event, ...] = ()
    outlier_rate: float = 0.0
    missing_spans: tuple[tuple[dt.date, int], ...] = ()
    noise_sigma: float = 0.0
    seed: int = 0
    station_code: int = 1
    tc2_share: float = 0.18
    tc3_share: float = 0.07

    def __post_init__(self):
        if self.n_days < 1:
            raise SynthConfigError("n_days must be >= 1")
        if not self.base_level > 0:
            raise SynthConfigError("base_level must be positive")
        if len(self.weekly_amplitudes) != 7 or any(w <= 0 for w in self.weekly_amplitudes):
            raise SynthConfigError("weekly_amplitudes needs 7 positive multipliers")
        if not 0.0 <= self.outlier_rate <= 1.0:
            raise SynthConfigError("outlier_rate must lie in [0, 1]")
        if self.noise_sigma < 0:
            raise SynthConfigError("noise_sigma must be >= 0")
        if abs(self.annual_amplitude) >= 1:
            raise SynthConfigError("annual_amplitude must lie in (-1, 1)")
        for ev in self.events:
            # collapse events may approach zero but not reach it
            if ev.multiplier <= 0 or ev.duration_days < 1:
                raise SynthConfigError(f"bad event {ev}")
        for _, length in self.missing_spans:
            if length < 1:
                raise SynthConfigError("missing span length must be >= 1")
        if self.trend * self.n_days / 365.25 <= -1:
            raise SynthConfigError("trend drives the level negative")

    @property
    def dates(self) -> list[dt.date]:
        return [self.start_date + dt.timedelta(days=i) for i in range(self.n_days)]

    @classmethod
    def from_mapping(cls, m: Mapping[str, str]) -> "SynthConfig":
        """Build from ``synth.*`` config entries (prefix already stripped)."""
        kw = {}
        for key, text in m.items():
            if key == "start_date":
                kw[key] = _date(text)
            elif key == "weekly_amplitudes":
                kw[key] = tuple(float(x) for x in text.split(","))
            elif key == "events":
                kw[key] = tuple(_event(x) for x in text.split(",") if x.strip())
            elif key == "missing_spans":
                kw[key] = tuple(_span(x) for x in text.split(",") if x.strip())
            elif key in cls.__dataclass_fields__:
                kw[key] = parse_value(text)
            else:
                raise SynthConfigError(f"unknown synth setting {key!r}")
        return cls(**kw)


def _date(text: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise SynthConfigError(f"bad date {text!r}") from None


def _event(text: str) -> Event:
    parts = text.strip().split(":")
    if len(parts) != 3:
        raise SynthConfigError(f"event {text.strip()!r} must be DATE:DAYS:MULTIPLIER")
    return Event(_date(parts[0]), int(parts[1]), float(parts[2]))


def _span(text: str) -> tuple[dt.date, int]:
    parts = text.strip().split(":")
    if len(parts) != 2:
        raise SynthConfigError(f"missing span {text.strip()!r} must be DATE:DAYS")
    return _date(parts[0]), int(parts[1])


@dataclass
class SynthResult:
    series: DailySeries  # observed: noise, outliers, missing spans
    clean: DailySeries
    outlier_mask: np.ndarray
    event_mask: np.ndarray
    n_clipped: int = 0


def event_multipliers(config: SynthConfig) -> np.ndarray:
    mult = np.ones(config.n_days)
    for ev in config.events:
        first = (ev.date - config.start_date).days
        lo, hi = max(first, 0), min(first + ev.duration_days, config.n_days)
        if lo < hi:
            mult[lo:hi] *= ev.multiplier
    return mult


def clean_level(config: SynthConfig) -> np.ndarray:
    """Deterministic component: a pure function of the config."""
    t = np.arange(config.n_days)
    dates = config.dates
    dow = np.array([d.weekday() for d in dates])
    doy = np.array([d.timetuple().tm_yday for d in dates], dtype=float)
    weekly = np.asarray(config.weekly_amplitudes)[dow]
    annual = 1.0 + config.annual_amplitude * np.cos(2 * math.pi * (doy - config.peak_doy) / 365.25)
    trend = 1.0 + config.trend * t / 365.25
    return config.base_level * trend * weekly * annual * event_multipliers(config)


def generate(config: SynthConfig, vehicle_class: VehicleClass = VehicleClass.TC1) -> SynthResult:
    n = config.n_days
    rng = np.random.default_rng(config.seed)
    # draw every stream up front so the config never shifts the random sequence
    noise = rng.standard_normal(n) * config.noise_sigma
    is_outlier = rng.random(n) < config.outlier_rate
    sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)

    level = clean_level(config)
    eps = np.where(is_outlier, sign * OUTLIER_EPS, noise)
    observed = level * (1.0 + eps)
    clipped = observed < 0
    observed = np.where(clipped, 0.0, observed)

    missing = np.zeros(n, dtype=bool)
    for start, length in config.missing_spans:
        first = (start - config.start_date).days
        missing[max(first, 0):max(min(first + length, n), 0)] = True
    observed = np.where(missing, np.nan, observed)

    def mk(values):
        return DailySeries(config.station_code, vehicle_class, config.start_date, values)

    return SynthResult(mk(observed), mk(level), is_outlier & ~missing,
                       event_multipliers(config) != 1.0, int((clipped & ~missing).sum()))


CLASS_SHARE = {VehicleClass.TC1: None, VehicleClass.TC2: "tc2_share", VehicleClass.TC3: "tc3_share"}


def generate_station(config: SynthConfig) -> dict[VehicleClass, SynthResult]:
    """All three vehicle classes; TC2/TC3 scale the base level and reseed."""
    out = {}
    for k, vc in enumerate(VehicleClass):
        share = CLASS_SHARE[vc]
        cfg = config if share is None else replace(
            config, base_level=config.base_level * getattr(config, share), seed=config.seed + k)
        out[vc] = generate(cfg, vc)
    return out


def station_records(results: Mapping[VehicleClass, SynthResult], clean: bool = False) -> list[TrafficRecord]:
    return series_to_records({vc: (r.clean if clean else r.series) for vc, r in results.items()})
