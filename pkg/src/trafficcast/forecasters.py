"""Uniform fit/predict wrappers around the regressors, plus a model registry.

A forecaster is fitted on one cleaned :class:`DailySeries` and asked for
forecasts on a list of future dates. Calendar models only look at the
dates; the LSTM also needs the history preceding them.
"""

from __future__ import annotations

import datetime as dt
import zlib
from dataclasses import replace
from typing import Any, Optional, Sequence

import numpy as np

from . import lstm, mlp, serialization
from .evaluation import naive_seasonal
from .features import build_matrix, calendar_matrix
from .timeseries import DailySeries, VehicleClass
from .trees import (BoostModel, BoostParams, ForestModel, ForestParams, TreeParams,
                    fit_adaboost_r2, fit_forest)

MODEL_NAMES = ("mlp", "rf", "adaboost", "extratrees", "lstm", "naive")

# default hyperparameters; LSTM sizes are desk-scale
DEFAULTS: dict[str, dict[str, Any]] = {
    "rf": {"n_estimators": 5000, "min_samples_split": 2, "min_samples_leaf": 1,
           "max_features": "sqrt", "max_depth": None},
    "extratrees": {"n_estimators": 100, "min_samples_split": 10, "min_samples_leaf": 13,
                   "max_features": 0.75, "max_depth": None},
    "adaboost": {"n_estimators": 10000, "learning_rate": 1.0, "max_depth": 3, "loss": "linear"},
    "mlp": {"hidden_layer_sizes": (200, 100, 100, 200, 100, 200), "alpha": 0.01,
            "max_iter": 80000, "batch_size": 40, "learning_rate": 1e-3, "activation": "relu",
            "tol": 1e-4, "patience": 20, "scaling": "minmax01"},
    "lstm": {"hidden_layer_sizes": (16,), "epochs": 1000, "lookback": 100, "lookforward": 10,
             "learning_rate": 0.1, "batch_size": 32, "tol": 0.0, "patience": None},
    "naive": {"period": 7},
}


def component_seed(seed: int, name: str) -> int:
    """Derive a per-component seed from the run seed."""
    ss = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, zlib.crc32(name.encode())])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)


def _check_dates_follow(history: DailySeries, dates: Sequence[dt.date]) -> None:
    expected = history.end_date + dt.timedelta(days=1)
    if not dates or dates[0] != expected or any(
            (b - a).days != 1 for a, b in zip(dates[:-1], dates[1:])):
        raise ValueError("sequence forecasts need consecutive dates starting the day after the history")


class Forecaster:
    name: str = "base"
    uses_realized_history = False

    def __init__(self, params: Optional[dict] = None, seed: int = 0, week_start: int = 0):
        unknown = set(params or {}) - set(DEFAULTS[self.name])
        if unknown:
            raise ValueError(f"unknown {self.name} parameter(s): {', '.join(sorted(unknown))}")
        self.params = {**DEFAULTS[self.name], **(params or {})}
        self.seed = seed
        self.week_start = week_start
        self.train_start: Optional[dt.date] = None
        self.train_end: Optional[dt.date] = None
        self.station_code: Optional[int] = None
        self.vehicle_class: Optional[VehicleClass] = None
        self.model = None

    def fit(self, series: DailySeries) -> "Forecaster":
        series.require_complete(f"fitting {self.name}")
        self.train_start, self.train_end = series.start_date, series.end_date
        self.station_code, self.vehicle_class = series.station_code, series.vehicle_class
        self._fit(series)
        return self

    def _fit(self, series: DailySeries) -> None:
        raise NotImplementedError

    def predict(self, dates: Sequence[dt.date], history: Optional[DailySeries] = None) -> np.ndarray:
        if self.model is None:
            raise RuntimeError(f"{self.name} forecaster is not fitted")
        return self._predict(list(dates), history)

    def _predict(self, dates, history) -> np.ndarray:
        raise NotImplementedError

    # serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        params = {k: list(v) if isinstance(v, tuple) else v for k, v in self.params.items()}
        return {
            "name": self.name,
            "params": params,
            "seed": self.seed,
            "week_start": self.week_start,
            "train_start": self.train_start.isoformat(),
            "train_end": self.train_end.isoformat(),
            "station_code": self.station_code,
            "vehicle_class": self.vehicle_class.value,
            "state": self._state_dict(),
        }

    def _state_dict(self) -> Any:
        return self.model.to_dict()

    def _load_state(self, state) -> None:
        raise NotImplementedError

    def save(self, path) -> None:
        serialization.save(path, "forecaster", self.to_dict())

    def dumps(self) -> str:
        return serialization.dumps("forecaster", self.to_dict())


class CalendarForecaster(Forecaster):
    """Regression on the calendar learning matrix."""

    def _fit(self, series):
        m = build_matrix(series, self.week_start)
        self.model = self._fit_rows(m.rows, m.targets)

    def _predict(self, dates, history):
        return self.model.predict(calendar_matrix(dates, self.week_start))


class RandomForestForecaster(CalendarForecaster):
    name = "rf"

    def forest_params(self) -> ForestParams:
        p = self.params
        tree = TreeParams(p["max_features"], p["min_samples_split"], p["min_samples_leaf"],
                          p["max_depth"], self.seed)
        return ForestParams(p["n_estimators"], tree, mode="random_forest")

    def _fit_rows(self, X, y):
        return fit_forest(X, y, self.forest_params())

    def _load_state(self, state):
        self.model = ForestModel.from_dict(state)


class ExtraTreesForecaster(RandomForestForecaster):
    name = "extratrees"

    def forest_params(self) -> ForestParams:
        return replace(super().forest_params(), mode="extra_trees")


class AdaBoostForecaster(CalendarForecaster):
    name = "adaboost"

    def _fit_rows(self, X, y):
        p = self.params
        base = TreeParams("all", 2, 1, p["max_depth"], self.seed)
        return fit_adaboost_r2(X, y, BoostParams(p["n_estimators"], p["learning_rate"], base, p["loss"]))

    def _load_state(self, state):
        self.model = BoostModel.from_dict(state)


class _MLPAdapter:
    def __init__(self, model: mlp.MLPModel):
        self.model = model

    def predict(self, X):
        return mlp.predict(self.model, X)

    def to_dict(self):
        return self.model.to_dict()


class MLPForecaster(CalendarForecaster):
    name = "mlp"

    def mlp_params(self) -> mlp.MLPParams:
        p = dict(self.params)
        return mlp.MLPParams(seed=self.seed, **p)

    def _fit_rows(self, X, y):
        return _MLPAdapter(mlp.train(X, y, self.mlp_params()))

    def _load_state(self, state):
        self.model = _MLPAdapter(mlp.MLPModel.from_dict(state))


class LSTMForecaster(Forecaster):
    """Window-based LSTM; ``one_step`` mode re-reads realized values as inputs."""

    name = "lstm"

    def __init__(self, params=None, seed=0, week_start=0, mode: str = "multi_step"):
        super().__init__(params, seed, week_start)
        if mode not in ("multi_step", "one_step"):
            raise ValueError(f"unknown LSTM forecast mode {mode!r}")
        self.mode = mode

    @property
    def uses_realized_history(self) -> bool:
        return self.mode == "one_step"

    @property
    def spec(self) -> lstm.WindowSpec:
        return lstm.WindowSpec(self.params["lookback"], self.params["lookforward"])

    def train_params(self) -> lstm.LSTMTrainParams:
        p = self.params
        return lstm.LSTMTrainParams(p["epochs"], p["learning_rate"], p["batch_size"], self.seed,
                                    p["tol"], p["patience"])

    def _fit(self, series):
        self.model = lstm.fit(series, self.spec, self.params["hidden_layer_sizes"], self.train_params())

    def _predict(self, dates, history):
        if history is None:
            raise ValueError("the LSTM needs the history preceding the forecast dates")
        if self.mode == "multi_step":
            _check_dates_follow(history, dates)
            return lstm.forecast(self.model, history, len(dates), "multi_step").values
        # history already includes the realized values of the forecast dates
        if history.end_date != dates[-1]:
            raise ValueError("one_step history must run through the last forecast date")
        return lstm.forecast(self.model, history, len(dates), "one_step").values

    def to_dict(self):
        d = super().to_dict()
        d["mode"] = self.mode
        return d

    def _load_state(self, state):
        self.model = lstm.LSTMNetwork.from_dict(state)


class NaiveSeasonalForecaster(Forecaster):
    name = "naive"

    def _fit(self, series):
        self.model = series.values.copy()

    def _predict(self, dates, history):
        base = history.values if history is not None else self.model
        if history is not None:
            _check_dates_follow(history, dates)
        return naive_seasonal(base, len(dates), self.params["period"])

    def _state_dict(self):
        return serialization.hex_array(self.model)

    def _load_state(self, state):
        self.model = serialization.unhex_array(state)


REGISTRY = {cls.name: cls for cls in (RandomForestForecaster, ExtraTreesForecaster,
                                      AdaBoostForecaster, MLPForecaster, LSTMForecaster,
                                      NaiveSeasonalForecaster)}


def make_forecaster(name: str, params: Optional[dict] = None, seed: int = 0,
                    week_start: int = 0, **kwargs) -> Forecaster:
    """Build a forecaster by registry name; ``seed`` is the run seed, fanned out per model."""
    try:
        cls = REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {', '.join(MODEL_NAMES)}") from None
    return cls(params, component_seed(seed, name), week_start, **kwargs)


def from_dict(d: dict) -> Forecaster:
    cls = REGISTRY[d["name"]]
    kwargs = {"mode": d["mode"]} if "mode" in d else {}
    params = {k: tuple(v) if k == "hidden_layer_sizes" else v for k, v in d["params"].items()}
    f = cls(params, d["seed"], d["week_start"], **kwargs)
    f.train_start = dt.date.fromisoformat(d["train_start"])
    f.train_end = dt.date.fromisoformat(d["train_end"])
    f.station_code = d["station_code"]
    f.vehicle_class = VehicleClass(d["vehicle_class"])
    f._load_state(d["state"])
    return f


def load(path) -> Forecaster:
    kind, payload = serialization.load(path)
    if kind != "forecaster":
        raise serialization.ModelFormatError(f"expected a forecaster file, got {kind!r}")
    return from_dict(payload)


def loads(text: str) -> Forecaster:
    kind, payload = serialization.loads(text)
    if kind != "forecaster":
        raise serialization.ModelFormatError(f"expected a forecaster file, got {kind!r}")
    return from_dict(payload)
