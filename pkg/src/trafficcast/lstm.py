"""Stacked LSTM forecaster with backpropagation through time.

Gate blocks are stored side by side in the order input, forget, output,
candidate, so every weight matrix has ``4 * H`` columns.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .serialization import hex_array, unhex_array
from .timeseries import DailySeries

GATES = ("input", "forget", "output", "candidate")


class TrainingError(RuntimeError):
    pass


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))  # overflow-free logistic


@dataclass(frozen=True)
class WindowSpec:
    lookback: int = 100
    lookforward: int = 10

    def __post_init__(self):
        if self.lookback < 1 or self.lookforward < 1:
            raise ValueError("lookback and lookforward must be >= 1")

    def n_samples(self, length: int) -> int:
        return length - self.lookback - self.lookforward + 1


@dataclass(frozen=True)
class Normalizer:
    """Min-max map of a series onto [0, 1]; a flat series maps to 0."""

    lo: float
    hi: float

    @classmethod
    def fit(cls, values) -> "Normalizer":
        values = np.asarray(values, dtype=np.float64)
        return cls(float(values.min()), float(values.max()))

    @property
    def width(self) -> float:
        return self.hi - self.lo if self.hi > self.lo else 1.0

    def normalize(self, v):
        return (np.asarray(v, dtype=np.float64) - self.lo) / self.width

    def denormalize(self, v):
        return np.asarray(v, dtype=np.float64) * self.width + self.lo


@dataclass
class Windows:
    inputs: np.ndarray   # (n_samples, lookback), normalized
    targets: np.ndarray  # (n_samples, lookforward), normalized
    normalizer: Normalizer
    spec: WindowSpec

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def raw(self) -> tuple[np.ndarray, np.ndarray]:
        return self.normalizer.denormalize(self.inputs), self.normalizer.denormalize(self.targets)

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow([f"X_{k}" for k in range(self.spec.lookback)]
                   + [f"Y_{k}" for k in range(self.spec.lookforward)])
        xs, ys = self.raw()
        for x, y in zip(xs, ys):
            w.writerow([repr(float(v)) for v in (*x, *y)])
        return out.getvalue()


def _values(series) -> np.ndarray:
    if isinstance(series, DailySeries):
        series.require_complete("make_windows")
        return series.values
    return np.asarray(series, dtype=np.float64).reshape(-1)


def make_windows(series, spec: WindowSpec, normalizer: Optional[Normalizer] = None) -> Windows:
    values = _values(series)
    need = spec.lookback + spec.lookforward
    if len(values) < need:
        raise ValueError(f"series of length {len(values)} is too short; need at least {need} "
                         f"values for lookback {spec.lookback} + lookforward {spec.lookforward}")
    norm = normalizer or Normalizer.fit(values)
    z = norm.normalize(values)
    n = spec.n_samples(len(values))
    starts = np.arange(n)[:, None]
    inputs = z[starts + np.arange(spec.lookback)]
    targets = z[starts + spec.lookback + np.arange(spec.lookforward)]
    return Windows(inputs, targets, norm, spec)


@dataclass
class LSTMCellWeights:
    W: np.ndarray  # (D, 4H) input weights
    U: np.ndarray  # (H, 4H) recurrent weights
    b: np.ndarray  # (4H,)

    def __post_init__(self):
        H = self.U.shape[0]
        if self.U.shape != (H, 4 * H) or self.W.shape[1] != 4 * H or self.b.shape != (4 * H,):
            raise ValueError("inconsistent LSTM cell dimensions")

    @property
    def hidden_size(self) -> int:
        return self.U.shape[0]

    @property
    def input_size(self) -> int:
        return self.W.shape[0]

    def gate(self, name: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        H = self.hidden_size
        k = GATES.index(name)
        sl = slice(k * H, (k + 1) * H)
        return self.W[:, sl], self.U[:, sl], self.b[sl]

    @classmethod
    def zeros(cls, input_size: int, hidden_size: int) -> "LSTMCellWeights":
        H = hidden_size
        return cls(np.zeros((input_size, 4 * H)), np.zeros((H, 4 * H)), np.zeros(4 * H))


def cell_step(weights: LSTMCellWeights, x_t, h_prev, c_prev):
    """One LSTM time step; accepts single vectors or (batch, size) arrays."""
    x_t, h_prev, c_prev = (np.asarray(a, dtype=np.float64) for a in (x_t, h_prev, c_prev))
    if x_t.shape[-1] != weights.input_size or h_prev.shape[-1] != weights.hidden_size \
            or c_prev.shape[-1] != weights.hidden_size:
        raise ValueError("cell_step input dimensions do not match the weights")
    h, c, _ = _step(weights, x_t, h_prev, c_prev)
    return h, c


def _step(weights, x, h_prev, c_prev):
    H = weights.hidden_size
    a = x @ weights.W + h_prev @ weights.U + weights.b
    i = sigmoid(a[..., :H])
    f = sigmoid(a[..., H:2 * H])
    o = sigmoid(a[..., 2 * H:3 * H])
    g = np.tanh(a[..., 3 * H:])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    return h, c, (i, f, o, g, tc)


@dataclass
class LSTMNetwork:
    cells: list[LSTMCellWeights]
    readout_w: np.ndarray  # (H_top, lookforward)
    readout_b: np.ndarray  # (lookforward,)
    spec: WindowSpec = field(default_factory=WindowSpec)
    normalizer: Optional[Normalizer] = None
    loss_trace: list[float] = field(default_factory=list)

    def __post_init__(self):
        if self.readout_w.shape != (self.cells[-1].hidden_size, self.spec.lookforward) \
                or self.readout_b.shape != (self.spec.lookforward,):
            raise ValueError("readout width must equal lookforward")
        for lower, upper in zip(self.cells[:-1], self.cells[1:]):
            if upper.input_size != lower.hidden_size:
                raise ValueError("stacked cell sizes do not chain")

    @property
    def hidden_sizes(self) -> tuple[int, ...]:
        return tuple(c.hidden_size for c in self.cells)

    def parameters(self) -> list[np.ndarray]:
        out = []
        for c in self.cells:
            out += [c.W, c.U, c.b]
        return out + [self.readout_w, self.readout_b]

    @property
    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def copy(self) -> "LSTMNetwork":
        return LSTMNetwork([LSTMCellWeights(c.W.copy(), c.U.copy(), c.b.copy()) for c in self.cells],
                           self.readout_w.copy(), self.readout_b.copy(), self.spec,
                           self.normalizer, list(self.loss_trace))

    def to_dict(self) -> dict:
        return {
            "lookback": self.spec.lookback,
            "lookforward": self.spec.lookforward,
            "cells": [{"W": hex_array(c.W), "U": hex_array(c.U), "b": hex_array(c.b)}
                      for c in self.cells],
            "readout_w": hex_array(self.readout_w),
            "readout_b": hex_array(self.readout_b),
            "normalizer": None if self.normalizer is None else
            [float(self.normalizer.lo).hex(), float(self.normalizer.hi).hex()],
            "loss_trace": hex_array(self.loss_trace),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LSTMNetwork":
        cells = [LSTMCellWeights(unhex_array(c["W"]), unhex_array(c["U"]), unhex_array(c["b"]))
                 for c in d["cells"]]
        norm = d["normalizer"]
        return cls(cells, unhex_array(d["readout_w"]), unhex_array(d["readout_b"]),
                   WindowSpec(d["lookback"], d["lookforward"]),
                   None if norm is None else Normalizer(float.fromhex(norm[0]), float.fromhex(norm[1])),
                   unhex_array(d["loss_trace"]).tolist())


def init_network(hidden_sizes: Sequence[int], spec: WindowSpec,
                 rng: np.random.Generator, input_size: int = 1) -> LSTMNetwork:
    """Glorot-uniform weights, zero biases except forget-gate biases at 1."""
    cells = []
    d = input_size
    for H in hidden_sizes:
        bw = math.sqrt(6.0 / (d + 4 * H))
        bu = math.sqrt(6.0 / (H + 4 * H))
        b = np.zeros(4 * H)
        b[H:2 * H] = 1.0
        cells.append(LSTMCellWeights(rng.uniform(-bw, bw, (d, 4 * H)),
                                     rng.uniform(-bu, bu, (H, 4 * H)), b))
        d = H
    br = math.sqrt(6.0 / (d + spec.lookforward))
    return LSTMNetwork(cells, rng.uniform(-br, br, (d, spec.lookforward)),
                       np.zeros(spec.lookforward), spec)


def _forward_batch(net: LSTMNetwork, X: np.ndarray, keep: bool = False):
    """X: (batch, T) normalized windows. Returns predictions and per-layer caches."""
    B, T = X.shape
    layer_in = X[:, :, None]
    caches = []
    for cell in net.cells:
        H = cell.hidden_size
        h = np.zeros((B, H))
        c = np.zeros((B, H))
        hs = np.empty((T, B, H))
        steps = []
        for t in range(T):
            h_prev, c_prev = h, c
            h, c, gates = _step(cell, layer_in[:, t, :], h_prev, c_prev)
            hs[t] = h
            if keep:
                steps.append((h_prev, c_prev, gates))
        caches.append((layer_in, steps))
        layer_in = hs.transpose(1, 0, 2)
    h_top = layer_in[:, -1, :]
    return h_top @ net.readout_w + net.readout_b, caches, h_top


def forward_sequence(net: LSTMNetwork, window) -> np.ndarray:
    """Prediction vector (length lookforward) for one normalized input window."""
    window = np.asarray(window, dtype=np.float64).reshape(1, -1)
    return _forward_batch(net, window)[0][0]


def sequence_loss(net: LSTMNetwork, X, Y) -> float:
    pred = _forward_batch(net, np.asarray(X, dtype=np.float64))[0]
    return float(np.mean((pred - np.asarray(Y, dtype=np.float64)) ** 2))


def bptt_gradients(net: LSTMNetwork, X, Y):
    """Gradients of :func:`sequence_loss`, ordered like ``net.parameters()``."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    pred, caches, h_top = _forward_batch(net, X, keep=True)
    B, T = X.shape
    dpred = 2.0 * (pred - Y) / pred.size
    g_readout_w = h_top.T @ dpred
    g_readout_b = dpred.sum(axis=0)

    dh_ext = np.zeros((T, B, net.cells[-1].hidden_size))
    dh_ext[-1] = dpred @ net.readout_w.T
    grads_by_layer = []
    for cell, (layer_in, steps) in zip(reversed(net.cells), reversed(caches)):
        H = cell.hidden_size
        gW, gU, gb = np.zeros_like(cell.W), np.zeros_like(cell.U), np.zeros_like(cell.b)
        dx = np.zeros((T, B, cell.input_size))
        dh_rec = np.zeros((B, H))
        dc_rec = np.zeros((B, H))
        for t in range(T - 1, -1, -1):
            h_prev, c_prev, (i, f, o, g, tc) = steps[t]
            dh = dh_ext[t] + dh_rec
            dc = dc_rec + dh * o * (1.0 - tc * tc)
            da = np.concatenate([
                dc * g * i * (1.0 - i),
                dc * c_prev * f * (1.0 - f),
                dh * tc * o * (1.0 - o),
                dc * i * (1.0 - g * g),
            ], axis=1)
            x_t = layer_in[:, t, :]
            gW += x_t.T @ da
            gU += h_prev.T @ da
            gb += da.sum(axis=0)
            dx[t] = da @ cell.W.T
            dh_rec = da @ cell.U.T
            dc_rec = dc * f
        grads_by_layer.append([gW, gU, gb])
        dh_ext = dx
    grads = []
    for layer in reversed(grads_by_layer):
        grads += layer
    return grads + [g_readout_w, g_readout_b]


def gradient_check(net: LSTMNetwork, X, Y, epsilon: float = 1e-5,
                   n_sample: Optional[int] = None, rng: Optional[np.random.Generator] = None) -> float:
    """Max relative error between BPTT and central differences.

    Checks every parameter, or ``n_sample`` of them drawn with ``rng``.
    """
    grads = [g.reshape(-1) for g in bptt_gradients(net, X, Y)]
    flats = [p.reshape(-1) for p in net.parameters()]
    coords = [(k, i) for k, p in enumerate(flats) for i in range(p.size)]
    if n_sample is not None and n_sample < len(coords):
        rng = rng or np.random.default_rng(0)
        coords = [coords[j] for j in rng.choice(len(coords), n_sample, replace=False)]
    worst = 0.0
    for k, i in coords:
        p = flats[k]
        keep = p[i]
        p[i] = keep + epsilon
        up = sequence_loss(net, X, Y)
        p[i] = keep - epsilon
        down = sequence_loss(net, X, Y)
        p[i] = keep
        fd = (up - down) / (2 * epsilon)
        bp = grads[k][i]
        worst = max(worst, abs(bp - fd) / max(1e-8, abs(bp) + abs(fd)))
    return worst


@dataclass(frozen=True)
class LSTMTrainParams:
    epochs: int = 1000
    learning_rate: float = 0.1
    batch_size: int = 32
    seed: int = 0
    tol: float = 0.0
    patience: Optional[int] = None
    clip_norm: float = 1.0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1 or not self.learning_rate > 0:
            raise ValueError("need batch_size >= 1 and learning_rate > 0")


# divergence is detected from the loss itself, so overflow warnings are noise
@np.errstate(over="ignore", invalid="ignore")
def train_lstm(windows: Windows, net: LSTMNetwork, params: LSTMTrainParams = LSTMTrainParams()) -> LSTMNetwork:
    """Mini-batch SGD with global gradient-norm clipping.

    Works on a copy of ``net``; returns the weights with the lowest
    full-data loss seen at the end of any epoch (the initial weights when
    ``epochs`` is 0).
    """
    if windows.spec != net.spec:
        raise ValueError("windows and network disagree on lookback/lookforward")
    net = net.copy()
    net.normalizer = windows.normalizer
    rng = np.random.default_rng(params.seed)
    X, Y = windows.inputs, windows.targets
    n = len(windows)
    batch = min(params.batch_size, n)
    best, best_loss, stall = net.copy(), np.inf, 0
    for _ in range(params.epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            rows = order[start:start + batch]
            grads = bptt_gradients(net, X[rows], Y[rows])
            norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
            scale = params.learning_rate
            if norm > params.clip_norm:
                scale *= params.clip_norm / norm
            for p, g in zip(net.parameters(), grads):
                p -= scale * g
        current = sequence_loss(net, X, Y)
        if not np.isfinite(current):
            raise TrainingError("LSTM training diverged (non-finite loss); lower the learning rate")
        net.loss_trace.append(current)
        stall = 0 if current < best_loss - params.tol else stall + 1
        if current < best_loss:
            best_loss, best = current, net.copy()
        if params.patience is not None and stall >= params.patience:
            break
    best.loss_trace = list(net.loss_trace)
    return best


def fit(series, spec: WindowSpec, hidden_sizes: Sequence[int] = (16,),
        params: LSTMTrainParams = LSTMTrainParams()) -> LSTMNetwork:
    """Window the series, initialize from ``params.seed`` and train."""
    windows = make_windows(series, spec)
    net = init_network(hidden_sizes, spec, np.random.default_rng(params.seed))
    return train_lstm(windows, net, params)


@dataclass
class Forecast:
    dates: Optional[list[dt.date]]
    values: np.ndarray


def forecast(net: LSTMNetwork, series, steps: int, mode: str = "multi_step") -> Forecast:
    """Forecast with a trained network.

    ``multi_step`` continues past the end of ``series``: each block emits
    ``lookforward`` values from the latest window, predictions are fed back
    into the window, and the result is truncated to ``steps``.

    ``one_step`` re-predicts the last ``steps`` values of ``series``, each
    from the true ``lookback`` values preceding it (first output only).
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if net.normalizer is None:
        raise ValueError("network has no normalization parameters; train it first")
    values = _values(series)
    lb, lf = net.spec.lookback, net.spec.lookforward
    z = net.normalizer.normalize(values)
    start = series.start_date if isinstance(series, DailySeries) else None

    if mode == "multi_step":
        if len(z) < lb:
            raise ValueError(f"need at least {lb} values of history")
        window = z[-lb:].copy()
        out = []
        for _ in range(math.ceil(steps / lf)):
            block = forward_sequence(net, window)
            out.extend(block)
            window = np.concatenate([window, block])[-lb:]
        preds = np.asarray(out[:steps])
        first = len(z)
    elif mode == "one_step":
        if len(z) < lb + steps:
            raise ValueError(f"one_step over {steps} values needs at least {lb + steps} values")
        first = len(z) - steps
        windows = z[(first - lb + np.arange(steps))[:, None] + np.arange(lb)]
        preds = _forward_batch(net, windows)[0][:, 0]
    else:
        raise ValueError(f"unknown forecast mode {mode!r}")

    dates = None
    if start is not None:
        dates = [start + dt.timedelta(days=first + k) for k in range(steps)]
    return Forecast(dates, net.normalizer.denormalize(preds))
