"""Multi-layer perceptron regressor trained by mini-batch SGD.

The network works in scaled space: inputs and targets are min-max scaled
with statistics from the training rows, and :func:`predict` undoes the
target scaling.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .features import ScalerParams, fit_scaler, inverse_transform_rows, transform_rows
from .serialization import hex_array, unhex_array


class TrainingError(RuntimeError):
    pass


ACTIVATIONS = {
    "relu": (lambda z: np.maximum(z, 0.0), lambda z, a: (z > 0).astype(z.dtype)),
    "tanh": (np.tanh, lambda z, a: 1.0 - a * a),
    "logistic": (lambda z: 0.5 * (1.0 + np.tanh(0.5 * z)), lambda z, a: a * (1.0 - a)),
}


@dataclass(frozen=True)
class MLPParams:
    hidden_layer_sizes: tuple[int, ...] = (200, 100, 100, 200, 100, 200)
    alpha: float = 0.01
    max_iter: int = 80000
    batch_size: int = 40
    learning_rate: float = 1e-3
    seed: int = 0
    activation: str = "relu"
    tol: float = 1e-4
    patience: int = 20
    scaling: Optional[str] = "minmax01"
    scale_target: bool = True

    def __post_init__(self):
        object.__setattr__(self, "hidden_layer_sizes", tuple(int(h) for h in self.hidden_layer_sizes))
        if any(h < 1 for h in self.hidden_layer_sizes):
            raise ValueError("hidden layer sizes must be >= 1")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.max_iter < 0 or self.batch_size < 1 or not self.learning_rate > 0:
            raise ValueError("need max_iter >= 0, batch_size >= 1, learning_rate > 0")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass
class MLPModel:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "relu"
    x_scaler: Optional[ScalerParams] = None
    y_scaler: Optional[ScalerParams] = None
    loss_trace: list[float] = field(default_factory=list)

    def __post_init__(self):
        for a, b in zip(self.weights[:-1], self.weights[1:]):
            if a.shape[1] != b.shape[0]:
                raise ValueError("layer dimensions do not chain")
        if self.weights[-1].shape[1] != 1:
            raise ValueError("output layer must have a single unit")

    @property
    def n_inputs(self) -> int:
        return self.weights[0].shape[0]

    @property
    def n_parameters(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> "MLPModel":
        return MLPModel([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                        self.activation, self.x_scaler, self.y_scaler, list(self.loss_trace))

    def to_dict(self) -> dict:
        return {
            "activation": self.activation,
            "weights": [hex_array(w) for w in self.weights],
            "biases": [hex_array(b) for b in self.biases],
            "x_scaler": _scaler_dict(self.x_scaler),
            "y_scaler": _scaler_dict(self.y_scaler),
            "loss_trace": hex_array(self.loss_trace),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MLPModel":
        return cls([unhex_array(w) for w in d["weights"]], [unhex_array(b) for b in d["biases"]],
                   d["activation"], _scaler_from(d["x_scaler"]), _scaler_from(d["y_scaler"]),
                   unhex_array(d["loss_trace"]).tolist())


def _scaler_dict(s: Optional[ScalerParams]):
    if s is None:
        return None
    return {"mode": s.mode, "loc": hex_array(s.loc), "spread": hex_array(s.spread)}


def _scaler_from(d) -> Optional[ScalerParams]:
    if d is None:
        return None
    return ScalerParams(d["mode"], unhex_array(d["loc"]), unhex_array(d["spread"]))


def init_network(n_inputs: int, hidden: Sequence[int], rng: np.random.Generator,
                 activation: str = "relu") -> MLPModel:
    """Glorot-uniform weights, zero biases."""
    sizes = [n_inputs, *hidden, 1]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MLPModel(weights, biases, activation)


def _forward_all(model: MLPModel, X: np.ndarray):
    act = ACTIVATIONS[model.activation][0]
    zs, acts = [], [X]
    a = X
    last = len(model.weights) - 1
    for k, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w + b
        a = z if k == last else act(z)
        zs.append(z)
        acts.append(a)
    return zs, acts


def _as_rows(model: MLPModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != model.n_inputs:
        raise ValueError(f"expected {model.n_inputs} inputs, got {X.shape[1]}")
    return X


def forward(model: MLPModel, x) -> float:
    """Network output for one input vector, in the network's own (scaled) space."""
    X = _as_rows(model, x)
    if X.shape[0] != 1:
        raise ValueError("forward takes a single feature vector; use predict for batches")
    return float(_forward_all(model, X)[1][-1][0, 0])


def loss(model: MLPModel, X, y, alpha: float) -> float:
    """Mean squared error plus ``alpha / (2 n) * sum(W ** 2)`` (biases unpenalized)."""
    X = _as_rows(model, X)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    out = _forward_all(model, X)[1][-1][:, 0]
    n = X.shape[0]
    penalty = sum(float(np.sum(w * w)) for w in model.weights)
    return float(np.mean((out - y) ** 2) + alpha / (2 * n) * penalty)


def gradients(model: MLPModel, X, y, alpha: float, n_total: Optional[int] = None):
    """Backprop gradients of :func:`loss` with respect to weights and biases.

    ``n_total`` sets the penalty normalizer when X is a mini-batch; by default
    it is the batch size, so the gradients match :func:`loss` on the same rows.
    """
    X = _as_rows(model, X)
    y = np.asarray(y, dtype=np.float64).reshape(-1, 1)
    n = X.shape[0]
    n_pen = n if n_total is None else n_total
    deriv = ACTIVATIONS[model.activation][1]
    zs, acts = _forward_all(model, X)
    delta = 2.0 * (acts[-1] - y) / n
    gw, gb = [None] * len(model.weights), [None] * len(model.weights)
    for k in range(len(model.weights) - 1, -1, -1):
        gw[k] = acts[k].T @ delta + (alpha / n_pen) * model.weights[k]
        gb[k] = delta.sum(axis=0)
        if k:
            delta = (delta @ model.weights[k].T) * deriv(zs[k - 1], acts[k])
    return gw, gb


def gradient_check(model: MLPModel, X, y, epsilon: float = 1e-5, alpha: float = 0.0) -> float:
    """Largest relative gap between backprop and central-difference gradients."""
    X = _as_rows(model, X)
    gw, gb = gradients(model, X, y, alpha)
    worst = 0.0
    for params, grads in ((model.weights, gw), (model.biases, gb)):
        for p, g in zip(params, grads):
            flat, gflat = p.reshape(-1), g.reshape(-1)
            for i in range(flat.size):
                keep = flat[i]
                flat[i] = keep + epsilon
                up = loss(model, X, y, alpha)
                flat[i] = keep - epsilon
                down = loss(model, X, y, alpha)
                flat[i] = keep
                fd = (up - down) / (2 * epsilon)
                rel = abs(gflat[i] - fd) / max(1e-8, abs(gflat[i]) + abs(fd))
                worst = max(worst, rel)
    return worst


# divergence is detected from the loss itself, so overflow warnings are noise
@np.errstate(over="ignore", invalid="ignore")
def train(X, y, params: MLPParams = MLPParams()) -> MLPModel:
    """Fit an MLP regressor.

    Epochs visit the rows in a freshly shuffled order. Training stops after
    ``max_iter`` epochs, or once the full-data loss has failed to beat the
    best loss by ``tol`` for ``patience`` epochs in a row; the best weights
    seen are returned.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if X.shape[0] != y.shape[0] or X.shape[0] == 0:
        raise ValueError("X and y must be non-empty with matching rows")
    rng = np.random.default_rng(params.seed)

    x_scaler = fit_scaler(X, params.scaling) if params.scaling else None
    y_scaler = fit_scaler(y.reshape(-1, 1), "minmax01") if params.scale_target else None
    Xs = transform_rows(X, x_scaler) if x_scaler else X
    ys = transform_rows(y.reshape(-1, 1), y_scaler)[:, 0] if y_scaler else y

    model = init_network(X.shape[1], params.hidden_layer_sizes, rng, params.activation)
    model.x_scaler, model.y_scaler = x_scaler, y_scaler
    n = Xs.shape[0]
    batch = min(params.batch_size, n)
    best = model.copy()
    best_loss = np.inf
    stall = 0
    for _ in range(params.max_iter):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            rows = order[start:start + batch]
            gw, gb = gradients(model, Xs[rows], ys[rows], params.alpha, n_total=n)
            for k in range(len(model.weights)):
                model.weights[k] -= params.learning_rate * gw[k]
                model.biases[k] -= params.learning_rate * gb[k]
        current = loss(model, Xs, ys, params.alpha)
        if not np.isfinite(current):
            raise TrainingError("training diverged (non-finite loss); lower the learning rate")
        model.loss_trace.append(current)
        if current < best_loss - params.tol:
            stall = 0
        else:
            stall += 1
        if current < best_loss:
            best_loss = current
            best = model.copy()
        if stall >= params.patience:
            break
    best.loss_trace = list(model.loss_trace)
    return best


def predict(model: MLPModel, X) -> np.ndarray:
    """Predictions in original target units for raw (unscaled) feature rows."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1) if model.n_inputs == 1 else X.reshape(1, -1)
    if model.x_scaler is not None:
        X = transform_rows(X, model.x_scaler)
    out = _forward_all(model, _as_rows(model, X))[1][-1]
    if model.y_scaler is not None:
        out = inverse_transform_rows(out, model.y_scaler)
    return out[:, 0]


def params_to_dict(params: MLPParams) -> dict:
    d = asdict(params)
    d["hidden_layer_sizes"] = list(params.hidden_layer_sizes)
    return d
