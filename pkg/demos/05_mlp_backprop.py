"""A small multilayer perceptron: gradients first, then training.

Backpropagation is checked against central differences before anything is
trained. The network then learns y = 3x and, separately, a calendar
regression on a synthetic station.
"""

import datetime as dt

import numpy as np

from trafficcast.evaluation import smape
from trafficcast.features import build_matrix
from trafficcast.mlp import MLPModel, MLPParams, gradient_check, predict, train
from trafficcast.synthgen import SynthConfig, generate
from trafficcast.timeseries import SplitSpec, split_train_test

rng = np.random.default_rng(0)
sizes = (4, 8, 6, 1)
net = MLPModel([rng.normal(0, 0.8, (a, b)) for a, b in zip(sizes[:-1], sizes[1:])],
               [rng.normal(0, 0.3, b) for b in sizes[1:]], "tanh")
X, y = rng.normal(size=(10, 4)), rng.normal(size=10)
print(f"{net.n_parameters} parameters, max relative gradient error "
      f"{gradient_check(net, X, y, 1e-5, alpha=0.1):.1e}")

x = np.linspace(0, 1, 100).reshape(-1, 1)
model = train(x, 3 * x[:, 0], MLPParams((8,), alpha=0.0, max_iter=2000, batch_size=10,
                                         learning_rate=0.05, seed=1))
rmse = np.sqrt(np.mean((predict(model, x) - 3 * x[:, 0]) ** 2))
print(f"y = 3x: RMSE {rmse:.4f} after {len(model.loss_trace)} epochs")

series = generate(SynthConfig(n_days=730, weekly_amplitudes=(0.9, 0.9, 0.9, 0.95, 1.1, 1.2, 1.05),
                              annual_amplitude=0.2, noise_sigma=0.03, seed=2)).series
train_s, test_s = split_train_test(series, SplitSpec(dt.date(2014, 12, 31)))
m = build_matrix(train_s)
# one modest layer trained for the full budget (tol 0 switches early stopping off)
params = MLPParams((32,), alpha=0.0, max_iter=3000, batch_size=16, learning_rate=0.1, tol=0.0,
                   patience=10 ** 6, seed=3)
model = train(m.rows, m.targets, params)
pred = predict(model, build_matrix(test_s).rows)
print(f"calendar MLP: {len(model.loss_trace)} epochs, test SMAPE {smape(test_s.values, pred):.2f}%")
