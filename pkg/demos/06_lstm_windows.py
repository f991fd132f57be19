"""Sliding windows and a from-scratch LSTM.

A noiseless sine wave is cut into (lookback, lookforward) windows, a
16-unit LSTM is trained with backpropagation through time, and the last
100 points are forecast one step at a time from true history, then
recursively from the network's own output.
"""

import time

import numpy as np

from trafficcast.evaluation import smape
from trafficcast.lstm import (LSTMTrainParams, WindowSpec, fit, forecast, gradient_check,
                              init_network, make_windows)

print("windows for 1461 days, lookback 100, lookforward 10:",
      len(make_windows(np.arange(1461.0), WindowSpec(100, 10))))
w = make_windows([1, 2, 3, 4, 5], WindowSpec(2, 1))
print(w.to_csv())

rng = np.random.default_rng(0)
tiny = init_network((3,), WindowSpec(4, 1), rng)
for p in tiny.parameters():
    p[...] = rng.uniform(-1, 1, p.shape)
print(f"BPTT vs central differences: {gradient_check(tiny, rng.uniform(size=(3, 4)), rng.uniform(size=(3, 1))):.1e}")

x = 2.0 + np.sin(2 * np.pi * np.arange(700) / 35)
start = time.perf_counter()
net = fit(x[:600], WindowSpec(20, 1), (16,), LSTMTrainParams(epochs=300, seed=0))
print(f"trained in {time.perf_counter() - start:.0f} s, final loss {net.loss_trace[-1]:.2e}")

one = forecast(net, x, 100, "one_step").values
print(f"one-step SMAPE on the held-out 100 points: {smape(x[600:], one):.3f}%")
multi = forecast(net, x[:600], 100, "multi_step").values
print(f"recursive 100-step SMAPE: {smape(x[600:], multi):.3f}%")
