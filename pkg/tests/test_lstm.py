import datetime as dt

import numpy as np
import pytest
from hypothesis import given, strategies as st

from trafficcast.lstm import (LSTMCellWeights, LSTMNetwork, LSTMTrainParams, Normalizer, TrainingError,
                              WindowSpec, bptt_gradients, cell_step, fit, forecast, forward_sequence,
                              gradient_check, init_network, make_windows, sequence_loss, train_lstm)
from trafficcast.timeseries import DailySeries, VehicleClass
from trafficcast import lstm as lstm_module


def tiny_net(seed, hidden=(3,), spec=WindowSpec(4, 1), scale=1.0):
    """Random network with every parameter uniform in [-scale, scale]."""
    rng = np.random.default_rng(seed)
    net = init_network(hidden, spec, rng)
    for p in net.parameters():
        p[...] = rng.uniform(-scale, scale, p.shape)
    return net


class TestWindows:
    def test_slicing(self):
        w = make_windows([1, 2, 3, 4, 5], WindowSpec(2, 1))
        X, Y = w.raw()
        np.testing.assert_allclose(X, [[1, 2], [2, 3], [3, 4]])
        np.testing.assert_allclose(Y, [[3], [4], [5]])
        np.testing.assert_allclose(w.inputs[0], [0, 0.25])

    def test_counts(self):
        assert len(make_windows(np.arange(5.0), WindowSpec(2, 2))) == 2
        assert len(make_windows(np.arange(1461.0), WindowSpec(100, 10))) == 1352

    def test_too_short(self):
        with pytest.raises(ValueError, match="at least 5"):
            make_windows([1.0, 2.0, 3.0, 4.0], WindowSpec(3, 2))

    @given(st.integers(1, 40), st.integers(1, 10), st.integers(0, 60))
    def test_count_formula(self, lookback, lookforward, extra):
        n = lookback + lookforward + extra
        w = make_windows(np.arange(n, dtype=float), WindowSpec(lookback, lookforward))
        assert len(w) == n - lookback - lookforward + 1
        assert w.inputs.shape[1] == lookback and w.targets.shape[1] == lookforward

    def test_flat_series_normalizes_to_zero(self):
        w = make_windows([4.0] * 6, WindowSpec(2, 1))
        assert np.all(w.inputs == 0)
        assert np.all(w.raw()[0] == 4.0)

    def test_csv(self):
        text = make_windows([1, 2, 3, 4], WindowSpec(2, 1)).to_csv()
        lines = text.splitlines()
        assert lines[0] == "X_0,X_1,Y_0"
        assert lines[1] == "1.0,2.0,3.0"
        assert len(lines) == 3

    def test_normalizer_round_trip(self):
        n = Normalizer.fit([3.0, 9.0])
        assert n.denormalize(n.normalize(5.0)) == pytest.approx(5.0, rel=1e-15)


class TestCell:
    def test_zero_weights(self):
        w = LSTMCellWeights.zeros(1, 2)
        h, c = cell_step(w, [0.7], np.zeros(2), np.zeros(2))
        assert h.tolist() == [0, 0] and c.tolist() == [0, 0]
        _, _, (i, f, o, g, _) = lstm_module._step(w, np.array([0.7]), np.zeros(2), np.zeros(2))
        assert i.tolist() == f.tolist() == o.tolist() == [0.5, 0.5]
        assert g.tolist() == [0, 0]

    def test_zero_weights_carry_half_memory(self):
        c_prev = np.array([1.2, -3.0])
        h, c = cell_step(LSTMCellWeights.zeros(1, 2), [5.0], np.zeros(2), c_prev)
        np.testing.assert_allclose(c, 0.5 * c_prev, rtol=1e-15)
        np.testing.assert_allclose(h, 0.5 * np.tanh(0.5 * c_prev), rtol=1e-15)

    def test_saturated_forget_gate_keeps_memory(self):
        w = LSTMCellWeights.zeros(1, 1)
        w.b[1] = 50.0   # forget gate
        w.b[0] = -50.0  # input gate closed
        _, c = cell_step(w, [1.0], [0.0], [0.8])
        assert c[0] == pytest.approx(0.8, rel=1e-12)

    def test_gate_views(self):
        w = LSTMCellWeights.zeros(2, 3)
        Wf, Uf, bf = w.gate("forget")
        assert Wf.shape == (2, 3) and Uf.shape == (3, 3) and bf.shape == (3,)
        bf += 1
        assert w.b.tolist() == [0] * 3 + [1] * 3 + [0] * 6

    def test_dimension_errors(self):
        with pytest.raises(ValueError):
            cell_step(LSTMCellWeights.zeros(1, 2), [1.0, 2.0], np.zeros(2), np.zeros(2))
        with pytest.raises(ValueError):
            LSTMCellWeights(np.zeros((1, 8)), np.zeros((2, 4)), np.zeros(8))


class TestForward:
    def test_zero_network(self):
        net = init_network((4,), WindowSpec(5, 3), np.random.default_rng(0))
        net.readout_w[...] = 0
        assert forward_sequence(net, np.ones(5)).tolist() == [0, 0, 0]

    def test_readout_bias_only(self):
        net = LSTMNetwork([LSTMCellWeights.zeros(1, 1)], np.ones((1, 1)), np.array([0.3]),
                          WindowSpec(6, 1))
        assert forward_sequence(net, np.random.default_rng(0).normal(size=6)).tolist() == [0.3]

    @pytest.mark.parametrize("hidden", [(2,), (3, 2)])
    def test_output_length(self, hidden):
        net = init_network(hidden, WindowSpec(7, 4), np.random.default_rng(1))
        assert forward_sequence(net, np.zeros(7)).shape == (4,)

    def test_forget_bias_initialized_to_one(self):
        net = init_network((5, 3), WindowSpec(2, 1), np.random.default_rng(2))
        for cell in net.cells:
            assert np.all(cell.gate("forget")[2] == 1.0)
            assert np.all(cell.gate("input")[2] == 0.0)


class TestGradients:
    @pytest.mark.parametrize("seed", range(5))
    def test_tiny_network(self, seed):
        net = tiny_net(seed)
        rng = np.random.default_rng(seed + 100)
        X, Y = rng.uniform(0, 1, (3, 4)), rng.uniform(0, 1, (3, 1))
        assert gradient_check(net, X, Y, 1e-5, n_sample=30, rng=rng) < 1e-6

    @pytest.mark.parametrize("seed", range(3))
    def test_stacked_network(self, seed):
        # two layers and several outputs; eps 1e-4 keeps roundoff out of the comparison
        net = tiny_net(seed, hidden=(3, 2), spec=WindowSpec(5, 2), scale=0.8)
        rng = np.random.default_rng(seed)
        X, Y = rng.uniform(0, 1, (4, 5)), rng.uniform(0, 1, (4, 2))
        assert gradient_check(net, X, Y, 1e-4) < 1e-6

    def test_gradient_order_matches_parameters(self):
        net = tiny_net(0, hidden=(3, 2), spec=WindowSpec(4, 2))
        grads = bptt_gradients(net, np.zeros((2, 4)), np.zeros((2, 2)))
        assert [g.shape for g in grads] == [p.shape for p in net.parameters()]


def sine_series(n=300, period=35):
    return 2 + np.sin(2 * np.pi * np.arange(n) / period)


class TestTraining:
    def test_zero_epochs(self):
        w = make_windows(sine_series(60), WindowSpec(5, 1))
        net = init_network((3,), w.spec, np.random.default_rng(0))
        out = train_lstm(w, net, LSTMTrainParams(epochs=0))
        assert all(np.array_equal(a, b) for a, b in zip(out.parameters(), net.parameters()))
        assert out.normalizer == w.normalizer

    def test_loss_decreases_and_is_deterministic(self):
        p = LSTMTrainParams(epochs=15, learning_rate=0.2, batch_size=16, seed=3)
        a = fit(sine_series(), WindowSpec(10, 1), (6,), p)
        b = fit(sine_series(), WindowSpec(10, 1), (6,), p)
        assert a.loss_trace == b.loss_trace
        assert min(a.loss_trace) < a.loss_trace[0]
        w = make_windows(sine_series(), WindowSpec(10, 1))
        assert sequence_loss(a, w.inputs, w.targets) == min(a.loss_trace)

    def test_spec_mismatch(self):
        w = make_windows(sine_series(60), WindowSpec(5, 1))
        with pytest.raises(ValueError):
            train_lstm(w, init_network((3,), WindowSpec(6, 1), np.random.default_rng(0)))

    def test_divergence(self):
        w = make_windows(sine_series(60), WindowSpec(5, 1))
        net = init_network((3,), w.spec, np.random.default_rng(0))
        with pytest.raises(TrainingError):
            train_lstm(w, net, LSTMTrainParams(epochs=5, learning_rate=np.inf, clip_norm=np.inf))

    def test_round_trip(self):
        net = fit(sine_series(80), WindowSpec(6, 2), (3, 2), LSTMTrainParams(epochs=2, seed=1))
        back = LSTMNetwork.from_dict(net.to_dict())
        np.testing.assert_array_equal(forecast(back, sine_series(80), 5).values,
                                      forecast(net, sine_series(80), 5).values)


@pytest.fixture(scope="module")
def net():
    return fit(sine_series(120), WindowSpec(8, 3), (4,), LSTMTrainParams(epochs=3, seed=0))


class TestForecast:
    def test_multi_step_blocks(self, net, monkeypatch):
        calls = []
        real = lstm_module.forward_sequence
        monkeypatch.setattr(lstm_module, "forward_sequence",
                            lambda n, w: calls.append(1) or real(n, w))
        assert len(forecast(net, sine_series(120), 3).values) == 3
        assert len(calls) == 1
        calls.clear()
        assert len(forecast(net, sine_series(120), 8).values) == 8
        assert len(calls) == 3

    def test_multi_step_feeds_predictions_back(self, net):
        full = forecast(net, sine_series(120), 6).values
        first = forecast(net, sine_series(120), 3).values
        np.testing.assert_array_equal(full[:3], first)
        extended = np.concatenate([sine_series(120), first])
        np.testing.assert_allclose(forecast(net, extended, 3).values, full[3:], rtol=1e-12)

    def test_one_step_uses_true_windows(self, net):
        s = sine_series(120)
        out = forecast(net, s, 4, "one_step").values
        for k in range(4):
            ref = forecast(net, s[:len(s) - 4 + k], 1).values[0]
            assert out[k] == pytest.approx(ref, rel=1e-12)

    def test_dates(self, net):
        s = DailySeries(1, VehicleClass.TC1, dt.date(2020, 1, 1), sine_series(120))
        assert forecast(net, s, 2).dates == [dt.date(2020, 4, 30), dt.date(2020, 5, 1)]
        assert forecast(net, s, 2, "one_step").dates == [dt.date(2020, 4, 28), dt.date(2020, 4, 29)]

    def test_constant_series(self):
        net = fit([5.0] * 40, WindowSpec(4, 2), (2,), LSTMTrainParams(epochs=60, seed=0))
        out = forecast(net, [5.0] * 40, 6, "one_step").values
        np.testing.assert_allclose(out, 5.0, atol=1e-3)

    def test_errors(self, net):
        with pytest.raises(ValueError):
            forecast(net, sine_series(120), 0)
        with pytest.raises(ValueError):
            forecast(net, sine_series(120), 2, "sideways")
        with pytest.raises(ValueError):
            forecast(net, sine_series(5), 2)
