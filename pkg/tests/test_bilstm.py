import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pqcforecast import bilstm
from pqcforecast.bilstm import BilstmLayer, BilstmModel, LstmCell
from pqcforecast.errors import SchemaError
from pqcforecast.optim import TrainConfig

TINY_UNITS = (4, 2, 1, 1)


def sig(z):
    return 1 / (1 + math.exp(-z))


def test_zero_weights_predict_zero():
    model = BilstmModel.initialize(TINY_UNITS, seed=0)
    for cell in (c for layer in model.layers for c in layer.cells):
        cell.W[:] = 0
        cell.b[:] = 0
    np.testing.assert_array_equal(model.predict(np.ones((3, 16))), np.zeros(3))


@pytest.mark.parametrize("activation", ["tanh", "linear"])
def test_single_step_by_hand(activation):
    # one unit, one step: h_prev = c_prev = 0, so h = o * act(i * g)
    W = np.array([[0.3, -0.2, 0.5, 0.7], [9.0, 9.0, 9.0, 9.0]])
    b = np.array([0.1, 1.0, -0.4, 0.2])
    cell = LstmCell(1, 1, activation, W, b)
    x = 0.8
    i = sig(0.3 * x + 0.1)
    o = sig(0.5 * x - 0.4)
    g = math.tanh(0.7 * x + 0.2)
    c = i * g
    expected = o * (math.tanh(c) if activation == "tanh" else c)
    H, _ = cell.forward(np.array([[[x]]]))
    assert H[0, 0, 0] == pytest.approx(expected, abs=1e-15)


def test_two_steps_by_hand():
    W = np.array([[0.3, -0.2, 0.5, 0.7], [0.4, 0.1, -0.3, 0.6]])
    b = np.array([0.1, 1.0, -0.4, 0.2])
    cell = LstmCell(1, 1, "tanh", W, b)
    h = c = 0.0
    for x in (0.8, -0.5):
        z = [W[0, k] * x + W[1, k] * h + b[k] for k in range(4)]
        i, f, o, g = sig(z[0]), sig(z[1]), sig(z[2]), math.tanh(z[3])
        c = f * c + i * g
        h = o * math.tanh(c)
    H, _ = cell.forward(np.array([[[0.8], [-0.5]]]))
    assert H[0, -1, 0] == pytest.approx(h, abs=1e-15)


def test_cell_rejects_bad_input():
    cell = LstmCell(2, 3)
    with pytest.raises(ValueError):
        cell.forward(np.zeros((1, 4, 1)))
    with pytest.raises(ValueError):
        LstmCell(1, 1, "relu")


def test_default_initialisation():
    model = BilstmModel.initialize(bilstm.REDUCED_UNITS, seed=5)
    cell = model.bd_sin.forward_cell
    limit = 1 / math.sqrt(cell.input_dim + cell.hidden_dim)
    assert np.all(np.abs(cell.W) <= limit)
    h = cell.hidden_dim
    np.testing.assert_array_equal(cell.b[h : 2 * h], 1.0)
    np.testing.assert_array_equal(np.delete(cell.b, np.s_[h : 2 * h]), 0.0)
    assert model.bd_1.forward_cell.activation == "linear"
    assert [layer.return_sequences for layer in model.layers] == [True, True, False, False]


def test_layer_reversal_symmetry_with_tied_cells():
    rng = np.random.default_rng(3)
    cell = LstmCell.random(2, 3, "tanh", rng)
    seq_layer = BilstmLayer(cell, cell, return_sequences=True)
    last_layer = BilstmLayer(cell, cell, return_sequences=False)
    x = rng.normal(size=(2, 7, 2))
    swap = lambda a: np.concatenate([a[..., 3:], a[..., :3]], axis=-1)
    out, _ = seq_layer.forward(x)
    out_rev, _ = seq_layer.forward(x[:, ::-1])
    np.testing.assert_allclose(out_rev, swap(out[:, ::-1]), atol=1e-14)
    fin, _ = last_layer.forward(x)
    fin_rev, _ = last_layer.forward(x[:, ::-1])
    np.testing.assert_allclose(fin_rev, swap(fin), atol=1e-14)


def loss_at(model, x, y):
    return float(np.mean((model.predict(x) - y) ** 2))


def relative_errors(model, x, y, coords, h=1e-5):
    _, grads = bilstm.mse_and_grads(model, x, y)
    errs = []
    for p_idx, flat_idx in coords:
        p = model.params()[p_idx]
        g = grads[p_idx].ravel()[flat_idx]
        old = p.ravel()[flat_idx]
        p.ravel()[flat_idx] = old + h
        up = loss_at(model, x, y)
        p.ravel()[flat_idx] = old - h
        down = loss_at(model, x, y)
        p.ravel()[flat_idx] = old
        num = (up - down) / (2 * h)
        errs.append(abs(g - num) / max(abs(g), abs(num), 1e-7))
    return errs


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(0)
    worst = 0.0
    for draw in range(10):
        model = BilstmModel.initialize(TINY_UNITS, seed=draw)
        x = rng.uniform(0.2, 0.8, (3, 6))
        y = rng.uniform(0.2, 0.8, 3)
        params = model.params()
        coords = []
        for _ in range(10):
            k = int(rng.integers(len(params)))
            coords.append((k, int(rng.integers(params[k].size))))
        worst = max(worst, max(relative_errors(model, x, y, coords)))
    assert worst < 1e-4


def test_params_and_grads_align():
    model = BilstmModel.initialize(TINY_UNITS, seed=1)
    _, grads = bilstm.mse_and_grads(model, np.ones((2, 5)), np.zeros(2))
    assert [g.shape for g in grads] == [p.shape for p in model.params()]
    assert sum(p.size for p in model.params()) == model.n_params


def test_param_count_formula():
    assert bilstm.lstm_param_count(1, 1) == 12
    assert bilstm.lstm_param_count(64, 8) == 4 * (72 * 8 + 8)
    reduced = bilstm.param_count_report(bilstm.REDUCED_UNITS)
    assert reduced["total"] == BilstmModel.initialize(bilstm.REDUCED_UNITS).n_params == 14_048
    full = bilstm.param_count_report()
    assert full["total"] == 209_696
    assert full["difference"] == 209_696 - 175_648


@settings(max_examples=15, deadline=None)
@given(st.tuples(st.integers(1, 6), st.integers(1, 4), st.integers(1, 3)))
def test_param_count_matches_model(sizes):
    u_seq, u_sin, u_out = sizes
    units = (u_seq, u_sin, u_out, u_out)
    assert BilstmModel.initialize(units).n_params == bilstm.param_count_report(units)["total"]


def test_mismatched_branch_widths_rejected():
    with pytest.raises(ValueError):
        BilstmModel.initialize((4, 2, 1, 2))


def toy_dataset(n=20, seed=0, t=8):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.2, 0.8, (n, t))
    return SimpleNamespace(train_x=x, train_y=x.mean(axis=1))


def test_zero_learning_rate_leaves_weights():
    model = BilstmModel.initialize(TINY_UNITS, seed=2)
    trained, history = bilstm.train_bilstm(model, toy_dataset(), TrainConfig(epochs=2, lr=0.0))
    for a, b in zip(model.params(), trained.params()):
        np.testing.assert_array_equal(a, b)
    assert len(history) == 2 and history[0] == pytest.approx(history[1])


def test_training_history_and_immutability():
    model = BilstmModel.initialize(TINY_UNITS, seed=2)
    before = [p.copy() for p in model.params()]
    _, history = bilstm.train_bilstm(model, toy_dataset(), TrainConfig(epochs=7, batch_size=8))
    assert len(history) == 7
    for a, b in zip(before, model.params()):
        np.testing.assert_array_equal(a, b)
    with pytest.raises(ValueError):
        bilstm.train_bilstm(model, toy_dataset(n=0), TrainConfig(epochs=1))


def test_single_sample_overfit():
    ds = toy_dataset(n=1, seed=4)
    ds.train_y = np.array([0.63])
    _, history = bilstm.train_bilstm(
        BilstmModel.initialize(TINY_UNITS, seed=4), ds, TrainConfig(epochs=400, batch_size=None)
    )
    assert history[-1] < 1e-6


def test_clip_norm_bounds_update():
    model = BilstmModel.initialize(TINY_UNITS, seed=6)
    ds = toy_dataset()
    trained, _ = bilstm.train_bilstm(
        model, ds, TrainConfig(epochs=1, lr=0.01, batch_size=None, clip_norm=1e-3)
    )
    # Adam's first step is lr * sign(g) regardless of clipping
    for a, b in zip(model.params(), trained.params()):
        assert np.max(np.abs(a - b)) <= 0.01 + 1e-12


def test_json_round_trip(tmp_path):
    model = BilstmModel.initialize(TINY_UNITS, seed=9)
    path = tmp_path / "b.json"
    model.save(path)
    again = BilstmModel.load(path)
    x = np.random.default_rng(0).uniform(size=(4, 16))
    np.testing.assert_array_equal(again.predict(x), model.predict(x))
    assert again.units == TINY_UNITS and again.seed == 9
    assert bilstm.model_forward(again, x[0]) == model.predict(x[:1])[0]


def test_from_dict_rejects_other_documents():
    with pytest.raises(SchemaError):
        BilstmModel.from_dict({"schema_version": 1, "model": "qnn"})
    doc = BilstmModel.initialize(TINY_UNITS).to_dict()
    del doc["layers"][0]
    with pytest.raises(SchemaError):
        BilstmModel.from_dict(doc)
