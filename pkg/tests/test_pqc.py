import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pqcforecast import pqc
from pqcforecast.errors import ConfigurationError, SchemaError
from pqcforecast.optim import Adam, TrainConfig
from pqcforecast.pqc import PqcModel, PqcTopology


def toy_model(t, layers=("XX",)):
    topo = PqcTopology(1, layers)
    return PqcModel(topo, np.full((len(layers), 1), t))


def small_model(n_inputs, layers, seed):
    return PqcModel.initialize(PqcTopology(n_inputs, layers), seed=seed)


def test_encode_examples():
    np.testing.assert_allclose(pqc.encode([0.2, 0.4, 0.6]), [0.3, 0.5, 0.7])
    np.testing.assert_allclose(pqc.encode([0.5] * 16), [0.5] * 16)
    np.testing.assert_allclose(pqc.encode([0.0, 0.0, 1.0]), [0.5, 0.5, 1.0])
    np.testing.assert_allclose(pqc.encode([0.0, 0.9, 1.0]), [0.0, 0.5, 0.6])


def test_encode_clips_and_batches():
    batch = np.array([[0.0, 0.1, 0.9], [0.3, 0.3, 0.3]])
    np.testing.assert_allclose(pqc.encode(batch), [[0.4, 0.5, 1.0], [0.5, 0.5, 0.5]])
    with pytest.raises(ValueError):
        pqc.encode(np.zeros(15), n_inputs=16)
    with pytest.raises(ValueError):
        pqc.encode(np.zeros((2, 2, 2)))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=20), st.floats(-3, 3))
def test_encode_shift_invariant_and_bounded(window, c):
    a = pqc.encode(window)
    b = pqc.encode(np.asarray(window) + c)
    np.testing.assert_allclose(a, b, atol=1e-9)
    assert np.all((a >= 0) & (a <= 1))


@pytest.mark.parametrize("t", [0.0, 0.25, 0.5, 1.0, 1.5])
def test_toy_forward_closed_form(t):
    # XX^t on |00> leaves the readout in state 1 with probability sin^2(pi t / 2)
    model = toy_model(t)
    assert pqc.forward(model, [0.0]) == pytest.approx(math.sin(math.pi * t / 2) ** 2, abs=1e-14)
    assert pqc.forward_statevector(model, [0.0]) == pytest.approx(
        math.sin(math.pi * t / 2) ** 2, abs=1e-14
    )


def test_toy_gradient_closed_form():
    model = toy_model(0.5)
    assert pqc.gradient(model, [0.0])[0] == pytest.approx(math.pi / 2, abs=1e-12)
    assert pqc.gradient_statevector(model, [0.0])[0] == pytest.approx(math.pi / 2, abs=1e-12)


def test_zz_only_circuit_never_flips_readout():
    model = small_model(3, ("ZZ", "ZZ"), seed=5)
    assert pqc.forward(model, [0.3, 0.9, 0.1]) == pytest.approx(0.0, abs=1e-14)


def test_zero_parameters_give_zero():
    model = PqcModel()
    assert pqc.forward(model, np.full(16, 0.5)) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize(
    "n_inputs, layers",
    [
        (1, ("XX", "YY")),
        (2, ("XX", "ZZ", "YY")),
        (3, pqc.DEFAULT_LAYERS),
        (5, ("YY", "XX", "ZZ", "ZZ")),
        (4, ("XX", "XX")),
    ],
)
def test_branch_path_matches_statevector(n_inputs, layers):
    rng = np.random.default_rng(n_inputs)
    for seed in range(4):
        model = small_model(n_inputs, layers, seed)
        x = rng.uniform(0, 1, n_inputs)
        assert pqc.forward(model, x) == pytest.approx(pqc.forward_statevector(model, x), abs=1e-12)
        np.testing.assert_allclose(
            pqc.gradient(model, x), pqc.gradient_statevector(model, x), atol=1e-10
        )


def test_full_model_matches_statevector():
    model = PqcModel.initialize(seed=3)
    x = np.random.default_rng(3).uniform(0, 1, 16)
    assert pqc.forward(model, x) == pytest.approx(pqc.forward_statevector(model, x), abs=1e-12)
    np.testing.assert_allclose(pqc.gradient(model, x), pqc.gradient_statevector(model, x), atol=1e-10)


def central_difference(model, x, h=1e-4):
    flat = model.params.ravel()
    out = np.zeros(flat.size)
    for k in range(flat.size):
        plus, minus = model.copy(), model.copy()
        plus.params.ravel()[k] += h
        minus.params.ravel()[k] -= h
        out[k] = (pqc.forward(plus, x) - pqc.forward(minus, x)) / (2 * h)
    return out


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_gradient_matches_finite_differences(seed):
    model = small_model(4, pqc.DEFAULT_LAYERS, seed)
    x = np.random.default_rng(seed).uniform(0, 1, 4)
    analytic = pqc.gradient(model, x)
    numeric = central_difference(model, x)
    scale = np.maximum(np.abs(numeric), 1e-2)
    assert np.max(np.abs(analytic - numeric) / scale) < 1e-4


def test_batched_predict_matches_single():
    model = PqcModel.initialize(seed=8)
    x = np.random.default_rng(8).uniform(0, 1, (70, 16))
    values, grads = pqc.predict(model, x, with_grad=True)
    assert values.shape == (70,) and grads.shape == (70, 6, 16)
    for i in (0, 33, 69):
        assert values[i] == pytest.approx(pqc.forward(model, x[i]), abs=1e-13)
        np.testing.assert_allclose(grads[i].ravel(), pqc.gradient(model, x[i]), atol=1e-12)


def test_single_precision_close_to_double():
    model = PqcModel.initialize(seed=9)
    x = np.random.default_rng(9).uniform(0, 1, (40, 16))
    v1, g1 = pqc.predict(model, x, with_grad=True)
    v2, g2 = pqc.predict(model, x, with_grad=True, precision="single")
    assert np.max(np.abs(v1 - v2)) < 1e-5
    assert np.max(np.abs(g1 - g2)) < 1e-5


def test_sample_length_checked():
    with pytest.raises(ValueError):
        pqc.forward(PqcModel(), np.zeros(15))
    with pytest.raises(ValueError):
        pqc.forward(PqcModel(), np.zeros((2, 16)))


def test_param_count_and_shape():
    model = PqcModel.initialize(seed=0)
    assert model.n_params == 96
    assert model.params.shape == (6, 16)
    assert np.all((model.params >= 0) & (model.params < 2))
    assert len(pqc.circuit_ops(model, np.zeros(16))) == 16 + 96


def test_topology_validation():
    with pytest.raises(ConfigurationError):
        PqcTopology(16, ("XX", "HH"))
    with pytest.raises(ConfigurationError):
        PqcTopology(0)
    with pytest.raises(ConfigurationError):
        PqcModel(output_mode="sideways")


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), k=st.integers(0, 95), shift=st.sampled_from([-2, 2, 4]))
def test_parameter_periodicity(seed, k, shift):
    model = PqcModel.initialize(seed=seed)
    x = np.random.default_rng(seed).uniform(0, 1, 16)
    moved = model.copy()
    moved.params.ravel()[k] += shift
    assert pqc.forward(moved, x) == pytest.approx(pqc.forward(model, x), abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_output_is_probability(seed):
    rng = np.random.default_rng(seed)
    model = PqcModel(params=rng.uniform(-4, 4, (6, 16)))
    values = pqc.predict(model, rng.uniform(0, 1, (8, 16)))
    assert np.all((values >= -1e-12) & (values <= 1 + 1e-12))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), c=st.floats(-0.3, 0.3))
def test_forecast_shift_equivariant_in_centred_mode(seed, c):
    rng = np.random.default_rng(seed)
    model = PqcModel.initialize(seed=seed)
    w = rng.uniform(0.3, 0.7, (3, 16))
    np.testing.assert_allclose(
        pqc.predict_windows(model, w + c), pqc.predict_windows(model, w) + c, atol=1e-12
    )


def test_absolute_mode_is_shift_invariant():
    model = PqcModel.initialize(seed=1, output_mode="absolute")
    w = np.random.default_rng(1).uniform(0.3, 0.7, (3, 16))
    np.testing.assert_allclose(
        pqc.predict_windows(model, w + 0.1), pqc.predict_windows(model, w), atol=1e-12
    )


def test_training_targets_and_decode_are_inverse():
    model = PqcModel()
    w = np.random.default_rng(0).uniform(0, 1, (5, 16))
    y = np.random.default_rng(1).uniform(0, 1, 5)
    r = pqc.training_targets(model, w, y)
    np.testing.assert_allclose(pqc.decode(model, w, r), y, atol=1e-15)


def tiny_dataset(n=24, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.3, 0.7, (n, 16))
    return SimpleNamespace(train_x=x, train_y=np.median(x, axis=1) + rng.normal(0, 0.02, n))


def test_first_adam_step_moves_each_param_by_lr():
    model = PqcModel.initialize(seed=2)
    ds = tiny_dataset()
    trained, _ = pqc.train(model, ds, TrainConfig(epochs=1, lr=0.01, batch_size=None), precision="double")
    x = pqc.encode(ds.train_x)
    _, g = pqc.mse_and_grad(model, x, pqc.training_targets(model, ds.train_x, ds.train_y))
    # bias-corrected first step is -lr * g / (|g| + eps), i.e. lr wherever |g| >> eps
    np.testing.assert_allclose(
        trained.params - model.params, -0.01 * g / (np.abs(g) + 1e-8), atol=1e-12
    )
    big = np.abs(g) > 1e-5
    assert big.sum() >= 10
    np.testing.assert_allclose(np.abs(trained.params - model.params)[big], 0.01, rtol=1e-3)


def test_zero_epochs_returns_unchanged_copy():
    model = PqcModel.initialize(seed=4)
    trained, history = pqc.train(model, tiny_dataset(), TrainConfig(epochs=0))
    assert history == []
    np.testing.assert_array_equal(trained.params, model.params)
    assert trained is not model


def test_training_does_not_mutate_input():
    model = PqcModel.initialize(seed=4)
    before = model.params.copy()
    pqc.train(model, tiny_dataset(), TrainConfig(epochs=2))
    np.testing.assert_array_equal(model.params, before)


def test_empty_training_set_rejected():
    empty = SimpleNamespace(train_x=np.zeros((0, 16)), train_y=np.zeros(0))
    with pytest.raises(ValueError):
        pqc.train(PqcModel(), empty, TrainConfig(epochs=1))


def test_reachable_single_sample_reaches_zero_loss():
    # target produced by a known parameter setting is reachable
    x = np.random.default_rng(5).uniform(0.3, 0.7, (1, 16))
    teacher = PqcModel.initialize(seed=50)
    target = pqc.predict_windows(teacher, x)
    ds = SimpleNamespace(train_x=x, train_y=target)
    _, history = pqc.train(
        PqcModel.initialize(seed=51), ds, TrainConfig(epochs=300, lr=0.01, batch_size=None)
    )
    assert history[-1] < 1e-6


def test_full_batch_loss_decreases_monotonically_on_f0():
    from pqcforecast import data, signals

    ds = data.partition_and_window(signals.synthesize(signals.preset("F0", seed=0)))
    subset = SimpleNamespace(train_x=ds.train_x[:128], train_y=ds.train_y[:128])
    _, history = pqc.train(
        PqcModel.initialize(seed=0),
        subset,
        TrainConfig(epochs=50, lr=1e-3, batch_size=None),
        precision="double",
    )
    assert all(b <= a + 1e-12 for a, b in zip(history, history[1:]))
    assert history[-1] < history[0]


def test_callback_sees_every_epoch():
    seen = []
    _, history = pqc.train(
        PqcModel.initialize(seed=1), tiny_dataset(8), TrainConfig(epochs=3),
        callback=lambda e, loss: seen.append((e, loss)),
    )
    assert [e for e, _ in seen] == [0, 1, 2]
    assert [loss for _, loss in seen] == history


def test_adam_bias_correction_first_step():
    p = np.array([1.0, -2.0])
    opt = Adam([p], lr=0.1)
    opt.step([np.array([3.0, -0.5])])
    np.testing.assert_allclose(p, [0.9, -1.9], atol=1e-6)


def test_json_round_trip(tmp_path):
    model = PqcModel.initialize(seed=12, output_mode="absolute")
    path = tmp_path / "m.json"
    model.save(path)
    again = PqcModel.load(path)
    np.testing.assert_array_equal(again.params, model.params)
    assert again.topology == model.topology
    assert again.output_mode == "absolute"
    assert again.seed == 12
    x = np.random.default_rng(0).uniform(0, 1, 16)
    assert pqc.forward(again, x) == pqc.forward(model, x)


def test_from_dict_rejects_bad_documents():
    doc = PqcModel().to_dict()
    doc["params"] = doc["params"][:-1]
    with pytest.raises(SchemaError):
        PqcModel.from_dict(doc)
    with pytest.raises(SchemaError):
        PqcModel.from_dict({"layers": ["XX"]})
