"""Bidirectional LSTM regressor written directly in numpy.

Topology (units configurable)::

    window -> bd_seq (tanh, full sequence) -+-> bd_1 (linear, final) --+
                                            |                          +-> mean -> prediction
                                            +-> bd_sin (tanh, seq) -> bd_2 (tanh, final)

Each bidirectional layer concatenates its forward and backward directions, so
the two single-unit branches each end in a 2-vector; their sum is averaged to a
scalar prediction.  Gradients come from backpropagation through time.
"""

import json
import logging

import numpy as np

from .errors import SchemaError
from .optim import Adam, TrainConfig, batch_indices, clip_by_global_norm

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
REFERENCE_UNITS = (128, 32, 1, 1)
REFERENCE_PARAM_COUNT = 175_648
REDUCED_UNITS = (32, 8, 1, 1)
LAYER_NAMES = ("bd_seq", "bd_sin", "bd_1", "bd_2")
ACTIVATIONS = ("tanh", "tanh", "linear", "tanh")


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _act(name, x):
    return np.tanh(x) if name == "tanh" else x


def _act_grad(name, y):
    """Derivative given the activation's output ``y`` (tanh) or input (linear)."""
    return 1.0 - y * y if name == "tanh" else np.ones_like(y)


def lstm_param_count(input_dim, hidden_dim):
    return 4 * ((input_dim + hidden_dim) * hidden_dim + hidden_dim)


class LstmCell:
    """One LSTM direction.  Gate blocks in ``W`` and ``b`` are ordered i, f, o, g."""

    def __init__(self, input_dim, hidden_dim, activation="tanh", W=None, b=None):
        if activation not in ("tanh", "linear"):
            raise ValueError(f"unknown activation {activation!r}")
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.activation = activation
        shape = (input_dim + hidden_dim, 4 * hidden_dim)
        self.W = np.zeros(shape) if W is None else np.asarray(W, dtype=float).reshape(shape)
        self.b = np.zeros(4 * hidden_dim) if b is None else np.asarray(b, dtype=float).reshape(-1)

    @classmethod
    def random(cls, input_dim, hidden_dim, activation, rng):
        limit = 1.0 / np.sqrt(input_dim + hidden_dim)
        W = rng.uniform(-limit, limit, size=(input_dim + hidden_dim, 4 * hidden_dim))
        b = np.zeros(4 * hidden_dim)
        b[hidden_dim : 2 * hidden_dim] = 1.0  # forget gate starts open
        return cls(input_dim, hidden_dim, activation, W, b)

    @property
    def n_params(self):
        return self.W.size + self.b.size

    def params(self):
        return [self.W, self.b]

    def forward(self, x):
        """Run over ``x`` of shape (B, T, input_dim); returns (H, cache)."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 2:
            x = x[None]
        B, T, d = x.shape
        if d != self.input_dim:
            raise ValueError(f"input dim {d} != cell input dim {self.input_dim}")
        if T < 1:
            raise ValueError("sequence must have at least one step")
        h = self.hidden_dim
        H = np.zeros((B, T, h))
        C = np.zeros((B, T, h))
        A = np.zeros((B, T, h))  # activation of the cell state
        gates = np.zeros((B, T, 4 * h))
        inputs = np.zeros((B, T, d + h))
        h_prev = np.zeros((B, h))
        c_prev = np.zeros((B, h))
        for t in range(T):
            inputs[:, t, :d] = x[:, t]
            inputs[:, t, d:] = h_prev
            z = inputs[:, t] @ self.W + self.b
            g = np.empty_like(z)
            g[:, : 3 * h] = sigmoid(z[:, : 3 * h])
            g[:, 3 * h :] = np.tanh(z[:, 3 * h :])
            gates[:, t] = g
            c_prev = g[:, h : 2 * h] * c_prev + g[:, :h] * g[:, 3 * h :]
            C[:, t] = c_prev
            A[:, t] = _act(self.activation, c_prev)
            h_prev = g[:, 2 * h : 3 * h] * A[:, t]
            H[:, t] = h_prev
        return H, (inputs, gates, C, A)

    def backward(self, dH, cache):
        """Gradients given dLoss/dH of shape (B, T, h); returns (dx, [dW, db])."""
        inputs, gates, C, A = cache
        B, T, h = dH.shape
        d = self.input_dim
        dW = np.zeros_like(self.W)
        db = np.zeros_like(self.b)
        dx = np.zeros((B, T, d))
        dh_next = np.zeros((B, h))
        dc_next = np.zeros((B, h))
        dz = np.empty((B, 4 * h))
        for t in range(T - 1, -1, -1):
            g = gates[:, t]
            i, f, o, gg = g[:, :h], g[:, h : 2 * h], g[:, 2 * h : 3 * h], g[:, 3 * h :]
            c_prev = C[:, t - 1] if t > 0 else np.zeros((B, h))
            dh = dH[:, t] + dh_next
            a = A[:, t]
            dc = dc_next + dh * o * _act_grad(self.activation, a)
            dz[:, :h] = dc * gg * i * (1 - i)
            dz[:, h : 2 * h] = dc * c_prev * f * (1 - f)
            dz[:, 2 * h : 3 * h] = dh * a * o * (1 - o)
            dz[:, 3 * h :] = dc * i * (1 - gg * gg)
            dW += inputs[:, t].T @ dz
            db += dz.sum(axis=0)
            dinp = dz @ self.W.T
            dx[:, t] = dinp[:, :d]
            dh_next = dinp[:, d:]
            dc_next = dc * f
        return dx, [dW, db]


class BilstmLayer:
    def __init__(self, forward_cell, backward_cell, return_sequences=True):
        self.forward_cell = forward_cell
        self.backward_cell = backward_cell
        self.return_sequences = return_sequences

    @classmethod
    def random(cls, input_dim, units, activation, return_sequences, rng):
        return cls(
            LstmCell.random(input_dim, units, activation, rng),
            LstmCell.random(input_dim, units, activation, rng),
            return_sequences,
        )

    @property
    def output_dim(self):
        return self.forward_cell.hidden_dim + self.backward_cell.hidden_dim

    @property
    def cells(self):
        return [self.forward_cell, self.backward_cell]

    @property
    def n_params(self):
        return self.forward_cell.n_params + self.backward_cell.n_params

    def forward(self, x):
        """Output (B, T, 2h) aligned in time, or (B, 2h) final states."""
        Hf, cf = self.forward_cell.forward(x)
        Hb, cb = self.backward_cell.forward(x[:, ::-1])
        if self.return_sequences:
            out = np.concatenate([Hf, Hb[:, ::-1]], axis=-1)
        else:
            out = np.concatenate([Hf[:, -1], Hb[:, -1]], axis=-1)
        return out, (x.shape, Hf.shape, cf, cb)

    def backward(self, dout, cache):
        x_shape, h_shape, cf, cb = cache
        hf = self.forward_cell.hidden_dim
        dHf = np.zeros(h_shape)
        dHb = np.zeros(h_shape[:2] + (self.backward_cell.hidden_dim,))
        if self.return_sequences:
            dHf[:] = dout[..., :hf]
            dHb[:] = dout[:, ::-1, hf:]
        else:
            dHf[:, -1] = dout[:, :hf]
            dHb[:, -1] = dout[:, hf:]
        dxf, gf = self.forward_cell.backward(dHf, cf)
        dxb, gb = self.backward_cell.backward(dHb, cb)
        return dxf + dxb[:, ::-1], gf + gb


class BilstmModel:
    def __init__(self, bd_seq, bd_sin, bd_1, bd_2, seed=None):
        self.bd_seq = bd_seq
        self.bd_sin = bd_sin
        self.bd_1 = bd_1
        self.bd_2 = bd_2
        self.seed = seed

    @classmethod
    def initialize(cls, units=REDUCED_UNITS, seed=0):
        u_seq, u_sin, u_1, u_2 = units
        rng = np.random.default_rng(seed)
        bd_seq = BilstmLayer.random(1, u_seq, "tanh", True, rng)
        bd_sin = BilstmLayer.random(2 * u_seq, u_sin, "tanh", True, rng)
        bd_1 = BilstmLayer.random(2 * u_seq, u_1, "linear", False, rng)
        bd_2 = BilstmLayer.random(2 * u_sin, u_2, "tanh", False, rng)
        if bd_1.output_dim != bd_2.output_dim:
            raise ValueError("bd_1 and bd_2 must have the same width to be added")
        return cls(bd_seq, bd_sin, bd_1, bd_2, seed)

    @property
    def layers(self):
        return [self.bd_seq, self.bd_sin, self.bd_1, self.bd_2]

    @property
    def units(self):
        return tuple(layer.forward_cell.hidden_dim for layer in self.layers)

    def params(self):
        return [p for layer in self.layers for cell in layer.cells for p in cell.params()]

    @property
    def n_params(self):
        return sum(layer.n_params for layer in self.layers)

    def forward(self, windows):
        """Predictions (B,) for windows (B, T) and the cache for :meth:`backward`."""
        x = np.asarray(windows, dtype=float)
        if x.ndim == 1:
            x = x[None]
        x = x[..., None]
        seq, c_seq = self.bd_seq.forward(x)
        sin, c_sin = self.bd_sin.forward(seq)
        out1, c_1 = self.bd_1.forward(seq)
        out2, c_2 = self.bd_2.forward(sin)
        total = out1 + out2
        pred = total.mean(axis=-1)
        return pred, (total.shape, c_seq, c_sin, c_1, c_2)

    def backward(self, dpred, cache):
        """Parameter gradients, in :meth:`params` order, given dLoss/dprediction."""
        shape, c_seq, c_sin, c_1, c_2 = cache
        dtotal = np.broadcast_to(np.asarray(dpred)[:, None] / shape[-1], shape)
        dsin, g2 = self.bd_2.backward(dtotal, c_2)
        dseq_a, g1 = self.bd_1.backward(dtotal, c_1)
        dseq_b, gsin = self.bd_sin.backward(dsin, c_sin)
        _, gseq = self.bd_seq.backward(dseq_a + dseq_b, c_seq)
        return gseq + gsin + g1 + g2

    def predict(self, windows):
        return self.forward(windows)[0]

    def to_dict(self):
        layers = []
        for name, layer in zip(LAYER_NAMES, self.layers):
            for direction, cell in zip(("forward", "backward"), layer.cells):
                layers.append(
                    {
                        "name": name,
                        "direction": direction,
                        "input_dim": cell.input_dim,
                        "hidden_dim": cell.hidden_dim,
                        "activation": cell.activation,
                        "return_sequences": layer.return_sequences,
                        "W_shape": list(cell.W.shape),
                        "W": cell.W.ravel().tolist(),
                        "b": cell.b.tolist(),
                    }
                )
        return {
            "schema_version": SCHEMA_VERSION,
            "model": "bilstm",
            "units": list(self.units),
            "seed": self.seed,
            "n_params": self.n_params,
            "layers": layers,
        }

    @classmethod
    def from_dict(cls, doc):
        if doc.get("schema_version") != SCHEMA_VERSION or doc.get("model") != "bilstm":
            raise SchemaError("not a version-1 BiLSTM model document")
        try:
            cells = {}
            flags = {}
            for entry in doc["layers"]:
                cells[(entry["name"], entry["direction"])] = LstmCell(
                    int(entry["input_dim"]),
                    int(entry["hidden_dim"]),
                    entry["activation"],
                    entry["W"],
                    entry["b"],
                )
                flags[entry["name"]] = bool(entry["return_sequences"])
            layers = [
                BilstmLayer(cells[(n, "forward")], cells[(n, "backward")], flags[n])
                for n in LAYER_NAMES
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"invalid BiLSTM model document: {exc}") from exc
        return cls(*layers, seed=doc.get("seed"))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def copy(self):
        return BilstmModel.from_dict(self.to_dict())


def model_forward(model, window):
    return float(model.predict(np.asarray(window, dtype=float)[None])[0])


def param_count_report(units=REFERENCE_UNITS):
    """Parameter count of the topology at ``units`` and its gap to the quoted total."""
    u_seq, u_sin, u_1, u_2 = units
    per_layer = {
        "bd_seq": 2 * lstm_param_count(1, u_seq),
        "bd_sin": 2 * lstm_param_count(2 * u_seq, u_sin),
        "bd_1": 2 * lstm_param_count(2 * u_seq, u_1),
        "bd_2": 2 * lstm_param_count(2 * u_sin, u_2),
    }
    total = sum(per_layer.values())
    report = {
        "units": list(units),
        "per_layer": per_layer,
        "total": total,
        "reference_total": REFERENCE_PARAM_COUNT,
        "difference": total - REFERENCE_PARAM_COUNT,
    }
    if total != REFERENCE_PARAM_COUNT:
        log.info(
            "BiLSTM with units %s has %d parameters (reference %d, difference %+d)",
            units, total, REFERENCE_PARAM_COUNT, total - REFERENCE_PARAM_COUNT,
        )
    return report


def mse_and_grads(model, windows, targets):
    pred, cache = model.forward(windows)
    resid = pred - targets
    loss = float(np.mean(resid**2))
    grads = model.backward(2.0 * resid / len(targets), cache)
    return loss, grads


def train_bilstm(model, dataset, config=None, callback=None):
    """Adam on the mean squared error; returns a trained copy and the loss history."""
    config = config or TrainConfig()
    x = np.asarray(dataset.train_x, dtype=float)
    y = np.asarray(dataset.train_y, dtype=float)
    if len(x) == 0:
        raise ValueError("training set is empty")
    model = model.copy()
    rng = np.random.default_rng(config.seed)
    opt = Adam.from_config(model.params(), config)
    history = []
    for epoch in range(config.epochs):
        total = 0.0
        for idx in batch_indices(len(x), config.batch_size, rng):
            loss, grads = mse_and_grads(model, x[idx], y[idx])
            opt.step(clip_by_global_norm(grads, config.clip_norm))
            total += loss * len(idx)
        history.append(total / len(x))
        if callback is not None:
            callback(epoch, history[-1])
    return model, history
