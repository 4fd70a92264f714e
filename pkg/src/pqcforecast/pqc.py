"""Parameterised quantum circuit regressor.

Sixteen input qubits are each prepared with ``X^a`` from the centred window
values, then every layer couples each input qubit to one readout qubit with a
two-qubit Pauli power gate.  The prediction is the probability of reading the
readout qubit as 1.

Two evaluation paths are provided.  :func:`forward_statevector` runs the circuit
gate by gate on a dense statevector and defines the semantics.  :func:`forward`
and :func:`gradient` use a branch expansion that is exact for this topology:
all gates of one layer share the same Pauli ``P`` on the readout, so they
commute, and on a readout eigenstate ``P|e_s> = s|e_s>`` the layer acts as a
product of single-qubit rotations ``exp(-i pi t s P / 2)`` on the inputs.
Projecting the readout onto the layer's eigenbasis before each layer splits the
state into ``2^L`` branches, each a readout vector times a product state of the
inputs, so the cost is polynomial in the number of inputs.
"""

import json
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .errors import ConfigurationError, SchemaError
from .optim import Adam, TrainConfig, batch_indices
from .statevector import (
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    XPOW,
    XXPOW,
    YYPOW,
    ZZPOW,
    GateOp,
    apply_gate,
    apply_matrix,
    gate_matrix,
    new_zero_state,
    prob_one,
)

SCHEMA_VERSION = 1
OUTPUT_MODES = ("centred", "absolute")
DEFAULT_LAYERS = ("XX", "ZZ", "YY", "XX", "ZZ", "YY")
LAYER_GATES = {"XX": XXPOW, "YY": YYPOW, "ZZ": ZZPOW}
_LAYER_PAULI = {"XX": PAULI_X, "YY": PAULI_Y, "ZZ": PAULI_Z}
MAX_BRANCH_LAYERS = 16

# Chunk size keeps the (batch, branch, branch, input) Gram tensor near 30 MB.
_CHUNK = 32


@dataclass(frozen=True)
class PqcTopology:
    n_inputs: int = 16
    layers: tuple = DEFAULT_LAYERS

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.n_inputs < 1 or self.n_inputs + 1 > 24:
            raise ConfigurationError(f"n_inputs must be in [1, 23], got {self.n_inputs}")
        for name in self.layers:
            if name not in LAYER_GATES:
                raise ConfigurationError(f"unknown layer kind {name!r}")

    @property
    def n_params(self):
        return self.n_inputs * len(self.layers)

    @property
    def readout(self):
        return self.n_inputs


@dataclass
class PqcModel:
    topology: PqcTopology = field(default_factory=PqcTopology)
    params: np.ndarray = None
    seed: int = None
    # "centred": readout predicts target - median(window) + 0.5, decoded by
    # adding the median back; "absolute": readout predicts the scaled target.
    output_mode: str = "centred"

    def __post_init__(self):
        if self.output_mode not in OUTPUT_MODES:
            raise ConfigurationError(f"unknown output_mode {self.output_mode!r}")
        shape = (len(self.topology.layers), self.topology.n_inputs)
        if self.params is None:
            self.params = np.zeros(shape)
        self.params = np.array(self.params, dtype=float).reshape(shape)

    @classmethod
    def initialize(cls, topology=None, seed=0, output_mode="centred"):
        """Parameters drawn uniformly from one gate period, [0, 2)."""
        topology = topology or PqcTopology()
        rng = np.random.default_rng(seed)
        params = rng.uniform(0.0, 2.0, size=(len(topology.layers), topology.n_inputs))
        return cls(topology, params, seed, output_mode)

    @property
    def n_params(self):
        return self.params.size

    def copy(self):
        return PqcModel(self.topology, self.params.copy(), self.seed, self.output_mode)

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "n_inputs": self.topology.n_inputs,
            "layers": list(self.topology.layers),
            "params": self.params.ravel().tolist(),
            "seed": self.seed,
            "output_mode": self.output_mode,
        }

    @classmethod
    def from_dict(cls, doc):
        try:
            topology = PqcTopology(int(doc["n_inputs"]), tuple(doc["layers"]))
            params = np.asarray(doc["params"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"invalid QNN model document: {exc}") from exc
        if params.size != topology.n_params:
            raise SchemaError(
                f"expected {topology.n_params} params, found {params.size}"
            )
        return cls(topology, params, doc.get("seed"), doc.get("output_mode", "centred"))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def encode(window, n_inputs=None):
    """Centre a scaled window on 0.5 by its median and clip to [0, 1].

    Returns the X-gate exponents, one per input qubit.  Accepts a single window
    or a 2-D batch of windows.
    """
    x = np.asarray(window, dtype=float)
    if n_inputs is not None and x.shape[-1] != n_inputs:
        raise ValueError(f"window length {x.shape[-1]} != n_inputs {n_inputs}")
    if x.ndim not in (1, 2) or x.shape[-1] < 1:
        raise ValueError("window must be a non-empty 1-D array or a 2-D batch")
    med = np.median(x, axis=-1, keepdims=True)
    return np.clip(x - med + 0.5, 0.0, 1.0)


def _check_sample(model, exponents):
    e = np.asarray(exponents, dtype=float)
    if e.shape[-1] != model.topology.n_inputs:
        raise ValueError(
            f"sample has {e.shape[-1]} exponents, model expects {model.topology.n_inputs}"
        )
    return e


def circuit_ops(model, exponents):
    """Gate sequence of the circuit for one encoded sample."""
    topo = model.topology
    ops = [GateOp(XPOW, float(a), (j,)) for j, a in enumerate(exponents)]
    for l, name in enumerate(topo.layers):
        for j in range(topo.n_inputs):
            ops.append(GateOp(LAYER_GATES[name], float(model.params[l, j]), (j, topo.readout)))
    return ops


def forward_statevector(model, exponents):
    """Reference forward pass on a dense statevector of ``n_inputs + 1`` qubits."""
    exponents = _check_sample(model, exponents)
    state = new_zero_state(model.topology.n_inputs + 1)
    for op in circuit_ops(model, exponents):
        state = apply_gate(state, op)
    return prob_one(state, model.topology.readout)


def gradient_statevector(model, exponents):
    """Adjoint-method gradient on the dense statevector (reference path)."""
    exponents = _check_sample(model, exponents)
    topo = model.topology
    n = topo.n_inputs + 1
    ops = circuit_ops(model, exponents)
    state = new_zero_state(n)
    for op in ops:
        state = apply_gate(state, op)
    psi = state.amplitudes
    lam = psi.reshape(2 ** (n - 1 - topo.readout), 2, 2**topo.readout).copy()
    lam[:, 0, :] = 0
    lam = lam.reshape(-1)
    grad = np.zeros(model.params.size)
    n_enc = topo.n_inputs
    for k in range(len(ops) - 1, n_enc - 1, -1):
        op = ops[k]
        u_dag = gate_matrix(op).conj().T
        psi = apply_matrix(psi, n, u_dag, op.targets)
        # d/dt P^t = i pi/2 (I - P) P^t
        if op.kind == XXPOW:
            pauli = np.kron(PAULI_X, PAULI_X)
        elif op.kind == YYPOW:
            pauli = np.kron(PAULI_Y, PAULI_Y)
        else:
            pauli = np.kron(PAULI_Z, PAULI_Z)
        d_u = 0.5j * np.pi * (np.eye(4) - pauli) @ gate_matrix(op)
        mu = apply_matrix(psi, n, d_u, op.targets)
        grad[k - n_enc] = 2.0 * np.real(np.vdot(lam, mu))
        lam = apply_matrix(lam, n, u_dag, op.targets)
    return grad


def _eigvecs(name):
    """Columns are the +1 and -1 eigenvectors of the layer's readout Pauli."""
    r = 1 / np.sqrt(2)
    if name == "XX":
        return np.array([[r, r], [r, -r]], dtype=complex)
    if name == "YY":
        return np.array([[r, r], [1j * r, -1j * r]], dtype=complex)
    return np.eye(2, dtype=complex)


class _BranchPlan:
    """Readout-side quantities of the branch expansion; independent of the data."""

    def __init__(self, layers):
        if len(layers) > MAX_BRANCH_LAYERS:
            raise ConfigurationError(
                f"branch expansion supports at most {MAX_BRANCH_LAYERS} layers"
            )
        self.layers = layers
        n_layers = len(layers)
        self.signs = np.array(list(product((1.0, -1.0), repeat=n_layers))).reshape(
            -1, n_layers
        )
        amp = np.ones(len(self.signs), dtype=complex)
        prev = np.array([1.0, 0.0], dtype=complex)  # readout starts in |0>
        prev_vecs = None
        for l, name in enumerate(layers):
            vecs = _eigvecs(name)
            idx = (self.signs[:, l] < 0).astype(int)
            cur = vecs[:, idx]  # (2, S)
            if prev_vecs is None:
                amp = amp * (cur.conj().T @ prev)
            else:
                amp = amp * np.einsum("ks,ks->s", cur.conj(), prev_vecs)
            prev_vecs = cur
        if prev_vecs is not None:
            amp = amp * prev_vecs[1]  # overlap with readout |1>
        else:
            amp = np.zeros(1, dtype=complex)
        self.amp = amp
        self.weight = np.outer(amp.conj(), amp)  # W[s, s']
        self.paulis = np.stack([_LAYER_PAULI[name] for name in layers]) if layers else None


_PLANS = {}


def _plan(layers):
    if layers not in _PLANS:
        _PLANS[layers] = _BranchPlan(layers)
    return _PLANS[layers]


def _rotations(plan, params):
    """exp(-i pi s t P / 2) for every (layer, branch, input): shape (L, S, n, 2, 2)."""
    half = 0.5 * np.pi * params  # (L, n)
    cos = np.cos(half)[:, None, :, None, None]
    sin = np.sin(half)[:, None, :, None, None]
    s = plan.signs.T[:, :, None, None, None]  # (L, S, 1, 1, 1)
    eye = np.eye(2)[None, None, None]
    pauli = plan.paulis[:, None, None]
    return cos * eye - 1j * s * sin * pauli


def _input_states(exponents):
    """X^a|0> per input without its global phase: shape (B, n, 2)."""
    half = 0.5 * np.pi * exponents
    return np.stack([np.cos(half) + 0j, -1j * np.sin(half)], axis=-1)


def _branch_states(plan, rot, exponents):
    """Per-branch single-qubit states after every layer: list of (B, S, n, 2)."""
    v = _input_states(exponents)
    phi = np.broadcast_to(v[:, None], (v.shape[0], len(plan.signs)) + v.shape[1:])
    history = [phi]
    for l in range(len(plan.layers)):
        phi = np.einsum("sjab,zsjb->zsja", rot[l], phi)
        history.append(phi)
    return history


def _excluded_products(gram):
    """prod over k != j of gram[:, k] for every j, via prefix and suffix products."""
    n = gram.shape[1]
    prefix = np.empty_like(gram)
    suffix = np.empty_like(gram)
    prefix[:, 0] = 1.0
    suffix[:, n - 1] = 1.0
    for k in range(1, n):
        np.multiply(prefix[:, k - 1], gram[:, k - 1], out=prefix[:, k])
        np.multiply(suffix[:, n - k], gram[:, n - k], out=suffix[:, n - k - 1])
    prefix *= suffix
    return prefix


def _forward_chunk(plan, rot, exponents, with_grad, dtype=complex):
    history = _branch_states(plan, rot, exponents)
    # (B, n, S, 2) so the Gram matrices are batched matmuls
    phi = np.ascontiguousarray(history[-1].transpose(0, 2, 1, 3), dtype=dtype)
    gram = phi.conj() @ phi.transpose(0, 1, 3, 2)  # (B, n, S, S)
    weight = plan.weight.astype(dtype)
    if not with_grad:
        value = np.einsum("st,zst->z", weight, np.prod(gram, axis=1))
        return np.clip(value.real, 0.0, 1.0), None
    excl = _excluded_products(gram)
    value = np.einsum("st,zst->z", weight, excl[:, 0] * gram[:, 0]).real
    coupling = excl * weight
    chi = (coupling @ phi).transpose(0, 2, 1, 3)  # (B, S, n, 2)
    n_layers = len(plan.layers)
    grad = np.zeros((exponents.shape[0], n_layers, exponents.shape[1]))
    back = chi
    for l in range(n_layers - 1, -1, -1):
        # back = (R_L ... R_{l+1})^dagger chi, paired with R_l ... R_1 v
        p_fwd = np.einsum("ab,zsjb->zsja", plan.paulis[l], history[l + 1]).astype(dtype)
        inner = np.einsum("zsjc,zsjc->zsj", p_fwd.conj(), back)
        s = plan.signs[:, l][None, :, None]
        # <d phi | chi> = i pi/2 s <P R..v | back>; the derivative is twice its real part
        grad[:, l, :] = 2.0 * np.real(0.5j * np.pi * np.sum(s * inner, axis=1))
        back = np.einsum("sjba,zsjb->zsja", rot[l].conj().astype(dtype), back)
    return np.clip(value, 0.0, 1.0), grad


_PRECISIONS = {"double": np.complex128, "single": np.complex64}


def predict(model, exponents, with_grad=False, precision="double"):
    """Vectorised forward pass over a batch of encoded samples.

    Returns predictions of shape (B,) and, when ``with_grad`` is set, per-sample
    gradients of shape (B, n_layers, n_inputs).  ``precision="single"`` runs the
    branch Gram products in complex64, which is faster and accurate to ~1e-6.
    """
    dtype = _PRECISIONS[precision]
    exponents = np.atleast_2d(_check_sample(model, exponents))
    plan = _plan(model.topology.layers)
    if not plan.layers:
        zeros = np.zeros(exponents.shape[0])
        return (zeros, np.zeros((exponents.shape[0], 0, exponents.shape[1]))) if with_grad else zeros
    rot = _rotations(plan, model.params)
    values, grads = [], []
    for start in range(0, exponents.shape[0], _CHUNK):
        v, g = _forward_chunk(plan, rot, exponents[start : start + _CHUNK], with_grad, dtype)
        values.append(v)
        grads.append(g)
    values = np.concatenate(values)
    if with_grad:
        return values, np.concatenate(grads)
    return values


def forward(model, exponents):
    """Probability of the readout qubit being 1 for one encoded sample."""
    exponents = _check_sample(model, exponents)
    if exponents.ndim != 1:
        raise ValueError("forward takes a single sample; use predict for batches")
    return float(predict(model, exponents)[0])


def gradient(model, exponents):
    """Exact gradient of :func:`forward` w.r.t. the parameters, flattened layer-major."""
    exponents = _check_sample(model, exponents)
    if exponents.ndim != 1:
        raise ValueError("gradient takes a single sample")
    _, g = predict(model, exponents, with_grad=True)
    return g[0].ravel()


def mse_and_grad(model, exponents, targets, precision="double"):
    pred, g = predict(model, exponents, with_grad=True, precision=precision)
    resid = pred - targets
    loss = float(np.mean(resid**2))
    grad = 2.0 * np.einsum("z,zlj->lj", resid, g) / len(targets)
    return loss, grad


def training_targets(model, windows, targets):
    """Readout targets for scaled windows and their scaled next values."""
    targets = np.asarray(targets, dtype=float)
    if model.output_mode == "absolute":
        return targets
    return targets - np.median(windows, axis=-1) + 0.5


def decode(model, windows, readout):
    """Map readout probabilities back to scaled forecasts."""
    readout = np.asarray(readout, dtype=float)
    if model.output_mode == "absolute":
        return readout
    return readout + np.median(windows, axis=-1) - 0.5


def train(model, dataset, config=None, callback=None, precision="single"):
    """Fit the circuit parameters by Adam on the mean squared error.

    ``dataset`` provides ``train_x`` (scaled windows) and ``train_y``.  Returns
    a trained copy of ``model`` and the per-epoch training loss, where each
    epoch's loss is the mean over its mini-batches before their updates.  In
    centred mode the loss is the same as the error of the decoded forecast.
    Training runs in single precision unless ``precision="double"``.
    """
    config = config or TrainConfig()
    x = np.asarray(dataset.train_x, dtype=float)
    if len(x) == 0:
        raise ValueError("training set is empty")
    y = training_targets(model, x, dataset.train_y)
    model = model.copy()
    exponents = encode(x, model.topology.n_inputs)
    rng = np.random.default_rng(config.seed)
    opt = Adam.from_config([model.params], config)
    history = []
    for epoch in range(config.epochs):
        total, count = 0.0, 0
        for idx in batch_indices(len(x), config.batch_size, rng):
            loss, grad = mse_and_grad(model, exponents[idx], y[idx], precision)
            opt.step([grad])
            total += loss * len(idx)
            count += len(idx)
        history.append(total / count)
        if callback is not None:
            callback(epoch, history[-1])
    return model, history


def predict_windows(model, windows):
    """Scaled forecasts for a batch of scaled input windows."""
    windows = np.atleast_2d(np.asarray(windows, dtype=float))
    readout = predict(model, encode(windows, model.topology.n_inputs))
    return decode(model, windows, readout)
