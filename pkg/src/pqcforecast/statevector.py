"""Dense statevector simulation for the four exponentiated Pauli gate families.

Qubit ``i`` is the ``i``-th least significant bit of an amplitude index, so for
three qubits the basis is ordered ``|q2 q1 q0>`` with ``q0`` varying fastest.

Every gate is a power of a Pauli (or Pauli product) with the phase convention

    P^t = e^{i pi t / 2} (cos(pi t / 2) I - i sin(pi t / 2) P)

which gives the identity at ``t = 0`` and ``t = 2`` and ``P`` itself at ``t = 1``.
"""

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import ConfigurationError

MAX_QUBITS = 24
ORACLE_MAX_QUBITS = 4

XPOW = "XPow"
XXPOW = "XXPow"
YYPOW = "YYPow"
ZZPOW = "ZZPow"
GATE_KINDS = (XPOW, XXPOW, YYPOW, ZZPOW)
TWO_QUBIT_KINDS = (XXPOW, YYPOW, ZZPOW)

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (PAULI_I, PAULI_X, PAULI_Y, PAULI_Z)


@dataclass(frozen=True)
class GateOp:
    kind: str
    exponent: float
    targets: tuple

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        targets = tuple(int(t) for t in np.atleast_1d(self.targets))
        object.__setattr__(self, "targets", targets)
        if self.kind == XPOW:
            if len(targets) != 1:
                raise ValueError("XPow takes exactly one target")
        elif len(targets) != 2 or targets[0] == targets[1]:
            raise ValueError(f"{self.kind} takes two distinct targets")
        if min(targets) < 0:
            raise ValueError("target indices must be non-negative")


@dataclass
class Statevector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (2**self.n_qubits,):
            raise ValueError(
                f"expected {2**self.n_qubits} amplitudes, got {self.amplitudes.shape}"
            )

    def copy(self):
        return Statevector(self.n_qubits, self.amplitudes.copy())

    def norm_squared(self):
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def probabilities(self):
        return np.abs(self.amplitudes) ** 2


def new_zero_state(n_qubits):
    """Return ``|0...0>`` on ``n_qubits`` qubits."""
    if not isinstance(n_qubits, (int, np.integer)) or not 1 <= n_qubits <= MAX_QUBITS:
        raise ConfigurationError(
            f"n_qubits must be an integer in [1, {MAX_QUBITS}], got {n_qubits!r}"
        )
    amps = np.zeros(2**n_qubits, dtype=complex)
    amps[0] = 1.0
    return Statevector(int(n_qubits), amps)


def _pauli_power_phases(t):
    half = np.pi * t / 2
    f = np.exp(1j * half)
    return f * np.cos(half), -1j * f * np.sin(half), np.exp(1j * np.pi * t)


def gate_matrix(op):
    """Exact unitary of ``op``; 2x2 for XPow, 4x4 (basis ``|t0 t1>``) otherwise."""
    c, s, w = _pauli_power_phases(op.exponent)
    if op.kind == XPOW:
        return np.array([[c, s], [s, c]], dtype=complex)
    if op.kind == XXPOW:
        return np.array(
            [[c, 0, 0, s], [0, c, s, 0], [0, s, c, 0], [s, 0, 0, c]], dtype=complex
        )
    if op.kind == YYPOW:
        return np.array(
            [[c, 0, 0, -s], [0, c, s, 0], [0, s, c, 0], [-s, 0, 0, c]], dtype=complex
        )
    return np.diag([1, w, w, 1]).astype(complex)


def _check_targets(state, op):
    for t in op.targets:
        if t >= state.n_qubits:
            raise IndexError(
                f"target qubit {t} out of range for {state.n_qubits}-qubit state"
            )


def apply_matrix(amplitudes, n_qubits, matrix, targets):
    """Apply a 2^k x 2^k ``matrix`` to ``targets`` of a flat amplitude array.

    The first target is the most significant bit of the matrix's local index.
    Returns a new array.
    """
    k = len(targets)
    psi = amplitudes.reshape((2,) * n_qubits)
    # C-order reshape puts qubit q on axis n_qubits - 1 - q.
    axes = [n_qubits - 1 - t for t in targets]
    gate = matrix.reshape((2,) * (2 * k))
    out = np.tensordot(gate, psi, axes=(list(range(k, 2 * k)), axes))
    out = np.moveaxis(out, list(range(k)), axes)
    return out.reshape(-1)


def apply_gate(state, op):
    _check_targets(state, op)
    amps = apply_matrix(state.amplitudes, state.n_qubits, gate_matrix(op), op.targets)
    return Statevector(state.n_qubits, amps)


def prob_one(state, qubit):
    """Probability of measuring ``qubit`` as 1."""
    if not 0 <= qubit < state.n_qubits:
        raise IndexError(f"qubit {qubit} out of range for {state.n_qubits} qubits")
    psi = state.amplitudes.reshape(2 ** (state.n_qubits - 1 - qubit), 2, 2**qubit)
    return float(np.sum(np.abs(psi[:, 1, :]) ** 2))


def _embed_kron(n_qubits, factors):
    """Kronecker product over all qubits, most significant (highest index) first."""
    return reduce(np.kron, [factors.get(q, PAULI_I) for q in reversed(range(n_qubits))])


def dense_unitary(n_qubits, op):
    """Full 2^n x 2^n unitary of ``op`` built from Pauli-basis Kronecker products."""
    matrix = gate_matrix(op)
    full = np.zeros((2**n_qubits, 2**n_qubits), dtype=complex)
    if op.kind == XPOW:
        for p in PAULIS:
            coeff = np.trace(p.conj().T @ matrix) / 2
            full += coeff * _embed_kron(n_qubits, {op.targets[0]: p})
        return full
    t0, t1 = op.targets
    for p in PAULIS:
        for q in PAULIS:
            coeff = np.trace(np.kron(p, q).conj().T @ matrix) / 4
            if coeff != 0:
                full += coeff * _embed_kron(n_qubits, {t0: p, t1: q})
    return full


def dense_oracle_apply(state, op):
    """Slow reference for :func:`apply_gate` using an explicit dense unitary."""
    if state.n_qubits > ORACLE_MAX_QUBITS:
        raise ConfigurationError(
            f"dense oracle refuses more than {ORACLE_MAX_QUBITS} qubits"
        )
    _check_targets(state, op)
    return Statevector(state.n_qubits, dense_unitary(state.n_qubits, op) @ state.amplitudes)
