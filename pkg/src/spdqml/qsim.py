"""Exact statevector simulation of the embed + three-block variational circuit.

The circuit is fixed: an angle embedding (one rotation per qubit, X axis by
default) followed by three strongly-entangling blocks, each made of a general
rotation ``Rot(phi, theta, omega) = Rz(omega) Ry(theta) Rz(phi)`` on every
qubit and a ring of CNOTs ``q -> (q + r) mod n``. The readout is ``<Z_q>`` for
every qubit.

Qubit 0 is the most significant bit of the basis-state index.

Gradients come from the parameter-shift rule (:func:`circuit_jacobian`), which
is exact here because every parametrized gate is ``exp(-i theta G / 2)`` with
``G`` a Pauli operator. :func:`circuit_vjp` computes the same derivatives
contracted with an upstream vector in a single adjoint sweep.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from spdqml._backend import kernels
from spdqml._kernels_py import apply_1q, cnot_permutation, z_signs
from spdqml.errors import InvalidInputError, InvalidParameterError, ResourceError

N_BLOCKS = 3
AXES = {"X": 0, "Y": 1, "Z": 2}
SHIFT = math.pi / 2
MAX_ORACLE_QUBITS = 10


class StateVector:
    """Immutable ``n``-qubit pure state.

    Gate functions never modify a ``StateVector``; they return a new one.
    """

    __slots__ = ("_amps", "n_qubits")

    def __init__(self, amplitudes, n_qubits: int | None = None):
        amps = np.array(amplitudes, dtype=complex).reshape(-1)
        dim = amps.shape[0]
        n = dim.bit_length() - 1
        if dim < 2 or (1 << n) != dim:
            raise InvalidInputError(f"amplitude count {dim} is not a power of two")
        if n_qubits is not None and n_qubits != n:
            raise InvalidInputError(f"{dim} amplitudes do not describe {n_qubits} qubits")
        amps.setflags(write=False)
        self._amps = amps
        self.n_qubits = n

    @classmethod
    def zero(cls, n_qubits: int) -> "StateVector":
        if n_qubits < 1:
            raise InvalidParameterError("need at least one qubit")
        amps = np.zeros(1 << n_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(amps)

    @classmethod
    def basis(cls, bits: str) -> "StateVector":
        """Computational basis state from a bit string, qubit 0 first: ``"10"``."""
        amps = np.zeros(1 << len(bits), dtype=complex)
        amps[int(bits, 2)] = 1.0
        return cls(amps)

    @property
    def amplitudes(self) -> np.ndarray:
        return self._amps

    def norm_squared(self) -> float:
        return float(np.vdot(self._amps, self._amps).real)

    def expectations_z(self) -> np.ndarray:
        probs = self._amps.real ** 2 + self._amps.imag ** 2
        return probs @ z_signs(self.n_qubits)

    def __repr__(self):
        return f"StateVector(n_qubits={self.n_qubits})"


def _check_qubit(state: StateVector, q: int) -> None:
    if not 0 <= q < state.n_qubits:
        raise InvalidInputError(f"qubit {q} out of range for {state.n_qubits} qubits")


def _check_angle(theta: float) -> float:
    theta = float(theta)
    if not math.isfinite(theta):
        raise InvalidInputError(f"non-finite gate angle {theta}")
    return theta


def _single(state: StateVector, q: int, matrix: np.ndarray) -> StateVector:
    _check_qubit(state, q)
    out = apply_1q(state.amplitudes[None, :], state.n_qubits, q, matrix[None])
    return StateVector(out[0])


def rx_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def ry_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz_matrix(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def rot_matrix(phi: float, theta: float, omega: float) -> np.ndarray:
    return rz_matrix(omega) @ ry_matrix(theta) @ rz_matrix(phi)


_AXIS_MATRIX = {0: rx_matrix, 1: ry_matrix, 2: rz_matrix}


def apply_rx(state: StateVector, q: int, theta: float) -> StateVector:
    return _single(state, q, rx_matrix(_check_angle(theta)))


def apply_ry(state: StateVector, q: int, theta: float) -> StateVector:
    return _single(state, q, ry_matrix(_check_angle(theta)))


def apply_rz(state: StateVector, q: int, theta: float) -> StateVector:
    return _single(state, q, rz_matrix(_check_angle(theta)))


def apply_rot(state: StateVector, q: int, phi: float, theta: float, omega: float) -> StateVector:
    return _single(state, q, rot_matrix(_check_angle(phi), _check_angle(theta), _check_angle(omega)))


def apply_cnot(state: StateVector, control: int, target: int) -> StateVector:
    _check_qubit(state, control)
    _check_qubit(state, target)
    if control == target:
        raise InvalidInputError("CNOT control and target must differ")
    perm = cnot_permutation(state.n_qubits, control, target)
    return StateVector(state.amplitudes[perm])


def angle_embed(n: int, angles: Sequence[float], axis: str = "X") -> StateVector:
    """Rotate each qubit of ``|0...0>`` by its angle about ``axis``."""
    angles = np.asarray(angles, dtype=float)
    if angles.shape != (n,):
        raise InvalidInputError(f"expected {n} embedding angles, got shape {angles.shape}")
    gate = _AXIS_MATRIX[_axis_code(axis)]
    state = StateVector.zero(n)
    for q, theta in enumerate(angles):
        state = _single(state, q, gate(_check_angle(theta)))
    return state


def apply_entangling_block(state: StateVector, weights, r: int = 1) -> StateVector:
    """One strongly-entangling layer: ``Rot`` on every qubit, then the CNOT ring."""
    n = state.n_qubits
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (n, 3):
        raise InvalidInputError(f"block weights must have shape ({n}, 3), got {weights.shape}")
    if n > 1 and not 1 <= r <= n - 1:
        raise InvalidParameterError(f"entangler range {r} outside [1, {n - 1}]")
    for q in range(n):
        state = apply_rot(state, q, *weights[q])
    if n > 1:
        for q in range(n):
            state = apply_cnot(state, q, (q + r) % n)
    return state


def _axis_code(axis: str) -> int:
    try:
        return AXES[axis.upper()]
    except (KeyError, AttributeError):
        raise InvalidParameterError(f"embedding axis must be one of X, Y, Z, got {axis!r}") from None


@dataclass
class CircuitSpec:
    """Qubit count, three blocks of ``(n, 3)`` Euler angles, entangler ranges."""

    n_qubits: int
    weights: np.ndarray
    ranges: tuple = (1, 1, 1)
    embed_axis: str = "X"
    _ranges_arr: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = self.n_qubits
        if n < 1:
            raise InvalidParameterError("need at least one qubit")
        self.weights = np.ascontiguousarray(self.weights, dtype=float)
        if self.weights.shape != (N_BLOCKS, n, 3):
            raise InvalidInputError(
                f"circuit weights must have shape ({N_BLOCKS}, {n}, 3), got {self.weights.shape}")
        if not np.all(np.isfinite(self.weights)):
            raise InvalidInputError("circuit weights must be finite")
        if isinstance(self.ranges, int):
            self.ranges = (self.ranges,) * N_BLOCKS
        self.ranges = tuple(int(r) for r in self.ranges)
        if len(self.ranges) != N_BLOCKS:
            raise InvalidParameterError(f"need {N_BLOCKS} entangler ranges, got {len(self.ranges)}")
        if n > 1 and any(not 1 <= r <= n - 1 for r in self.ranges):
            raise InvalidParameterError(f"entangler ranges {self.ranges} outside [1, {n - 1}]")
        _axis_code(self.embed_axis)
        self._ranges_arr = np.array(self.ranges, dtype=np.int64)

    @property
    def n_params(self) -> int:
        return self.weights.size

    @property
    def axis_code(self) -> int:
        return AXES[self.embed_axis.upper()]

    @classmethod
    def random(cls, n_qubits: int, rng: np.random.Generator, **kwargs) -> "CircuitSpec":
        weights = rng.uniform(0.0, 2 * math.pi, size=(N_BLOCKS, n_qubits, 3))
        return cls(n_qubits, weights, **kwargs)

    @classmethod
    def zeros(cls, n_qubits: int, **kwargs) -> "CircuitSpec":
        return cls(n_qubits, np.zeros((N_BLOCKS, n_qubits, 3)), **kwargs)


def _batch_inputs(spec: CircuitSpec, inputs) -> np.ndarray:
    x = np.ascontiguousarray(inputs, dtype=float)
    if x.ndim != 2 or x.shape[1] != spec.n_qubits:
        raise InvalidInputError(
            f"inputs must have shape (batch, {spec.n_qubits}), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("circuit inputs must be finite")
    return x


def simulate_state(spec: CircuitSpec, inputs) -> StateVector:
    """Final state of the circuit, built gate by gate through the value API."""
    state = angle_embed(spec.n_qubits, inputs, spec.embed_axis)
    for block, r in zip(spec.weights, spec.ranges):
        state = apply_entangling_block(state, block, r)
    return state


def run_circuit(spec: CircuitSpec, inputs) -> np.ndarray:
    """``<Z_q>`` for every qubit, shape ``(n,)``."""
    x = np.asarray(inputs, dtype=float)
    if x.shape != (spec.n_qubits,):
        raise InvalidInputError(f"expected {spec.n_qubits} inputs, got shape {x.shape}")
    return run_circuit_batch(spec, x[None, :])[0]


def run_circuit_batch(spec: CircuitSpec, inputs) -> np.ndarray:
    x = _batch_inputs(spec, inputs)
    return kernels.expval(x, spec.weights[None], spec._ranges_arr, spec.axis_code)


class CircuitJacobian(NamedTuple):
    values: np.ndarray  # (..., n)
    d_inputs: np.ndarray  # (..., n_out, n_in)
    d_weights: np.ndarray  # (..., n_out, 3, n, 3)


def circuit_jacobian(spec: CircuitSpec, inputs) -> CircuitJacobian:
    """Parameter-shift Jacobian of all outputs w.r.t. inputs and weights."""
    x = np.asarray(inputs, dtype=float)
    if x.shape != (spec.n_qubits,):
        raise InvalidInputError(f"expected {spec.n_qubits} inputs, got shape {x.shape}")
    jac = circuit_jacobian_batch(spec, x[None, :])
    return CircuitJacobian(jac.values[0], jac.d_inputs[0], jac.d_weights[0])


def circuit_jacobian_batch(spec: CircuitSpec, inputs) -> CircuitJacobian:
    x = _batch_inputs(spec, inputs)
    b, n = x.shape
    n_w = spec.n_params
    n_par = n + n_w
    # one-hot shift directions; row p shifts parameter p
    shift_in = np.zeros((n_par, n))
    shift_in[np.arange(n), np.arange(n)] = SHIFT
    shift_w = np.zeros((n_par, n_w))
    shift_w[n + np.arange(n_w), np.arange(n_w)] = SHIFT
    signs = np.array([1.0, -1.0])[:, None, None]
    # (B, 2, P, n) and (2, P, n_w), plus the unshifted circuit
    ang = x[:, None, None, :] + signs[None] * shift_in[None, None]
    w = spec.weights.reshape(-1)[None, None, :] + signs * shift_w[None]
    ang = np.concatenate([ang.reshape(b, -1, n), x[:, None, :]], axis=1).reshape(-1, n)
    w = np.concatenate([w.reshape(-1, n_w), spec.weights.reshape(1, -1)], axis=0)
    w = np.ascontiguousarray(np.broadcast_to(w[None], (b,) + w.shape).reshape(-1, N_BLOCKS, n, 3))
    out = kernels.expval(np.ascontiguousarray(ang), w, spec._ranges_arr, spec.axis_code)
    out = out.reshape(b, 2 * n_par + 1, n)
    values = out[:, -1]
    pm = out[:, :-1].reshape(b, 2, n_par, n)
    jac = 0.5 * (pm[:, 0] - pm[:, 1])  # (B, P, n_out)
    jac = np.swapaxes(jac, 1, 2)
    return CircuitJacobian(
        values,
        np.ascontiguousarray(jac[:, :, :n]),
        jac[:, :, n:].reshape(b, n, N_BLOCKS, n, 3),
    )


def circuit_vjp(spec: CircuitSpec, inputs, upstream):
    """Adjoint-method vector-Jacobian product over a batch.

    Returns ``(values, grad_inputs, grad_weights)`` where ``grad_inputs[b] =
    upstream[b] @ d values[b] / d inputs[b]`` and ``grad_weights`` is summed
    over the batch.
    """
    x = _batch_inputs(spec, inputs)
    g = np.ascontiguousarray(upstream, dtype=float)
    if g.shape != x.shape:
        raise InvalidInputError(f"upstream shape {g.shape} does not match inputs {x.shape}")
    values, g_in, g_w = kernels.expval_vjp(x, spec.weights[None], spec._ranges_arr,
                                           spec.axis_code, g)
    return values, g_in, g_w[0]


# --- dense-matrix oracle -------------------------------------------------
# Deliberately shares nothing with the kernels: every gate becomes a full
# 2^n x 2^n matrix built from Kronecker products.

_I2 = np.eye(2, dtype=complex)
_P0 = np.diag([1.0, 0.0]).astype(complex)
_P1 = np.diag([0.0, 1.0]).astype(complex)
_XM = np.array([[0, 1], [1, 0]], dtype=complex)
_ZM = np.diag([1.0, -1.0]).astype(complex)


def _kron_all(mats):
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def _embed_1q(n, q, u):
    return _kron_all([u if k == q else _I2 for k in range(n)])


def _dense_cnot(n, control, target):
    off = _kron_all([_P0 if k == control else _I2 for k in range(n)])
    on = _kron_all([_P1 if k == control else (_XM if k == target else _I2) for k in range(n)])
    return off + on


def dense_gate_list(spec: CircuitSpec, inputs):
    """The circuit as an ordered list of ``(name, qubits, angle)`` tuples."""
    axis = "r" + spec.embed_axis.lower()
    gates = [(axis, (q,), float(t)) for q, t in enumerate(inputs)]
    for block, r in zip(spec.weights, spec.ranges):
        for q in range(spec.n_qubits):
            phi, theta, omega = block[q]
            gates += [("rz", (q,), phi), ("ry", (q,), theta), ("rz", (q,), omega)]
        if spec.n_qubits > 1:
            gates += [("cnot", (q, (q + r) % spec.n_qubits), None) for q in range(spec.n_qubits)]
    return gates


def dense_expectations(n: int, gates, initial=None) -> np.ndarray:
    """Multiply out full gate matrices, then read ``<Z_q>`` via dense Pauli-Z."""
    if n > MAX_ORACLE_QUBITS:
        raise ResourceError(f"dense oracle limited to {MAX_ORACLE_QUBITS} qubits, got {n}")
    singles = {"rx": rx_matrix, "ry": ry_matrix, "rz": rz_matrix}
    unitary = np.eye(1 << n, dtype=complex)
    for name, qubits, theta in gates:
        if name == "cnot":
            g = _dense_cnot(n, *qubits)
        else:
            g = _embed_1q(n, qubits[0], singles[name](theta))
        unitary = g @ unitary
    if initial is None:
        initial = np.zeros(1 << n, dtype=complex)
        initial[0] = 1.0
    psi = unitary @ np.asarray(initial, dtype=complex)
    return np.array([np.vdot(psi, _embed_1q(n, q, _ZM) @ psi).real for q in range(n)])


def dense_matrix_oracle(spec: CircuitSpec, inputs) -> np.ndarray:
    x = np.asarray(inputs, dtype=float)
    if x.shape != (spec.n_qubits,):
        raise InvalidInputError(f"expected {spec.n_qubits} inputs, got shape {x.shape}")
    return dense_expectations(spec.n_qubits, dense_gate_list(spec, x))
