"""Pure numpy implementation of the hot kernels.

Used when the compiled ``_kernels`` extension is unavailable, and as the
reference the compiled kernels are benchmarked and cross-checked against.
Both modules expose the same three functions with identical signatures:

``expval(angles, weights, ranges, axis)``
    Pauli-Z expectations of the embed + three-block circuit, one circuit per
    row of ``angles``.
``expval_vjp(angles, weights, ranges, axis, upstream)``
    Expectations plus the vector-Jacobian product with ``upstream`` computed
    by the adjoint method.
``jacobi_eigh(a, tol, max_sweeps)``
    Cyclic Jacobi diagonalization of a symmetric matrix.

Array conventions: ``angles`` is ``(B, n)``; ``weights`` is ``(Bw, L, n, 3)``
with ``Bw`` either 1 (shared) or ``B`` (per row); ``ranges`` is ``(L,)``.
Qubit 0 is the most significant bit of the basis index.
"""
from __future__ import annotations

import math

import numpy as np

_X = np.array([[0, 1], [1, 0]], dtype=complex)[None]
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)[None]
_Z = np.array([[1, 0], [0, -1]], dtype=complex)[None]
_GENERATORS = (_X, _Y, _Z)


def _rx(theta):
    c = np.cos(theta / 2)
    s = np.sin(theta / 2)
    u = np.empty(theta.shape + (2, 2), dtype=complex)
    u[..., 0, 0] = c
    u[..., 0, 1] = -1j * s
    u[..., 1, 0] = -1j * s
    u[..., 1, 1] = c
    return u


def _ry(theta):
    c = np.cos(theta / 2)
    s = np.sin(theta / 2)
    u = np.empty(theta.shape + (2, 2), dtype=complex)
    u[..., 0, 0] = c
    u[..., 0, 1] = -s
    u[..., 1, 0] = s
    u[..., 1, 1] = c
    return u


def _rz(theta):
    u = np.zeros(theta.shape + (2, 2), dtype=complex)
    u[..., 0, 0] = np.exp(-0.5j * theta)
    u[..., 1, 1] = np.exp(0.5j * theta)
    return u


_ROTATIONS = (_rx, _ry, _rz)


def _rot(phi, theta, omega):
    # Rz(omega) @ Ry(theta) @ Rz(phi), written out
    c = np.cos(theta / 2)
    s = np.sin(theta / 2)
    u = np.empty(phi.shape + (2, 2), dtype=complex)
    u[..., 0, 0] = np.exp(-0.5j * (phi + omega)) * c
    u[..., 0, 1] = -np.exp(0.5j * (phi - omega)) * s
    u[..., 1, 0] = np.exp(-0.5j * (phi - omega)) * s
    u[..., 1, 1] = np.exp(0.5j * (phi + omega)) * c
    return u


def apply_1q(state, n, q, u):
    """Apply per-row 2x2 matrices ``u`` (shape ``(Bu, 2, 2)``) to qubit ``q``."""
    b = state.shape[0]
    s = state.reshape(b, 1 << q, 2, 1 << (n - q - 1))
    a0 = s[:, :, 0, :]
    a1 = s[:, :, 1, :]
    u = u[:, :, :, None, None]
    out = np.empty_like(s)
    out[:, :, 0, :] = u[:, 0, 0] * a0 + u[:, 0, 1] * a1
    out[:, :, 1, :] = u[:, 1, 0] * a0 + u[:, 1, 1] * a1
    return out.reshape(b, -1)


def cnot_permutation(n, control, target):
    idx = np.arange(1 << n)
    cmask = 1 << (n - 1 - control)
    tmask = 1 << (n - 1 - target)
    return np.where(idx & cmask, idx ^ tmask, idx)


def z_signs(n):
    """``(2**n, n)`` table of the Pauli-Z eigenvalue of qubit q in basis state i."""
    idx = np.arange(1 << n)[:, None]
    shifts = n - 1 - np.arange(n)[None, :]
    return 1.0 - 2.0 * ((idx >> shifts) & 1)


def _entangler_perms(n, ranges):
    if n < 2:
        return [[] for _ in ranges]
    return [[cnot_permutation(n, q, (q + int(r)) % n) for q in range(n)] for r in ranges]


def _zero_state(b, n):
    state = np.zeros((b, 1 << n), dtype=complex)
    state[:, 0] = 1.0
    return state


def expval(angles, weights, ranges, axis):
    angles = np.asarray(angles, dtype=float)
    weights = np.asarray(weights, dtype=float)
    b, n = angles.shape
    embed = _ROTATIONS[axis]
    state = _zero_state(b, n)
    for q in range(n):
        state = apply_1q(state, n, q, embed(angles[:, q]))
    for layer, perms in enumerate(_entangler_perms(n, ranges)):
        w = weights[:, layer]
        for q in range(n):
            state = apply_1q(state, n, q, _rot(w[:, q, 0], w[:, q, 1], w[:, q, 2]))
        for perm in perms:
            state = state[:, perm]
    probs = state.real ** 2 + state.imag ** 2
    return probs @ z_signs(n)


def _program(n, n_layers, axis):
    """Flat gate list: (kind, qubit, param) with kind 0/1/2 = rx/ry/rz, 3 = cnot.

    ``param`` is ``("in", q)`` for embedding angles, ``("w", l, q, j)`` for
    Euler angles, or the target qubit for a CNOT.
    """
    gates = [(axis, q, ("in", q)) for q in range(n)]
    for layer in range(n_layers):
        for q in range(n):
            gates.append((2, q, ("w", layer, q, 0)))
            gates.append((1, q, ("w", layer, q, 1)))
            gates.append((2, q, ("w", layer, q, 2)))
        gates.append((3, layer, None))
    return gates


def expval_vjp(angles, weights, ranges, axis, upstream):
    angles = np.asarray(angles, dtype=float)
    weights = np.asarray(weights, dtype=float)
    upstream = np.asarray(upstream, dtype=float)
    b, n = angles.shape
    n_layers = weights.shape[1]
    perms = _entangler_perms(n, ranges)

    def theta_of(ref):
        if ref[0] == "in":
            return angles[:, ref[1]]
        return weights[:, ref[1], ref[2], ref[3]]

    gates = _program(n, n_layers, axis)
    psi = _zero_state(b, n)
    for kind, q, ref in gates:
        if kind == 3:
            for perm in perms[q]:
                psi = psi[:, perm]
        else:
            psi = apply_1q(psi, n, q, _ROTATIONS[kind](theta_of(ref)))

    signs = z_signs(n)
    probs = psi.real ** 2 + psi.imag ** 2
    exp = probs @ signs
    lam = psi * (upstream @ signs.T)

    g_angles = np.zeros_like(angles)
    g_weights = np.zeros((b,) + weights.shape[1:])
    for kind, q, ref in reversed(gates):
        if kind == 3:
            for perm in reversed(perms[q]):
                psi = psi[:, perm]
                lam = lam[:, perm]
            continue
        g_psi = apply_1q(psi, n, q, _GENERATORS[kind])
        grad = np.sum(np.conj(lam) * g_psi, axis=1).imag
        if ref[0] == "in":
            g_angles[:, ref[1]] = grad
        else:
            g_weights[:, ref[1], ref[2], ref[3]] = grad
        undo = _ROTATIONS[kind](-theta_of(ref))
        psi = apply_1q(psi, n, q, undo)
        lam = apply_1q(lam, n, q, undo)
    if weights.shape[0] == 1:
        g_weights = g_weights.sum(axis=0, keepdims=True)
    return exp, g_angles, g_weights


def jacobi_eigh(a, tol, max_sweeps):
    """Cyclic Jacobi; returns ``(diagonal, V, sweeps, converged)`` unsorted."""
    a = np.array(a, dtype=float, copy=True)
    m = a.shape[0]
    v = np.eye(m)
    offmask = ~np.eye(m, dtype=bool)
    for sweep in range(max_sweeps + 1):
        off = math.sqrt(float(np.sum(np.square(a[offmask]))))
        if off < tol:
            return np.diag(a).copy(), v, sweep, True
        if sweep == max_sweeps:
            break
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    return np.diag(a).copy(), v, max_sweeps, False
