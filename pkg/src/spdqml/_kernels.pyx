# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; same contract as ``_kernels_py``.

The statevector is kept as split real/imaginary buffers so every complex
product is plain double arithmetic (no libgcc ``__muldc3`` calls).
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, sqrt, fabs, copysign
from libc.stdlib cimport malloc, free

cnp.import_array()

ctypedef struct mat2:
    double r00, i00, r01, i01, r10, i10, r11, i11


cdef inline mat2 _rotation(int kind, double theta) noexcept nogil:
    cdef mat2 u
    cdef double c = cos(0.5 * theta)
    cdef double s = sin(0.5 * theta)
    u.r00 = 0.0; u.i00 = 0.0; u.r01 = 0.0; u.i01 = 0.0
    u.r10 = 0.0; u.i10 = 0.0; u.r11 = 0.0; u.i11 = 0.0
    if kind == 0:
        u.r00 = c; u.i01 = -s; u.i10 = -s; u.r11 = c
    elif kind == 1:
        u.r00 = c; u.r01 = -s; u.r10 = s; u.r11 = c
    else:
        u.r00 = c; u.i00 = -s; u.r11 = c; u.i11 = s
    return u


cdef inline mat2 _rot(double phi, double theta, double omega) noexcept nogil:
    # Rz(omega) Ry(theta) Rz(phi)
    cdef mat2 u
    cdef double c = cos(0.5 * theta)
    cdef double s = sin(0.5 * theta)
    cdef double ap = 0.5 * (phi + omega)
    cdef double am = 0.5 * (phi - omega)
    u.r00 = cos(ap) * c; u.i00 = -sin(ap) * c
    u.r01 = -cos(am) * s; u.i01 = -sin(am) * s
    u.r10 = cos(am) * s; u.i10 = -sin(am) * s
    u.r11 = cos(ap) * c; u.i11 = sin(ap) * c
    return u


cdef inline mat2 _generator(int kind) noexcept nogil:
    cdef mat2 g
    g.r00 = 0.0; g.i00 = 0.0; g.r01 = 0.0; g.i01 = 0.0
    g.r10 = 0.0; g.i10 = 0.0; g.r11 = 0.0; g.i11 = 0.0
    if kind == 0:
        g.r01 = 1.0; g.r10 = 1.0
    elif kind == 1:
        g.i01 = -1.0; g.i10 = 1.0
    else:
        g.r00 = 1.0; g.r11 = -1.0
    return g


cdef void _apply(double* re, double* im, int n, int q, mat2* u) noexcept nogil:
    cdef Py_ssize_t stride = (<Py_ssize_t>1) << (n - q - 1)
    cdef Py_ssize_t dim = (<Py_ssize_t>1) << n
    cdef Py_ssize_t base = 0
    cdef Py_ssize_t j, i0, i1
    cdef double ar, ai, br, bi
    while base < dim:
        for j in range(stride):
            i0 = base + j
            i1 = i0 + stride
            ar = re[i0]; ai = im[i0]
            br = re[i1]; bi = im[i1]
            re[i0] = u.r00 * ar - u.i00 * ai + u.r01 * br - u.i01 * bi
            im[i0] = u.r00 * ai + u.i00 * ar + u.r01 * bi + u.i01 * br
            re[i1] = u.r10 * ar - u.i10 * ai + u.r11 * br - u.i11 * bi
            im[i1] = u.r10 * ai + u.i10 * ar + u.r11 * bi + u.i11 * br
        base += 2 * stride


cdef void _cnot(double* re, double* im, int n, int control, int target) noexcept nogil:
    cdef Py_ssize_t dim = (<Py_ssize_t>1) << n
    cdef Py_ssize_t cmask = (<Py_ssize_t>1) << (n - 1 - control)
    cdef Py_ssize_t tmask = (<Py_ssize_t>1) << (n - 1 - target)
    cdef Py_ssize_t i, k
    cdef double tr, ti
    for i in range(dim):
        if (i & cmask) and not (i & tmask):
            k = i | tmask
            tr = re[i]; ti = im[i]
            re[i] = re[k]; im[i] = im[k]
            re[k] = tr; im[k] = ti


cdef inline void _zero_state(double* re, double* im, Py_ssize_t dim) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(dim):
        re[i] = 0.0
        im[i] = 0.0
    re[0] = 1.0


cdef void _expectations(double* re, double* im, int n, double* out) noexcept nogil:
    cdef Py_ssize_t dim = (<Py_ssize_t>1) << n
    cdef Py_ssize_t i
    cdef int q
    cdef double p
    for q in range(n):
        out[q] = 0.0
    for i in range(dim):
        p = re[i] * re[i] + im[i] * im[i]
        for q in range(n):
            if (i >> (n - 1 - q)) & 1:
                out[q] -= p
            else:
                out[q] += p


def expval(const double[:, ::1] angles, const double[:, :, :, ::1] weights,
           const cnp.int64_t[::1] ranges, int axis):
    cdef Py_ssize_t B = angles.shape[0]
    cdef int n = <int>angles.shape[1]
    cdef Py_ssize_t Bw = weights.shape[0]
    cdef int L = <int>weights.shape[1]
    cdef Py_ssize_t dim = (<Py_ssize_t>1) << n
    out = np.zeros((B, n), dtype=np.float64)
    cdef double[:, ::1] out_v = out
    cdef double* re = <double*>malloc(dim * sizeof(double))
    cdef double* im = <double*>malloc(dim * sizeof(double))
    cdef Py_ssize_t b, wb
    cdef int q, layer
    cdef mat2 u
    if re == NULL or im == NULL:
        free(re); free(im)
        raise MemoryError()
    try:
        with nogil:
            for b in range(B):
                wb = b if Bw > 1 else 0
                _zero_state(re, im, dim)
                for q in range(n):
                    u = _rotation(axis, angles[b, q])
                    _apply(re, im, n, q, &u)
                for layer in range(L):
                    for q in range(n):
                        u = _rot(weights[wb, layer, q, 0], weights[wb, layer, q, 1],
                                 weights[wb, layer, q, 2])
                        _apply(re, im, n, q, &u)
                    if n > 1:
                        for q in range(n):
                            _cnot(re, im, n, q, <int>((q + ranges[layer]) % n))
                _expectations(re, im, n, &out_v[b, 0])
    finally:
        free(re)
        free(im)
    return out


def expval_vjp(const double[:, ::1] angles, const double[:, :, :, ::1] weights,
               const cnp.int64_t[::1] ranges, int axis, const double[:, ::1] upstream):
    cdef Py_ssize_t B = angles.shape[0]
    cdef int n = <int>angles.shape[1]
    cdef Py_ssize_t Bw = weights.shape[0]
    cdef int L = <int>weights.shape[1]
    cdef Py_ssize_t dim = (<Py_ssize_t>1) << n
    cdef int n_gates = n + L * (3 * n + (n if n > 1 else 0))

    # gate program: kind 0/1/2 rotation axis, 3 = cnot; param < 0 means none
    kinds_a = np.empty(n_gates, dtype=np.int64)
    qubits_a = np.empty(n_gates, dtype=np.int64)
    params_a = np.empty(n_gates, dtype=np.int64)
    cdef cnp.int64_t[::1] kinds = kinds_a
    cdef cnp.int64_t[::1] qubits = qubits_a
    cdef cnp.int64_t[::1] params = params_a
    cdef int g = 0
    cdef int q, layer, j
    for q in range(n):
        kinds[g] = axis; qubits[g] = q; params[g] = q; g += 1
    for layer in range(L):
        for q in range(n):
            for j, kd in enumerate((2, 1, 2)):
                kinds[g] = kd; qubits[g] = q
                params[g] = n + (layer * n + q) * 3 + j
                g += 1
        if n > 1:
            for q in range(n):
                kinds[g] = 3; qubits[g] = q
                params[g] = -1 - ((q + ranges[layer]) % n)
                g += 1

    exp = np.zeros((B, n), dtype=np.float64)
    g_angles = np.zeros((B, n), dtype=np.float64)
    g_weights = np.zeros((B, L, n, 3), dtype=np.float64)
    cdef double[:, ::1] exp_v = exp
    cdef double[:, ::1] ga_v = g_angles
    cdef double[:, :, :, ::1] gw_v = g_weights
    cdef int n_par = n + L * n * 3
    cdef double* theta = <double*>malloc(n_par * sizeof(double))
    cdef double* buf = <double*>malloc(6 * dim * sizeof(double))
    cdef double* pr
    cdef double* pi
    cdef double* lr
    cdef double* li
    cdef double* tr
    cdef double* ti
    cdef Py_ssize_t b, wb, i
    cdef int k, p
    cdef double h, acc
    cdef mat2 u, gen
    if theta == NULL or buf == NULL:
        free(theta); free(buf)
        raise MemoryError()
    pr = buf; pi = buf + dim; lr = buf + 2 * dim; li = buf + 3 * dim
    tr = buf + 4 * dim; ti = buf + 5 * dim
    try:
        with nogil:
            for b in range(B):
                wb = b if Bw > 1 else 0
                for q in range(n):
                    theta[q] = angles[b, q]
                for layer in range(L):
                    for q in range(n):
                        for j in range(3):
                            theta[n + (layer * n + q) * 3 + j] = weights[wb, layer, q, j]
                _zero_state(pr, pi, dim)
                for k in range(n_gates):
                    if kinds[k] == 3:
                        _cnot(pr, pi, n, <int>qubits[k], <int>(-1 - params[k]))
                    else:
                        u = _rotation(<int>kinds[k], theta[params[k]])
                        _apply(pr, pi, n, <int>qubits[k], &u)
                _expectations(pr, pi, n, &exp_v[b, 0])
                for i in range(dim):
                    h = 0.0
                    for q in range(n):
                        if (i >> (n - 1 - q)) & 1:
                            h -= upstream[b, q]
                        else:
                            h += upstream[b, q]
                    lr[i] = h * pr[i]
                    li[i] = h * pi[i]
                for k in range(n_gates - 1, -1, -1):
                    if kinds[k] == 3:
                        _cnot(pr, pi, n, <int>qubits[k], <int>(-1 - params[k]))
                        _cnot(lr, li, n, <int>qubits[k], <int>(-1 - params[k]))
                        continue
                    for i in range(dim):
                        tr[i] = pr[i]
                        ti[i] = pi[i]
                    gen = _generator(<int>kinds[k])
                    _apply(tr, ti, n, <int>qubits[k], &gen)
                    acc = 0.0
                    for i in range(dim):
                        acc += lr[i] * ti[i] - li[i] * tr[i]
                    p = <int>params[k]
                    if p < n:
                        ga_v[b, p] = acc
                    else:
                        p -= n
                        gw_v[b, p // (3 * n), (p // 3) % n, p % 3] = acc
                    u = _rotation(<int>kinds[k], -theta[params[k]])
                    _apply(pr, pi, n, <int>qubits[k], &u)
                    _apply(lr, li, n, <int>qubits[k], &u)
    finally:
        free(theta)
        free(buf)
    if Bw == 1:
        g_weights = g_weights.sum(axis=0, keepdims=True)
    return exp, g_angles, g_weights


def jacobi_eigh(a_in, double tol, int max_sweeps):
    a_arr = np.array(a_in, dtype=np.float64, order="C", copy=True)
    cdef double[:, ::1] a = a_arr
    cdef Py_ssize_t m = a.shape[0]
    v_arr = np.eye(m, dtype=np.float64)
    cdef double[:, ::1] v = v_arr
    cdef Py_ssize_t p, q, k
    cdef int sweep
    cdef double off, apq, th, t, c, s, x, y
    with nogil:
        for sweep in range(max_sweeps + 1):
            off = 0.0
            for p in range(m):
                for q in range(m):
                    if p != q:
                        off += a[p, q] * a[p, q]
            if sqrt(off) < tol:
                break
            if sweep == max_sweeps:
                break
            for p in range(m - 1):
                for q in range(p + 1, m):
                    apq = a[p, q]
                    if apq == 0.0:
                        continue
                    th = (a[q, q] - a[p, p]) / (2.0 * apq)
                    if fabs(th) > 1e150:
                        t = 0.5 / th
                    else:
                        t = copysign(1.0, th) / (fabs(th) + sqrt(th * th + 1.0))
                    c = 1.0 / sqrt(t * t + 1.0)
                    s = t * c
                    for k in range(m):
                        x = a[k, p]
                        y = a[k, q]
                        a[k, p] = c * x - s * y
                        a[k, q] = s * x + c * y
                    for k in range(m):
                        x = a[p, k]
                        y = a[q, k]
                        a[p, k] = c * x - s * y
                        a[q, k] = s * x + c * y
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    for k in range(m):
                        x = v[k, p]
                        y = v[k, q]
                        v[k, p] = c * x - s * y
                        v[k, q] = s * x + c * y
    converged = sqrt(off) < tol
    return np.diag(a_arr).copy(), v_arr, sweep, converged
