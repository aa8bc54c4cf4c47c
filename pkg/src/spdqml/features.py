"""SPD feature pipeline: polynomial expansion, ``z z^T + eps I``, spectral
projection onto the leading eigenvectors, and unit-norm state preparation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from spdqml._backend import kernels
from spdqml.errors import (DegenerateStateError, InvalidInputError, InvalidParameterError,
                           NumericalError)

DEFAULT_EPSILON = 1e-6
DEFAULT_K = 7
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
SYMMETRY_TOL = 1e-10
NORM_FLOOR = 1e-12
MODES = ("batch", "per-sample")


def expanded_dim(d: int) -> int:
    return 2 * d + d * (d - 1) // 2


def expand_features(x) -> np.ndarray:
    """Degree-2 expansion without a bias term.

    Ordering: ``x_1..x_d``, then ``x_1^2..x_d^2``, then ``x_i x_j`` for
    ``i < j`` in lexicographic order.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InvalidInputError(f"expected a 1-d feature vector, got shape {x.shape}")
    return expand_batch(x[None, :])[0]


def expand_batch(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] < 1:
        raise InvalidInputError(f"expected a (samples, features) array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("feature vectors must be finite")
    i, j = np.triu_indices(X.shape[1], k=1)
    return np.concatenate([X, X * X, X[:, i] * X[:, j]], axis=1)


@dataclass(frozen=True)
class SpdMatrix:
    entries: np.ndarray
    epsilon: float

    @property
    def size(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class EigenBasis:
    """Eigenvalues in descending order; column ``j`` of ``eigenvectors`` pairs
    with ``eigenvalues[j]``. Each column's largest-magnitude entry is
    non-negative (first such entry on ties)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sweeps: int = 0

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T

    def top(self, k: int) -> np.ndarray:
        return self.eigenvectors[:, :k]


@dataclass(frozen=True)
class ProjectedState:
    projected: np.ndarray
    normalized: np.ndarray


def build_spd(z, epsilon: float = DEFAULT_EPSILON) -> SpdMatrix:
    """``z z^T + epsilon I``."""
    _check_epsilon(epsilon)
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or not np.all(np.isfinite(z)):
        raise InvalidInputError("z must be a finite 1-d vector")
    entries = np.outer(z, z)
    entries[np.diag_indices_from(entries)] += epsilon
    return SpdMatrix(entries, float(epsilon))


def _check_epsilon(epsilon):
    if not (epsilon > 0 and math.isfinite(epsilon)):
        raise InvalidParameterError(f"epsilon must be a positive finite number, got {epsilon}")


def apply_sign_convention(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so the entry of largest magnitude is non-negative."""
    vectors = np.array(vectors, dtype=float, copy=True)
    lead = np.argmax(np.abs(vectors), axis=0)  # argmax returns the first index on ties
    signs = np.where(vectors[lead, np.arange(vectors.shape[1])] < 0, -1.0, 1.0)
    return vectors * signs


def eigendecompose(Z, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS) -> EigenBasis:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Pairs ``(p, q)`` are swept row-major over the upper triangle; iteration
    stops once the off-diagonal Frobenius norm drops below ``tol``.
    """
    a = Z.entries if isinstance(Z, SpdMatrix) else np.asarray(Z, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("matrix entries must be finite")
    asym = float(np.max(np.abs(a - a.T))) if a.size else 0.0
    if asym > SYMMETRY_TOL:
        raise InvalidInputError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
    diag, vecs, sweeps, converged = kernels.jacobi_eigh(np.ascontiguousarray(a), tol, max_sweeps)
    if not converged:
        raise NumericalError(f"Jacobi eigensolver did not converge in {sweeps} sweeps",
                             iterations=sweeps)
    order = np.argsort(-diag, kind="stable")
    return EigenBasis(diag[order], apply_sign_convention(vecs[:, order]), sweeps)


def fit_projection(dataset, k: int = DEFAULT_K, epsilon: float = DEFAULT_EPSILON,
                   mode: str = "batch") -> np.ndarray | None:
    """Shared ``(m, k)`` basis: top-k eigenvectors of ``mean(z z^T) + eps I``.

    ``mode="per-sample"`` has no shared basis and returns ``None``; use
    :func:`per_sample_basis` on each sample instead.
    """
    _check_epsilon(epsilon)
    if mode not in MODES:
        raise InvalidParameterError(f"mode must be one of {MODES}, got {mode!r}")
    Z = np.asarray(dataset, dtype=float)
    if Z.ndim == 1:
        Z = Z[None, :]
    if Z.size == 0 or Z.ndim != 2:
        raise InvalidInputError("projection needs a non-empty (samples, m) dataset")
    m = Z.shape[1]
    if not 1 <= k <= m:
        raise InvalidParameterError(f"k={k} outside [1, {m}]")
    if mode == "per-sample":
        return None
    cov = (Z.T @ Z) / Z.shape[0]
    cov = 0.5 * (cov + cov.T)
    cov[np.diag_indices(m)] += epsilon
    return eigendecompose(cov).top(k)


def per_sample_basis(z, k: int = DEFAULT_K, epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    return eigendecompose(build_spd(z, epsilon)).top(k)


def project(z, basis) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    basis = np.asarray(basis, dtype=float)
    if basis.ndim != 2 or z.shape[-1] != basis.shape[0]:
        raise InvalidInputError(
            f"cannot project length-{z.shape[-1]} features onto basis of shape {basis.shape}")
    return z @ basis


def normalize_state(x_proj) -> np.ndarray:
    x = np.asarray(x_proj, dtype=float)
    norm = float(np.linalg.norm(x))
    if not norm > NORM_FLOOR:
        raise DegenerateStateError(f"projected norm {norm:.3e} is too small to encode")
    return x / norm


def prepare_state(z, basis) -> ProjectedState:
    projected = project(z, basis)
    return ProjectedState(projected, normalize_state(projected))


class SpdProjector:
    """Raw features to unit vectors of length ``k`` ready for angle embedding."""

    def __init__(self, k: int = DEFAULT_K, epsilon: float = DEFAULT_EPSILON, mode: str = "batch",
                 basis: np.ndarray | None = None):
        _check_epsilon(epsilon)
        if mode not in MODES:
            raise InvalidParameterError(f"mode must be one of {MODES}, got {mode!r}")
        if k < 1:
            raise InvalidParameterError(f"k must be positive, got {k}")
        self.k = int(k)
        self.epsilon = float(epsilon)
        self.mode = mode
        self.basis = None if basis is None else np.asarray(basis, dtype=float)

    @property
    def fitted(self) -> bool:
        return self.mode == "per-sample" or self.basis is not None

    def fit(self, X) -> "SpdProjector":
        Z = expand_batch(X)
        if not 1 <= self.k <= Z.shape[1]:
            raise InvalidParameterError(f"k={self.k} outside [1, {Z.shape[1]}]")
        self.basis = fit_projection(Z, self.k, self.epsilon, self.mode)
        return self

    def transform(self, X, sample_offset: int = 0) -> np.ndarray:
        if not self.fitted:
            raise InvalidInputError("projector must be fit before transform")
        Z = expand_batch(X)
        if self.mode == "batch":
            projected = project(Z, self.basis)
        else:
            projected = np.stack([project(z, per_sample_basis(z, self.k, self.epsilon)) for z in Z])
        norms = np.linalg.norm(projected, axis=1)
        bad = np.flatnonzero(~(norms > NORM_FLOOR))
        if bad.size:
            raise DegenerateStateError(
                f"projected norm {norms[bad[0]]:.3e} is too small to encode",
                sample_index=int(bad[0]) + sample_offset)
        return projected / norms[:, None]

    def config(self) -> dict:
        return {"k": self.k, "epsilon": self.epsilon, "mode": self.mode}

