"""Synthetic FEM-surrogate data, CSV I/O, train/test splits and scaling."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from spdqml.errors import FormatError, InvalidInputError, InvalidParameterError, ParseError

GENERATOR_VERSION = "sinusoid-pairwise-v1"


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray  # (N, d)
    targets: np.ndarray  # (N, M)
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=float)
        y = np.asarray(self.targets, dtype=float)
        if x.ndim != 2 or y.ndim != 2:
            raise InvalidInputError(f"inputs and targets must be 2-d, got {x.shape} and {y.shape}")
        if x.shape[0] != y.shape[0]:
            raise InvalidInputError(f"{x.shape[0]} input rows but {y.shape[0]} target rows")
        if x.shape[0] < 1 or x.shape[1] < 1 or y.shape[1] < 1:
            raise InvalidInputError(f"empty dataset: inputs {x.shape}, targets {y.shape}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InvalidInputError("dataset contains non-finite values")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "targets", y)

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.inputs.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.targets.shape[1]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices)
        return Dataset(self.inputs[idx], self.targets[idx], dict(self.metadata))


@dataclass(frozen=True)
class SyntheticMap:
    """``y_j(x) = sum_i A_ji sin(w_ji x_i + p_ji) + sum_{i<l} B_jil x_i x_l``."""

    amplitude: np.ndarray  # (M, d)
    frequency: np.ndarray  # (M, d)
    phase: np.ndarray  # (M, d)
    interaction: np.ndarray  # (M, d(d-1)/2), pairs in lexicographic order

    @classmethod
    def draw(cls, rng: np.random.Generator, d: int, n_outputs: int) -> "SyntheticMap":
        n_pairs = d * (d - 1) // 2
        return cls(
            amplitude=rng.normal(0.0, 1.0, (n_outputs, d)),
            frequency=rng.uniform(0.5 * math.pi, 2.0 * math.pi, (n_outputs, d)),
            phase=rng.uniform(0.0, 2.0 * math.pi, (n_outputs, d)),
            interaction=rng.normal(0.0, 2.0 / math.sqrt(max(n_pairs, 1)), (n_outputs, n_pairs)),
        )

    def zeroed(self) -> "SyntheticMap":
        return replace(self, amplitude=np.zeros_like(self.amplitude),
                       interaction=np.zeros_like(self.interaction))

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        i, j = np.triu_indices(X.shape[1], k=1)
        waves = np.sin(X[:, None, :] * self.frequency[None] + self.phase[None])
        return np.einsum("jd,njd->nj", self.amplitude, waves) + (X[:, i] * X[:, j]) @ self.interaction.T

    def gradient_bound(self) -> np.ndarray:
        """Per-output bound on ``|dy_j/dx_i|`` over the unit cube."""
        return np.sum(np.abs(self.amplitude * self.frequency), axis=1) + np.sum(np.abs(self.interaction), axis=1)


def generate_synthetic(seed: int, n_samples: int, d: int = 7, n_outputs: int = 32,
                       target_map: SyntheticMap | None = None) -> Dataset:
    """Inputs uniform on ``[0, 1]^d`` mapped through a seeded :class:`SyntheticMap`."""
    if n_samples < 1 or d < 1 or n_outputs < 1:
        raise InvalidParameterError(
            f"sizes must be positive, got N={n_samples}, d={d}, M={n_outputs}")
    coeff_seq, input_seq = np.random.SeedSequence(seed).spawn(2)
    if target_map is None:
        target_map = SyntheticMap.draw(np.random.default_rng(coeff_seq), d, n_outputs)
    X = np.random.default_rng(input_seq).uniform(0.0, 1.0, (n_samples, d))
    meta = {"seed": seed, "generator": GENERATOR_VERSION, "n_samples": n_samples,
            "n_inputs": d, "n_outputs": n_outputs}
    return Dataset(X, target_map(X), meta)


def column_names(d: int, m: int) -> list[str]:
    return [f"x{i + 1}" for i in range(d)] + [f"y{j + 1}" for j in range(m)]


def save_csv(dataset: Dataset, path) -> None:
    path = Path(path)
    rows = np.hstack([dataset.inputs, dataset.targets])
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(column_names(dataset.n_inputs, dataset.n_outputs)) + "\n")
        for row in rows:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")


def _parse_header(line: str) -> tuple[int, int]:
    names = line.strip().split(",")
    d = 0
    while d < len(names) and names[d] == f"x{d + 1}":
        d += 1
    m = len(names) - d
    if d == 0 or m == 0 or names[d:] != [f"y{j + 1}" for j in range(m)]:
        raise FormatError(f"missing or malformed header: expected x1..xd,y1..yM, got {line.strip()[:60]!r}")
    return d, m


def load_csv(path) -> Dataset:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FormatError(f"{path}: file is empty")
    d, m = _parse_header(lines[0])
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != d + m:
            raise ParseError(f"expected {d + m} values, got {len(cells)}", line=lineno)
        try:
            row = [float(c) for c in cells]
        except ValueError:
            bad = next(c for c in cells if not _is_float(c))
            raise ParseError(f"non-numeric value {bad!r}", line=lineno) from None
        if not all(math.isfinite(v) for v in row):
            raise ParseError("non-finite value", line=lineno)
        rows.append(row)
    if not rows:
        raise InvalidInputError(f"{path}: no data rows")
    data = np.array(rows)
    return Dataset(data[:, :d], data[:, d:], {"source": str(path)})


def _is_float(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def split(dataset: Dataset, train_fraction: float = 0.8, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Seeded shuffle, then the first ``round(fraction * N)`` rows train."""
    if not 0.0 < train_fraction < 1.0:
        raise InvalidParameterError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n = len(dataset)
    if n < 2:
        raise InvalidInputError("need at least two samples to split")
    n_train = min(max(int(round(train_fraction * n)), 1), n - 1)
    order = np.random.default_rng(seed).permutation(n)
    train_idx, test_idx = np.sort(order[:n_train]), np.sort(order[n_train:])
    train = dataset.subset(train_idx)
    test = dataset.subset(test_idx)
    train.metadata["indices"] = train_idx.tolist()
    test.metadata["indices"] = test_idx.tolist()
    return train, test


@dataclass(frozen=True)
class Scaler:
    """Min-max for inputs, standardization for targets.

    Columns with zero spread are passed through unchanged and listed in
    ``constant_inputs`` / ``constant_targets``.
    """

    input_min: np.ndarray
    input_max: np.ndarray
    target_mean: np.ndarray
    target_std: np.ndarray

    @property
    def constant_inputs(self) -> np.ndarray:
        return np.flatnonzero(self.input_max <= self.input_min)

    @property
    def constant_targets(self) -> np.ndarray:
        return np.flatnonzero(self.target_std <= 0)

    def _input_affine(self):
        span = self.input_max - self.input_min
        flat = span <= 0
        return np.where(flat, 0.0, self.input_min), np.where(flat, 1.0, span)

    def _target_affine(self):
        flat = self.target_std <= 0
        return np.where(flat, 0.0, self.target_mean), np.where(flat, 1.0, self.target_std)

    def transform_inputs(self, X):
        shift, scale = self._input_affine()
        return (np.asarray(X, dtype=float) - shift) / scale

    def inverse_inputs(self, X):
        shift, scale = self._input_affine()
        return np.asarray(X, dtype=float) * scale + shift

    def transform_targets(self, Y):
        shift, scale = self._target_affine()
        return (np.asarray(Y, dtype=float) - shift) / scale

    def inverse_targets(self, Y):
        shift, scale = self._target_affine()
        return np.asarray(Y, dtype=float) * scale + shift

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in
                ("input_min", "input_max", "target_mean", "target_std")}

    @classmethod
    def from_dict(cls, d: dict) -> "Scaler":
        return cls(*(np.asarray(d[k], dtype=float) for k in
                     ("input_min", "input_max", "target_mean", "target_std")))


def fit_scaler(train: Dataset) -> Scaler:
    scaler = Scaler(train.inputs.min(axis=0), train.inputs.max(axis=0),
                    train.targets.mean(axis=0), train.targets.std(axis=0))
    flagged = scaler.constant_inputs.tolist() + [f"y{j + 1}" for j in scaler.constant_targets]
    if flagged:
        warnings.warn(f"constant columns passed through unscaled: {flagged}", stacklevel=2)
    return scaler


def apply_scaler(scaler: Scaler, dataset: Dataset) -> Dataset:
    meta = dict(dataset.metadata, scaler=scaler.to_dict())
    return Dataset(scaler.transform_inputs(dataset.inputs), scaler.transform_targets(dataset.targets), meta)


def invert_scaler(scaler: Scaler, dataset: Dataset) -> Dataset:
    meta = {k: v for k, v in dataset.metadata.items() if k != "scaler"}
    return Dataset(scaler.inverse_inputs(dataset.inputs), scaler.inverse_targets(dataset.targets), meta)
