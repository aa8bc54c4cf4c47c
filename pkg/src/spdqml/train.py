"""Training loop, evaluation, checkpoints and the architecture comparison."""
from __future__ import annotations

import io
import json
import struct
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from spdqml import data as D
from spdqml._backend import BACKEND
from spdqml.errors import (CheckpointVersionError, DivergenceError, FormatError,
                           InvalidParameterError, ShapeError, TruncatedFileError)
from spdqml.features import MODES, SpdProjector
from spdqml.model import (ARCHITECTURES, GRAD_METHODS, LABELS, DenseLayer, HybridModel,
                          QuantumLayer, build_model, mse, r2_score)
from spdqml.qsim import CircuitSpec

UNITS = ("standardized", "original")

# Reference values reported for the (unpublished) bridge FEM dataset.
REFERENCE_TABLE = {
    "classical-quantum": (0.00096, 0.96143),
    "quantum-classical": (0.00047, 0.98445),
    "spd-enhanced": (0.00031, 0.98765),
}


@dataclass
class TrainConfig:
    architecture: str = "spd-enhanced"
    epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps_opt: float = 1e-8
    n_qubits: int = 7
    epsilon: float = 1e-6
    projection_mode: str = "batch"
    train_fraction: float = 0.8
    hidden: tuple | None = None
    entangler_range: int = 1
    embed_axis: str = "X"
    grad_method: str = "shift"
    units: str = "standardized"
    data_source: str = ""

    def __post_init__(self):
        if self.hidden is not None:
            self.hidden = tuple(int(h) for h in self.hidden)
        self.validate()

    def validate(self) -> None:
        if self.architecture not in ARCHITECTURES:
            raise InvalidParameterError(
                f"architecture must be one of {', '.join(ARCHITECTURES)}; got {self.architecture!r}")
        if self.epochs < 1:
            raise InvalidParameterError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise InvalidParameterError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate >= 0:
            raise InvalidParameterError(f"learning_rate must be non-negative, got {self.learning_rate}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.eps_opt > 0):
            raise InvalidParameterError("Adam hyperparameters need 0 <= beta < 1 and eps_opt > 0")
        if self.projection_mode not in MODES:
            raise InvalidParameterError(f"projection_mode must be one of {MODES}")
        if self.grad_method not in GRAD_METHODS:
            raise InvalidParameterError(f"grad_method must be one of {GRAD_METHODS}")
        if self.units not in UNITS:
            raise InvalidParameterError(f"units must be one of {UNITS}")
        if not 0 < self.train_fraction < 1:
            raise InvalidParameterError("train_fraction must be in (0, 1)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden) if self.hidden is not None else None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise InvalidParameterError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class TrainReport:
    architecture: str
    seed: int
    epoch_train_mse: list
    test_mse: float
    test_r2: float
    units: str
    n_train: int
    n_test: int
    config: dict
    backend: str = BACKEND
    wall_seconds: float = 0.0
    status: str = "ok"

    @property
    def label(self) -> str:
        return LABELS[self.architecture]

    def deterministic_view(self) -> dict:
        """Everything except wall-clock time and the kernel backend."""
        d = asdict(self)
        d.pop("wall_seconds")
        d.pop("backend")
        return d

    def to_text(self) -> str:
        lines = [
            f"architecture = {self.architecture}",
            f"label = {self.label}",
            f"status = {self.status}",
            f"seed = {self.seed}",
            f"units = {self.units}",
            f"n_train = {self.n_train}",
            f"n_test = {self.n_test}",
            f"epochs_run = {len(self.epoch_train_mse)}",
            f"first_epoch_train_mse = {_fmt(self.epoch_train_mse[0] if self.epoch_train_mse else float('nan'))}",
            f"final_train_mse = {_fmt(self.epoch_train_mse[-1] if self.epoch_train_mse else float('nan'))}",
            f"test_mse = {_fmt(self.test_mse)}",
            f"test_r2 = {_fmt(self.test_r2)}",
            f"wall_seconds = {self.wall_seconds:.3f}",
            f"backend = {self.backend}",
        ]
        lines += [f"config.{k} = {v}" for k, v in self.config.items()]
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def write(self, directory, stem: str = "report") -> tuple[Path, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        txt = directory / f"{stem}.txt"
        js = directory / f"{stem}.json"
        txt.write_text(self.to_text(), encoding="utf-8")
        js.write_text(self.to_json() + "\n", encoding="utf-8")
        return txt, js

    @classmethod
    def from_json(cls, text: str) -> "TrainReport":
        return cls(**json.loads(text))


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


class Adam:
    """Adam with bias correction, updating arrays in place."""

    def __init__(self, params: dict, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p) for k, p in params.items()}
        self.v = {k: np.zeros_like(p) for k, p in params.items()}

    def step(self, grads: dict) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k, p in self.params.items():
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            p -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def _prepare(config: TrainConfig, dataset: D.Dataset):
    train_raw, test_raw = D.split(dataset, config.train_fraction, config.seed)
    scaler = D.fit_scaler(train_raw)
    return train_raw, test_raw, scaler


def _build(config: TrainConfig, dataset: D.Dataset, scaled_train_inputs, seed_seq) -> HybridModel:
    projector = None
    if config.architecture == "spd-enhanced":
        projector = SpdProjector(config.n_qubits, config.epsilon, config.projection_mode)
        projector.fit(scaled_train_inputs)
    n = config.n_qubits
    return build_model(
        config.architecture, input_dim=dataset.n_inputs, output_dim=dataset.n_outputs,
        n_qubits=n, hidden=config.hidden, seed=int(seed_seq.generate_state(1)[0]),
        projector=projector, ranges=(config.entangler_range,) * 3 if n > 1 else (1, 1, 1),
        embed_axis=config.embed_axis, grad_method=config.grad_method)


def train(config: TrainConfig, dataset: D.Dataset, callback=None):
    """Train one architecture; returns ``(model, report)``.

    The returned model carries the fitted data scaler as ``model.scaler``.
    Deterministic given ``(config, dataset)``. Raises :class:`DivergenceError`
    (with the partial report attached as ``.report``) if the training MSE
    becomes non-finite.
    """
    config.validate()
    start = time.perf_counter()
    train_raw, test_raw, scaler = _prepare(config, dataset)
    X_train = scaler.transform_inputs(train_raw.inputs)
    Y_train = scaler.transform_targets(train_raw.targets)
    init_seq, shuffle_seq = np.random.SeedSequence(config.seed).spawn(2)
    model = _build(config, dataset, X_train, init_seq)
    model.scaler = scaler
    # the feature pipeline is frozen, so precompute it once
    H_train = model.preprocess(X_train)
    front = _FrozenFront(model)

    opt = Adam(model.parameters(), config.learning_rate, config.beta1, config.beta2, config.eps_opt)
    shuffle_rng = np.random.default_rng(shuffle_seq)
    n = len(train_raw)
    history = []
    report = TrainReport(config.architecture, config.seed, history, float("nan"), float("nan"),
                         config.units, n, len(test_raw), config.to_dict())
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(n)
        for lo in range(0, n, config.batch_size):
            idx = order[lo:lo + config.batch_size]
            _, grads = front.loss_and_gradients(H_train[idx], Y_train[idx])
            opt.step(grads)
        epoch_mse = mse(front.predict(H_train), Y_train)
        history.append(epoch_mse)
        if callback is not None:
            callback(epoch, epoch_mse)
        if not np.isfinite(epoch_mse) or not all(np.all(np.isfinite(p)) for p in model.parameters().values()):
            report.status = f"diverged at epoch {epoch}"
            report.wall_seconds = time.perf_counter() - start
            err = DivergenceError(f"training MSE became non-finite at epoch {epoch}", epoch)
            err.report = report
            raise err
    report.test_mse, report.test_r2 = evaluate(model, test_raw, units=config.units)
    report.wall_seconds = time.perf_counter() - start
    return model, report


class _FrozenFront:
    """View of a model whose preprocessing has already been applied."""

    def __init__(self, model: HybridModel):
        self.model = model

    def _run(self, H):
        inputs, caches = [], []
        for layer in self.model.layers:
            inputs.append(H)
            H, cache = layer.forward(H)
            caches.append(cache)
        return H, inputs, caches

    def predict(self, H):
        return self._run(H)[0]

    def loss_and_gradients(self, H, Y):
        out, inputs, caches = self._run(H)
        resid = out - Y
        return float(np.mean(resid ** 2)), self.model._backward(inputs, caches, 2.0 * resid / resid.size)


def evaluate(model: HybridModel, dataset: D.Dataset, scaler: D.Scaler | None = None,
             units: str = "standardized") -> tuple[float, float]:
    """``(mse, r2)`` of ``model`` on raw ``dataset``.

    ``scaler`` defaults to the one attached during training. With
    ``units="standardized"`` metrics compare standardized targets; with
    ``"original"`` predictions are mapped back to the raw target units first.
    """
    if units not in UNITS:
        raise InvalidParameterError(f"units must be one of {UNITS}")
    scaler = scaler if scaler is not None else getattr(model, "scaler", None)
    if scaler is None:
        raise InvalidParameterError("evaluate needs the scaler used in training")
    if dataset.n_outputs != model.output_dim or dataset.n_inputs != model.input_dim:
        raise ShapeError(
            f"model maps {model.input_dim} -> {model.output_dim} but dataset is "
            f"{dataset.n_inputs} -> {dataset.n_outputs}")
    pred = model.predict(scaler.transform_inputs(dataset.inputs))
    if units == "original":
        pred = scaler.inverse_targets(pred)
        truth = dataset.targets
    else:
        truth = scaler.transform_targets(dataset.targets)
    r2 = r2_score(pred, truth) if len(dataset) >= 2 else float("nan")
    return mse(pred, truth), r2


def compare_architectures(config: TrainConfig, dataset: D.Dataset, callback=None) -> list[TrainReport]:
    """Train all three architectures with the same data, seed and budget."""
    reports = []
    for arch in ARCHITECTURES:
        cfg = TrainConfig.from_dict(dict(config.to_dict(), architecture=arch, hidden=None))
        reports.append(train(cfg, dataset, callback=callback)[1])
    return reports


def comparison_table(reports: list[TrainReport]) -> str:
    """Aligned text table: model, MSE, R^2, then the published reference values."""
    rows = [("Model", "MSE", "R2 Score", "Reference MSE", "Reference R2")]
    for r in reports:
        ref_mse, ref_r2 = REFERENCE_TABLE[r.architecture]
        rows.append((r.label, f"{r.test_mse:.5g}", f"{r.test_r2:.5g}", f"{ref_mse:.5g}", f"{ref_r2:.5g}"))
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    out = []
    for i, row in enumerate(rows):
        out.append(" | ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 0:
            out.append("-+-".join("-" * w for w in widths))
    out.append("Reference columns are published values for the bridge FEM dataset; "
               "they are not reproducible on synthetic data.")
    return "\n".join(out) + "\n"


# --- checkpoints ---------------------------------------------------------
#
# Layout (all integers little-endian):
#   8 bytes   magic  b"SPDQMLCK"
#   u32       format version
#   u64       length of the UTF-8 JSON header, then the header itself
#   u32       number of arrays
#   per array: u16 name length, name, u8 ndim, ndim x u64 dims,
#              prod(dims) x float64 (little-endian)

MAGIC = b"SPDQMLCK"
FORMAT_VERSION = 1


def _model_header(model: HybridModel) -> dict:
    layers = []
    for layer in model.layers:
        if isinstance(layer, QuantumLayer):
            spec = layer.spec
            layers.append({"kind": "quantum", "n_qubits": spec.n_qubits, "ranges": list(spec.ranges),
                           "embed_axis": spec.embed_axis, "grad_method": layer.grad_method})
        else:
            layers.append({"kind": "dense", "in": layer.in_width, "out": layer.out_width,
                           "activation": layer.activation})
    proj = model.preprocessing
    return {
        "architecture": model.architecture,
        "input_dim": model.input_dim,
        "output_dim": model.output_dim,
        "layers": layers,
        "projector": None if proj is None else proj.config(),
    }


def save_checkpoint(path, model: HybridModel, scaler: D.Scaler | None = None) -> None:
    """Write ``model`` (including any projection basis) and ``scaler`` to one file."""
    scaler = scaler if scaler is not None else getattr(model, "scaler", None)
    header = _model_header(model)
    header["has_scaler"] = scaler is not None
    arrays = dict(model.parameters())
    if model.preprocessing is not None and model.preprocessing.basis is not None:
        arrays["projector.basis"] = model.preprocessing.basis
    if scaler is not None:
        for k, v in scaler.to_dict().items():
            arrays[f"scaler.{k}"] = np.asarray(v, dtype=float)
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", FORMAT_VERSION))
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    buf.write(struct.pack("<Q", len(blob)))
    buf.write(blob)
    buf.write(struct.pack("<I", len(arrays)))
    for name, arr in arrays.items():
        arr = np.asarray(arr, dtype="<f8")
        raw = name.encode("utf-8")
        buf.write(struct.pack("<H", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<B", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        buf.write(np.ascontiguousarray(arr).tobytes())
    Path(path).write_bytes(buf.getvalue())


class _Reader:
    def __init__(self, raw: bytes):
        self.raw = raw
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.raw):
            raise TruncatedFileError(
                f"checkpoint truncated: needed {n} bytes at offset {self.pos}, file has {len(self.raw)}")
        out = self.raw[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(path) -> HybridModel:
    """Rebuild a model saved by :func:`save_checkpoint`; the scaler, if any,
    is attached as ``model.scaler``."""
    r = _Reader(Path(path).read_bytes())
    if r.take(len(MAGIC)) != MAGIC:
        raise FormatError(f"{path}: not a checkpoint file (bad magic string)")
    (version,) = r.unpack("<I")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(f"checkpoint format version {version}, expected {FORMAT_VERSION}")
    (hlen,) = r.unpack("<Q")
    try:
        header = json.loads(r.take(hlen).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"corrupt checkpoint header: {exc}") from None
    (count,) = r.unpack("<I")
    arrays = {}
    for _ in range(count):
        (nlen,) = r.unpack("<H")
        name = r.take(nlen).decode("utf-8")
        (ndim,) = r.unpack("<B")
        shape = r.unpack(f"<{ndim}Q") if ndim else ()
        size = int(np.prod(shape)) if shape else 1
        arrays[name] = np.frombuffer(r.take(8 * size), dtype="<f8").reshape(shape).astype(float)
    if r.pos != len(r.raw):
        raise FormatError(f"checkpoint has {len(r.raw) - r.pos} trailing bytes")
    return _rebuild(header, arrays)


def _array(arrays, name, shape):
    if name not in arrays:
        raise ShapeError(f"checkpoint is missing array {name!r}")
    arr = arrays[name]
    if arr.shape != tuple(shape):
        raise ShapeError(f"array {name!r} has shape {arr.shape}, header declares {tuple(shape)}")
    return arr.copy()


def _rebuild(header: dict, arrays: dict) -> HybridModel:
    try:
        layer_specs = header["layers"]
        declared_out = header["output_dim"]
        architecture = header["architecture"]
    except KeyError as exc:
        raise FormatError(f"checkpoint header lacks {exc}") from None
    layers = []
    for i, spec in enumerate(layer_specs):
        if spec["kind"] == "quantum":
            n = spec["n_qubits"]
            weights = _array(arrays, f"layer{i}.circuit", (3, n, 3))
            layers.append(QuantumLayer(CircuitSpec(n, weights, tuple(spec["ranges"]), spec["embed_axis"]),
                                       spec["grad_method"]))
        else:
            w = arrays.get(f"layer{i}.weight")
            if i == len(layer_specs) - 1 and w is not None and w.shape[0] != declared_out:
                raise ShapeError(
                    f"declared output width {declared_out} but final layer produces {w.shape[0]}")
            layers.append(DenseLayer(_array(arrays, f"layer{i}.weight", (spec["out"], spec["in"])),
                                     _array(arrays, f"layer{i}.bias", (spec["out"],)),
                                     spec["activation"]))
    if layers and layers[-1].out_width != declared_out:
        raise ShapeError(
            f"declared output width {declared_out} but final layer produces {layers[-1].out_width}")
    projector = None
    if header.get("projector") is not None:
        pc = header["projector"]
        basis = arrays.get("projector.basis")
        if basis is not None and basis.shape[1] != pc["k"]:
            raise ShapeError(f"projection basis has {basis.shape[1]} columns, header declares k={pc['k']}")
        projector = SpdProjector(pc["k"], pc["epsilon"], pc["mode"],
                                 basis=None if basis is None else basis.copy())
    model = HybridModel(architecture, layers, projector, input_dim=header["input_dim"])
    model.scaler = None
    if header.get("has_scaler"):
        m = header["output_dim"]
        d = header["input_dim"]
        model.scaler = D.Scaler(
            _array(arrays, "scaler.input_min", (d,)), _array(arrays, "scaler.input_max", (d,)),
            _array(arrays, "scaler.target_mean", (m,)), _array(arrays, "scaler.target_std", (m,)))
    return model
