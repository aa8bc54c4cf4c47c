"""Hybrid quantum-classical networks and their regression metrics.

Three architectures share the same building blocks:

``classical-quantum``
    3 dense layers -> quantum layer -> 1 dense layer
``quantum-classical``
    quantum layer -> 5 dense layers (raw input width must equal the qubit count)
``spd-enhanced``
    SPD feature pipeline -> quantum layer -> 5 dense layers

The quantum layer consumes ``n`` reals as embedding angles and returns the
``n`` Pauli-Z expectations of the three-block circuit. Angles are not
rescaled; the circuit is periodic in them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from spdqml import qsim
from spdqml.errors import InvalidInputError, InvalidParameterError, ShapeError
from spdqml.features import SpdProjector
from spdqml.qsim import CircuitSpec

ARCHITECTURES = ("classical-quantum", "quantum-classical", "spd-enhanced")
LABELS = {
    "classical-quantum": "Classical-Quantum Hybrid",
    "quantum-classical": "Quantum-Classical Hybrid",
    "spd-enhanced": "SPD-Enhanced Hybrid",
}
DEFAULT_HIDDEN = {
    "classical-quantum": (64, 32),
    "quantum-classical": (64, 128, 256, 512),
    "spd-enhanced": (64, 128, 256, 512),
}
GRAD_METHODS = ("shift", "adjoint")
ACTIVATIONS = ("relu", "identity")


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str = "relu"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ShapeError(
                f"dense weights {self.weights.shape} and bias {self.bias.shape} are inconsistent")
        if self.activation not in ACTIVATIONS:
            raise InvalidParameterError(f"unknown activation {self.activation!r}")

    @property
    def in_width(self) -> int:
        return self.weights.shape[1]

    @property
    def out_width(self) -> int:
        return self.weights.shape[0]

    def forward(self, X):
        pre = X @ self.weights.T + self.bias
        if self.activation == "relu":
            return np.maximum(pre, 0.0), pre
        return pre, pre

    def backward(self, X, pre, grad_out):
        if self.activation == "relu":
            grad_out = grad_out * (pre > 0)
        return grad_out @ self.weights, grad_out.T @ X, grad_out.sum(axis=0)

    def parameters(self):
        return {"weight": self.weights, "bias": self.bias}


@dataclass
class QuantumLayer:
    spec: CircuitSpec
    grad_method: str = "shift"

    def __post_init__(self):
        if self.grad_method not in GRAD_METHODS:
            raise InvalidParameterError(
                f"grad_method must be one of {GRAD_METHODS}, got {self.grad_method!r}")

    @property
    def in_width(self) -> int:
        return self.spec.n_qubits

    out_width = in_width

    def forward(self, X):
        return qsim.run_circuit_batch(self.spec, X), None

    def backward(self, X, _cache, grad_out):
        if self.grad_method == "adjoint":
            _, g_in, g_w = qsim.circuit_vjp(self.spec, X, grad_out)
            return g_in, g_w
        jac = qsim.circuit_jacobian_batch(self.spec, X)
        g_in = np.einsum("bo,boi->bi", grad_out, jac.d_inputs)
        g_w = np.einsum("bo,bolqj->lqj", grad_out, jac.d_weights)
        return g_in, g_w

    def parameters(self):
        return {"circuit": self.spec.weights}


class HybridModel:
    """Ordered layer stack with optional SPD preprocessing in front."""

    def __init__(self, architecture: str, layers: list, preprocessing: SpdProjector | None = None,
                 input_dim: int | None = None):
        if architecture not in ARCHITECTURES:
            raise InvalidParameterError(
                f"architecture must be one of {', '.join(ARCHITECTURES)}; got {architecture!r}")
        self.architecture = architecture
        self.layers = list(layers)
        self.preprocessing = preprocessing
        self.scaler = None  # data scaler attached by training
        self._validate()
        self.input_dim = input_dim if input_dim is not None else self.layers[0].in_width

    def _validate(self):
        kinds = ["q" if isinstance(layer, QuantumLayer) else "d" for layer in self.layers]
        expected = {
            "classical-quantum": "dddqd",
            "quantum-classical": "qddddd",
            "spd-enhanced": "qddddd",
        }[self.architecture]
        if "".join(kinds) != expected:
            raise ShapeError(f"{self.architecture} expects layer pattern {expected}, got {''.join(kinds)}")
        for i, (a, b) in enumerate(zip(self.layers, self.layers[1:])):
            if a.out_width != b.in_width:
                raise ShapeError(f"layer {i} emits width {a.out_width} but layer {i + 1} expects {b.in_width}")
        if self.architecture == "spd-enhanced":
            if self.preprocessing is None:
                raise InvalidParameterError("spd-enhanced model requires an SpdProjector")
            if self.preprocessing.k != self.layers[0].in_width:
                raise ShapeError(
                    f"projector k={self.preprocessing.k} does not match {self.layers[0].in_width} qubits")
        elif self.preprocessing is not None:
            raise InvalidParameterError(f"{self.architecture} takes no preprocessing")

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_width

    @property
    def quantum_layer(self) -> QuantumLayer:
        return next(layer for layer in self.layers if isinstance(layer, QuantumLayer))

    @property
    def n_qubits(self) -> int:
        return self.quantum_layer.spec.n_qubits

    def set_grad_method(self, method: str) -> None:
        if method not in GRAD_METHODS:
            raise InvalidParameterError(f"grad_method must be one of {GRAD_METHODS}, got {method!r}")
        self.quantum_layer.grad_method = method

    def parameters(self) -> dict[str, np.ndarray]:
        """Live parameter arrays keyed ``layer{i}.{name}``; optimizers update them in place."""
        params = {}
        for i, layer in enumerate(self.layers):
            for name, arr in layer.parameters().items():
                params[f"layer{i}.{name}"] = arr
        return params

    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters().values())

    def preprocess(self, X, sample_offset: int = 0) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise InvalidInputError(
                f"{self.architecture} model expects inputs of width {self.input_dim}, got shape {X.shape}")
        if self.preprocessing is not None:
            return self.preprocessing.transform(X, sample_offset=sample_offset)
        return X

    def _forward_cached(self, X, sample_offset=0):
        h = self.preprocess(X, sample_offset)
        inputs, caches = [], []
        for layer in self.layers:
            inputs.append(h)
            h, cache = layer.forward(h)
            caches.append(cache)
        return h, inputs, caches

    def predict(self, X, sample_offset: int = 0) -> np.ndarray:
        return self._forward_cached(X, sample_offset)[0]

    def gradients_from_output(self, X, grad_output) -> dict[str, np.ndarray]:
        """Backpropagate ``dLoss/dOutput`` to every parameter."""
        _, inputs, caches = self._forward_cached(X)
        return self._backward(inputs, caches, np.asarray(grad_output, dtype=float))

    def _backward(self, inputs, caches, grad):
        grads = {}
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            if isinstance(layer, QuantumLayer):
                grad, g_w = layer.backward(inputs[i], caches[i], grad)
                grads[f"layer{i}.circuit"] = g_w
            else:
                grad, g_w, g_b = layer.backward(inputs[i], caches[i], grad)
                grads[f"layer{i}.weight"] = g_w
                grads[f"layer{i}.bias"] = g_b
        return {name: grads[name] for name in self.parameters()}

    def loss_and_gradients(self, X, targets):
        """MSE over all samples and outputs, and its gradient for every parameter."""
        out, inputs, caches = self._forward_cached(X)
        targets = np.asarray(targets, dtype=float)
        if targets.shape != out.shape:
            raise ShapeError(f"targets shape {targets.shape} does not match outputs {out.shape}")
        resid = out - targets
        loss = float(np.mean(resid ** 2))
        return loss, self._backward(inputs, caches, 2.0 * resid / resid.size)


def glorot_uniform(rng, fan_in, fan_out):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def build_model(architecture: str, input_dim: int = 7, output_dim: int = 1017, n_qubits: int = 7,
                hidden=None, seed: int = 0, projector: SpdProjector | None = None,
                ranges=(1, 1, 1), embed_axis: str = "X", grad_method: str = "shift") -> HybridModel:
    """Randomly initialized model.

    Dense layers use Glorot-uniform weights and zero biases, circuit weights
    are uniform on ``[0, 2 pi)``. Each layer draws from its own child of
    ``SeedSequence(seed)``.

    For ``spd-enhanced`` pass a fitted ``projector`` (``k == n_qubits``), or
    leave it out to get an unfitted batch-mode projector with ``k = n_qubits``.
    """
    if architecture not in ARCHITECTURES:
        raise InvalidParameterError(
            f"architecture must be one of {', '.join(ARCHITECTURES)}; got {architecture!r}")
    hidden = tuple(DEFAULT_HIDDEN[architecture] if hidden is None else hidden)
    n_hidden = {"classical-quantum": 2, "quantum-classical": 4, "spd-enhanced": 4}[architecture]
    if len(hidden) != n_hidden:
        raise InvalidParameterError(f"{architecture} needs {n_hidden} hidden widths, got {hidden}")
    if architecture == "quantum-classical" and input_dim != n_qubits:
        raise ShapeError(f"quantum-classical input width {input_dim} must equal n_qubits={n_qubits}")
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(8)]

    def dense(idx, fan_in, fan_out, activation="relu"):
        return DenseLayer(glorot_uniform(rngs[idx], fan_in, fan_out), np.zeros(fan_out), activation)

    def quantum(idx):
        spec = CircuitSpec.random(n_qubits, rngs[idx], ranges=ranges, embed_axis=embed_axis)
        return QuantumLayer(spec, grad_method)

    if architecture == "classical-quantum":
        widths = [input_dim, *hidden, n_qubits]
        layers = [dense(i, widths[i], widths[i + 1]) for i in range(3)]
        layers += [quantum(3), dense(4, n_qubits, output_dim, "identity")]
    else:
        widths = [n_qubits, *hidden, output_dim]
        layers = [quantum(0)]
        layers += [dense(i + 1, widths[i], widths[i + 1], "relu" if i < 4 else "identity")
                   for i in range(5)]
    if architecture == "spd-enhanced":
        if projector is None:
            projector = SpdProjector(k=n_qubits)
        return HybridModel(architecture, layers, projector, input_dim=input_dim)
    return HybridModel(architecture, layers, input_dim=input_dim)


def forward(model: HybridModel, x) -> np.ndarray:
    """Single-sample forward pass."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InvalidInputError(f"forward takes one feature vector, got shape {x.shape}")
    return model.predict(x[None, :])[0]


def backward(model: HybridModel, x, target) -> dict[str, np.ndarray]:
    """Gradient of the single-sample MSE with respect to every parameter."""
    x = np.asarray(x, dtype=float)
    return model.loss_and_gradients(x[None, :], np.asarray(target, dtype=float)[None, :])[1]


def mse(predictions, targets) -> float:
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(targets, dtype=float)
    if p.shape != t.shape:
        raise ShapeError(f"prediction shape {p.shape} does not match target shape {t.shape}")
    return float(np.mean((p - t) ** 2))


def r2_score(predictions, targets) -> float:
    """Unweighted mean of per-output R^2; outputs with constant targets are skipped."""
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(targets, dtype=float)
    if p.shape != t.shape:
        raise ShapeError(f"prediction shape {p.shape} does not match target shape {t.shape}")
    if p.ndim == 1:
        p, t = p[:, None], t[:, None]
    if t.shape[0] < 2:
        raise InvalidInputError("R^2 needs at least two samples")
    ss_tot = np.sum((t - t.mean(axis=0)) ** 2, axis=0)
    ss_res = np.sum((t - p) ** 2, axis=0)
    keep = ss_tot > 0
    if not np.any(keep):
        raise InvalidInputError("R^2 undefined: every target component is constant")
    return float(np.mean(1.0 - ss_res[keep] / ss_tot[keep]))
