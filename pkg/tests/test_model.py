import numpy as np
import pytest

from spdqml import model as M
from spdqml import qsim
from spdqml.errors import DegenerateStateError, InvalidInputError, InvalidParameterError, ShapeError
from spdqml.features import SpdProjector

from oracles import gradient_errors_ok, model_fd_gradients

TINY_HIDDEN = {"classical-quantum": (8, 6), "quantum-classical": (8, 6, 8, 5),
               "spd-enhanced": (8, 6, 8, 5)}


def tiny_model(arch, seed, n=3, d=3, out=4, grad_method="shift"):
    rng = np.random.default_rng(seed + 1000)
    projector = None
    if arch == "spd-enhanced":
        projector = SpdProjector(k=n).fit(rng.uniform(0, 1, (20, d)))
    model = M.build_model(arch, input_dim=d, output_dim=out, n_qubits=n, hidden=TINY_HIDDEN[arch],
                          seed=seed, projector=projector, grad_method=grad_method)
    # nonzero biases so relu kinks are not all at the origin
    for name, p in model.parameters().items():
        if name.endswith("bias"):
            p[:] = rng.normal(scale=0.3, size=p.shape)
    return model


def test_default_output_width():
    for arch in M.ARCHITECTURES:
        model = M.build_model(arch, seed=0)
        assert model.output_dim == 1017
        assert model.input_dim == 7


def test_layer_patterns():
    cq = M.build_model("classical-quantum", output_dim=5)
    assert [type(layer).__name__ for layer in cq.layers] == \
        ["DenseLayer"] * 3 + ["QuantumLayer", "DenseLayer"]
    assert [layer.out_width for layer in cq.layers] == [64, 32, 7, 7, 5]
    qc = M.build_model("quantum-classical", output_dim=5)
    assert [layer.out_width for layer in qc.layers] == [7, 64, 128, 256, 512, 5]
    assert qc.layers[-1].activation == "identity"
    assert all(layer.activation == "relu" for layer in qc.layers[1:-1])


def test_zero_dense_weights_give_zero_output(rng):
    model = M.build_model("classical-quantum", output_dim=9, projector=None)
    for name, p in model.parameters().items():
        if not name.endswith("circuit"):
            p[:] = 0
    np.testing.assert_array_equal(M.forward(model, rng.uniform(size=7)), np.zeros(9))


def test_quantum_classical_zero_circuit_feeds_ones():
    model = M.build_model("quantum-classical", output_dim=6, seed=3)
    model.quantum_layer.spec.weights[:] = 0
    out = M.forward(model, np.zeros(7))
    h = np.ones((1, 7))
    for layer in model.layers[1:]:
        h, _ = layer.forward(h)
    np.testing.assert_array_equal(out, h[0])


def test_identity_dense_layer():
    layer = M.DenseLayer(np.eye(4), np.zeros(4), "identity")
    x = np.array([[1.0, -2.0, 3.0, -4.0]])
    np.testing.assert_array_equal(layer.forward(x)[0], x)


def test_forward_is_deterministic(rng):
    model = tiny_model("spd-enhanced", 0)
    x = rng.uniform(size=3)
    assert M.forward(model, x).tobytes() == M.forward(model, x).tobytes()


def test_quantum_outputs_bounded_for_huge_angles(rng):
    model = M.build_model("classical-quantum", output_dim=3, seed=1)
    x = rng.normal(scale=1e4, size=(5, 7))
    h = x
    for layer in model.layers[:4]:
        h, _ = layer.forward(h)
    assert np.all(np.abs(h) <= 1 + 1e-12)


@pytest.mark.parametrize("arch", M.ARCHITECTURES)
@pytest.mark.parametrize("seed", [0, 1])
def test_gradient_matches_finite_difference(arch, seed):
    rng = np.random.default_rng(seed)
    model = tiny_model(arch, seed)
    X = rng.uniform(0, 1, (3, 3))
    T = rng.normal(size=(3, 4))
    _, grads = model.loss_and_gradients(X, T)
    fd = model_fd_gradients(model, X, T)
    for name in grads:
        ok, worst = gradient_errors_ok(grads[name], fd[name], rtol=1e-4)
        assert ok, (name, worst)


@pytest.mark.parametrize("arch", M.ARCHITECTURES)
def test_adjoint_and_shift_agree(arch, rng):
    shift = tiny_model(arch, 5)
    adjoint = tiny_model(arch, 5, grad_method="adjoint")
    X = rng.uniform(0, 1, (4, 3))
    T = rng.normal(size=(4, 4))
    g1 = shift.loss_and_gradients(X, T)[1]
    g2 = adjoint.loss_and_gradients(X, T)[1]
    for name in g1:
        np.testing.assert_allclose(g1[name], g2[name], atol=1e-10, rtol=0)


@pytest.mark.parametrize("arch", M.ARCHITECTURES)
def test_zero_residual_gives_zero_gradient(arch, rng):
    model = tiny_model(arch, 2)
    x = rng.uniform(size=3)
    grads = M.backward(model, x, M.forward(model, x))
    for g in grads.values():
        assert np.max(np.abs(g)) <= 1e-10


@pytest.mark.parametrize("arch", M.ARCHITECTURES)
def test_gradient_linear_in_residual(arch, rng):
    model = tiny_model(arch, 4)
    X = rng.uniform(size=(2, 3))
    resid = rng.normal(size=(2, 4))
    g1 = model.gradients_from_output(X, resid)
    g3 = model.gradients_from_output(X, 3.0 * resid)
    for name in g1:
        np.testing.assert_allclose(g3[name], 3.0 * g1[name], atol=1e-10, rtol=1e-12)


def test_input_width_mismatch():
    model = tiny_model("quantum-classical", 0)
    with pytest.raises(InvalidInputError):
        M.forward(model, np.zeros(4))
    with pytest.raises(ShapeError):
        M.build_model("quantum-classical", input_dim=7, n_qubits=4)
    with pytest.raises(InvalidParameterError):
        M.build_model("nonsense")


def test_degenerate_sample_propagates_with_index(rng):
    model = tiny_model("spd-enhanced", 0)
    X = rng.uniform(size=(4, 3))
    X[2] = 0
    with pytest.raises(DegenerateStateError) as info:
        model.predict(X)
    assert info.value.sample_index == 2


def test_mse_examples():
    a = np.arange(6.0).reshape(3, 2)
    assert M.mse(a, a) == 0
    assert M.mse(a + 1, a) == 1
    assert M.mse([[0.0, 0.0]], [[3.0, 4.0]]) == 12.5
    with pytest.raises(ShapeError):
        M.mse(np.zeros(3), np.zeros(4))


def test_r2_examples():
    t = np.array([[1.0, 5.0], [2.0, 3.0], [3.0, 4.0]])
    assert M.r2_score(t, t) == 1.0
    assert M.r2_score(np.broadcast_to(t.mean(axis=0), t.shape), t) == pytest.approx(0.0)
    assert M.r2_score([2.0, 2.0, 2.0], [1.0, 2.0, 3.0]) == pytest.approx(0.0, abs=1e-15)


def test_r2_skips_constant_components():
    t = np.array([[1.0, 7.0], [3.0, 7.0]])
    p = np.array([[1.0, 0.0], [3.0, 0.0]])
    assert M.r2_score(p, t) == 1.0
    with pytest.raises(InvalidInputError):
        M.r2_score(np.zeros((3, 1)), np.ones((3, 1)))
    with pytest.raises(InvalidInputError):
        M.r2_score(np.zeros((1, 2)), np.ones((1, 2)))
