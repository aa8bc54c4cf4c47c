import warnings

import numpy as np
import pytest

from spdqml import data as D
from spdqml.errors import FormatError, InvalidInputError, InvalidParameterError, ParseError


def test_generate_deterministic():
    a = D.generate_synthetic(3, 50, n_outputs=8)
    b = D.generate_synthetic(3, 50, n_outputs=8)
    assert a.inputs.tobytes() == b.inputs.tobytes()
    assert a.targets.tobytes() == b.targets.tobytes()
    c = D.generate_synthetic(4, 50, n_outputs=8)
    assert not np.array_equal(a.targets, c.targets)


def test_generate_reference_dimensions():
    ds = D.generate_synthetic(1, 512, d=7, n_outputs=1017)
    assert ds.inputs.shape == (512, 7)
    assert ds.targets.shape == (512, 1017)
    assert ds.inputs.min() >= 0 and ds.inputs.max() <= 1


def test_zeroed_map_gives_zero_targets():
    rng = np.random.default_rng(0)
    zero = D.SyntheticMap.draw(rng, 4, 6).zeroed()
    ds = D.generate_synthetic(0, 20, d=4, n_outputs=6, target_map=zero)
    np.testing.assert_array_equal(ds.targets, 0)


def test_invalid_sizes():
    with pytest.raises(InvalidParameterError):
        D.generate_synthetic(0, 0)


def test_synthetic_map_matches_explicit_sum():
    rng = np.random.default_rng(1)
    f = D.SyntheticMap.draw(rng, 3, 2)
    x = rng.uniform(size=3)
    expected = []
    for j in range(2):
        total = sum(f.amplitude[j, i] * np.sin(f.frequency[j, i] * x[i] + f.phase[j, i]) for i in range(3))
        pairs = [(0, 1), (0, 2), (1, 2)]
        total += sum(f.interaction[j, p] * x[a] * x[b] for p, (a, b) in enumerate(pairs))
        expected.append(total)
    np.testing.assert_allclose(f(x[None])[0], expected, rtol=1e-13)


def test_synthetic_map_smoothness_bound():
    rng = np.random.default_rng(2)
    f = D.SyntheticMap.draw(rng, 7, 5)
    bound = f.gradient_bound()
    h = 1e-6
    for x in rng.uniform(size=(30, 7)):
        for i in range(7):
            xp, xm = x.copy(), x.copy()
            xp[i] += h
            xm[i] -= h
            slope = np.abs(f(xp[None])[0] - f(xm[None])[0]) / (2 * h)
            assert np.all(slope <= bound + 1e-6)


def test_csv_round_trip(tmp_path):
    ds = D.generate_synthetic(5, 12, d=3, n_outputs=4)
    path = tmp_path / "d.csv"
    D.save_csv(ds, path)
    header = path.read_text().splitlines()[0]
    assert header == "x1,x2,x3,y1,y2,y3,y4"
    back = D.load_csv(path)
    np.testing.assert_allclose(back.inputs, ds.inputs, atol=1e-12, rtol=0)
    np.testing.assert_allclose(back.targets, ds.targets, atol=1e-12, rtol=0)
    # 17 significant digits make the round trip exact
    assert back.targets.tobytes() == ds.targets.tobytes()


def test_csv_non_numeric_cell_names_line(tmp_path):
    ds = D.generate_synthetic(5, 10, d=2, n_outputs=2)
    path = tmp_path / "d.csv"
    D.save_csv(ds, path)
    lines = path.read_text().splitlines()
    lines[6] = "0.1,abc,0.3,0.4"  # line 7 of the file
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ParseError) as info:
        D.load_csv(path)
    assert info.value.line == 7
    assert "line 7" in str(info.value)


def test_csv_wrong_arity(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("x1,y1\n1,2\n3\n")
    with pytest.raises(ParseError) as info:
        D.load_csv(path)
    assert info.value.line == 3


def test_csv_missing_header(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("1,2\n3,4\n")
    with pytest.raises(FormatError):
        D.load_csv(path)


def test_csv_empty_data(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("x1,y1\n")
    with pytest.raises(InvalidInputError):
        D.load_csv(path)


def test_split_sizes_and_coverage():
    ds = D.generate_synthetic(0, 100, n_outputs=2)
    train, test = D.split(ds, 0.8, seed=3)
    assert (len(train), len(test)) == (80, 20)
    idx = train.metadata["indices"] + test.metadata["indices"]
    assert sorted(idx) == list(range(100))
    again, _ = D.split(ds, 0.8, seed=3)
    assert again.metadata["indices"] == train.metadata["indices"]
    with pytest.raises(InvalidParameterError):
        D.split(ds, 1.0)


def test_scaler_round_trip_and_range():
    ds = D.generate_synthetic(0, 60, n_outputs=5)
    train, test = D.split(ds, 0.75, seed=0)
    scaler = D.fit_scaler(train)
    scaled = D.apply_scaler(scaler, train)
    np.testing.assert_allclose(scaled.inputs.min(axis=0), 0, atol=1e-15)
    np.testing.assert_allclose(scaled.inputs.max(axis=0), 1, atol=1e-15)
    np.testing.assert_allclose(scaled.targets.mean(axis=0), 0, atol=1e-12)
    back = D.invert_scaler(scaler, D.apply_scaler(scaler, test))
    np.testing.assert_allclose(back.inputs, test.inputs, atol=1e-12)
    np.testing.assert_allclose(back.targets, test.targets, atol=1e-12)


def test_scaler_uses_training_split_only():
    ds = D.generate_synthetic(0, 40, n_outputs=3)
    train, _ = D.split(ds, 0.5, seed=1)
    scaler = D.fit_scaler(train)
    np.testing.assert_array_equal(scaler.input_min, train.inputs.min(axis=0))
    np.testing.assert_array_equal(scaler.target_mean, train.targets.mean(axis=0))
    assert not np.array_equal(scaler.target_mean, ds.targets.mean(axis=0))


def test_constant_column_passthrough():
    X = np.array([[1.0, 2.0], [1.0, 4.0], [1.0, 3.0]])
    ds = D.Dataset(X, np.ones((3, 1)) * [[5.0]])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        scaler = D.fit_scaler(ds)
    assert caught
    assert scaler.constant_inputs.tolist() == [0]
    assert scaler.constant_targets.tolist() == [0]
    out = D.apply_scaler(scaler, ds)
    np.testing.assert_array_equal(out.inputs[:, 0], 1.0)
    np.testing.assert_array_equal(out.targets[:, 0], 5.0)
