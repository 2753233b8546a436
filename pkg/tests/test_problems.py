import gzip
import math

import numpy as np
import pytest

from qnopt.errors import BadMagic, BadSimplex, CountMismatch, DataError, ShapeMismatch, TruncatedFile, UnknownLayer
from qnopt.problems.data import (load_idx, load_mnist, synthetic_digits, write_idx_images,
                                 write_idx_labels)
from qnopt.problems.functions import Quadratic, Rosenbrock, make_logistic, make_quadratic, test_functions
from qnopt.problems.lenet import LENET5, Conv2d, Dense, MaxPool, output_shapes, param_count
from qnopt.problems.mlp import Dataset, MlpSpec, cross_entropy, log_softmax, mlp_oracle, softmax
from qnopt.problems.oracle import BatchView, CountingOracle, check_gradient


def test_cross_entropy_values():
    assert cross_entropy([0.0, 1.0, 0.0], 1) == 0.0
    assert cross_entropy(np.full(10, 0.1), 4) == pytest.approx(math.log(10))
    assert cross_entropy([0.9, 0.1], 1) == pytest.approx(-math.log(0.1))
    assert cross_entropy([1.0, 0.0], 1) == pytest.approx(-math.log(1e-12))


def test_cross_entropy_rejects_non_simplex():
    with pytest.raises(BadSimplex):
        cross_entropy([0.5, 0.6], 0)
    with pytest.raises(BadSimplex):
        cross_entropy([1.5, -0.5], 0)


def test_softmax_normalized(rng):
    logits = rng.standard_normal((50, 10)) * 300
    np.testing.assert_allclose(softmax(logits).sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(np.exp(log_softmax(logits)).sum(axis=1), 1.0, atol=1e-12)


def test_linear_two_class_at_zero():
    data = Dataset(np.array([[0.3, -1.2, 0.5]]), np.array([1]), 2)
    o = mlp_oracle(MlpSpec((3, 2)), data)
    w = np.zeros(o.dim)
    assert o.loss(w) == pytest.approx(math.log(2))
    assert check_gradient(o, w, h_scale=1e-6) < 1e-7


def test_mlp_gradient(rng):
    data = synthetic_digits(30, seed=1)
    o = mlp_oracle(MlpSpec((784, 16, 10)), data)
    w = o.init_params(1) + 0.01 * rng.standard_normal(o.dim)
    coords = rng.choice(o.dim, 20, replace=False)
    assert check_gradient(o, w, coords) < 1e-5


def test_mlp_full_batch_is_mean_of_singletons(rng):
    data = synthetic_digits(12, seed=2)
    o = mlp_oracle(MlpSpec((784, 8, 10)), data)
    w = o.init_params(0)
    f, g = o.eval(w)
    parts = [o.eval_batch(w, [i]) for i in range(12)]
    assert abs(f - np.mean([p[0] for p in parts])) <= 1e-12
    np.testing.assert_allclose(g, np.mean([p[1] for p in parts], axis=0), atol=1e-12)
    f_idx, g_idx = o.eval_batch(w, np.arange(12))
    assert abs(f - f_idx) <= 1e-12


def test_mlp_shape_checks():
    data = synthetic_digits(5)
    with pytest.raises(ShapeMismatch):
        mlp_oracle(MlpSpec((100, 10)), data)
    with pytest.raises(ShapeMismatch):
        mlp_oracle(MlpSpec((784, 3)), data)
    assert MlpSpec((784, 64, 10)).n_params == 785 * 64 + 65 * 10


def test_param_counts():
    assert param_count(LENET5) == 431_080
    assert param_count([Dense(10)], (784,)) == 7_850
    assert param_count([]) == 0
    assert output_shapes(LENET5)[:4] == [(20, 24, 24), (20, 12, 12), (50, 8, 8), (50, 4, 4)]


def test_param_count_unknown_layer():
    with pytest.raises(UnknownLayer):
        param_count([object()])


def test_quadratic_examples():
    q = Quadratic(np.diag([1.0, 10.0]), np.zeros(2))
    assert q.loss(np.zeros(2)) == 0.0
    np.testing.assert_allclose(q.minimizer, 0.0)
    w = np.array([0.3, -0.7])
    assert check_gradient(q, w, h_scale=1e-6) < 1e-7


def test_quadratic_spectrum():
    q = make_quadratic(6, 0.5, 8.0, seed=1)
    np.testing.assert_allclose(np.linalg.eigvalsh(q.A), np.linspace(0.5, 8.0, 6), atol=1e-12)


def test_noisy_quadratic_keeps_mean(rng):
    q = make_quadratic(5, 1.0, 4.0, seed=1, n_samples=32, noise=2.0)
    ref = make_quadratic(5, 1.0, 4.0, seed=1)
    np.testing.assert_allclose(q.b_mean, ref.b_mean, atol=1e-12)
    w = rng.standard_normal(5)
    assert q.offset(w) == pytest.approx(q.loss(w) - q.min_value)


def test_rosenbrock_minimum():
    o = Rosenbrock()
    f, g = o.eval(np.ones(2))
    assert f == 0.0 and not np.any(g)


@pytest.mark.parametrize("name", ["quadratic", "rosenbrock", "logistic"])
def test_function_gradients(name, rng):
    o = test_functions(0)[name]
    for _ in range(5):
        w = rng.standard_normal(o.dim)
        coords = rng.choice(o.dim, min(20, o.dim), replace=False)
        assert check_gradient(o, w, coords) < 1e-5


def test_logistic_batches(rng):
    o = make_logistic(seed=1)
    w = rng.standard_normal(o.dim)
    f, g = o.eval(w)
    f2, g2 = o.eval_batch(w, np.arange(o.n_samples))
    assert abs(f - f2) <= 1e-12
    np.testing.assert_allclose(g, g2, atol=1e-12)


def test_counting_and_batch_view(rng):
    o = make_logistic(seed=1)
    c = CountingOracle(o)
    w = rng.standard_normal(o.dim)
    c.eval(w)
    c.loss(w)
    assert (c.fevals, c.gevals) == (2, 1)
    assert c.n_samples == o.n_samples
    view = BatchView(o, [0, 3, 5])
    assert view.eval(w)[0] == pytest.approx(o.eval_batch(w, [0, 3, 5])[0])


def _write_fixture(tmp_path, images, labels, gz=False):
    img, lab = tmp_path / "images", tmp_path / "labels"
    write_idx_images(img, images)
    write_idx_labels(lab, labels)
    if gz:
        for path in (img, lab):
            (tmp_path / (path.name + ".gz")).write_bytes(gzip.compress(path.read_bytes()))
            path.unlink()
    return img, lab


def test_idx_round_trip(tmp_path):
    images = np.zeros((2, 2, 3), dtype=np.uint8)
    images[0, 0, 0] = 255
    images[1, 1, 2] = 51
    img, lab = _write_fixture(tmp_path, images, np.array([3, 7]))
    raw = img.read_bytes()
    assert raw[:4] == b"\x00\x00\x08\x03" and raw[4:16] == b"\x00\x00\x00\x02\x00\x00\x00\x02\x00\x00\x00\x03"
    d = load_idx(img, lab)
    assert d.inputs.shape == (2, 6)
    assert d.inputs[0, 0] == 1.0 and d.inputs[0, 1] == 0.0 and d.inputs[1, 5] == pytest.approx(0.2)
    assert d.labels.tolist() == [3, 7]


def test_idx_gzip(tmp_path):
    img, lab = _write_fixture(tmp_path, np.full((1, 2, 2), 255, np.uint8), np.array([1]), gz=True)
    assert load_idx(img, lab).inputs.tolist() == [[1.0] * 4]


def test_idx_errors(tmp_path):
    img, lab = _write_fixture(tmp_path, np.zeros((2, 2, 2), np.uint8), np.array([1, 2]))
    with pytest.raises(BadMagic):
        load_idx(lab, lab)
    short = tmp_path / "short"
    short.write_bytes(img.read_bytes()[:-1])
    with pytest.raises(TruncatedFile):
        load_idx(short, lab)
    head = tmp_path / "head"
    head.write_bytes(img.read_bytes()[:6])
    with pytest.raises(TruncatedFile):
        load_idx(head, lab)
    one = tmp_path / "one"
    write_idx_labels(one, np.array([1]))
    with pytest.raises(CountMismatch):
        load_idx(img, one)
    with pytest.raises(DataError):
        load_idx(tmp_path / "missing", lab)


def test_load_mnist_directory(tmp_path, monkeypatch):
    write_idx_images(tmp_path / "t10k-images-idx3-ubyte", np.zeros((4, 28, 28), np.uint8))
    write_idx_labels(tmp_path / "t10k-labels-idx1-ubyte", np.arange(4))
    monkeypatch.setenv("QNOPT_DATA_DIR", str(tmp_path))
    d = load_mnist(split="test", limit=3)
    assert len(d) == 3 and d.inputs.shape[1] == 784
    monkeypatch.delenv("QNOPT_DATA_DIR")
    with pytest.raises(DataError):
        load_mnist()


def test_synthetic_digits_statistics():
    d = synthetic_digits(300, seed=0)
    assert d.inputs.shape == (300, 784)
    assert 0.0 <= d.inputs.min() and d.inputs.max() <= 1.0
    assert 0.1 < d.inputs.mean() < 0.18 and 0.27 < d.inputs.std() < 0.35
    assert set(np.unique(d.labels)) == set(range(10))
    np.testing.assert_array_equal(d.inputs, synthetic_digits(300, seed=0).inputs)
