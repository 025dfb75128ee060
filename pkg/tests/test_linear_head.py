import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deepfeat.errors import (
    ConvergenceWarning,
    DegenerateLabels,
    FormatError,
    LabelRange,
    NumericError,
    ShapeError,
    TruncationError,
)
from deepfeat.extractor import FeatureMatrix
from deepfeat.linear_head import (
    LinearModel,
    TrainConfig,
    data_loss,
    fit,
    gradient,
    objective,
    predict,
    predict_proba,
    sigmoid,
    softmax,
)
from deepfeat.modelfile import load_model, model_to_dict, save_model, save_model_json

from oracles import central_differences, grid_minimize, naive_objective

BIN = TrainConfig(C=1.0, mode="binary")
TIGHT = dict(tol=1e-15, grad_tol=1e-9, max_iter=5000)


def random_instance(rng, mode, n=None, d=None, k=3):
    n = n or int(rng.integers(4, 21))
    d = d or int(rng.integers(1, 7))
    X = rng.normal(size=(n, d))
    if mode == "binary":
        y = rng.integers(0, 2, size=n)
        W, b = rng.normal(size=(1, d)), rng.normal(size=1)
    else:
        y = rng.integers(0, k, size=n)
        W, b = rng.normal(size=(k, d)), rng.normal(size=k)
    return X, y, W, b


# link functions ------------------------------------------------------------------

def test_sigmoid_values():
    assert sigmoid(0.0) == 0.5
    for z in (0.5, 2.0, 10.0):
        assert sigmoid(-z) == pytest.approx(1 - sigmoid(z), abs=1e-15)
    assert sigmoid(2.0) == pytest.approx(0.880797, abs=1e-6)


def test_sigmoid_extremes_monotone():
    z = np.linspace(-1000, 1000, 20001)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        s = sigmoid(z)
    assert np.all(np.isfinite(s)) and np.all(np.diff(s) >= 0)
    assert s[0] >= 0 and s[-1] <= 1
    with pytest.raises(NumericError):
        sigmoid(np.nan)


def test_softmax_values():
    np.testing.assert_allclose(softmax([0, 0, 0]), [1 / 3] * 3, rtol=0, atol=1e-15)
    np.testing.assert_allclose(softmax([1, 2, 3]), [0.09003, 0.24473, 0.66524], atol=5e-6)
    z = np.array([0.3, -1.2, 2.0])
    np.testing.assert_allclose(softmax(z + 1000), softmax(z), atol=1e-15)
    assert abs(softmax([1e3, -1e3, 5.0]).sum() - 1) <= 1e-12
    with pytest.raises(NumericError):
        softmax([1.0, np.inf])
    with pytest.raises(ShapeError):
        softmax([1.0])


# objective ------------------------------------------------------------------------

@pytest.mark.parametrize("n", [2, 10, 101])
def test_zero_model_baselines(n):
    rng = np.random.default_rng(n)
    X = rng.normal(size=(n, 3))
    y2 = np.arange(n) % 2
    y3 = np.arange(n) % 3
    C = 0.37
    assert objective(np.zeros((1, 3)), [0.0], X, y2, TrainConfig(C=C, mode="binary")) == \
        pytest.approx(C * n * math.log(2), rel=1e-12)
    assert objective(np.zeros((3, 3)), np.zeros(3), X, y3, TrainConfig(C=C, mode="multinomial")) == \
        pytest.approx(C * n * math.log(3), rel=1e-12)


def test_objective_hand_fixture():
    X = [[1.0, 2.0], [-1.0, 0.5], [0.5, -1.5], [2.0, 1.0]]
    y = [1, 0, 0, 1]
    # z = (-1, -1.5, 2, 1); J = 1 + ln(1+e) + ln(1+e^-1.5) + ln(1+e^2) + ln(1+e^-1)
    assert objective(np.array([1.0, -1.0]), 0.0, X, y, BIN) == pytest.approx(4.954864664062170, rel=1e-13)


@pytest.mark.parametrize("mode", ["binary", "multinomial", "one_vs_rest"])
def test_objective_matches_naive(mode):
    rng = np.random.default_rng(5)
    for _ in range(5):
        X, y, W, b = random_instance(rng, mode)
        cfg = TrainConfig(C=0.7, mode=mode)
        assert objective(W, b, X, y, cfg) == pytest.approx(naive_objective(W, b, X, y, 0.7, mode), rel=1e-12)


def test_objective_errors():
    X = np.zeros((4, 2))
    with pytest.raises(ShapeError):
        objective(np.zeros((1, 3)), [0.0], X, [0, 1, 0, 1], BIN)
    with pytest.raises(ShapeError):
        objective(np.zeros((1, 2)), [0.0], X, [0, 1], BIN)
    with pytest.raises(LabelRange):
        objective(np.zeros((1, 2)), [0.0], X, [0, 1, 2, 1], BIN)


# gradient -------------------------------------------------------------------------

def test_gradient_symmetric_bias_zero():
    X = np.array([[1.0, 2.0], [-1.0, -2.0], [3.0, 0.5], [-3.0, -0.5]])
    y = np.array([1, 0, 0, 1])
    _, gb = gradient(np.zeros((1, 2)), np.zeros(1), X, y, BIN)
    assert gb[0] == 0.0


@pytest.mark.parametrize("mode", ["binary", "multinomial", "one_vs_rest"])
def test_gradient_zero_features(mode):
    rng = np.random.default_rng(3)
    k = 1 if mode == "binary" else 3
    W = rng.normal(size=(k, 4))
    y = np.arange(6) % (2 if mode == "binary" else 3)
    gW, _ = gradient(W, rng.normal(size=k), np.zeros((6, 4)), y, TrainConfig(C=5.0, mode=mode))
    assert np.array_equal(gW, W)


@pytest.mark.parametrize("mode", ["binary", "multinomial", "one_vs_rest"])
def test_gradient_finite_differences(mode):
    rng = np.random.default_rng(10)
    X, y, W, b = random_instance(rng, mode, n=10, d=4)
    cfg = TrainConfig(C=1.0, mode=mode)
    gW, gb = gradient(W, b, X, y, cfg)
    split = W.size

    def f(theta):
        return naive_objective(theta[:split].reshape(W.shape), theta[split:], X, y, 1.0, mode)

    fd = central_differences(f, np.concatenate([W.ravel(), b]))
    an = np.concatenate([gW.ravel(), gb])
    assert np.all(np.abs(an - fd) / np.maximum(np.abs(fd), 1e-8) < 1e-5)


def test_gradient_scalar_shapes():
    gW, gb = gradient(np.array([0.5, -0.5]), 0.1, [[1.0, 2.0], [0.0, 1.0]], [1, 0], BIN)
    assert gW.shape == (2,) and isinstance(gb, float)


# convexity, monotonicity ---------------------------------------------------------

@pytest.mark.parametrize("mode", ["binary", "multinomial", "one_vs_rest"])
def test_convexity_along_segments(mode):
    rng = np.random.default_rng(21)
    for _ in range(5):
        X, y, W0, b0 = random_instance(rng, mode)
        W1, b1 = rng.normal(size=W0.shape) * 3, rng.normal(size=b0.shape) * 3
        cfg = TrainConfig(C=2.0, mode=mode)
        f0, f1 = objective(W0, b0, X, y, cfg), objective(W1, b1, X, y, cfg)
        for t in np.linspace(0, 1, 13)[1:-1]:
            ft = objective((1 - t) * W0 + t * W1, (1 - t) * b0 + t * b1, X, y, cfg)
            assert ft <= (1 - t) * f0 + t * f1 + 1e-9 * (1 + abs(f0) + abs(f1))


def noisy_instance(seed=4, n=60, d=3):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    logits = X @ np.array([1.5, -1.0, 0.5][:d])
    y = (rng.uniform(size=n) < 1 / (1 + np.exp(-logits))).astype(int)
    return X, y


def test_monotone_data_term():
    X, y = noisy_instance()
    losses = []
    for C in (0.001, 0.01, 0.1, 1.0):
        cfg = TrainConfig(C=C, mode="binary", **TIGHT)
        m = fit(X, y, cfg)
        losses.append(data_loss(m.weights, m.bias, X, y, cfg))
    assert all(a >= b for a, b in zip(losses, losses[1:]))


# fit ------------------------------------------------------------------------------

def test_fit_two_points():
    X = np.array([[-1.0], [1.0]])
    y = np.array([0, 1])
    m = fit(X, y, TrainConfig(C=1e6))
    assert m.mode == "binary"
    assert predict(m, X).tolist() == [0, 1]


def test_fit_zero_features_gives_zero_model():
    X = np.zeros((8, 3))
    y = np.arange(8) % 2
    m = fit(X, y, TrainConfig(C=1.0))
    assert np.all(m.weights == 0) and np.all(m.bias == 0)
    np.testing.assert_array_equal(predict_proba(m, X), 0.5)


def test_fit_matches_grid_oracle():
    X = np.array([[-2.0], [-1.0], [-0.5], [0.3], [1.0], [2.5]])
    y = np.array([0, 0, 1, 0, 1, 1])
    (w_star, b_star), j_star = grid_minimize(X, y, 1.0)
    m = fit(X, y, TrainConfig(C=1.0, mode="binary"))
    assert abs(m.weights[0, 0] - w_star) < 1e-3
    assert abs(m.bias[0] - b_star) < 1e-3
    assert objective(m.weights, m.bias, X, y, BIN) <= j_star * (1 + 1e-6)


@pytest.mark.parametrize("mode", ["multinomial", "one_vs_rest"])
def test_fit_multiclass_stationary(mode):
    rng = np.random.default_rng(8)
    X = rng.normal(size=(45, 4))
    y = np.arange(45) % 3
    X[np.arange(45), y] += 2.0
    cfg = TrainConfig(C=0.5, mode=mode, **TIGHT)
    m = fit(X, y, cfg)
    assert m.info["converged"]
    gW, gb = gradient(m.weights, m.bias, X, y, cfg)
    assert np.max(np.abs(gW)) < 1e-6 and np.max(np.abs(gb)) < 1e-6
    assert (predict(m, X) == y).mean() > 0.8


def test_fit_degenerate_inputs():
    with pytest.raises(DegenerateLabels):
        fit(np.ones((4, 2)), [1, 1, 1, 1])
    with pytest.raises(DegenerateLabels):
        fit(np.ones((3, 2)), [0, 1, 2], TrainConfig(mode="binary"))
    with pytest.raises(ShapeError):
        fit(np.ones((3, 2)), [0, 1])


def test_fit_non_convergence_warns():
    X, y = noisy_instance()
    with pytest.warns(ConvergenceWarning):
        m = fit(X, y, TrainConfig(C=1.0, max_iter=1, tol=1e-15, grad_tol=1e-12))
    assert m.info["converged"] is False and m.info["iterations"] == 1


def test_fit_from_feature_matrix():
    X, y = noisy_instance()
    fm = FeatureMatrix(X.astype(np.float32), y, ("neg", "pos"))
    m = fit(fm, config=TrainConfig(C=0.1))
    assert m.class_names == ("neg", "pos")
    m64 = fit(X, y, TrainConfig(C=0.1))
    np.testing.assert_allclose(m.weights, m64.weights, atol=1e-4)


def test_standardization_stored_and_applied():
    X, y = noisy_instance()
    X = X * np.array([100.0, 0.01, 1.0]) + 5.0
    m = fit(X, y, TrainConfig(C=1.0, standardize=True, **TIGHT))
    np.testing.assert_allclose(m.mean, X.mean(axis=0))
    Z = (X - m.mean) / m.std
    plain = fit(Z, y, TrainConfig(C=1.0, **TIGHT))
    np.testing.assert_allclose(predict_proba(m, X), predict_proba(plain, Z), atol=1e-9)


def test_permutation_equivariance():
    X, y = noisy_instance(n=80, d=3)
    perm = np.array([2, 0, 1])
    for mode in ("binary", "one_vs_rest"):
        cfg = TrainConfig(C=0.3, mode=mode, **TIGHT)
        a = fit(X, y, cfg)
        b = fit(X[:, perm], y, cfg)
        np.testing.assert_allclose(b.weights, a.weights[:, perm], atol=1e-7)
        assert predict(a, X).tolist() == predict(b, X[:, perm]).tolist()


# prediction -----------------------------------------------------------------------

def test_zero_model_probabilities():
    X = np.random.default_rng(0).normal(size=(5, 2))
    binary = LinearModel(np.zeros((1, 2)), np.zeros(1), "binary", ("a", "b"))
    multi = LinearModel(np.zeros((3, 2)), np.zeros(3), "multinomial", ("a", "b", "c"))
    np.testing.assert_array_equal(predict_proba(binary, X), 0.5)
    np.testing.assert_allclose(predict_proba(multi, X), 1 / 3, atol=1e-15)
    assert predict(binary, X).tolist() == [0] * 5


def test_binary_probability_value():
    m = LinearModel(np.array([[1.0]]), np.zeros(1), "binary", ("a", "b"))
    np.testing.assert_allclose(predict_proba(m, [[2.0]]), [[0.119203, 0.880797]], atol=1e-6)


def test_predict_ties_and_argmax():
    m = LinearModel(np.array([[1.0]]), np.zeros(1), "binary", ("a", "b"))
    assert predict(m, [[0.0]]).tolist() == [0]
    bias = np.log([0.2, 0.5, 0.3])
    multi = LinearModel(np.zeros((3, 1)), bias, "multinomial", ("a", "b", "c"))
    np.testing.assert_allclose(predict_proba(multi, [[1.0]]), [[0.2, 0.5, 0.3]], atol=1e-12)
    assert predict(multi, [[1.0]]).tolist() == [1]
    tie = LinearModel(np.zeros((3, 1)), np.array([0.0, 1.0, 1.0]), "multinomial", ("a", "b", "c"))
    assert predict(tie, [[0.0]]).tolist() == [1]


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000), mode=st.sampled_from(["binary", "multinomial", "one_vs_rest"]))
def test_predict_consistent_with_proba(seed, mode):
    rng = np.random.default_rng(seed)
    k = 1 if mode == "binary" else 3
    names = ("a", "b") if mode == "binary" else ("a", "b", "c")
    m = LinearModel(rng.normal(size=(k, 3)) * 5, rng.normal(size=k), mode, names)
    X = rng.normal(size=(30, 3))
    P = predict_proba(m, X)
    assert np.all(np.abs(P.sum(axis=1) - 1) <= 1e-9)
    assert np.array_equal(predict(m, X), np.argmax(P, axis=1))


def test_predict_shape_error():
    m = LinearModel(np.zeros((1, 2)), np.zeros(1), "binary", ("a", "b"))
    with pytest.raises(ShapeError):
        predict(m, np.zeros((3, 5)))


# model files ----------------------------------------------------------------------

def trained_model(standardize=False):
    rng = np.random.default_rng(1)
    X = rng.normal(size=(30, 4))
    y = np.arange(30) % 3
    return fit(X, y, TrainConfig(C=0.5, standardize=standardize), class_names=("COVID", "Normal", "Viral Pneumonia"))


@pytest.mark.parametrize("standardize", [False, True])
def test_model_file_roundtrip(tmp_path, standardize):
    m = trained_model(standardize)
    save_model(m, tmp_path / "m.dflm")
    raw = (tmp_path / "m.dflm").read_bytes()
    assert raw[:4] == b"DFLM"
    back = load_model(tmp_path / "m.dflm")
    assert back.mode == m.mode and back.class_names == m.class_names
    assert np.array_equal(back.weights, m.weights) and np.array_equal(back.bias, m.bias)
    if standardize:
        assert np.array_equal(back.mean, m.mean) and np.array_equal(back.std, m.std)
    else:
        assert back.mean is None


def test_model_file_errors(tmp_path):
    save_model(trained_model(), tmp_path / "m.dflm")
    raw = (tmp_path / "m.dflm").read_bytes()
    (tmp_path / "t.dflm").write_bytes(raw[:-7])
    with pytest.raises(TruncationError):
        load_model(tmp_path / "t.dflm")
    (tmp_path / "x.dflm").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(FormatError):
        load_model(tmp_path / "x.dflm")


def test_model_json(tmp_path):
    m = trained_model()
    save_model_json(m, tmp_path / "m.json")
    doc = json.loads((tmp_path / "m.json").read_text())
    assert set(doc) >= {"mode", "classes", "weights", "bias"}
    assert doc == model_to_dict(m)
    assert np.array(doc["weights"]).shape == (3, 4)
