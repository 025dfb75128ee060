"""L2-regularized logistic regression head trained from zero initialization.

Objective, for weights W (one row per output) and unpenalized bias b::

    J(W, b) = 0.5 * ||W||_F^2 + C * sum_i CE_i

with CE_i the negative log-likelihood of sample i under a sigmoid
(``binary``), a softmax (``multinomial``), or one sigmoid per class summed
over classes (``one_vs_rest``).
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceWarning, DegenerateLabels, LabelRange, NumericError, ShapeError
from .extractor import FeatureMatrix
from .solver import lbfgs

MODES = ("binary", "multinomial", "one_vs_rest")


@dataclass(frozen=True)
class TrainConfig:
    C: float = 1.0
    mode: str = None  # None: binary for two classes, multinomial otherwise
    tol: float = 1e-6
    grad_tol: float = 1e-4
    max_iter: int = 1000
    standardize: bool = False
    seed: int = 0  # initialization is all-zeros; kept for config round-trips
    memory: int = 10

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError(f"C must be positive, got {self.C}")
        if not (self.tol > 0 and self.grad_tol > 0):
            raise ValueError("tol and grad_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.mode is not None and self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: np.ndarray
    mode: str
    class_names: tuple
    mean: np.ndarray = None
    std: np.ndarray = None
    info: dict = field(default_factory=dict)

    @property
    def n_features(self):
        return self.weights.shape[1]

    @property
    def n_classes(self):
        return len(self.class_names)


# link functions -------------------------------------------------------------

def _require_finite(z):
    if not np.all(np.isfinite(z)):
        raise NumericError("non-finite input")


def sigmoid(z):
    """Logistic function, evaluated without overflow for any finite input."""
    z = np.asarray(z, dtype=np.float64)
    _require_finite(z)
    e = np.exp(-np.abs(z))
    out = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return out if out.ndim else float(out)


def softmax(logits, axis=-1):
    z = np.asarray(logits, dtype=np.float64)
    _require_finite(z)
    if z.shape[axis] < 2:
        raise ShapeError("softmax needs at least two logits")
    e = np.exp(z - z.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def _log1pexp(z):
    return np.logaddexp(0.0, z)


def _logsumexp(Z):
    m = Z.max(axis=1, keepdims=True)
    return (m + np.log(np.exp(Z - m).sum(axis=1, keepdims=True)))[:, 0]


# objective and gradient -----------------------------------------------------

def _xw(X, W):
    # float32 feature stores stay float32 in the matmul; the result is promoted
    if X.dtype == np.float32:
        return (X @ W.T.astype(np.float32)).astype(np.float64)
    return X @ W.T


def _rx(R, X):
    if X.dtype == np.float32:
        return (R.T.astype(np.float32) @ X).astype(np.float64)
    return R.T @ X


def _as_matrix(X):
    if isinstance(X, FeatureMatrix):
        X = X.values
    X = np.asarray(X)
    if X.dtype not in (np.float32, np.float64):
        X = X.astype(np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ShapeError(f"features must be 2-D, got shape {X.shape}")
    return X


def _prepare(weights, bias, X, y, mode):
    W = np.atleast_2d(np.asarray(weights, dtype=np.float64))
    b = np.atleast_1d(np.asarray(bias, dtype=np.float64))
    X = _as_matrix(X)
    y = np.asarray(y)
    if mode is None:
        mode = "binary" if W.shape[0] == 1 else "multinomial"
    if X.shape[1] != W.shape[1]:
        raise ShapeError(f"features have d={X.shape[1]}, weights have d={W.shape[1]}")
    if b.shape != (W.shape[0],):
        raise ShapeError(f"bias shape {b.shape} does not match {W.shape[0]} weight rows")
    if y.shape != (X.shape[0],):
        raise ShapeError(f"{y.shape[0] if y.ndim else 0} labels for {X.shape[0]} samples")
    if mode == "binary" and W.shape[0] != 1:
        raise ShapeError("binary mode takes a single weight row")
    if mode != "binary" and W.shape[0] < 2:
        raise ShapeError(f"{mode} mode needs one weight row per class")
    y = y.astype(np.int64)
    k = 2 if mode == "binary" else W.shape[0]
    if y.size and (y.min() < 0 or y.max() >= k):
        raise LabelRange(f"labels must lie in [0, {k})")
    return W, b, X, y, mode


def _loss_grad(W, b, X, y, mode, C, need_grad=True):
    Z = _xw(X, W) + b
    n = X.shape[0]
    if mode == "binary":
        z = Z[:, 0]
        data = np.sum(_log1pexp(z) - y * z)
        R = (sigmoid(z) - y)[:, None] if need_grad else None
    elif mode == "multinomial":
        data = np.sum(_logsumexp(Z) - Z[np.arange(n), y])
        if need_grad:
            R = softmax(Z, axis=1)
            R[np.arange(n), y] -= 1.0
    else:
        Y = np.zeros_like(Z)
        Y[np.arange(n), y] = 1.0
        data = np.sum(_log1pexp(Z) - Y * Z)
        R = sigmoid(Z) - Y if need_grad else None
    value = 0.5 * np.sum(W * W) + C * data
    if not need_grad:
        return value, data, None, None
    return value, data, W + C * _rx(R, X), C * R.sum(axis=0)


def _mode_of(config):
    return None if config is None else config.mode


def objective(weights, bias, X, y, config):
    W, b, X, y, mode = _prepare(weights, bias, X, y, _mode_of(config))
    return float(_loss_grad(W, b, X, y, mode, config.C, need_grad=False)[0])


def data_loss(weights, bias, X, y, config):
    """Unregularized negative log-likelihood sum (the C-weighted term)."""
    W, b, X, y, mode = _prepare(weights, bias, X, y, _mode_of(config))
    return float(_loss_grad(W, b, X, y, mode, config.C, need_grad=False)[1])


def gradient(weights, bias, X, y, config):
    """Analytic gradient of :func:`objective`, shaped like ``(weights, bias)``."""
    W, b, X, y, mode = _prepare(weights, bias, X, y, _mode_of(config))
    _, _, gW, gb = _loss_grad(W, b, X, y, mode, config.C)
    gW = gW.reshape(np.shape(weights))
    gb = gb.reshape(np.shape(bias)) if np.ndim(bias) else float(gb[0])
    return gW, gb


# training -------------------------------------------------------------------

def _solve(X, y, mode, k_eff, config):
    d = X.shape[1]
    split = k_eff * d

    def fun(theta):
        W = theta[:split].reshape(k_eff, d)
        value, _, gW, gb = _loss_grad(W, theta[split:], X, y, mode, config.C)
        return value, np.concatenate([gW.ravel(), gb])

    res = lbfgs(fun, np.zeros(split + k_eff), grad_tol=config.grad_tol, tol=config.tol,
                max_iter=config.max_iter, memory=config.memory)
    return res.x[:split].reshape(k_eff, d), res.x[split:], res


def standardization_stats(X):
    mean = X.mean(axis=0, dtype=np.float64)
    std = X.std(axis=0, dtype=np.float64)
    std[std == 0] = 1.0
    return mean, std


def _apply_standardization(X, mean, std):
    if mean is None:
        return X
    return ((X - mean) / std).astype(X.dtype, copy=False)


def fit(X, y=None, config=TrainConfig(), class_names=None):
    """Train a :class:`LinearModel` on features ``X`` and integer labels ``y``.

    ``X`` may be a :class:`FeatureMatrix`, in which case labels and class
    names come from it unless given.  Failing to meet either stopping rule
    within ``max_iter`` emits a :class:`ConvergenceWarning`; the model is
    still returned and ``model.info`` records the solver state.
    """
    if isinstance(X, FeatureMatrix):
        y = X.labels if y is None else y
        class_names = X.class_names if class_names is None else class_names
    X = _as_matrix(X)
    if y is None:
        raise ShapeError("labels are required")
    y = np.asarray(y, dtype=np.int64)
    if y.shape != (X.shape[0],):
        raise ShapeError(f"{y.size} labels for {X.shape[0]} samples")
    if y.size and y.min() < 0:
        raise LabelRange("negative label")
    if X.shape[0] < 2 or np.unique(y).size < 2:
        raise DegenerateLabels("need at least two samples from at least two classes")
    if class_names is None:
        class_names = tuple(str(i) for i in range(int(y.max()) + 1))
    class_names = tuple(class_names)
    k = len(class_names)
    if y.max() >= k:
        raise LabelRange(f"label {int(y.max())} outside {k} classes")
    mode = config.mode or ("binary" if k == 2 else "multinomial")
    if mode == "binary" and k != 2:
        raise DegenerateLabels(f"binary mode requires exactly 2 classes, got {k}")

    mean = std = None
    if config.standardize:
        mean, std = standardization_stats(X)
        X = _apply_standardization(X, mean, std)

    if mode == "one_vs_rest":
        rows, biases, results = [], [], []
        for c in range(k):
            w, b, res = _solve(X, (y == c).astype(np.int64), "binary", 1, config)
            rows.append(w[0])
            biases.append(b[0])
            results.append(res)
        W, b = np.vstack(rows), np.array(biases)
        info = {
            "iterations": int(sum(r.iterations for r in results)),
            "converged": all(r.converged for r in results),
            "objective": float(sum(r.fun for r in results)),
            "grad_norm": float(max(r.grad_norm for r in results)),
            "reason": ",".join(r.reason for r in results),
        }
    else:
        W, b, res = _solve(X, y, mode, 1 if mode == "binary" else k, config)
        info = {"iterations": res.iterations, "converged": res.converged,
                "objective": float(res.fun), "grad_norm": res.grad_norm, "reason": res.reason}

    if not (np.isfinite(W).all() and np.isfinite(b).all()):
        raise NumericError("training produced non-finite parameters")
    if not info["converged"]:
        warnings.warn(
            f"solver stopped without meeting the tolerance after {info['iterations']} "
            f"iterations ({info['reason']}, |grad|_inf={info['grad_norm']:.3g})",
            ConvergenceWarning, stacklevel=2)
    return LinearModel(W, b, mode, class_names, mean, std, info)


# inference ------------------------------------------------------------------

def decision_function(model, X):
    X = _as_matrix(X)
    if X.shape[1] != model.n_features:
        raise ShapeError(f"model expects d={model.n_features}, got d={X.shape[1]}")
    X = _apply_standardization(X, model.mean, model.std)
    return _xw(X, model.weights) + model.bias


def predict_proba(model, X):
    Z = decision_function(model, X)
    if model.mode == "binary":
        p = sigmoid(Z[:, 0])
        return np.column_stack([1.0 - p, p])
    if model.mode == "multinomial":
        return softmax(Z, axis=1)
    S = sigmoid(Z)
    return S / S.sum(axis=1, keepdims=True)


def predict(model, X):
    """Class indices; binary uses p > 0.5 strictly, multiclass the first argmax."""
    P = predict_proba(model, X)
    if model.mode == "binary":
        return (P[:, 1] > 0.5).astype(np.int64)
    return np.argmax(P, axis=1).astype(np.int64)
