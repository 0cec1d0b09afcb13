"""Ridge predictors on the arcsinh-mapped bag, and evaluation metrics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np
from scipy import sparse

from .types import SparseBag

DEFAULT_LAMBDA = {"classification": 1.0, "regression": 1e-2}
CG_TOL = 1e-8


def arcsinh_map(bag: SparseBag) -> sparse.csr_matrix:
    """Element-wise ``arcsinh`` of the stored counts; the sparsity pattern is unchanged."""
    data = np.arcsinh(bag.vals.astype(np.float64))
    return sparse.csr_matrix((data, (bag.rows, bag.cols)), shape=bag.shape, dtype=np.float64)


def _as_csr(features) -> sparse.csr_matrix:
    if isinstance(features, SparseBag):
        return arcsinh_map(features)
    if sparse.issparse(features):
        return sparse.csr_matrix(features, dtype=np.float64)
    return sparse.csr_matrix(np.atleast_2d(np.asarray(features, dtype=np.float64)))


def conjugate_gradient(matvec, b: np.ndarray, tol: float = CG_TOL, max_iter: int | None = None):
    """Solve ``A x = b`` for symmetric positive definite ``A``, from ``x = 0``.

    Stops when ``||r|| <= tol * ||b||``.
    """
    x = np.zeros_like(b)
    r = b.copy()
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return x
    p = r.copy()
    rs = float(r @ r)
    max_iter = max_iter or max(20 * b.size, 200)
    for _ in range(max_iter):
        ap = matvec(p)
        alpha = rs / float(p @ ap)
        x += alpha * p
        r -= alpha * ap
        rs_new = float(r @ r)
        if np.sqrt(rs_new) <= tol * bnorm:
            break
        p = r + (rs_new / rs) * p
        rs = rs_new
    return x


@dataclass(frozen=True)
class LinearModel:
    coef: np.ndarray  # (n_outputs, h)
    intercept: np.ndarray  # (n_outputs,)
    lam: float
    mode: str
    classes: tuple | None = None

    @property
    def h(self) -> int:
        return int(self.coef.shape[1])

    def decision_function(self, features) -> np.ndarray:
        X = _as_csr(features)
        if X.shape[1] != self.h:
            raise ValueError(f"expected {self.h} feature columns, got {X.shape[1]}")
        return np.asarray(X @ self.coef.T) + self.intercept[None, :]

    def predict(self, features):
        return predict(self, features)

    def class_index(self, label) -> int:
        if self.classes is None:
            raise ValueError("regression models have no classes")
        try:
            return self.classes.index(label)
        except ValueError:
            raise KeyError(f"unknown class {label!r}") from None


def _canonical_order(X: sparse.csr_matrix, y: np.ndarray) -> np.ndarray:
    # Sorting rows by content makes the solution independent of the input row order.
    keys = []
    for i in range(X.shape[0]):
        lo, hi = X.indptr[i], X.indptr[i + 1]
        keys.append((y[i].tolist(), X.indices[lo:hi].tolist(), X.data[lo:hi].tolist()))
    return np.array(sorted(range(len(keys)), key=keys.__getitem__), dtype=np.int64)


def _ridge(X: sparse.csr_matrix, Y: np.ndarray, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Ridge with unpenalized intercept; columns of Y solved independently."""
    n, h = X.shape
    x_mean = np.asarray(X.mean(axis=0)).ravel()
    y_mean = Y.mean(axis=0)
    Yc = Y - y_mean
    coef = np.zeros((Y.shape[1], h))
    if h <= n:
        XT = X.T.tocsr()

        def matvec(v):
            xv = X @ v - x_mean @ v
            return XT @ xv - x_mean * xv.sum() + lam * v

        for j in range(Y.shape[1]):
            b = XT @ Yc[:, j] - x_mean * Yc[:, j].sum()
            coef[j] = conjugate_gradient(matvec, b)
    else:
        # dual form: (Xc Xc^T + lam I) a = yc, beta = Xc^T a
        G = np.asarray((X @ X.T).todense())
        u = X @ x_mean
        K = G - u[:, None] - u[None, :] + float(x_mean @ x_mean)
        K[np.diag_indices(n)] += lam
        XT = X.T.tocsr()
        for j in range(Y.shape[1]):
            a = conjugate_gradient(lambda v: K @ v, Yc[:, j].copy())
            coef[j] = XT @ a - x_mean * a.sum()
    intercept = y_mean - coef @ x_mean
    return coef, intercept


def fit_linear(features, targets: Sequence[Any], lam: float | None = None, mode: str = "classification") -> LinearModel:
    """Fit a ridge model; classification uses one-vs-rest +/-1 targets.

    `features` may be a :class:`SparseBag` (arcsinh-mapped first), a scipy
    sparse matrix or a dense array.
    """
    if mode not in DEFAULT_LAMBDA:
        raise ValueError(f"mode must be 'classification' or 'regression', got {mode!r}")
    lam = DEFAULT_LAMBDA[mode] if lam is None else float(lam)
    if not lam > 0:
        raise ValueError("ridge penalty must be > 0")
    X = _as_csr(features)
    targets = list(targets)
    if X.shape[0] == 0:
        raise ValueError("cannot fit on zero rows")
    if X.shape[0] != len(targets):
        raise ValueError(f"{X.shape[0]} feature rows but {len(targets)} targets")

    classes = None
    if mode == "classification":
        uniq = sorted(set(targets), key=lambda c: (str(type(c)), c))
        classes = tuple(uniq)
        index = {c: i for i, c in enumerate(classes)}
        Y = -np.ones((len(targets), len(classes)))
        Y[np.arange(len(targets)), [index[t] for t in targets]] = 1.0
    else:
        Y = np.asarray(targets, dtype=np.float64).reshape(-1, 1)

    order = _canonical_order(X, Y)
    coef, intercept = _ridge(X[order], Y[order], lam)
    return LinearModel(coef, intercept, lam, mode, classes)


def predict(model: LinearModel, features) -> list:
    scores = model.decision_function(features)
    if model.mode == "regression":
        return scores[:, 0].tolist()
    # argmax returns the first maximum, i.e. ties go to the lowest class index
    return [model.classes[i] for i in np.argmax(scores, axis=1)]


def metric_bacc(y_true: Sequence, y_pred: Sequence) -> float:
    """Balanced accuracy: mean per-class recall over the classes of `y_true`."""
    y_true, y_pred = list(y_true), list(y_pred)
    _check_lengths(y_true, y_pred)
    recalls = []
    for c in sorted(set(y_true), key=lambda c: (str(type(c)), c)):
        idx = [i for i, t in enumerate(y_true) if t == c]
        recalls.append(sum(y_pred[i] == c for i in idx) / len(idx))
    return float(np.mean(recalls))


def metric_mape(y_true, y_pred) -> float:
    yt, yp = np.asarray(y_true, dtype=np.float64), np.asarray(y_pred, dtype=np.float64)
    _check_lengths(yt, yp)
    if np.any(yt == 0):
        raise ValueError("MAPE is undefined when a true value is zero")
    return float(np.mean(np.abs(yp - yt) / np.abs(yt)))


def metric_r2(y_true, y_pred) -> float:
    yt, yp = np.asarray(y_true, dtype=np.float64), np.asarray(y_pred, dtype=np.float64)
    _check_lengths(yt, yp)
    sst = float(np.sum((yt - yt.mean()) ** 2))
    if sst == 0.0:
        raise ValueError("R2 is undefined for constant targets")
    return 1.0 - float(np.sum((yp - yt) ** 2)) / sst


def _check_lengths(a, b):
    if len(a) != len(b) or len(a) == 0:
        raise ValueError("inputs must be non-empty and of equal length")
