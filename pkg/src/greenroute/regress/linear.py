"""Linear models: QR-solved least squares and coordinate-descent elastic net."""

from __future__ import annotations

import numpy as np

from ..errors import RankDeficiencyError, ValidationError
from .base import RegressorModel, make_spec, register_family, stable_dot


@register_family
class LinearModel(RegressorModel):
    """y_hat = X @ coef + intercept. Used by ols, elastic_net, and ridge."""

    family = "linear"

    def __init__(self, spec, feature_names, coef, intercept, training_summary=None):
        super().__init__(spec, feature_names, training_summary)
        self.coef = np.asarray(coef, dtype=np.float64)
        self.intercept = float(intercept)

    def _predict(self, X):
        return stable_dot(X, self.coef) + self.intercept

    def _params_to_dict(self):
        return {"coef": self.coef.tolist(), "intercept": self.intercept}

    @classmethod
    def _from_dict(cls, d):
        from .base import spec_from_dict
        return cls(spec_from_dict(d["spec"]), d["feature_names"],
                   d["params"]["coef"], d["params"]["intercept"],
                   d["training_summary"])


def _as_matrix(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.shape[0] != y.shape[0]:
        raise ValidationError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
    return X, y


def _names(feature_names, p):
    if feature_names is None:
        return [f"x{i}" for i in range(p)]
    if len(feature_names) != p:
        raise ValidationError(f"{len(feature_names)} feature names for {p} columns")
    return list(feature_names)


def fit_ols(X, y, feature_names=None):
    """Least squares with intercept via Householder QR.

    Rank-deficient designs are rejected with the names of the columns that
    are linear combinations of earlier ones; no silent pseudo-inverse.
    """
    X, y = _as_matrix(X, y)
    n, p = X.shape
    names = _names(feature_names, p)
    if n <= p:
        raise ValidationError(f"need n > p for least squares, got n={n}, p={p}")
    A = np.column_stack([np.ones(n), X])
    Q, R = np.linalg.qr(A)
    diag = np.abs(np.diag(R))
    tol = max(n, p + 1) * np.finfo(np.float64).eps * (diag.max() if diag.size else 0.0)
    dependent = [j for j in range(p + 1) if diag[j] <= tol]
    if dependent:
        dep_names = ["(intercept)" if j == 0 else names[j - 1] for j in dependent]
        raise RankDeficiencyError(dep_names)
    beta = np.linalg.solve(R, Q.T @ y)
    residual = y - A @ beta
    summary = {"final_loss": float(np.mean(residual ** 2)), "iterations": 1}
    return LinearModel(make_spec("ols"), names, beta[1:], beta[0], summary)


def fit_elastic_net(X, y, alpha, l1_ratio, seed=0, feature_names=None,
                    tol=1e-7, max_sweeps=10_000):
    """Cyclic coordinate descent on

        (1/2n)||y - X b - b0||^2 + alpha * (l1 ||b||_1 + (1-l1)/2 ||b||^2)

    Converges when the largest coordinate update in a sweep drops below
    ``tol`` (or after ``max_sweeps``). With alpha = 0 this matches the
    least-squares solution on well-conditioned problems.
    """
    if alpha < 0:
        raise ValidationError(f"alpha must be >= 0, got {alpha}")
    if not 0 <= l1_ratio <= 1:
        raise ValidationError(f"l1_ratio must be in [0,1], got {l1_ratio}")
    X, y = _as_matrix(X, y)
    n, p = X.shape
    names = _names(feature_names, p)

    col_sq = (X ** 2).sum(axis=0) / n
    l1_pen = alpha * l1_ratio
    l2_pen = alpha * (1.0 - l1_ratio)

    beta = np.zeros(p)
    intercept = float(y.mean())
    r = y - intercept  # residual y - Xb - b0
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        max_delta = 0.0
        for j in range(p):
            if col_sq[j] == 0.0:
                continue
            rho = (X[:, j] @ r) / n + col_sq[j] * beta[j]
            new = _soft_threshold(rho, l1_pen) / (col_sq[j] + l2_pen)
            delta = new - beta[j]
            if delta != 0.0:
                r -= X[:, j] * delta
                beta[j] = new
                max_delta = max(max_delta, abs(delta))
        shift = r.mean()
        if shift != 0.0:
            intercept += shift
            r -= shift
            max_delta = max(max_delta, abs(shift))
        if max_delta < tol:
            break
    residual = y - X @ beta - intercept
    loss = float(0.5 * np.mean(residual ** 2)
                 + alpha * (l1_ratio * np.abs(beta).sum()
                            + 0.5 * (1 - l1_ratio) * (beta ** 2).sum()))
    spec = make_spec("elastic_net", {"alpha": alpha, "l1_ratio": l1_ratio}, seed)
    summary = {"final_loss": loss, "iterations": sweeps}
    return LinearModel(spec, names, beta, intercept, summary)


def _soft_threshold(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


def ridge_regression(X, y, lam, feature_names=None):
    """Ridge with unpenalized intercept; solved on centered data."""
    X, y = _as_matrix(X, y)
    n, p = X.shape
    names = _names(feature_names, p)
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    Xc = X - x_mean
    coef = np.linalg.solve(Xc.T @ Xc + lam * np.eye(p), Xc.T @ (y - y_mean))
    intercept = float(y_mean - x_mean @ coef)
    spec = make_spec("elastic_net", {"alpha": lam, "l1_ratio": 0.0})
    loss = float(np.mean((y - X @ coef - intercept) ** 2))
    return LinearModel(spec, names, coef, intercept, {"final_loss": loss, "iterations": 1})
