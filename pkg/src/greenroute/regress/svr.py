"""Epsilon-insensitive support vector regression, optimized in the primal
by seeded mini-batch subgradient descent over a fixed epoch budget.

The rbf kernel materializes the full training kernel matrix, so kernel
fits are limited to n <= 5000 rows.
"""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError
from .base import RegressorModel, register_family, stable_dot

KERNEL_ROW_LIMIT = 5000
_EPOCHS = 300
_BATCH = 64
_LR0 = 0.5
_LR_DECAY = 0.01
_AVG_FRACTION = 0.5  # tail of steps averaged into the returned iterate


def _rbf(A, B, gamma):
    sq = (A ** 2).sum(axis=1)[:, None] + (B ** 2).sum(axis=1)[None, :] - 2.0 * (A @ B.T)
    return np.exp(-gamma * np.maximum(sq, 0.0))


def _rbf_rows(A, B, gamma, chunk=128):
    """Kernel rows computed independently per row of A (prediction parity)."""
    out = np.empty((A.shape[0], B.shape[0]))
    for start in range(0, A.shape[0], chunk):
        block = A[start:start + chunk]
        sq = ((block[:, None, :] - B[None, :, :]) ** 2).sum(axis=2)
        out[start:start + chunk] = np.exp(-gamma * sq)
    return out


@register_family
class SvrModel(RegressorModel):
    family = "svr"

    def __init__(self, spec, feature_names, kernel, gamma, coef, intercept,
                 support=None, y_mean=0.0, y_scale=1.0, training_summary=None):
        super().__init__(spec, feature_names, training_summary)
        self.kernel = kernel
        self.gamma = float(gamma)
        self.coef = np.asarray(coef, dtype=np.float64)
        self.intercept = float(intercept)
        self.support = None if support is None else np.asarray(support, dtype=np.float64)
        self.y_mean = float(y_mean)
        self.y_scale = float(y_scale)

    def _predict(self, X):
        if self.kernel == "linear":
            f = stable_dot(X, self.coef) + self.intercept
        else:
            f = stable_dot(_rbf_rows(X, self.support, self.gamma), self.coef) + self.intercept
        return f * self.y_scale + self.y_mean

    def _params_to_dict(self):
        return {"kernel": self.kernel, "gamma": self.gamma,
                "coef": self.coef.tolist(), "intercept": self.intercept,
                "support": None if self.support is None else self.support.tolist(),
                "y_mean": self.y_mean, "y_scale": self.y_scale}

    @classmethod
    def _from_dict(cls, d):
        from .base import spec_from_dict
        p = d["params"]
        return cls(spec_from_dict(d["spec"]), d["feature_names"], p["kernel"],
                   p["gamma"], p["coef"], p["intercept"], p["support"],
                   p["y_mean"], p["y_scale"], d["training_summary"])


def fit_svr(X, y, spec, feature_names=None):
    """Minimize 0.5*lam*||w||^2 + mean eps-insensitive loss, lam = 1/(C*n).

    The target is standardized internally; epsilon is interpreted in the
    original target units. Inputs are assumed scaled by the caller.
    """
    from .linear import _as_matrix, _names

    X, y = _as_matrix(X, y)
    n, p = X.shape
    names = _names(feature_names, p)
    h = spec.hyperparams
    eps, C, kernel, gamma = h["epsilon"], h["C"], h["kernel"], h["gamma"]
    if kernel == "rbf" and n > KERNEL_ROW_LIMIT:
        raise ValidationError(
            f"rbf kernel supports at most {KERNEL_ROW_LIMIT} rows, got {n}")

    y_mean = float(y.mean())
    y_scale = float(y.std())
    if y_scale == 0.0:
        # constant target: predicting the constant already has zero loss
        model = SvrModel(spec, names, kernel, gamma, np.zeros(p if kernel == "linear" else n),
                         0.0, None if kernel == "linear" else X, y_mean, 1.0,
                         {"final_loss": 0.0, "iterations": 0})
        return model
    t = (y - y_mean) / y_scale
    eps_s = eps / y_scale
    lam = 1.0 / (C * n)

    if kernel == "linear":
        theta = np.zeros(p)
        design = X
        reg_grad = lambda th: lam * th
    else:
        K = _rbf(X, X, gamma)
        theta = np.zeros(n)
        design = K
        reg_grad = lambda th: lam * (K @ th)

    b = 0.0
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 11]))
    total_steps = _EPOCHS * int(np.ceil(n / _BATCH))
    avg_start = int(total_steps * (1.0 - _AVG_FRACTION))
    acc_theta = np.zeros_like(theta)
    acc_b = 0.0
    acc_count = 0
    step = 0
    for _ in range(_EPOCHS):
        order = rng.permutation(n)
        for start in range(0, n, _BATCH):
            rows = order[start:start + _BATCH]
            f = design[rows] @ theta + b
            err = t[rows] - f
            active = np.abs(err) > eps_s
            sign = np.sign(err) * active
            g_theta = reg_grad(theta) - design[rows].T @ sign / rows.size
            g_b = -sign.mean()
            lr = _LR0 / (1.0 + _LR_DECAY * step)
            theta -= lr * g_theta
            b -= lr * g_b
            step += 1
            # subgradient iterates oscillate around the optimum; the
            # returned solution averages the tail of the trajectory
            if step > avg_start:
                acc_theta += theta
                acc_b += b
                acc_count += 1
    theta = acc_theta / acc_count
    b = acc_b / acc_count

    f_all = design @ theta + b
    slack = np.maximum(np.abs(t - f_all) - eps_s, 0.0)
    loss = float(0.5 * lam * (theta @ (design @ theta if kernel == "rbf" else theta))
                 + slack.mean())
    summary = {"final_loss": loss, "iterations": _EPOCHS}
    return SvrModel(spec, names, kernel, gamma, theta, b,
                    None if kernel == "linear" else X, y_mean, y_scale, summary)
