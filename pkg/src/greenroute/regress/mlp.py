"""Fully connected regression network: ReLU hidden layers, linear output,
squared loss, plain mini-batch gradient descent.

The forward/backward pass is exposed as :func:`loss_and_grads` so the
analytic gradients can be checked against central finite differences.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConvergenceError, ValidationError
from .base import RegressorModel, register_family, stable_dot


def init_params(layer_sizes, seed, scheme="fan_in"):
    """Symmetric uniform init scaled by 1/sqrt(fan_in); biases start at zero.

    ``scheme="zeros"`` is a test hook that zeroes the weights too (only
    useful for networks with no hidden layers, where training still moves).
    """
    rng = np.random.default_rng(seed)
    params = []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        if scheme == "zeros":
            W = np.zeros((fan_in, fan_out))
        else:
            bound = 1.0 / np.sqrt(fan_in)
            W = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        params.append((W, np.zeros(fan_out)))
    return params


def forward(params, X, stable=False):
    """Return the activation list; the last entry is the (m, 1) prediction.

    ``stable=True`` routes the matmuls through batch-shape-independent
    reductions (prediction parity); training uses the fast BLAS path.
    """
    dot = stable_dot if stable else (lambda a, W: a @ W)
    acts = [X]
    a = X
    for i, (W, b) in enumerate(params):
        z = dot(a, W) + b
        a = z if i == len(params) - 1 else np.maximum(z, 0.0)
        acts.append(a)
    return acts


def loss_and_grads(params, X, y):
    """Mean squared error and its gradients w.r.t. every weight and bias."""
    acts = forward(params, X)
    pred = acts[-1].ravel()
    err = pred - y
    m = y.shape[0]
    loss = float(np.mean(err ** 2))
    grads = [None] * len(params)
    delta = (2.0 * err / m).reshape(-1, 1)
    for i in range(len(params) - 1, -1, -1):
        a_prev = acts[i]
        grads[i] = (a_prev.T @ delta, delta.sum(axis=0))
        if i > 0:
            delta = (delta @ params[i][0].T) * (acts[i] > 0.0)
    return loss, grads


@register_family
class MlpModel(RegressorModel):
    family = "mlp"

    def __init__(self, spec, feature_names, params, y_mean, y_scale,
                 training_summary=None):
        super().__init__(spec, feature_names, training_summary)
        self.params = [(np.asarray(W, dtype=np.float64), np.asarray(b, dtype=np.float64))
                       for W, b in params]
        self.y_mean = float(y_mean)
        self.y_scale = float(y_scale)

    def _predict(self, X):
        return forward(self.params, X, stable=True)[-1].ravel() * self.y_scale + self.y_mean

    def _params_to_dict(self):
        return {"weights": [W.tolist() for W, _ in self.params],
                "biases": [b.tolist() for _, b in self.params],
                "y_mean": self.y_mean, "y_scale": self.y_scale}

    @classmethod
    def _from_dict(cls, d):
        from .base import spec_from_dict
        p = d["params"]
        params = [(np.asarray(W), np.asarray(b))
                  for W, b in zip(p["weights"], p["biases"])]
        return cls(spec_from_dict(d["spec"]), d["feature_names"], params,
                   p["y_mean"], p["y_scale"], d["training_summary"])


def fit_mlp(X, y, spec, feature_names=None, init_scheme="fan_in"):
    """Train with mini-batch gradient descent at a fixed learning rate.

    The target is standardized internally (the fitted model maps back to
    original units), which keeps one learning rate usable across tasks.
    Inputs are assumed already scaled by the caller.
    """
    from .linear import _as_matrix, _names

    X, y = _as_matrix(X, y)
    n, p = X.shape
    names = _names(feature_names, p)
    h = spec.hyperparams
    layer_sizes = [p] + list(h["hidden_layers"]) + [1]
    params = init_params(layer_sizes, spec.seed, init_scheme)

    y_mean = float(y.mean())
    y_scale = float(y.std())
    if y_scale == 0.0:
        y_scale = 1.0
    t = (y - y_mean) / y_scale

    lr = h["learning_rate"]
    batch = min(int(h["batch_size"]), n)
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 7]))
    initial_loss = loss_and_grads(params, X, t)[0]
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(h["epochs"]):
            order = rng.permutation(n)
            for start in range(0, n, batch):
                rows = order[start:start + batch]
                loss, grads = loss_and_grads(params, X[rows], t[rows])
                if not np.isfinite(loss):
                    raise ConvergenceError(f"mlp: non-finite loss at epoch {epoch}")
                params = [(W - lr * gW, b - lr * gb)
                          for (W, b), (gW, gb) in zip(params, grads)]
        final_loss = loss_and_grads(params, X, t)[0]
    if not np.isfinite(final_loss):
        raise ConvergenceError(f"mlp: non-finite loss after {h['epochs']} epochs")
    summary = {"initial_loss": float(initial_loss), "final_loss": float(final_loss),
               "iterations": h["epochs"]}
    return MlpModel(spec, names, params, y_mean, y_scale, summary)
