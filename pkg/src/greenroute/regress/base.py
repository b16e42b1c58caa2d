"""Shared regressor plumbing: specs, frozen defaults, dispatch, prediction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError

# Frozen hyperparameter defaults. Reported numbers in this project are
# reproducible against this table; bump the version when a value changes.
DEFAULTS_VERSION = "1"
DEFAULTS = {
    "ols": {},
    "elastic_net": {"alpha": 0.01, "l1_ratio": 0.5},
    "random_forest": {"n_trees": 50, "max_depth": 12, "min_leaf": 2,
                      "feature_subsample": 0.6},
    "gbt": {"n_rounds": 300, "learning_rate": 0.06, "max_depth": 4, "lambda": 1.0},
    "mlp": {"hidden_layers": [11, 11, 11], "learning_rate": 0.01,
            "epochs": 200, "batch_size": 32},
    "svr": {"epsilon": 0.1, "C": 1.0, "kernel": "linear", "gamma": 0.1},
}

FAMILIES = tuple(DEFAULTS)


@dataclass(frozen=True)
class RegressorSpec:
    family: str
    params: tuple = ()  # sorted (key, value) pairs; use .hyperparams for a dict
    seed: int = 0

    @property
    def hyperparams(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.params}

    def with_seed(self, seed):
        return RegressorSpec(self.family, self.params, seed)


def _freeze(value):
    if isinstance(value, (list, tuple)):
        return tuple(value)
    return value


def make_spec(family, params=None, seed=0):
    """Build a validated RegressorSpec, filling gaps from DEFAULTS."""
    if family not in DEFAULTS:
        raise ValidationError(f"unknown model family {family!r}; choose from {list(DEFAULTS)}")
    merged = dict(DEFAULTS[family])
    for key, value in (params or {}).items():
        if key not in merged:
            raise ValidationError(f"{family}: unknown hyperparameter {key!r}")
        merged[key] = value
    _validate_params(family, merged)
    frozen = tuple(sorted((k, _freeze(v)) for k, v in merged.items()))
    return RegressorSpec(family=family, params=frozen, seed=int(seed))


def _validate_params(family, p):
    def check(cond, msg):
        if not cond:
            raise ValidationError(f"{family}: {msg}")

    if family == "elastic_net":
        check(p["alpha"] >= 0, f"alpha must be >= 0, got {p['alpha']}")
        check(0 <= p["l1_ratio"] <= 1, f"l1_ratio must be in [0,1], got {p['l1_ratio']}")
    elif family == "random_forest":
        check(p["n_trees"] >= 1, "n_trees must be >= 1")
        check(p["max_depth"] >= 1, "max_depth must be >= 1")
        check(p["min_leaf"] >= 1, "min_leaf must be >= 1")
        check(0 < p["feature_subsample"] <= 1, "feature_subsample must be in (0,1]")
    elif family == "gbt":
        check(p["n_rounds"] >= 1, "n_rounds must be >= 1")
        check(0 < p["learning_rate"] <= 1, "learning_rate must be in (0,1]")
        check(p["max_depth"] >= 1, "max_depth must be >= 1")
        check(p["lambda"] >= 0, "lambda must be >= 0")
    elif family == "mlp":
        check(all(isinstance(h, (int, np.integer)) and h > 0 for h in p["hidden_layers"]),
              "hidden_layers must be positive integers")
        check(p["learning_rate"] > 0, "learning_rate must be > 0")
        check(p["epochs"] >= 1, "epochs must be >= 1")
        check(p["batch_size"] >= 1, "batch_size must be >= 1")
    elif family == "svr":
        check(p["epsilon"] >= 0, "epsilon must be >= 0")
        check(p["C"] > 0, "C must be > 0")
        check(p["kernel"] in ("linear", "rbf"), f"kernel must be linear or rbf, got {p['kernel']!r}")
        check(p["gamma"] > 0, "gamma must be > 0")


def stable_dot(X, W):
    """Matrix product whose reductions run independently per row.

    BLAS gemm kernels pick different instruction paths for different batch
    shapes, so ``(X @ W)[i]`` can differ from ``X[i:i+1] @ W`` in the last
    ulp. Prediction paths use this helper instead, making a batch predict
    bit-identical to the same rows predicted one at a time.
    """
    X = np.asarray(X)
    W = np.asarray(W)
    if W.ndim == 1:
        return (X * W).sum(axis=1)
    return (X[:, :, None] * W[None, :, :]).sum(axis=1)


class RegressorModel:
    """A fitted model: deterministic pure prediction over fixed parameters."""

    family = "base"

    def __init__(self, spec, feature_names, training_summary=None):
        self.spec = spec
        self.feature_names = list(feature_names)
        self.training_summary = dict(training_summary or {})
        self.pipeline_hash = None

    def _predict(self, X):  # pragma: no cover - abstract
        raise NotImplementedError

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        expected = len(self.feature_names)
        if X.ndim != 2 or X.shape[1] != expected:
            got = X.shape[1] if X.ndim == 2 else X.shape
            raise ValidationError(
                f"{self.family}: expected {expected} features, received {got}")
        return self._predict(X)

    # serialization -----------------------------------------------------

    def _params_to_dict(self):  # pragma: no cover - abstract
        raise NotImplementedError

    def to_dict(self):
        return {
            "family": self.family,
            "spec": {"family": self.spec.family,
                     "params": self.spec.hyperparams,
                     "seed": self.spec.seed},
            "feature_names": list(self.feature_names),
            "training_summary": self.training_summary,
            "params": self._params_to_dict(),
        }


def predict(model, X):
    """Batch prediction; equals per-row prediction concatenated."""
    return model.predict(X)


def fit_model(spec, X, y, feature_names=None):
    """Dispatch a RegressorSpec to its family's fitting routine."""
    from . import linear, mlp as mlp_mod, svr as svr_mod, tree, tuning  # noqa: F401

    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    h = spec.hyperparams
    if spec.family == "ols":
        return linear.fit_ols(X, y, feature_names=feature_names)
    if spec.family == "elastic_net":
        return linear.fit_elastic_net(X, y, h["alpha"], h["l1_ratio"], seed=spec.seed,
                                      feature_names=feature_names)
    if spec.family == "random_forest":
        return tree.fit_random_forest(X, y, spec, feature_names=feature_names)
    if spec.family == "gbt":
        return tree.fit_gbt(X, y, spec, feature_names=feature_names)
    if spec.family == "mlp":
        return mlp_mod.fit_mlp(X, y, spec, feature_names=feature_names)
    if spec.family == "svr":
        return svr_mod.fit_svr(X, y, spec, feature_names=feature_names)
    raise ValidationError(f"unknown model family {spec.family!r}")


_REGISTRY = {}


def register_family(cls):
    _REGISTRY[cls.family] = cls
    return cls


def spec_from_dict(d):
    return make_spec(d["family"], d["params"], d["seed"])


def model_from_dict(d):
    """Rebuild a fitted model from its serialized form."""
    family = d["family"]
    if family not in _REGISTRY:
        raise ValidationError(f"unknown serialized model family {family!r}")
    return _REGISTRY[family]._from_dict(d)
