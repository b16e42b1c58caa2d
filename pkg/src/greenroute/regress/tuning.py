"""Grid-search cross-validation and linear stacking over the model zoo."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from ..evalx import compute_metrics_partial, kfold_indices
from .base import RegressorModel, fit_model, register_family, stable_dot
from .linear import ridge_regression

STACK_RIDGE = 1e-6


@dataclass(frozen=True)
class GridCell:
    spec: object
    mean_score: float
    stdev_score: float


def grid_search_cv(spec_grid, X, y, k, metric="mae", seed=0):
    """Score every spec with one shared seeded k-fold plan.

    Returns (best_spec, table). Best is the lowest mean validation MAE or
    the highest mean R^2; ties keep the earliest grid entry.
    """
    if metric not in ("mae", "r2"):
        raise ValidationError(f"metric must be 'mae' or 'r2', got {metric!r}")
    spec_grid = list(spec_grid)
    if not spec_grid:
        raise ValidationError("empty spec grid")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    n = X.shape[0]
    if k < 2 or k > n:
        raise ValidationError(f"k must be in [2, {n}], got {k}")
    folds = kfold_indices(n, k, seed)

    table = []
    best = None
    best_score = None
    for spec in spec_grid:
        scores = []
        for train_idx, valid_idx in folds:
            model = fit_model(spec, X[train_idx], y[train_idx])
            pred = model.predict(X[valid_idx])
            mae, _, r2 = compute_metrics_partial(y[valid_idx], pred)
            scores.append(mae if metric == "mae" else r2)
        mean = float(np.mean(scores))
        table.append(GridCell(spec, mean, float(np.std(scores))))
        better = (best_score is None
                  or (metric == "mae" and mean < best_score)
                  or (metric == "r2" and mean > best_score))
        if better:
            best, best_score = spec, mean
    return best, table


@register_family
class StackModel(RegressorModel):
    """Linear combination of refit base models, weighted on out-of-fold skill."""

    family = "stack"

    def __init__(self, feature_names, base_models, meta_coef, meta_intercept,
                 training_summary=None):
        super().__init__(None, feature_names, training_summary)
        self.base_models = list(base_models)
        self.meta_coef = np.asarray(meta_coef, dtype=np.float64)
        self.meta_intercept = float(meta_intercept)

    def _predict(self, X):
        Z = np.column_stack([m.predict(X) for m in self.base_models])
        return stable_dot(Z, self.meta_coef) + self.meta_intercept

    def to_dict(self):
        return {
            "family": self.family,
            "spec": None,
            "feature_names": list(self.feature_names),
            "training_summary": self.training_summary,
            "params": {
                "meta_coef": self.meta_coef.tolist(),
                "meta_intercept": self.meta_intercept,
                "bases": [m.to_dict() for m in self.base_models],
            },
        }

    @classmethod
    def _from_dict(cls, d):
        from .base import model_from_dict
        p = d["params"]
        bases = [model_from_dict(b) for b in p["bases"]]
        return cls(d["feature_names"], bases, p["meta_coef"], p["meta_intercept"],
                   d["training_summary"])


def fit_stack(base_specs, X, y, k, seed=0, feature_names=None):
    """Ridge-stabilized linear stacking.

    The meta design matrix holds each base's out-of-fold predictions; the
    tiny ridge term keeps collinear bases (e.g. duplicated specs) solvable.
    Bases are refit on the full data for prediction time.
    """
    base_specs = list(base_specs)
    if not base_specs:
        raise ValidationError("need at least one base spec")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    n = X.shape[0]
    if k < 2 or k > n:
        raise ValidationError(f"k must be in [2, {n}], got {k}")
    folds = kfold_indices(n, k, seed)

    oof = np.zeros((n, len(base_specs)))
    for b, spec in enumerate(base_specs):
        for train_idx, valid_idx in folds:
            try:
                model = fit_model(spec, X[train_idx], y[train_idx])
            except Exception as e:
                raise ValidationError(f"stack base {b} ({spec.family}) failed: {e}") from e
            oof[valid_idx, b] = model.predict(X[valid_idx])

    meta = ridge_regression(oof, y, STACK_RIDGE)
    refit = []
    for b, spec in enumerate(base_specs):
        try:
            refit.append(fit_model(spec, X, y, feature_names=feature_names))
        except Exception as e:
            raise ValidationError(f"stack base {b} ({spec.family}) failed: {e}") from e

    meta_pred = oof @ meta.coef + meta.intercept
    summary = {
        "final_loss": float(np.mean((meta_pred - y) ** 2)),
        "iterations": 1,
        "oof_mse_per_base": [float(np.mean((oof[:, b] - y) ** 2))
                             for b in range(len(base_specs))],
    }
    names = feature_names if feature_names is not None else [f"x{i}" for i in range(X.shape[1])]
    return StackModel(names, refit, meta.coef, meta.intercept, summary)
