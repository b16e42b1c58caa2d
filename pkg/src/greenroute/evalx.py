"""Splits, cross-validation folds, regression metrics, tree feature
importance, and the model comparison reports."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import UnsupportedFamilyError, ValidationError

DEFAULT_FRACTIONS = (0.7, 0.15, 0.15)


@dataclass(frozen=True)
class SplitPlan:
    train_indices: tuple
    valid_indices: tuple
    test_indices: tuple
    fractions: tuple
    seed: int

    @property
    def train(self):
        return np.asarray(self.train_indices, dtype=int)

    @property
    def valid(self):
        return np.asarray(self.valid_indices, dtype=int)

    @property
    def test(self):
        return np.asarray(self.test_indices, dtype=int)


def split_three_way(n, fractions=DEFAULT_FRACTIONS, seed=0):
    """Seeded shuffle, then contiguous train/valid/test partition.

    Set sizes follow largest-remainder rounding (ties go to the earlier
    set); every set must end up non-empty.
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f <= 0 for f in fractions):
        raise ValidationError(f"need three positive fractions, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValidationError(f"fractions must sum to 1, got {sum(fractions)}")
    if n < 3:
        raise ValidationError(f"need n >= 3 rows to split, got {n}")
    sizes = _largest_remainder(n, fractions)
    if min(sizes) == 0:
        raise ValidationError(f"fractions {fractions} give an empty set for n={n}")
    order = np.random.default_rng(seed).permutation(n)
    a, b = sizes[0], sizes[0] + sizes[1]
    return SplitPlan(tuple(order[:a].tolist()), tuple(order[a:b].tolist()),
                     tuple(order[b:].tolist()), fractions, int(seed))


def _largest_remainder(n, fractions):
    exact = [f * n for f in fractions]
    base = [int(np.floor(e)) for e in exact]
    leftover = n - sum(base)
    remainders = np.asarray([e - b for e, b in zip(exact, base)])
    for idx in np.argsort(-remainders, kind="stable")[:leftover]:
        base[int(idx)] += 1
    return base


def kfold_indices(n, k, seed=0):
    """Seeded k-fold plan: list of (train, valid) index arrays.

    Folds differ in size by at most one; every index validates exactly once.
    """
    if not 2 <= k <= n:
        raise ValidationError(f"k must be in [2, {n}], got {k}")
    order = np.random.default_rng(seed).permutation(n)
    sizes = np.full(k, n // k)
    sizes[: n % k] += 1
    folds = []
    start = 0
    for size in sizes:
        valid = order[start:start + size]
        train = np.concatenate([order[:start], order[start + size:]])
        folds.append((np.sort(train), np.sort(valid)))
        start += size
    return folds


def compute_metrics(y_true, y_pred):
    """(mae, mse, r2); rejects zero-variance targets where R^2 is undefined."""
    mae, mse, r2 = compute_metrics_partial(y_true, y_pred)
    if r2 is None:
        raise ValidationError("zero-variance y_true: R^2 is undefined")
    return mae, mse, r2


def compute_metrics_partial(y_true, y_pred):
    """Like compute_metrics but returns r2=None for zero-variance targets."""
    y_true = np.asarray(y_true, dtype=np.float64).ravel()
    y_pred = np.asarray(y_pred, dtype=np.float64).ravel()
    if y_true.shape != y_pred.shape:
        raise ValidationError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    if y_true.size < 2:
        raise ValidationError(f"need at least 2 values, got {y_true.size}")
    err = y_pred - y_true
    mae = float(np.mean(np.abs(err)))
    mse = float(np.mean(err ** 2))
    ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
    if ss_tot == 0.0:
        return mae, mse, None
    r2 = 1.0 - float(np.sum(err ** 2)) / ss_tot
    return mae, mse, r2


def feature_importance(model):
    """Gain-based importance for tree ensembles, normalized to sum to one.

    Importance of a feature is the total split variance reduction credited
    to it across every tree. Returns (name, importance) pairs, descending.
    """
    if getattr(model, "family", None) not in ("random_forest", "gbt"):
        raise UnsupportedFamilyError(
            f"feature importance needs a tree ensemble, got {getattr(model, 'family', None)!r}")
    gains = np.zeros(len(model.feature_names))
    for nodes in model.trees:
        for node in nodes:
            if node["feature"] >= 0:
                gains[node["feature"]] += node["gain"]
    total = gains.sum()
    if total > 0:
        gains = gains / total
    order = np.argsort(-gains, kind="stable")
    return [(model.feature_names[i], float(gains[i])) for i in order]


@dataclass(frozen=True)
class EvalReport:
    task: str
    rows: tuple  # of (model_name, mae, mse, r2)
    best_model: str
    seed: object = None
    corpus_hash: object = None

    def to_json_dict(self):
        return {
            "task": self.task,
            "rows": [{"model": m, "mae": mae, "mse": mse, "r2": r2}
                     for m, mae, mse, r2 in self.rows],
            "best_model": self.best_model,
            "seed": self.seed,
            "corpus_hash": self.corpus_hash,
        }

    def to_json(self):
        return json.dumps(self.to_json_dict(), indent=2)

    def to_text(self):
        lines = [f"task: {self.task}",
                 f"{'model':<16} {'MAE':>12} {'MSE':>14} {'R2':>10}"]
        for m, mae, mse, r2 in self.rows:
            lines.append(f"{m:<16} {mae:>12.4f} {mse:>14.4f} {r2:>10.4f}")
        lines.append(f"best (by MAE): {self.best_model}")
        return "\n".join(lines)


def comparison_report(task, models, X_test, y_test, seed=None, corpus_hash=None,
                      csv_path=None):
    """Evaluate named fitted models on the untouched test split.

    All models must have been fitted on the same feature pipeline; when
    they carry pipeline hashes, mismatches are rejected. Best model is the
    lowest MAE with ties broken by name. R^2 is reported unclamped.
    """
    models = list(models)
    hashes = {m.pipeline_hash for _, m in models if m.pipeline_hash is not None}
    if len(hashes) > 1:
        raise ValidationError(f"models come from different feature pipelines: {sorted(hashes)}")
    rows = []
    for name, model in models:
        mae, mse, r2 = compute_metrics(y_test, model.predict(X_test))
        if mse + 1e-12 < mae ** 2:
            raise RuntimeError(f"metric invariant violated for {name}: mse < mae^2")
        rows.append((name, mae, mse, r2))
    best = min(rows, key=lambda r: (r[1], r[0]))[0]
    report = EvalReport(task=task, rows=tuple(rows), best_model=best,
                        seed=seed, corpus_hash=corpus_hash)
    if csv_path is not None:
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write("model,mae,r2\n")
            for name, mae, _, r2 in rows:
                fh.write(f"{name},{mae!r},{r2!r}\n")
    return report
