"""CART regression trees, bagged forests, and squared-loss gradient boosting.

Trees are stored as flat node lists (split feature/threshold/child ids for
internal nodes, value for leaves) so fitted ensembles serialize directly.
Split search minimizes the summed squared error of the two children; ties
are broken by the first feature and first threshold encountered, keeping
fits bit-reproducible.
"""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError
from .base import RegressorModel, make_spec, register_family


def _best_split(X, y, idx, feats, min_leaf):
    """Scan candidate features; return (gain, feature, threshold) or None."""
    m = idx.size
    y_node = y[idx]
    s_total = y_node.sum()
    q_total = (y_node ** 2).sum()
    sse_parent = q_total - s_total * s_total / m
    if sse_parent <= 0.0:
        return None
    best = None
    for f in feats:
        v = X[idx, f]
        order = np.argsort(v, kind="stable")
        v_sorted = v[order]
        y_sorted = y_node[order]
        cs = np.cumsum(y_sorted)
        cq = np.cumsum(y_sorted ** 2)
        k = np.arange(1, m)  # size of the left child
        valid = (v_sorted[1:] > v_sorted[:-1]) & (k >= min_leaf) & (m - k >= min_leaf)
        if not valid.any():
            continue
        sse_left = cq[:-1] - cs[:-1] ** 2 / k
        rs = s_total - cs[:-1]
        rq = q_total - cq[:-1]
        sse_right = rq - rs ** 2 / (m - k)
        total = np.where(valid, sse_left + sse_right, np.inf)
        pos = int(np.argmin(total))
        gain = sse_parent - float(total[pos])
        if gain > 0.0 and (best is None or gain > best[0]):
            threshold = 0.5 * (v_sorted[pos] + v_sorted[pos + 1])
            best = (gain, int(f), float(threshold))
    return best


def build_tree(X, y, max_depth, min_leaf, leaf_value, feature_chooser):
    """Grow one regression tree; returns the flat node list.

    ``leaf_value(sum, count)`` maps a leaf's residual mass to its output,
    ``feature_chooser()`` yields the candidate feature ids for one node.
    """
    nodes = []

    def grow(idx, depth):
        node_id = len(nodes)
        y_node = y[idx]
        s = float(y_node.sum())
        nodes.append({"feature": -1, "threshold": 0.0, "left": -1, "right": -1,
                      "value": leaf_value(s, idx.size), "gain": 0.0, "n": int(idx.size)})
        if depth >= max_depth or idx.size < 2 * min_leaf:
            return node_id
        best = _best_split(X, y, idx, feature_chooser(), min_leaf)
        if best is None:
            return node_id
        gain, f, threshold = best
        mask = X[idx, f] <= threshold
        node = nodes[node_id]
        node["feature"] = f
        node["threshold"] = threshold
        node["gain"] = gain
        node["left"] = grow(idx[mask], depth + 1)
        node["right"] = grow(idx[~mask], depth + 1)
        return node_id

    grow(np.arange(X.shape[0]), 0)
    return nodes


def tree_predict(nodes, X):
    out = np.empty(X.shape[0])
    stack = [(0, np.arange(X.shape[0]))]
    while stack:
        node_id, idx = stack.pop()
        if idx.size == 0:
            continue
        node = nodes[node_id]
        if node["feature"] < 0:
            out[idx] = node["value"]
        else:
            mask = X[idx, node["feature"]] <= node["threshold"]
            stack.append((node["left"], idx[mask]))
            stack.append((node["right"], idx[~mask]))
    return out


@register_family
class ForestModel(RegressorModel):
    family = "random_forest"

    def __init__(self, spec, feature_names, trees, training_summary=None):
        super().__init__(spec, feature_names, training_summary)
        self.trees = trees

    def _predict(self, X):
        acc = np.zeros(X.shape[0])
        for nodes in self.trees:
            acc += tree_predict(nodes, X)
        return acc / len(self.trees)

    def _params_to_dict(self):
        return {"trees": self.trees}

    @classmethod
    def _from_dict(cls, d):
        from .base import spec_from_dict
        return cls(spec_from_dict(d["spec"]), d["feature_names"],
                   d["params"]["trees"], d["training_summary"])


@register_family
class GbtModel(RegressorModel):
    family = "gbt"

    def __init__(self, spec, feature_names, base_score, learning_rate, trees,
                 training_summary=None):
        super().__init__(spec, feature_names, training_summary)
        self.base_score = float(base_score)
        self.learning_rate = float(learning_rate)
        self.trees = trees

    def _predict(self, X):
        acc = np.full(X.shape[0], self.base_score)
        for nodes in self.trees:
            acc += self.learning_rate * tree_predict(nodes, X)
        return acc

    def _params_to_dict(self):
        return {"base_score": self.base_score, "learning_rate": self.learning_rate,
                "trees": self.trees}

    @classmethod
    def _from_dict(cls, d):
        from .base import spec_from_dict
        return cls(spec_from_dict(d["spec"]), d["feature_names"],
                   d["params"]["base_score"], d["params"]["learning_rate"],
                   d["params"]["trees"], d["training_summary"])


def fit_random_forest(X, y, spec, feature_names=None):
    """Bagged CART trees with per-node feature subsampling.

    Each tree draws its own bootstrap sample and feature subsets from a
    child stream of ``spec.seed``, so refits are bit-identical.
    """
    from .linear import _as_matrix, _names

    X, y = _as_matrix(X, y)
    n, p = X.shape
    if n < 2:
        raise ValidationError(f"need at least 2 rows, got {n}")
    h = spec.hyperparams
    n_trees, max_depth = h["n_trees"], h["max_depth"]
    min_leaf, feature_subsample = h["min_leaf"], h["feature_subsample"]
    m_feats = int(np.ceil(feature_subsample * p))
    streams = np.random.SeedSequence(spec.seed).spawn(n_trees)
    trees = []
    for t in range(n_trees):
        rng = np.random.default_rng(streams[t])
        sample = rng.integers(0, n, size=n)
        Xs, ys = X[sample], y[sample]

        def chooser():
            if m_feats >= p:
                return np.arange(p)
            return np.sort(rng.choice(p, size=m_feats, replace=False))

        trees.append(build_tree(Xs, ys, max_depth, min_leaf,
                                lambda s, c: s / c, chooser))
    model = ForestModel(spec, _names(feature_names, p), trees)
    mse = float(np.mean((model.predict(X) - y) ** 2))
    model.training_summary = {"final_loss": mse, "iterations": n_trees}
    return model


def fit_gbt(X, y, spec, feature_names=None):
    """Stagewise boosting on squared loss with ridge-regularized leaves.

    Starts from the target mean, then each round fits a depth-limited tree
    to the residuals with leaf values sum(residual) / (count + lambda) and
    steps by the learning rate. Training MSE per round is recorded and is
    non-increasing.
    """
    from .linear import _as_matrix, _names

    X, y = _as_matrix(X, y)
    n, p = X.shape
    if n < 2:
        raise ValidationError(f"need at least 2 rows, got {n}")
    h = spec.hyperparams
    lam = h["lambda"]
    lr = h["learning_rate"]
    base = float(y.mean())
    current = np.full(n, base)
    all_feats = np.arange(p)
    trees = []
    loss_curve = []
    for _ in range(h["n_rounds"]):
        residual = y - current
        nodes = build_tree(X, residual, h["max_depth"], 1,
                           lambda s, c: s / (c + lam), lambda: all_feats)
        current = current + lr * tree_predict(nodes, X)
        trees.append(nodes)
        loss_curve.append(float(np.mean((y - current) ** 2)))
    summary = {"final_loss": loss_curve[-1], "iterations": len(trees),
               "loss_curve": loss_curve}
    return GbtModel(spec, _names(feature_names, p), base, lr, trees, summary)
