import numpy as np
import pytest

from greenroute.errors import ValidationError
from greenroute.regress import fit_gbt, fit_random_forest, make_spec
from greenroute.regress.tree import build_tree, tree_predict


class TestTreeBuilder:
    def test_single_obvious_split(self):
        X = np.array([[0.0], [0.0], [1.0], [1.0]])
        y = np.array([0.0, 0.0, 10.0, 10.0])
        nodes = build_tree(X, y, max_depth=1, min_leaf=1,
                           leaf_value=lambda s, c: s / c,
                           feature_chooser=lambda: np.arange(1))
        root = nodes[0]
        assert root["feature"] == 0
        assert 0.0 < root["threshold"] < 1.0
        assert nodes[root["left"]]["value"] == 0.0
        assert nodes[root["right"]]["value"] == 10.0

    def test_constant_target_stays_leaf(self):
        X = np.arange(10, dtype=float).reshape(-1, 1)
        y = np.full(10, 3.5)
        nodes = build_tree(X, y, max_depth=5, min_leaf=1,
                           leaf_value=lambda s, c: s / c,
                           feature_chooser=lambda: np.arange(1))
        assert len(nodes) == 1
        assert tree_predict(nodes, X).tolist() == [3.5] * 10

    def test_min_leaf_respected(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(40, 2))
        y = rng.normal(size=40)
        nodes = build_tree(X, y, max_depth=10, min_leaf=5,
                           leaf_value=lambda s, c: s / c,
                           feature_chooser=lambda: np.arange(2))
        for node in nodes:
            if node["feature"] < 0:
                assert node["n"] >= 5


class TestRandomForest:
    def test_depth1_two_level_split(self):
        # seed chosen so every bootstrap sees both x values
        X = np.array([[0.0], [0.0], [1.0], [1.0]])
        y = np.array([0.0, 0.0, 10.0, 10.0])
        spec = make_spec("random_forest",
                         {"n_trees": 1, "max_depth": 1, "min_leaf": 1,
                          "feature_subsample": 1.0}, seed=1)
        model = fit_random_forest(X, y, spec)
        pred = model.predict(np.array([[0.0], [1.0]]))
        assert pred[0] == 0.0 and pred[1] == 10.0

    def test_constant_target(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(30, 3))
        y = np.full(30, 7.25)
        spec = make_spec("random_forest", {"n_trees": 5}, seed=0)
        model = fit_random_forest(X, y, spec)
        assert np.allclose(model.predict(X), 7.25)

    def test_strong_training_fit(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(400, 4))
        y = 3 * X[:, 0] + X[:, 1] ** 2 + 0.05 * rng.normal(size=400)
        spec = make_spec("random_forest", seed=11)
        model = fit_random_forest(X, y, spec)
        pred = model.predict(X)
        r2 = 1 - np.sum((pred - y) ** 2) / np.sum((y - y.mean()) ** 2)
        assert r2 >= 0.95

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(60, 3))
        y = rng.normal(size=60)
        spec = make_spec("random_forest", {"n_trees": 8}, seed=21)
        a = fit_random_forest(X, y, spec)
        b = fit_random_forest(X, y, spec)
        assert a.trees == b.trees

    def test_invalid_hyperparameters(self):
        with pytest.raises(ValidationError):
            make_spec("random_forest", {"max_depth": 0})
        with pytest.raises(ValidationError):
            make_spec("random_forest", {"min_leaf": 0})


class TestGbt:
    def test_one_round_full_depth_exact_fit(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = np.array([5.0, -1.0, 4.0, 8.0])
        spec = make_spec("gbt", {"n_rounds": 1, "learning_rate": 1.0,
                                 "max_depth": 8, "lambda": 0.0})
        model = fit_gbt(X, y, spec)
        np.testing.assert_allclose(model.predict(X), y, atol=1e-12)

    def test_vanishing_step_predicts_mean(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = np.array([1.0, 2.0, 3.0, 4.0])
        spec = make_spec("gbt", {"n_rounds": 1, "learning_rate": 1e-9})
        model = fit_gbt(X, y, spec)
        np.testing.assert_allclose(model.predict(X), y.mean(), atol=1e-6)

    def test_training_mse_monotone_non_increasing(self):
        rng = np.random.default_rng(17)
        X = rng.normal(size=(300, 5))
        y = X[:, 0] * X[:, 1] + np.sin(X[:, 2]) + 0.3 * rng.normal(size=300)
        spec = make_spec("gbt", {"n_rounds": 100, "learning_rate": 0.1})
        model = fit_gbt(X, y, spec)
        curve = model.training_summary["loss_curve"]
        assert len(curve) == 100
        diffs = np.diff(curve)
        assert (diffs <= 1e-12).all()

    def test_ridge_leaf_shrinks_towards_zero(self):
        X = np.array([[0.0], [1.0]])
        y = np.array([0.0, 10.0])
        heavy = make_spec("gbt", {"n_rounds": 1, "learning_rate": 1.0,
                                  "max_depth": 1, "lambda": 1000.0})
        light = make_spec("gbt", {"n_rounds": 1, "learning_rate": 1.0,
                                  "max_depth": 1, "lambda": 0.0})
        pred_heavy = fit_gbt(X, y, heavy).predict(X)
        pred_light = fit_gbt(X, y, light).predict(X)
        assert abs(pred_heavy[1] - pred_heavy[0]) < abs(pred_light[1] - pred_light[0])

    def test_deterministic(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(80, 3))
        y = rng.normal(size=80)
        spec = make_spec("gbt", {"n_rounds": 10})
        a, b = fit_gbt(X, y, spec), fit_gbt(X, y, spec)
        assert a.trees == b.trees and a.base_score == b.base_score

    def test_prediction_row_permutation(self):
        rng = np.random.default_rng(8)
        X = rng.normal(size=(50, 3))
        y = rng.normal(size=50)
        model = fit_gbt(X, y, make_spec("gbt", {"n_rounds": 5}))
        perm = rng.permutation(50)
        np.testing.assert_array_equal(model.predict(X)[perm], model.predict(X[perm]))
