import json

import numpy as np
import pytest

from greenroute import evalx
from greenroute.errors import UnsupportedFamilyError, ValidationError
from greenroute.regress import fit_gbt, fit_ols, fit_random_forest, make_spec


class TestSplitThreeWay:
    def test_sizes_largest_remainder(self):
        plan = evalx.split_three_way(10, (0.7, 0.15, 0.15), seed=0)
        assert (len(plan.train_indices), len(plan.valid_indices),
                len(plan.test_indices)) == (7, 2, 1)

    def test_disjoint_union(self):
        plan = evalx.split_three_way(57, seed=3)
        all_idx = sorted(plan.train_indices + plan.valid_indices + plan.test_indices)
        assert all_idx == list(range(57))

    def test_same_seed_identical(self):
        a = evalx.split_three_way(40, seed=5)
        b = evalx.split_three_way(40, seed=5)
        assert a == b

    def test_degenerate_fractions_rejected(self):
        with pytest.raises(ValidationError):
            evalx.split_three_way(10, (1.0, 0.0, 0.0))

    def test_sizes_within_one_of_exact(self):
        for n in (10, 23, 101):
            plan = evalx.split_three_way(n, seed=1)
            for idx, frac in zip((plan.train_indices, plan.valid_indices,
                                  plan.test_indices), plan.fractions):
                assert abs(len(idx) - frac * n) <= 1
        plan = evalx.split_three_way(3, (1 / 3, 1 / 3, 1 / 3), seed=1)
        assert [len(plan.train_indices), len(plan.valid_indices),
                len(plan.test_indices)] == [1, 1, 1]


class TestKfold:
    def test_n6_k3(self):
        folds = evalx.kfold_indices(6, 3, seed=0)
        assert [len(v) for _, v in folds] == [2, 2, 2]
        union = sorted(np.concatenate([v for _, v in folds]).tolist())
        assert union == list(range(6))

    def test_n7_k3_sizes(self):
        folds = evalx.kfold_indices(7, 3, seed=0)
        assert sorted(len(v) for _, v in folds) == [2, 2, 3]

    def test_leave_one_out(self):
        folds = evalx.kfold_indices(5, 5, seed=2)
        assert all(len(v) == 1 for _, v in folds)

    def test_train_valid_disjoint(self):
        for train, valid in evalx.kfold_indices(20, 4, seed=1):
            assert not set(train.tolist()) & set(valid.tolist())
            assert len(train) + len(valid) == 20

    def test_k_out_of_range(self):
        with pytest.raises(ValidationError):
            evalx.kfold_indices(5, 1)
        with pytest.raises(ValidationError):
            evalx.kfold_indices(5, 6)


class TestMetrics:
    def test_perfect_prediction(self):
        assert evalx.compute_metrics([1, 2, 3], [1, 2, 3]) == (0.0, 0.0, 1.0)

    def test_hand_computed_case(self):
        mae, mse, r2 = evalx.compute_metrics([1, 2, 3, 4], [2, 2, 4, 4])
        assert mae == pytest.approx(0.5)
        assert mse == pytest.approx(0.5)
        assert r2 == pytest.approx(0.6)

    def test_zero_variance_target(self):
        with pytest.raises(ValidationError, match="zero-variance"):
            evalx.compute_metrics([5, 5, 5], [1, 2, 3])
        mae, mse, r2 = evalx.compute_metrics_partial([5, 5, 5], [5, 5, 6])
        assert r2 is None and mae == pytest.approx(1 / 3)

    def test_negative_r2_not_clamped(self):
        _, _, r2 = evalx.compute_metrics([1.0, 2.0, 3.0], [10.0, 10.0, 10.0])
        assert r2 < 0

    def test_mse_at_least_mae_squared(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            y = rng.normal(size=30)
            p = y + rng.normal(scale=rng.uniform(0.01, 5), size=30)
            mae, mse, _ = evalx.compute_metrics(y, p)
            assert mse >= mae ** 2 - 1e-12

    def test_length_checks(self):
        with pytest.raises(ValidationError):
            evalx.compute_metrics([1.0], [1.0])
        with pytest.raises(ValidationError):
            evalx.compute_metrics([1, 2], [1, 2, 3])


class TestFeatureImportance:
    def test_dominant_feature_ranks_first(self):
        rng = np.random.default_rng(4)
        A = rng.uniform(0, 1, size=300)
        B = rng.uniform(0, 1, size=300)
        y = 5.0 * A + 0.01 * rng.normal(size=300)
        X = np.column_stack([A, B])
        model = fit_gbt(X, y, make_spec("gbt", {"n_rounds": 40, "learning_rate": 0.3}),
                        feature_names=["A", "B"])
        ranking = evalx.feature_importance(model)
        assert ranking[0][0] == "A"
        assert ranking[0][1] >= 0.95

    def test_importances_sum_to_one(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(200, 4))
        y = X[:, 0] + 2 * X[:, 2] + 0.1 * rng.normal(size=200)
        model = fit_random_forest(X, y, make_spec("random_forest", {"n_trees": 10}, seed=0))
        ranking = evalx.feature_importance(model)
        assert sum(v for _, v in ranking) == pytest.approx(1.0, abs=1e-9)
        assert [v for _, v in ranking] == sorted((v for _, v in ranking), reverse=True)

    def test_non_tree_family_rejected(self):
        model = fit_ols(np.arange(10, dtype=float).reshape(-1, 1), np.arange(10, dtype=float))
        with pytest.raises(UnsupportedFamilyError):
            evalx.feature_importance(model)


class TestComparisonReport:
    def fixture(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(300, 3))
        y = X @ np.array([2.0, -1.0, 0.5]) + 0.2 * rng.normal(size=300)
        X_test = rng.normal(size=(80, 3))
        y_test = X_test @ np.array([2.0, -1.0, 0.5]) + 0.2 * rng.normal(size=80)
        return X, y, X_test, y_test

    def test_single_model_is_best(self):
        X, y, X_test, y_test = self.fixture()
        model = fit_ols(X, y)
        report = evalx.comparison_report("emissions", [("ols", model)], X_test, y_test)
        assert report.best_model == "ols"

    def test_better_model_wins(self):
        X, y, X_test, y_test = self.fixture()
        good = fit_ols(X, y)
        bad = fit_gbt(X, y, make_spec("gbt", {"n_rounds": 1, "learning_rate": 0.01}))
        report = evalx.comparison_report("emissions", [("gbt_stub", bad), ("ols", good)],
                                         X_test, y_test)
        assert report.best_model == "ols"
        by_name = {r[0]: r for r in report.rows}
        assert by_name["ols"][1] < by_name["gbt_stub"][1]

    def test_json_field_names(self):
        X, y, X_test, y_test = self.fixture()
        report = evalx.comparison_report("transit", [("ols", fit_ols(X, y))],
                                         X_test, y_test, seed=7, corpus_hash="abc")
        payload = json.loads(report.to_json())
        assert set(payload) == {"task", "rows", "best_model", "seed", "corpus_hash"}
        assert set(payload["rows"][0]) == {"model", "mae", "mse", "r2"}
        assert payload["seed"] == 7 and payload["corpus_hash"] == "abc"

    def test_pipeline_hash_mismatch_rejected(self):
        X, y, X_test, y_test = self.fixture()
        a, b = fit_ols(X, y), fit_ols(X, y)
        a.pipeline_hash, b.pipeline_hash = "h1", "h2"
        with pytest.raises(ValidationError, match="pipeline"):
            evalx.comparison_report("emissions", [("a", a), ("b", b)], X_test, y_test)

    def test_plot_csv_written(self, tmp_path):
        X, y, X_test, y_test = self.fixture()
        out = tmp_path / "cmp.csv"
        evalx.comparison_report("demand", [("ols", fit_ols(X, y))], X_test, y_test,
                                csv_path=out)
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "model,mae,r2"
        assert lines[1].startswith("ols,")
