import numpy as np
import pytest

from greenroute.errors import RankDeficiencyError, ValidationError
from greenroute.regress import fit_elastic_net, fit_ols, ridge_regression

from oracles import ols_normal_equations, univariate_lasso


class TestOls:
    def test_two_points_exact_line(self):
        m = fit_ols(np.array([[0.0], [1.0]]), np.array([1.0, 3.0]))
        assert m.intercept == pytest.approx(1.0, abs=1e-12)
        assert m.coef[0] == pytest.approx(2.0, abs=1e-12)
        assert m.training_summary["final_loss"] == pytest.approx(0.0, abs=1e-20)

    def test_duplicated_column_rejected_with_names(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=20)
        X = np.column_stack([x, rng.normal(size=20), x])
        with pytest.raises(RankDeficiencyError) as ei:
            fit_ols(X, rng.normal(size=20), feature_names=["a", "b", "a_copy"])
        assert "a_copy" in ei.value.columns

    def test_matches_normal_equation_oracle(self):
        rng = np.random.default_rng(42)
        X = rng.normal(size=(50, 3))
        y = X @ np.array([1.5, -2.0, 0.3]) + 0.7 + rng.normal(scale=0.1, size=50)
        m = fit_ols(X, y)
        b0, coef = ols_normal_equations(X, y)
        assert m.intercept == pytest.approx(b0, abs=1e-8)
        np.testing.assert_allclose(m.coef, coef, atol=1e-8)

    def test_residual_orthogonality(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(80, 4))
        y = X @ rng.normal(size=4) + rng.normal(size=80)
        m = fit_ols(X, y)
        r = y - m.predict(X)
        cols = [np.ones(80)] + [X[:, j] for j in range(4)]
        for c in cols:
            rel = abs(r @ c) / (np.linalg.norm(r) * np.linalg.norm(c))
            assert rel < 1e-6

    def test_requires_n_greater_than_p(self):
        with pytest.raises(ValidationError, match="n > p"):
            fit_ols(np.eye(3), np.ones(3))


class TestElasticNet:
    def test_alpha_zero_reduces_to_ols(self):
        m = fit_elastic_net(np.array([[0.0], [1.0]]), np.array([1.0, 3.0]),
                            alpha=0.0, l1_ratio=0.5)
        assert m.intercept == pytest.approx(1.0, abs=1e-5)
        assert m.coef[0] == pytest.approx(2.0, abs=1e-5)

    def test_alpha_zero_matches_ols_on_well_conditioned_problem(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(60, 4))
        y = X @ np.array([1.0, -0.5, 2.0, 0.0]) + 0.3 + rng.normal(scale=0.2, size=60)
        enet = fit_elastic_net(X, y, alpha=0.0, l1_ratio=0.7)
        ols = fit_ols(X, y)
        np.testing.assert_allclose(enet.coef, ols.coef, atol=1e-5)
        assert enet.intercept == pytest.approx(ols.intercept, abs=1e-5)

    def test_huge_alpha_shrinks_everything(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(40, 3))
        y = rng.normal(size=40) + 5.0
        m = fit_elastic_net(X, y, alpha=1e9, l1_ratio=0.3)
        np.testing.assert_allclose(m.coef, 0.0, atol=1e-12)
        assert m.intercept == pytest.approx(float(y.mean()), abs=1e-9)

    def test_univariate_lasso_closed_form(self):
        rng = np.random.default_rng(11)
        x = rng.normal(size=200)
        x = (x - x.mean()) / x.std()  # standardized feature
        y = 1.8 * x + rng.normal(scale=0.5, size=200) + 3.0
        for alpha in (0.05, 0.4, 2.5):
            m = fit_elastic_net(x.reshape(-1, 1), y, alpha=alpha, l1_ratio=1.0)
            b_ref, b0_ref = univariate_lasso(x, y, alpha)
            assert m.coef[0] == pytest.approx(b_ref, abs=1e-6)
            assert m.intercept == pytest.approx(b0_ref, abs=1e-6)

    def test_invalid_hyperparameters(self):
        X, y = np.array([[1.0], [2.0]]), np.array([1.0, 2.0])
        with pytest.raises(ValidationError):
            fit_elastic_net(X, y, alpha=-1.0, l1_ratio=0.5)
        with pytest.raises(ValidationError):
            fit_elastic_net(X, y, alpha=0.1, l1_ratio=1.5)


class TestRidge:
    def test_tiny_ridge_close_to_ols(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(50, 3))
        y = X @ np.array([2.0, 0.0, -1.0]) + 4.0
        ridge = ridge_regression(X, y, 1e-6)
        ols = fit_ols(X, y)
        np.testing.assert_allclose(ridge.coef, ols.coef, atol=1e-6)


class TestPredictContract:
    def test_point_prediction(self):
        m = fit_ols(np.array([[0.0], [1.0]]), np.array([1.0, 3.0]))
        assert m.predict(np.array([[5.0]]))[0] == pytest.approx(11.0, abs=1e-9)

    def test_row_permutation_equivariance(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(30, 3))
        y = X @ np.array([1.0, 2.0, 3.0])
        m = fit_ols(X, y)
        perm = rng.permutation(30)
        np.testing.assert_array_equal(m.predict(X)[perm], m.predict(X[perm]))

    def test_batch_equals_per_row(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(3, 2))
        m = fit_ols(rng.normal(size=(20, 2)), rng.normal(size=20))
        batch = m.predict(X)
        singles = np.array([m.predict(X[i:i + 1])[0] for i in range(3)])
        np.testing.assert_array_equal(batch, singles)

    def test_dimension_mismatch_names_sizes(self):
        m = fit_ols(np.array([[0.0], [1.0]]), np.array([1.0, 3.0]))
        with pytest.raises(ValidationError, match="expected 1 features, received 2"):
            m.predict(np.ones((4, 2)))
