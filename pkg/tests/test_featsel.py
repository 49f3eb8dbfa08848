"""Feature-ranking oracles and top-k selection rules."""

import numpy as np
import pytest

from vocalperc.errors import ConfigError, ContractError
from vocalperc.featsel import (
    FeatureRanking,
    forest_importances,
    select_top_k,
)


def informative_dataset(seed=5, n=400, d=4):
    """Feature 0 = label + tiny noise; every other column pure noise."""
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, size=n)
    X = rng.normal(size=(n, d))
    X[:, 0] = y + rng.normal(0, 0.01, size=n)
    return X, y


def single_feature_accuracy(x, y):
    """Brute-force oracle: best threshold classifier on one feature."""
    xs = np.unique(x)
    best = 0.0
    for threshold in (xs[:-1] + xs[1:]) / 2:
        for polarity in (0, 1):
            pred = (x > threshold).astype(int) ^ polarity
            best = max(best, np.mean(pred == y))
    return best


class TestForestImportances:
    def test_informative_feature_dominates(self):
        X, y = informative_dataset()
        # oracle confirms the construction: only feature 0 predicts labels
        assert single_feature_accuracy(X[:, 0], y) > 0.95
        for j in range(1, X.shape[1]):
            assert single_feature_accuracy(X[:, j], y) < 0.7
        ranking = forest_importances(X, y, n_trees=100, seed=3)
        assert ranking.importance[0] > 0.5
        assert ranking.order[0] == 0

    def test_duplicate_columns_share_importance(self):
        X, y = informative_dataset()
        single = forest_importances(X, y, n_trees=100, seed=3)
        X_dup = np.concatenate([X, X[:, :1]], axis=1)
        dup = forest_importances(X_dup, y, n_trees=100, seed=3)
        pair = dup.importance[0] + dup.importance[X.shape[1]]
        assert abs(pair - single.importance[0]) < 0.1

    def test_importances_sum_to_one(self):
        X, y = informative_dataset(n=100)
        ranking = forest_importances(X, y, n_trees=20, seed=0)
        assert ranking.importance.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.all(ranking.importance >= 0)

    def test_deterministic_given_seed(self):
        X, y = informative_dataset(n=120)
        a = forest_importances(X, y, n_trees=30, seed=9)
        b = forest_importances(X, y, n_trees=30, seed=9)
        assert np.array_equal(a.importance, b.importance)
        assert np.array_equal(a.order, b.order)

    def test_split_count_estimator(self):
        X, y = informative_dataset(n=200)
        ranking = forest_importances(X, y, n_trees=30, seed=1, estimator="split_count")
        assert ranking.importance.sum() == pytest.approx(1.0, abs=1e-9)
        assert ranking.order[0] == 0  # still the informative feature

    def test_degenerate_labels_rejected(self):
        X = np.random.default_rng(0).normal(size=(20, 3))
        with pytest.raises(ContractError, match="degenerate labels"):
            forest_importances(X, np.zeros(20, dtype=int), n_trees=5, seed=0)

    def test_bad_estimator_name(self):
        X, y = informative_dataset(n=60)
        with pytest.raises(ConfigError):
            forest_importances(X, y, n_trees=5, seed=0, estimator="permutation")


class TestSelectTopK:
    def ranking(self, importance):
        importance = np.asarray(importance, dtype=np.float64)
        order = np.argsort(-importance, kind="stable")
        return FeatureRanking(importance=importance, order=order)

    def test_first_k_of_order(self):
        r = self.ranking([0.5, 0.3, 0.1, 0.05, 0.05])
        assert set(select_top_k(r, 2)) == {0, 1}

    def test_k_equals_d_override(self):
        r = self.ranking([0.25, 0.25, 0.25, 0.25])
        selected = select_top_k(r, 4)
        assert set(selected) == {0, 1, 2, 3}

    def test_tie_at_kth_place_lower_index_wins(self):
        r = self.ranking([0.4, 0.2, 0.2, 0.2])
        assert set(select_top_k(r, 2)) == {0, 1}

    def test_nesting_property(self):
        rng = np.random.default_rng(13)
        importance = rng.dirichlet(np.ones(100))
        order = np.argsort(-importance, kind="stable")
        r = FeatureRanking(importance=importance, order=order)
        previous = set()
        for k in (1, 2, 4, 8, 16, 32):
            current = set(select_top_k(r, k))
            assert previous <= current
            previous = current

    def test_k_outside_allowed_set(self):
        r = self.ranking(np.full(100, 0.01))
        with pytest.raises(ConfigError):
            select_top_k(r, 3)
        assert len(select_top_k(r, 3, allow_any_k=True)) == 3

    def test_ranking_validation(self):
        with pytest.raises(ContractError):
            FeatureRanking(importance=np.array([0.5, 0.6]), order=np.array([0, 1]))
        with pytest.raises(ContractError):
            FeatureRanking(importance=np.array([0.5, 0.5]), order=np.array([0, 0]))

    def test_csv_export(self):
        r = self.ranking(np.concatenate([[0.9], np.full(99, 0.1 / 99)]))
        text = r.to_csv()
        lines = text.splitlines()
        assert lines[0] == "feature,importance"
        assert lines[1].startswith("mfcc1_mean,0.9")
