"""Feature selection: random-forest importance ranking and top-k subsets.

Importance defaults to normalized mean decrease in Gini impurity across the
forest; a split-count estimator (how many node splits use each feature) is
available behind a flag. Ties rank by ascending feature index so reruns are
stable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classicml import RandomForest
from .dsp import FEATURE_NAMES
from .errors import ConfigError, ContractError

SELECT_K_CHOICES = (1, 2, 4, 8, 16, 32)


@dataclass(frozen=True)
class FeatureRanking:
    """Normalized importances plus the descending-importance permutation."""

    importance: np.ndarray
    order: np.ndarray

    def __post_init__(self):
        importance = np.asarray(self.importance, dtype=np.float64)
        order = np.asarray(self.order, dtype=np.int64)
        if len(importance) != len(order):
            raise ContractError("importance and order must be parallel")
        if np.any(importance < 0):
            raise ContractError("importances must be nonnegative")
        if abs(importance.sum() - 1.0) > 1e-9:
            raise ContractError("importances must sum to 1")
        if sorted(order.tolist()) != list(range(len(order))):
            raise ContractError("order must be a permutation of feature indices")
        object.__setattr__(self, "importance", importance)
        object.__setattr__(self, "order", order)

    def to_csv(self, feature_names=None) -> str:
        names = list(feature_names or FEATURE_NAMES[: len(self.importance)])
        if len(names) != len(self.importance):
            names = [f"f{i}" for i in range(len(self.importance))]
        lines = ["feature,importance"]
        for idx in self.order:
            lines.append(f"{names[idx]},{self.importance[idx]:.10g}")
        return "\n".join(lines) + "\n"


def _ranked_order(importance: np.ndarray) -> np.ndarray:
    # descending importance; ties by ascending index (stable sort on -imp)
    return np.argsort(-importance, kind="stable")


def forest_importances(
    X: np.ndarray,
    y: np.ndarray,
    n_trees: int = 100,
    seed: int = 0,
    estimator: str = "impurity",
) -> FeatureRanking:
    """Rank features by a freshly trained random forest.

    estimator: "impurity" (mean decrease in Gini, the default) or
    "split_count" (number of tree splits using the feature).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if n_trees < 1:
        raise ContractError(f"n_trees must be >= 1, got {n_trees}")
    if len(np.unique(y)) < 2:
        raise ContractError("degenerate labels: need >= 2 classes")
    if estimator not in ("impurity", "split_count"):
        raise ConfigError(f"estimator must be impurity or split_count, got {estimator!r}")
    forest = RandomForest(n_trees=n_trees, seed=seed).fit(X, y)
    raw = (
        forest.importances_impurity
        if estimator == "impurity"
        else forest.importances_splitcount
    )
    total = raw.sum()
    importance = raw / total if total > 0 else np.full(len(raw), 1.0 / len(raw))
    return FeatureRanking(importance=importance, order=_ranked_order(importance))


def select_top_k(ranking: FeatureRanking, k: int, allow_any_k: bool = False) -> np.ndarray:
    """Indices of the k most important features (sorted ascending)."""
    if not allow_any_k and k not in SELECT_K_CHOICES:
        raise ConfigError(
            f"k must be one of {SELECT_K_CHOICES}, got {k}; "
            f"set allow_any_k to relax"
        )
    if k < 1 or k > len(ranking.order):
        raise ContractError(f"k={k} is outside 1..{len(ranking.order)}")
    return np.sort(ranking.order[:k])
