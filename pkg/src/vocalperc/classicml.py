"""Classic classifier suite over engineered features.

Nine families: k-nearest neighbours, linear and RBF support vector
machines (one-vs-rest), CART decision tree, random forest, AdaBoost
(SAMME over stumps), Gaussian naive Bayes, quadratic discriminant
analysis, and a single-layer perceptron that delegates to the nn engine.

All tie-breaks are pinned to lowest-index rules so runs reproduce exactly:
tree splits prefer the lowest feature index then the lowest threshold,
votes and discriminants prefer the lowest class id, and kNN neighbours at
equal distance are taken in training order. Inputs are expected to be
standardized.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractError
from .nn.networks import NetworkConfig
from .nn.train import TrainConfig, train_network

N_CLASSES = 4

MODEL_KINDS = (
    "knn", "svm_linear", "svm_rbf", "dtree", "rforest",
    "adaboost", "gnb", "qda", "slp",
)

DEFAULT_GRIDS = {
    "knn": [{"k": k} for k in (1, 3, 5, 7, 9)],
    "svm_linear": [{"C": c} for c in (0.1, 1.0, 10.0)],
    "svm_rbf": [{"C": c, "gamma": g} for c in (0.1, 1.0, 10.0) for g in (0.01, 0.1, 1.0)],
    "dtree": [{"max_depth": d} for d in (3, 5, 10, None)],
    "rforest": [{"n_trees": n} for n in (10, 50, 100)],
    "adaboost": [{"n_stumps": n} for n in (25, 50, 100)],
    "gnb": [{}],
    "qda": [{"shrinkage": s} for s in (1e-3, 1e-2, 1e-1)],
    "slp": [{"learning_rate": lr} for lr in (1e-2, 1e-3, 1e-4)],
}

_GRID_VALUES = {
    ("knn", "k"): (1, 3, 5, 7, 9),
    ("svm_linear", "C"): (0.1, 1.0, 10.0),
    ("svm_rbf", "C"): (0.1, 1.0, 10.0),
    ("svm_rbf", "gamma"): (0.01, 0.1, 1.0),
    ("dtree", "max_depth"): (3, 5, 10, None),
    ("rforest", "n_trees"): (10, 50, 100),
    ("adaboost", "n_stumps"): (25, 50, 100),
    ("qda", "shrinkage"): (1e-3, 1e-2, 1e-1),
}


def default_grids(kind: str) -> list[dict]:
    """The declared hyperparameter grid, in stable declaration order."""
    if kind not in DEFAULT_GRIDS:
        raise ConfigError(f"unknown model kind {kind!r}")
    return [dict(g) for g in DEFAULT_GRIDS[kind]]


@dataclass(frozen=True)
class ClassicModelSpec:
    kind: str
    hyperparameters: dict = field(default_factory=dict)
    seed: int = 0
    allow_override: bool = False

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}")
        if self.allow_override or self.kind == "slp":
            return
        for name, value in self.hyperparameters.items():
            allowed = _GRID_VALUES.get((self.kind, name))
            if allowed is None:
                continue
            if value not in allowed:
                raise ConfigError(
                    f"{self.kind} {name}={value!r} is outside the declared grid "
                    f"{allowed}; set allow_override to relax"
                )

    def get(self, name, default=None):
        return self.hyperparameters.get(name, default)


# ---------------------------------------------------------------------------
# Decision tree (CART, Gini, exhaustive midpoint scan, sample weights)
# ---------------------------------------------------------------------------

def gini_impurity(labels, weights=None) -> float:
    """Gini impurity of a label multiset (optionally weighted)."""
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) == 0:
        return 0.0
    if weights is None:
        weights = np.ones(len(labels))
    totals = np.bincount(labels, weights=weights, minlength=N_CLASSES)
    total = totals.sum()
    if total <= 0:
        return 0.0
    p = totals / total
    return float(1.0 - np.sum(p * p))


class _TreeNode:
    __slots__ = ("feature", "threshold", "left", "right", "prediction", "gain")

    def __init__(self):
        self.feature = -1
        self.threshold = 0.0
        self.left = None
        self.right = None
        self.prediction = 0
        self.gain = 0.0


def _best_split(X, y, w, features, min_leaf):
    """Scan midpoint thresholds of every candidate feature.

    Returns (score, feature, threshold) with weighted child impurity as the
    score, or None when no feature separates the node. Features are visited
    in ascending order and only strict improvements win, so ties resolve to
    the lowest feature index then (via argmin on sorted values) the lowest
    threshold.
    """
    n = len(y)
    total_w = w.sum()
    best = None
    onehot = np.zeros((n, N_CLASSES))
    onehot[np.arange(n), y] = 1.0
    for feature in sorted(features):
        order = np.argsort(X[:, feature], kind="stable")
        xs = X[order, feature]
        boundaries = np.flatnonzero(xs[:-1] < xs[1:])  # split after position i
        if len(boundaries) == 0:
            continue
        counts = np.arange(1, n)
        valid = boundaries[
            (counts[boundaries] >= min_leaf) & (n - counts[boundaries] >= min_leaf)
        ]
        if len(valid) == 0:
            continue
        wc = (w[order, None] * onehot[order]).cumsum(axis=0)  # weighted class counts
        left_class = wc[valid]
        left_w = left_class.sum(axis=1)
        right_class = wc[-1] - left_class
        right_w = total_w - left_w
        gini_left = 1.0 - np.sum((left_class / left_w[:, None]) ** 2, axis=1)
        gini_right = 1.0 - np.sum((right_class / right_w[:, None]) ** 2, axis=1)
        score = (left_w * gini_left + right_w * gini_right) / total_w
        i = int(np.argmin(score))  # first minimum -> lowest threshold
        if best is None or score[i] < best[0] - 1e-15:
            threshold = 0.5 * (xs[valid[i]] + xs[valid[i] + 1])
            best = (float(score[i]), feature, float(threshold))
    return best


class DecisionTree:
    """CART classifier with Gini impurity and exhaustive threshold scan."""

    def __init__(self, max_depth=None, min_samples_leaf=1, max_features=None, seed=0):
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features  # None -> all; else per-split subset size
        self.seed = seed
        self.root = None
        self.n_features = 0
        self.importances_impurity = None
        self.importances_splitcount = None
        self._rng = None

    def fit(self, X, y, sample_weight=None):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if sample_weight is None:
            sample_weight = np.full(len(y), 1.0 / len(y))
        w = np.asarray(sample_weight, dtype=np.float64)
        self.n_features = X.shape[1]
        self.importances_impurity = np.zeros(self.n_features)
        self.importances_splitcount = np.zeros(self.n_features)
        self._rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([self.seed])))
        self._total_w = w.sum()
        self.root = self._grow(X, y, w, depth=0)
        return self

    def _leaf(self, y, w):
        node = _TreeNode()
        counts = np.bincount(y, weights=w, minlength=N_CLASSES)
        node.prediction = int(np.argmax(counts))  # ties -> lowest class id
        return node

    def _grow(self, X, y, w, depth):
        node_impurity = gini_impurity(y, w)
        if (
            node_impurity == 0.0
            or (self.max_depth is not None and depth >= self.max_depth)
            or len(y) < 2 * self.min_samples_leaf
        ):
            return self._leaf(y, w)
        if self.max_features is None or self.max_features >= self.n_features:
            features = np.arange(self.n_features)
        else:
            features = self._rng.choice(self.n_features, size=self.max_features, replace=False)
        best = _best_split(X, y, w, features, self.min_samples_leaf)
        if best is None:
            return self._leaf(y, w)
        score, feature, threshold = best
        mask = X[:, feature] <= threshold
        node = _TreeNode()
        node.feature = feature
        node.threshold = threshold
        node_w = w.sum()
        node.gain = (node_w * node_impurity - node_w * score) / self._total_w
        self.importances_impurity[feature] += node.gain
        self.importances_splitcount[feature] += 1.0
        node.left = self._grow(X[mask], y[mask], w[mask], depth + 1)
        node.right = self._grow(X[~mask], y[~mask], w[~mask], depth + 1)
        return node

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        out = np.empty(len(X), dtype=np.int64)
        for i, row in enumerate(X):
            node = self.root
            while node.left is not None:
                node = node.left if row[node.feature] <= node.threshold else node.right
            out[i] = node.prediction
        return out


class RandomForest:
    """Bootstrap CART ensemble, sqrt(d) features per split, majority vote."""

    def __init__(self, n_trees=100, max_depth=None, min_samples_leaf=1, seed=0):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.seed = seed
        self.trees: list[DecisionTree] = []
        self.importances_impurity = None
        self.importances_splitcount = None

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        n, d = X.shape
        max_features = max(1, int(np.sqrt(d)))
        self.trees = []
        imp = np.zeros(d)
        counts = np.zeros(d)
        for t in range(self.n_trees):
            rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([self.seed, t])))
            rows = rng.integers(0, n, size=n)  # bootstrap
            tree = DecisionTree(
                max_depth=self.max_depth,
                min_samples_leaf=self.min_samples_leaf,
                max_features=max_features,
                seed=int(rng.integers(0, 2**31)),
            )
            tree.fit(X[rows], y[rows])
            self.trees.append(tree)
            imp += tree.importances_impurity
            counts += tree.importances_splitcount
        self.importances_impurity = imp / self.n_trees
        self.importances_splitcount = counts
        return self

    def predict(self, X):
        votes = np.zeros((len(X), N_CLASSES), dtype=np.int64)
        for tree in self.trees:
            pred = tree.predict(X)
            votes[np.arange(len(X)), pred] += 1
        return np.argmax(votes, axis=1)  # ties -> lowest class id


# ---------------------------------------------------------------------------
# k-nearest neighbours
# ---------------------------------------------------------------------------

class KNearestNeighbors:
    def __init__(self, k=5):
        self.k = k
        self.X = None
        self.y = None

    def fit(self, X, y):
        self.X = np.asarray(X, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.int64)
        return self

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        sq_train = np.sum(self.X**2, axis=1)
        sq_query = np.sum(X**2, axis=1)
        dist = np.sqrt(
            np.maximum(sq_query[:, None] + sq_train[None, :] - 2.0 * X @ self.X.T, 0.0)
        )
        k = min(self.k, len(self.y))
        # stable sort: equal distances keep training order
        nearest = np.argsort(dist, axis=1, kind="stable")[:, :k]
        out = np.empty(len(X), dtype=np.int64)
        for i in range(len(X)):
            votes = np.bincount(self.y[nearest[i]], minlength=N_CLASSES)
            out[i] = int(np.argmax(votes))  # vote ties -> smallest class id
        return out


# ---------------------------------------------------------------------------
# Support vector machines (one-vs-rest)
# ---------------------------------------------------------------------------

class _LinearBinarySVM:
    """Primal hinge + L2, full-batch subgradient descent, 1000 epochs."""

    EPOCHS = 1000

    def __init__(self, C=1.0):
        self.C = C
        self.w = None
        self.b = 0.0

    def fit(self, X, y_signed):
        n, d = X.shape
        self.w = np.zeros(d)
        self.b = 0.0
        lr = 1e-3 * self.C
        lam = 1.0 / (self.C * n)
        for _ in range(self.EPOCHS):
            margins = y_signed * (X @ self.w + self.b)
            active = margins < 1.0
            grad_w = lam * self.w - (X[active] * y_signed[active, None]).sum(axis=0) / n
            grad_b = -y_signed[active].sum() / n
            self.w -= lr * grad_w
            self.b -= lr * grad_b
        return self

    def decision(self, X):
        return X @ self.w + self.b


class _RbfBinarySVM:
    """Simplified SMO on the dual, Gaussian kernel exp(-gamma ||x-z||^2)."""

    def __init__(self, C=1.0, gamma=0.1, tol=1e-3, max_passes=10_000, quiet_passes=10, seed=0):
        self.C = C
        self.gamma = gamma
        self.tol = tol
        self.max_passes = max_passes
        self.quiet_passes = quiet_passes
        self.seed = seed
        self.alphas = None
        self.b = 0.0
        self.X = None
        self.y = None

    def _kernel(self, A, B):
        sq_a = np.sum(A**2, axis=1)
        sq_b = np.sum(B**2, axis=1)
        return np.exp(-self.gamma * np.maximum(sq_a[:, None] + sq_b[None, :] - 2.0 * A @ B.T, 0.0))

    def fit(self, X, y_signed):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([self.seed])))
        n = len(y_signed)
        K = self._kernel(X, X)
        alphas = np.zeros(n)
        b = 0.0
        sweeps = 0
        quiet = 0
        while quiet < self.quiet_passes and sweeps < self.max_passes:
            changed = 0
            f = K @ (alphas * y_signed) + b
            for i in range(n):
                f_i = K[i] @ (alphas * y_signed) + b
                e_i = f_i - y_signed[i]
                if not (
                    (y_signed[i] * e_i < -self.tol and alphas[i] < self.C)
                    or (y_signed[i] * e_i > self.tol and alphas[i] > 0)
                ):
                    continue
                j = i
                while j == i:
                    j = int(rng.integers(0, n))
                e_j = K[j] @ (alphas * y_signed) + b - y_signed[j]
                a_i, a_j = alphas[i], alphas[j]
                if y_signed[i] == y_signed[j]:
                    low, high = max(0.0, a_i + a_j - self.C), min(self.C, a_i + a_j)
                else:
                    low, high = max(0.0, a_j - a_i), min(self.C, a_j - a_i + self.C)
                if high - low < 1e-12:
                    continue
                eta = 2.0 * K[i, j] - K[i, i] - K[j, j]
                if eta >= 0:
                    continue
                new_j = np.clip(a_j - y_signed[j] * (e_i - e_j) / eta, low, high)
                if abs(new_j - a_j) < 1e-5:
                    continue
                new_i = a_i + y_signed[i] * y_signed[j] * (a_j - new_j)
                alphas[i], alphas[j] = new_i, new_j
                b1 = b - e_i - y_signed[i] * (new_i - a_i) * K[i, i] - y_signed[j] * (new_j - a_j) * K[i, j]
                b2 = b - e_j - y_signed[i] * (new_i - a_i) * K[i, j] - y_signed[j] * (new_j - a_j) * K[j, j]
                if 0 < new_i < self.C:
                    b = b1
                elif 0 < new_j < self.C:
                    b = b2
                else:
                    b = 0.5 * (b1 + b2)
                changed += 1
            sweeps += 1
            quiet = quiet + 1 if changed == 0 else 0
        del f
        self.alphas = alphas
        self.b = b
        self.X = X
        self.y = y_signed
        return self

    def decision(self, X):
        K = self._kernel(np.asarray(X, dtype=np.float64), self.X)
        return K @ (self.alphas * self.y) + self.b

    def kkt_violation(self) -> float:
        """Largest KKT violation at the current solution (for verification)."""
        margins = self.y * self.decision(self.X)
        violation = 0.0
        for a, m in zip(self.alphas, margins):
            if a < 1e-8:
                violation = max(violation, 1.0 - m)  # need m >= 1
            elif a > self.C - 1e-8:
                violation = max(violation, m - 1.0)  # need m <= 1
            else:
                violation = max(violation, abs(m - 1.0))
        return float(violation)


class OneVsRestSVM:
    def __init__(self, kernel="linear", C=1.0, gamma=0.1, seed=0):
        self.kernel = kernel
        self.C = C
        self.gamma = gamma
        self.seed = seed
        self.machines = []

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        self.machines = []
        for cls in range(N_CLASSES):
            signed = np.where(y == cls, 1.0, -1.0)
            if self.kernel == "linear":
                machine = _LinearBinarySVM(C=self.C)
            else:
                machine = _RbfBinarySVM(C=self.C, gamma=self.gamma, seed=self.seed + cls)
            if np.all(signed == signed[0]):
                machine = _ConstantDecision(signed[0])
            else:
                machine.fit(X, signed)
            self.machines.append(machine)
        return self

    def predict(self, X):
        scores = np.stack([m.decision(np.asarray(X, dtype=np.float64)) for m in self.machines], axis=1)
        return np.argmax(scores, axis=1)


class _ConstantDecision:
    def __init__(self, value):
        self.value = float(value)

    def decision(self, X):
        return np.full(len(X), self.value)


# ---------------------------------------------------------------------------
# AdaBoost (SAMME over depth-1 trees)
# ---------------------------------------------------------------------------

class AdaBoost:
    def __init__(self, n_stumps=50, seed=0):
        self.n_stumps = n_stumps
        self.seed = seed
        self.stumps: list[DecisionTree] = []
        self.alphas: list[float] = []

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        n = len(y)
        w = np.full(n, 1.0 / n)
        self.stumps, self.alphas = [], []
        for t in range(self.n_stumps):
            stump = DecisionTree(max_depth=1, seed=self.seed + t)
            stump.fit(X, y, sample_weight=w)
            pred = stump.predict(X)
            miss = pred != y
            err = float(w[miss].sum())
            if err >= 1.0 - 1.0 / N_CLASSES:  # no better than chance: stop
                break
            if err <= 0.0:
                self.stumps.append(stump)
                self.alphas.append(np.log(1e12) + np.log(N_CLASSES - 1.0))
                break
            alpha = np.log((1.0 - err) / err) + np.log(N_CLASSES - 1.0)
            self.stumps.append(stump)
            self.alphas.append(float(alpha))
            w = w * np.exp(alpha * miss)
            w = w / w.sum()
        if not self.stumps:  # degenerate data: fall back to one stump
            stump = DecisionTree(max_depth=1, seed=self.seed)
            stump.fit(X, y, sample_weight=np.full(n, 1.0 / n))
            self.stumps.append(stump)
            self.alphas.append(1.0)
        return self

    def predict(self, X):
        scores = np.zeros((len(X), N_CLASSES))
        for stump, alpha in zip(self.stumps, self.alphas):
            pred = stump.predict(X)
            scores[np.arange(len(X)), pred] += alpha
        return np.argmax(scores, axis=1)

    def staged_train_error(self, X, y):
        """Training error after each stump (monotonicity diagnostics)."""
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        scores = np.zeros((len(X), N_CLASSES))
        errors = []
        for stump, alpha in zip(self.stumps, self.alphas):
            pred = stump.predict(X)
            scores[np.arange(len(X)), pred] += alpha
            errors.append(float(np.mean(np.argmax(scores, axis=1) != y)))
        return errors


# ---------------------------------------------------------------------------
# Gaussian naive Bayes and quadratic discriminant analysis
# ---------------------------------------------------------------------------

VAR_FLOOR = 1e-9


class GaussianNB:
    def __init__(self):
        self.theta = None
        self.var = None
        self.log_prior = None
        self.classes = None

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        self.classes = np.unique(y)
        _require_class_support(y, self.classes)
        self.theta = np.stack([X[y == c].mean(axis=0) for c in self.classes])
        self.var = np.stack([X[y == c].var(axis=0) + VAR_FLOOR for c in self.classes])
        self.log_prior = np.log(
            np.array([np.mean(y == c) for c in self.classes])
        )
        return self

    def _joint_log_likelihood(self, X):
        X = np.asarray(X, dtype=np.float64)
        jll = np.empty((len(X), len(self.classes)))
        for i in range(len(self.classes)):
            quad = ((X - self.theta[i]) ** 2) / self.var[i]
            jll[:, i] = self.log_prior[i] - 0.5 * np.sum(
                np.log(2.0 * np.pi * self.var[i]) + quad, axis=1
            )
        return jll

    def predict(self, X):
        return self.classes[np.argmax(self._joint_log_likelihood(X), axis=1)]


class QDA:
    """Per-class Gaussian with shrunk covariance.

    Shrinkage pulls each class covariance toward an isotropic target that
    preserves its average variance:
    cov_hat = (1 - lam) * cov + lam * mean(diag(cov)) * I.
    """

    def __init__(self, shrinkage=1e-2):
        self.shrinkage = shrinkage
        self.means = None
        self.precisions = None
        self.log_dets = None
        self.log_prior = None
        self.classes = None

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        self.classes = np.unique(y)
        _require_class_support(y, self.classes)
        d = X.shape[1]
        means, precisions, log_dets, priors = [], [], [], []
        for c in self.classes:
            members = X[y == c]
            mu = members.mean(axis=0)
            centered = members - mu
            cov = centered.T @ centered / len(members)
            target = np.mean(np.diag(cov))
            cov = (1.0 - self.shrinkage) * cov + self.shrinkage * target * np.eye(d)
            cov += VAR_FLOOR * np.eye(d)  # guard exactly singular fits
            sign, logdet = np.linalg.slogdet(cov)
            if sign <= 0:
                raise ContractError(f"class {c} covariance is not positive definite")
            means.append(mu)
            precisions.append(np.linalg.inv(cov))
            log_dets.append(logdet)
            priors.append(np.mean(y == c))
        self.means = np.stack(means)
        self.precisions = np.stack(precisions)
        self.log_dets = np.array(log_dets)
        self.log_prior = np.log(np.array(priors))
        return self

    def _discriminants(self, X):
        X = np.asarray(X, dtype=np.float64)
        scores = np.empty((len(X), len(self.classes)))
        for i in range(len(self.classes)):
            centered = X - self.means[i]
            quad = np.einsum("nd,de,ne->n", centered, self.precisions[i], centered)
            scores[:, i] = -0.5 * (self.log_dets[i] + quad) + self.log_prior[i]
        return scores

    def predict(self, X):
        return self.classes[np.argmax(self._discriminants(X), axis=1)]


def _require_class_support(y, classes, minimum=2):
    for c in classes:
        if np.sum(y == c) < minimum:
            raise ContractError(
                f"insufficient class support: class {c} has "
                f"{int(np.sum(y == c))} sample(s), need >= {minimum}"
            )


# ---------------------------------------------------------------------------
# Single-layer perceptron (delegates to the nn engine)
# ---------------------------------------------------------------------------

class SLPClassifier:
    def __init__(self, learning_rate=1e-3, batch_size=8, seed=0):
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.seed = seed
        self.trained = None

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        batch = max(1, min(self.batch_size, len(X) // 10))
        cfg = TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=batch,
            seed=self.seed,
            lr_divisor=2.0,
            early_stop_patience=3,
            allow_lr_off_grid=True,
        )
        net_cfg = NetworkConfig(
            kind="mlp", n_inputs=X.shape[1], hidden_sizes=(), allow_override=True
        )
        self.trained = train_network(net_cfg, X, np.asarray(y, dtype=np.int64), cfg)
        return self

    def predict(self, X):
        return self.trained.predict(np.asarray(X, dtype=np.float64))


# ---------------------------------------------------------------------------
# Unified fit/predict surface
# ---------------------------------------------------------------------------

@dataclass
class ClassicTrainedModel:
    spec: ClassicModelSpec
    model: object
    n_features: int
    classes: np.ndarray
    train_seconds: float

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ContractError(
                f"expected (n, {self.n_features}) features, got {X.shape}"
            )
        return np.asarray(self.model.predict(X), dtype=np.int64)


def fit(spec: ClassicModelSpec, X, y) -> ClassicTrainedModel:
    """Train one classic model; X is expected to be standardized."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y):
        raise ContractError("fit needs a 2-D X and parallel y")
    if len(y) and (y.min() < 0 or y.max() >= N_CLASSES):
        raise ContractError("labels must lie in 0..3")
    started = time.perf_counter()
    kind = spec.kind
    if kind == "knn":
        model = KNearestNeighbors(k=spec.get("k", 5)).fit(X, y)
    elif kind == "svm_linear":
        model = OneVsRestSVM(kernel="linear", C=spec.get("C", 1.0), seed=spec.seed).fit(X, y)
    elif kind == "svm_rbf":
        model = OneVsRestSVM(
            kernel="rbf", C=spec.get("C", 1.0), gamma=spec.get("gamma", 0.1), seed=spec.seed
        ).fit(X, y)
    elif kind == "dtree":
        model = DecisionTree(
            max_depth=spec.get("max_depth"),
            min_samples_leaf=spec.get("min_samples_leaf", 1),
            seed=spec.seed,
        ).fit(X, y)
    elif kind == "rforest":
        model = RandomForest(
            n_trees=spec.get("n_trees", 100),
            max_depth=spec.get("max_depth"),
            min_samples_leaf=spec.get("min_samples_leaf", 1),
            seed=spec.seed,
        ).fit(X, y)
    elif kind == "adaboost":
        model = AdaBoost(n_stumps=spec.get("n_stumps", 50), seed=spec.seed).fit(X, y)
    elif kind == "gnb":
        model = GaussianNB().fit(X, y)
    elif kind == "qda":
        model = QDA(shrinkage=spec.get("shrinkage", 1e-2)).fit(X, y)
    elif kind == "slp":
        model = SLPClassifier(
            learning_rate=spec.get("learning_rate", 1e-3),
            batch_size=spec.get("batch_size", 8),
            seed=spec.seed,
        ).fit(X, y)
    else:  # unreachable: spec validates kind
        raise ConfigError(f"unknown model kind {kind!r}")
    return ClassicTrainedModel(
        spec=spec,
        model=model,
        n_features=X.shape[1],
        classes=np.unique(y),
        train_seconds=time.perf_counter() - started,
    )


def predict(model: ClassicTrainedModel, X) -> np.ndarray:
    return model.predict(X)


# ---------------------------------------------------------------------------
# Serialization (same container style as the nn checkpoints, kind-tagged)
# ---------------------------------------------------------------------------

CHECKPOINT_FORMAT = 1


def _tree_to_dict(node: _TreeNode) -> dict:
    if node.left is None:
        return {"leaf": int(node.prediction)}
    return {
        "feature": int(node.feature),
        "threshold": float(node.threshold),
        "left": _tree_to_dict(node.left),
        "right": _tree_to_dict(node.right),
    }


def _tree_from_dict(d: dict) -> _TreeNode:
    node = _TreeNode()
    if "leaf" in d:
        node.prediction = int(d["leaf"])
        return node
    node.feature = int(d["feature"])
    node.threshold = float(d["threshold"])
    node.left = _tree_from_dict(d["left"])
    node.right = _tree_from_dict(d["right"])
    return node


def _payload_for(model) -> dict:
    from .nn.train import checkpoint_dict

    if isinstance(model, KNearestNeighbors):
        return {"k": model.k, "X": model.X.tolist(), "y": model.y.tolist()}
    if isinstance(model, DecisionTree):
        return {"tree": _tree_to_dict(model.root), "n_features": model.n_features}
    if isinstance(model, RandomForest):
        return {
            "trees": [_tree_to_dict(t.root) for t in model.trees],
            "n_features": model.trees[0].n_features if model.trees else 0,
        }
    if isinstance(model, OneVsRestSVM):
        machines = []
        for m in model.machines:
            if isinstance(m, _ConstantDecision):
                machines.append({"constant": m.value})
            elif isinstance(m, _LinearBinarySVM):
                machines.append({"w": m.w.tolist(), "b": m.b})
            else:
                machines.append(
                    {
                        "alphas": m.alphas.tolist(),
                        "b": m.b,
                        "X": m.X.tolist(),
                        "y": m.y.tolist(),
                        "gamma": m.gamma,
                        "C": m.C,
                    }
                )
        return {"kernel": model.kernel, "machines": machines}
    if isinstance(model, AdaBoost):
        return {
            "stumps": [_tree_to_dict(s.root) for s in model.stumps],
            "alphas": list(model.alphas),
        }
    if isinstance(model, GaussianNB):
        return {
            "theta": model.theta.tolist(),
            "var": model.var.tolist(),
            "log_prior": model.log_prior.tolist(),
            "classes": model.classes.tolist(),
        }
    if isinstance(model, QDA):
        return {
            "means": model.means.tolist(),
            "precisions": model.precisions.tolist(),
            "log_dets": model.log_dets.tolist(),
            "log_prior": model.log_prior.tolist(),
            "classes": model.classes.tolist(),
        }
    if isinstance(model, SLPClassifier):
        return {"network": checkpoint_dict(model.trained)}
    raise ConfigError(f"cannot serialize {type(model).__name__}")


def model_to_dict(trained: ClassicTrainedModel) -> dict:
    return {
        "format_version": CHECKPOINT_FORMAT,
        "kind": trained.spec.kind,
        "hyperparameters": dict(trained.spec.hyperparameters),
        "seed": trained.spec.seed,
        "n_features": trained.n_features,
        "classes": trained.classes.tolist(),
        "train_seconds": trained.train_seconds,
        "payload": _payload_for(trained.model),
    }


def model_from_dict(d: dict) -> ClassicTrainedModel:
    from .nn.train import trained_from_dict

    if d.get("format_version") != CHECKPOINT_FORMAT:
        raise ConfigError(f"unsupported checkpoint format {d.get('format_version')!r}")
    kind = d["kind"]
    payload = d["payload"]
    if kind == "knn":
        model = KNearestNeighbors(k=payload["k"])
        model.X = np.asarray(payload["X"], dtype=np.float64)
        model.y = np.asarray(payload["y"], dtype=np.int64)
    elif kind == "dtree":
        model = DecisionTree()
        model.root = _tree_from_dict(payload["tree"])
        model.n_features = payload["n_features"]
    elif kind == "rforest":
        model = RandomForest(n_trees=len(payload["trees"]))
        model.trees = []
        for tree_dict in payload["trees"]:
            tree = DecisionTree()
            tree.root = _tree_from_dict(tree_dict)
            tree.n_features = payload["n_features"]
            model.trees.append(tree)
    elif kind in ("svm_linear", "svm_rbf"):
        model = OneVsRestSVM(kernel=payload["kernel"])
        model.machines = []
        for m in payload["machines"]:
            if "constant" in m:
                model.machines.append(_ConstantDecision(m["constant"]))
            elif "w" in m:
                machine = _LinearBinarySVM()
                machine.w = np.asarray(m["w"], dtype=np.float64)
                machine.b = float(m["b"])
                model.machines.append(machine)
            else:
                machine = _RbfBinarySVM(C=m["C"], gamma=m["gamma"])
                machine.alphas = np.asarray(m["alphas"], dtype=np.float64)
                machine.b = float(m["b"])
                machine.X = np.asarray(m["X"], dtype=np.float64)
                machine.y = np.asarray(m["y"], dtype=np.float64)
                model.machines.append(machine)
    elif kind == "adaboost":
        model = AdaBoost(n_stumps=len(payload["stumps"]))
        model.stumps = []
        for tree_dict in payload["stumps"]:
            stump = DecisionTree(max_depth=1)
            stump.root = _tree_from_dict(tree_dict)
            model.stumps.append(stump)
        model.alphas = [float(a) for a in payload["alphas"]]
    elif kind == "gnb":
        model = GaussianNB()
        model.theta = np.asarray(payload["theta"], dtype=np.float64)
        model.var = np.asarray(payload["var"], dtype=np.float64)
        model.log_prior = np.asarray(payload["log_prior"], dtype=np.float64)
        model.classes = np.asarray(payload["classes"], dtype=np.int64)
    elif kind == "qda":
        model = QDA()
        model.means = np.asarray(payload["means"], dtype=np.float64)
        model.precisions = np.asarray(payload["precisions"], dtype=np.float64)
        model.log_dets = np.asarray(payload["log_dets"], dtype=np.float64)
        model.log_prior = np.asarray(payload["log_prior"], dtype=np.float64)
        model.classes = np.asarray(payload["classes"], dtype=np.int64)
    elif kind == "slp":
        model = SLPClassifier()
        model.trained = trained_from_dict(payload["network"])
    else:
        raise ConfigError(f"unknown model kind {kind!r}")
    spec = ClassicModelSpec(
        kind, d.get("hyperparameters", {}), seed=d.get("seed", 0), allow_override=True
    )
    return ClassicTrainedModel(
        spec=spec,
        model=model,
        n_features=d["n_features"],
        classes=np.asarray(d["classes"], dtype=np.int64),
        train_seconds=d.get("train_seconds", 0.0),
    )
