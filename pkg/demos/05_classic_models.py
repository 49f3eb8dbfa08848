# The classic classifier suite over engineered features, with random-forest
# feature selection in front.

import numpy as np

from vocalperc import generate_synthetic
from vocalperc import classicml as cm
from vocalperc.dsp import FEATURE_NAMES, feature_matrix, fit_standardizer
from vocalperc.featsel import forest_importances, select_top_k

train, test = generate_synthetic(seed=13, n_per_class=25)
X_train = feature_matrix(train.clips)
X_test = feature_matrix(test.clips)

# rank the 100 features with a 100-tree forest, keep the top 16
ranking = forest_importances(X_train, train.labels, n_trees=100, seed=0)
print("top-8 features by impurity decrease:")
for idx in ranking.order[:8]:
    print(f"  {FEATURE_NAMES[idx]:>16}  {ranking.importance[idx]:.4f}")

selected = select_top_k(ranking, 16)
X_train_sel = X_train[:, selected]
X_test_sel = X_test[:, selected]

standardizer = fit_standardizer(X_train_sel)
Z_train = standardizer(X_train_sel)
Z_test = standardizer(X_test_sel)

print(f"\n{'model':<12} {'hyperparameters':<28} {'test acc':>8} {'fit s':>7}")
for kind in cm.MODEL_KINDS:
    grid = cm.default_grids(kind)
    candidate = grid[len(grid) // 2]
    model = cm.fit(cm.ClassicModelSpec(kind, candidate, seed=1), Z_train, train.labels)
    accuracy = 100.0 * np.mean(model.predict(Z_test) == test.labels)
    print(f"{kind:<12} {str(candidate):<28} {accuracy:7.1f}% {model.train_seconds:6.2f}s")
