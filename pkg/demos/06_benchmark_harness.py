# The four evaluation axes on a small synthetic cohort: grid-search
# effectiveness, wall-clock efficiency, stability distributions, and the
# interpretability report.

import numpy as np

from vocalperc import experiment as ex
from vocalperc.audio_io import CLASS_NAMES
from vocalperc.dsp import FEATURE_NAMES, feature_matrix
from vocalperc.featsel import forest_importances

participants = tuple(
    ex.ParticipantSpec(synthetic_seed=500 + i, n_per_class=12, participant_id=f"p{i}")
    for i in range(3)
)

# ---- effectiveness: exhaustive sweep, winner by validation accuracy --------
cfg = ex.ExperimentConfig(
    participants=participants,
    model="rforest",
    grid=tuple({"n_trees": n} for n in (10, 50, 100)),
    select_k=16,
    seed=7,
)
report = ex.run_grid_search(cfg)
print(f"random forest grid search: mean test accuracy "
      f"{report.mean_test_accuracy:.1f}%")
for p in report.participants:
    print(f"  {p.participant_id}: chose {p.chosen}, val {p.val_accuracy:.1f}%, "
          f"test {p.test_accuracy:.1f}%")

# ---- efficiency: timings include preprocessing ------------------------------
rows = ex.measure_efficiency({
    "rf": cfg,
    "knn": ex.ExperimentConfig(
        participants=participants, model="knn",
        grid=tuple({"k": k} for k in (1, 3, 5)), select_k=16, seed=7,
    ),
})
print("\nmodel   train(s)  test(s)")
for row in rows:
    print(f"{row['model']:<7} {row['train_seconds']:8.3f} {row['test_seconds']:8.3f}")

# ---- stability: accuracy distributions --------------------------------------
hyper = ex.run_stability_hyper(cfg)
print(f"\nhyperparameter stability: {len(hyper.samples)} samples "
      f"(one per grid point), spread {hyper.samples.max() - hyper.samples.min():.1f}")
seeds = ex.run_stability_seed(cfg, {"n_trees": 100}, n_seeds=10)
print(f"seed stability: {len(seeds.samples)} samples, "
      f"std {seeds.samples.std():.2f}")
print(f"KDE curves integrate to "
      f"{np.trapezoid(hyper.kde_y, hyper.kde_x):.3f} and "
      f"{np.trapezoid(seeds.kde_y, seeds.kde_x):.3f}")

# ---- interpretability: selected features and confusions ---------------------
rankings, confusions = [], []
for spec in participants:
    train, test, pid = spec.resolve()
    X = feature_matrix(train.clips)
    rankings.append(forest_importances(X, train.labels, n_trees=50, seed=7))
    prep = ex.prepare_participant(train, test, cfg, pid)
    result = ex.train_candidate(prep, cfg, {"n_trees": 100}, 7)
    confusions.append(ex.confusion_matrix(prep.y_test, result.predict_test_on(prep)))

interp = ex.interpretability_report(rankings, 8, confusions)
print("\nfeatures selected most often across participants:")
order = np.argsort(-interp.feature_tally, kind="stable")
for idx in order[:6]:
    print(f"  {FEATURE_NAMES[idx]:>16}: {interp.feature_tally[idx]} of "
          f"{len(participants)} participants")
if interp.most_confused_pair is None:
    print("no off-diagonal confusion on this cohort")
else:
    i, j = interp.most_confused_pair
    print(f"most confused pair: {CLASS_NAMES[i]} / {CLASS_NAMES[j]}")
print("aggregate confusion:")
print(interp.aggregate_confusion)
