"""Acceptance suite: one test per criterion, each printing a PASS line.

Criterion 9 (accuracy against the real vocal-percussion corpus) only runs
when VOCALPERC_AVP_DIR points at the participant directories; it is skipped
otherwise, as the corpus is user-supplied.
"""

import json
import os
import time

import numpy as np
import pytest

from vocalperc import classicml as cm
from vocalperc import dsp
from vocalperc import experiment as ex
from vocalperc.audio_io import CLIP_SAMPLES, SAMPLE_RATE, AudioClip, generate_synthetic
from vocalperc.augment import (
    default_waveform_plan,
    draw_mask_params,
    expand_dataset,
    pitch_shift,
)
from vocalperc.cli import run_command
from vocalperc.featsel import forest_importances
from vocalperc.nn import (
    NetworkConfig,
    TrainConfig,
    gradient_check,
    mine_triplets,
    train_network,
    triplet_loss,
)

from test_experiment import ambiguous_dataset


def announce(number, name, passed=True):
    print(f"ACCEPTANCE {number:>2} {name}: {'PASS' if passed else 'FAIL'}")


# ---------------------------------------------------------------------------
# 1. Gradient integrity
# ---------------------------------------------------------------------------

def test_criterion_1_gradient_integrity():
    started = time.perf_counter()
    results = gradient_check(n_trials=100, seed=0, tolerance=1e-4)
    elapsed = time.perf_counter() - started
    assert elapsed < 60.0, f"gradient check took {elapsed:.1f}s"
    required = {
        "dense/input", "dense/w", "dense/b",
        "conv2d/input", "conv2d/w", "conv2d/b",
        "maxpool/input",
        "batchnorm_train/input", "batchnorm_train/gamma", "batchnorm_train/beta",
        "cross_entropy/logits", "triplet/embeddings",
    }
    assert required <= {r.name for r in results}
    for r in results:
        assert r.passed, f"{r.name} rel error {r.max_rel_error:.2e} >= 1e-4"
    announce(1, "gradient integrity")


# ---------------------------------------------------------------------------
# 2. DSP oracles
# ---------------------------------------------------------------------------

def test_criterion_2_dsp_oracles():
    # FFT vs naive O(N^2) DFT at every size <= 128
    rng = np.random.default_rng(1)
    for size in range(2, 129):
        x = rng.standard_normal(size)
        windowed = x * np.hanning(size)
        n_fft = dsp.next_pow2(size)
        mine = dsp.stft_magnitude(x, size, size, 1)[0]
        padded = np.zeros(n_fft)
        padded[:size] = windowed
        n = np.arange(n_fft)
        bins = np.arange(n_fft // 2 + 1)
        oracle = np.abs(np.exp(-2j * np.pi * bins[:, None] * n[None, :] / n_fft) @ padded)
        scale = np.max(oracle) + 1e-30
        assert np.max(np.abs(mine - oracle)) / scale < 1e-9, f"size {size}"

    # square mel spectrograms
    clip = AudioClip(0.5 * np.sin(2 * np.pi * 900 * np.arange(CLIP_SAMPLES) / SAMPLE_RATE))
    for n_bands in (8, 12, 16):
        assert dsp.mel_spectrogram(clip, n_bands).values.shape == (n_bands, n_bands)

    # engineered vector length
    assert len(dsp.engineered_features(clip)) == 100

    # pitch shift peak: 440 Hz * 2^(1/12) = 466.16 Hz within one FFT bin
    t = np.arange(CLIP_SAMPLES) / SAMPLE_RATE
    shifted = pitch_shift(AudioClip(0.5 * np.sin(2 * np.pi * 440.0 * t)), 1.0)
    n_fft = 32768
    spectrum = np.abs(np.fft.rfft(shifted.samples, n=n_fft))
    peak = np.fft.rfftfreq(n_fft, 1.0 / SAMPLE_RATE)[np.argmax(spectrum)]
    bin_width = SAMPLE_RATE / n_fft
    assert abs(peak - 440.0 * 2 ** (1 / 12)) <= bin_width
    announce(2, "dsp oracles")


# ---------------------------------------------------------------------------
# 3. Augmentation ranges
# ---------------------------------------------------------------------------

def test_criterion_3_augmentation_ranges():
    for n_bands in (8, 12, 16):
        count_hi = (2 * n_bands) // 8
        width_hi = -(-n_bands // 3)  # ceil
        counts, widths = set(), set()
        rng = np.random.default_rng(n_bands)
        for _ in range(10_000):
            params = draw_mask_params(n_bands, rng)
            for axis in (params.freq_masks, params.time_masks):
                counts.add(len(axis))
                for width, start in axis:
                    widths.add(width)
                    assert 1 <= width <= width_hi
                    assert 0 <= start <= n_bands - width
        assert counts == set(range(1, count_hi + 1)), f"n_bands {n_bands}"
        assert widths == set(range(1, width_hi + 1)), f"n_bands {n_bands}"

    train, _ = generate_synthetic(7, 25)
    assert len(train) == 100
    assert len(expand_dataset(train, default_waveform_plan(0))) == 700
    announce(3, "augmentation ranges")


# ---------------------------------------------------------------------------
# 4. Triplet-loss unit suite
# ---------------------------------------------------------------------------

def test_criterion_4_triplet_unit_suite():
    a = np.array([1.0, 2.0])
    n = np.array([4.0, 6.0])
    assert triplet_loss(a, a, n, margin=0.0) == 0.0
    assert triplet_loss(
        np.array([0.0]), np.array([5.0]), np.array([2.0]), margin=0.0
    ) == pytest.approx(3.0)
    assert triplet_loss(
        np.array([0.0, 0.0]), np.array([1.0, 0.0]), np.array([0.0, 1.0]), margin=1.0
    ) == pytest.approx(1.0)

    # hardest negative = nearest negative on a constructed fixture
    emb = np.array([[0.0], [1.0], [10.0], [2.0]])
    labels = np.array([0, 0, 1, 1])
    triplets = mine_triplets(emb, labels, "hardest_negative", np.random.default_rng(0))
    chosen = {(i, j): k for i, j, k in triplets}
    assert chosen[(0, 1)] == 3
    assert chosen[(1, 0)] == 3
    announce(4, "triplet loss unit suite")


# ---------------------------------------------------------------------------
# 5. Classic-ML oracle equivalence
# ---------------------------------------------------------------------------

def test_criterion_5_classic_ml_oracles():
    rng = np.random.default_rng(2)
    # kNN vs brute force, 100 random instances with <= 200 points
    for trial in range(100):
        n = int(rng.integers(5, 200))
        d = int(rng.integers(1, 6))
        k = int(rng.choice([1, 3, 5]))
        X = rng.normal(size=(n, d))
        y = rng.integers(0, 4, size=n)
        Q = rng.normal(size=(5, d))
        model = cm.KNearestNeighbors(k=k).fit(X, y)
        mine = model.predict(Q)
        for qi, q in enumerate(Q):
            dist = np.sqrt(((X - q) ** 2).sum(axis=1))
            order = np.argsort(dist, kind="stable")[: min(k, n)]
            votes = np.bincount(y[order], minlength=4)
            assert mine[qi] == int(np.argmax(votes)), f"trial {trial}"

    # decision tree vs exhaustive-split oracle on 1-D fixtures
    for trial in range(20):
        X = rng.normal(size=(25, 1))
        y = (X[:, 0] > rng.normal(0, 0.5)).astype(int)
        if len(np.unique(y)) < 2:
            continue
        xs = np.unique(X[:, 0])
        best_score, best_threshold = np.inf, None
        for threshold in (xs[:-1] + xs[1:]) / 2:
            left, right = y[X[:, 0] <= threshold], y[X[:, 0] > threshold]
            score = (
                len(left) * cm.gini_impurity(left) + len(right) * cm.gini_impurity(right)
            ) / len(y)
            if score < best_score - 1e-15:
                best_score, best_threshold = score, threshold
        tree = cm.DecisionTree(max_depth=1).fit(X, y)
        assert tree.root.threshold == pytest.approx(best_threshold)

    # Gini fixtures
    assert cm.gini_impurity([1, 1, 1, 1]) == 0.0
    assert cm.gini_impurity([0, 0, 1, 1]) == 0.5
    announce(5, "classic-ML oracle equivalence")


# ---------------------------------------------------------------------------
# 6. Synthetic end-to-end (the heavyweight criterion)
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def synth8(tmp_path_factory):
    data = tmp_path_factory.mktemp("synth8")
    rc = run_command(
        ["gen-synth", "--seed", "7", "--out", str(data), "--participants", "8",
         "--per-class", "25"]
    )
    assert rc == 0
    return data


def _family_config(data, out, model):
    """Desk-scale grids mirroring the study: conv nets on augmented data,
    feature models on the original sets."""
    if model == "cnn":
        return {
            "grid": [
                {"conv_filters": [8, 16], "n_pools": 2, "learning_rate": 1e-3},
                {"conv_filters": [8, 16], "n_pools": 2, "learning_rate": 1e-2},
            ],
            "n_bands": 12,
            "augment": "waveform",
        }
    if model == "tcnn":
        return {
            "grid": [
                {"conv_filters": [8, 16], "n_pools": 2, "embedding": 16,
                 "strategy": "hardest_negative", "learning_rate": 1e-3},
            ],
            "n_bands": 8,
            "augment": "waveform",
        }
    if model == "mlp":
        return {
            "grid": [
                {"hidden": "half", "learning_rate": 1e-3},
                {"hidden": "quarter", "learning_rate": 1e-3},
            ],
            "select_k": 32,
        }
    return {"grid": [{"n_trees": n} for n in (10, 50, 100)], "select_k": 32}


def test_criterion_6_synthetic_end_to_end(synth8, tmp_path):
    started = time.perf_counter()
    thresholds = {"cnn": 95.0, "tcnn": 90.0, "mlp": 90.0, "rf": 90.0}
    reports = {}
    for model in ("cnn", "tcnn", "mlp", "rf"):
        config_path = tmp_path / f"{model}.json"
        config_path.write_text(json.dumps(_family_config(synth8, tmp_path, model)))
        out = tmp_path / model
        rc = run_command(
            ["grid-search", "--config", str(config_path), "--model", model,
             "--data", str(synth8), "--out", str(out), "--seed", "7"]
        )
        assert rc == 0
        reports[model] = json.loads((out / "report.json").read_text())
    elapsed = time.perf_counter() - started
    assert elapsed < 30 * 60, f"end-to-end took {elapsed:.0f}s"

    for model, minimum in thresholds.items():
        accuracy = reports[model]["mean_test_accuracy"]
        assert accuracy >= minimum, f"{model}: {accuracy:.1f}% < {minimum}%"

    cnn_train = reports["cnn"]["mean_train_seconds"]
    rf_train = reports["rf"]["mean_train_seconds"]
    assert cnn_train > rf_train, f"CNN {cnn_train}s !> RF {rf_train}s"
    announce(6, f"synthetic end-to-end ({elapsed:.0f}s, "
                f"CNN {reports['cnn']['mean_test_accuracy']:.1f}%, "
                f"TCNN {reports['tcnn']['mean_test_accuracy']:.1f}%, "
                f"MLP {reports['mlp']['mean_test_accuracy']:.1f}%, "
                f"RF {reports['rf']['mean_test_accuracy']:.1f}%)")


# ---------------------------------------------------------------------------
# 7. Overfit sanity
# ---------------------------------------------------------------------------

def test_criterion_7_cnn_overfit_sanity():
    train, _ = generate_synthetic(99, 10)  # 40 clips
    X = dsp.spectrogram_stack(train.clips, 12)
    # early stopping exists to prevent overfitting, so the overfit probe
    # disables it and just relies on the 200-epoch cap
    cfg = TrainConfig(
        learning_rate=1e-3, batch_size=4, seed=1, lr_divisor=3.0,
        early_stop_patience=200, max_epochs=200,
    )
    net_cfg = NetworkConfig(kind="cnn", n_bands=12, conv_filters=(8, 16), n_pools=2)
    trained = train_network(net_cfg, X, train.labels, cfg)
    accuracy = float(np.mean(trained.predict(X) == train.labels))
    assert len(trained.history) <= 200
    assert accuracy == 1.0, f"train accuracy {accuracy:.3f}"
    announce(7, "overfit sanity")


# ---------------------------------------------------------------------------
# 8. Stability harness
# ---------------------------------------------------------------------------

def test_criterion_8_stability_harness(tmp_path):
    data = tmp_path / "data"
    rc = run_command(
        ["gen-synth", "--seed", "11", "--out", str(data), "--participants", "1",
         "--per-class", "10"]
    )
    assert rc == 0
    config_path = tmp_path / "stab.json"
    config_path.write_text(json.dumps({
        "grid": [{"k": k} for k in (1, 3, 5)],
        "select_k": 8,
    }))
    outputs = []
    for run in ("a", "b"):
        out = tmp_path / run
        rc = run_command(
            ["stability", "--config", str(config_path), "--model", "knn",
             "--data", str(data), "--out", str(out), "--seed", "5",
             "--deterministic"]
        )
        assert rc == 0
        outputs.append({
            name: (out / name).read_text()
            for name in ("stability_hyper.csv", "stability_seed.csv",
                         "stability_hyper_kde.csv", "stability_seed_kde.csv")
        })

    hyper_lines = outputs[0]["stability_hyper.csv"].strip().splitlines()
    assert len(hyper_lines) == 1 + 3  # one sample per grid point
    seed_lines = outputs[0]["stability_seed.csv"].strip().splitlines()
    assert len(seed_lines) == 1 + 30  # default 30 seeds

    for name in ("stability_hyper_kde.csv", "stability_seed_kde.csv"):
        rows = [
            line.split(",") for line in outputs[0][name].strip().splitlines()[1:]
        ]
        xs = np.array([float(r[0]) for r in rows])
        ys = np.array([float(r[1]) for r in rows])
        assert abs(np.trapezoid(ys, xs) - 1.0) <= 0.01

    assert outputs[0] == outputs[1], "deterministic reruns differ"
    announce(8, "stability harness")


# ---------------------------------------------------------------------------
# 9. Optional: the real corpus, gated on its presence
# ---------------------------------------------------------------------------

AVP_DIR = os.environ.get("VOCALPERC_AVP_DIR", "")


@pytest.mark.skipif(not AVP_DIR, reason="set VOCALPERC_AVP_DIR to enable")
def test_criterion_9_avp_accuracies():
    targets = {"cnn": 82.2, "tcnn": 80.9, "mlp": 76.9, "rf": 78.3}
    for model, target in targets.items():
        spec = _family_config(AVP_DIR, None, model)
        cfg = ex.ExperimentConfig(
            participants=tuple(
                ex.ParticipantSpec(path=str(p))
                for p in sorted(os.scandir(AVP_DIR), key=lambda e: e.name)
                if p.is_dir()
            ),
            model={"rf": "rforest"}.get(model, model),
            grid=tuple(spec["grid"]),
            n_bands=spec.get("n_bands", 12),
            select_k=spec.get("select_k"),
            augment=spec.get("augment", "none"),
            seed=7,
        )
        report = ex.run_grid_search(cfg)
        assert abs(report.mean_test_accuracy - target) <= 6.0, (
            f"{model}: {report.mean_test_accuracy:.1f}% vs {target}+-6"
        )
    announce(9, "corpus accuracies")


# ---------------------------------------------------------------------------
# 10. Interpretability replication on constructed data
# ---------------------------------------------------------------------------

def test_criterion_10_interpretability_replication():
    confusions = []
    rankings = []
    for seed in range(3):
        train = ambiguous_dataset(seed, 15, "train")
        test = ambiguous_dataset(seed, 15, "test")
        X_train = dsp.feature_matrix(train.clips)
        X_test = dsp.feature_matrix(test.clips)
        standardizer = dsp.fit_standardizer(X_train)
        model = cm.fit(
            cm.ClassicModelSpec("knn", {"k": 5}), standardizer(X_train), train.labels
        )
        pred = model.predict(standardizer(X_test))
        confusions.append(ex.confusion_matrix(test.labels, pred))
        rankings.append(forest_importances(X_train, train.labels, n_trees=50, seed=seed))
    report = ex.interpretability_report(rankings, 8, confusions)
    aggregated = report.aggregate_confusion
    off = aggregated.astype(float).copy()
    np.fill_diagonal(off, -1.0)
    flat = int(np.argmax(off))
    assert {flat // 4, flat % 4} == {2, 3}, f"confusion:\n{aggregated}"
    assert set(report.most_confused_pair) == {2, 3}
    announce(10, "interpretability replication")
