"""Benchmarking harness: grid search, timing, stability, interpretability.

Per participant the harness sweeps a declared hyperparameter grid, scores
every candidate on the internal validation split (never on test), evaluates
only the winner on the held-out improvisation split, and reports mean test
accuracy across participants. Three companion studies reuse the machinery:

* efficiency: wall-clock training time including every preprocessing stage
  (augmentation, feature extraction, selection) and test inference time;
* stability: test-accuracy distributions across the whole grid and across
  re-trainings of the winner under different seeds, each summarized by a
  Gaussian KDE (Silverman bandwidth, reflected at the 0/100 boundaries);
* interpretability: which features the selector keeps, and which class
  pair the aggregated confusion matrix mixes up most.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import classicml
from .audio_io import CLASS_NAMES, UtteranceDataset, generate_synthetic, load_participant
from .augment import (
    AugmentationPlan,
    SpectrogramDataset,
    default_spectrogram_plan,
    default_waveform_plan,
    expand_dataset,
    plan_from_dict,
)
from .dsp import FEATURE_NAMES, feature_matrix, fit_standardizer, spectrogram_stack
from .errors import ConfigError, ContractError, VocalPercError
from .featsel import FeatureRanking, forest_importances, select_top_k
from .nn import (
    NetworkConfig,
    TrainConfig,
    fit_embedding_head,
    mlp_hidden_choices,
    stratified_split,
    train_network,
)

NN_MODELS = ("mlp", "cnn", "tcnn")
FEATURE_MODELS = ("mlp",) + classicml.MODEL_KINDS
ALL_MODELS = NN_MODELS + tuple(k for k in classicml.MODEL_KINDS if k not in NN_MODELS)

AUGMENT_MODES = ("none", "waveform", "spectrogram", "both")


def timed(fn):
    """Run fn() under the monotonic clock; returns (result, seconds)."""
    started = time.perf_counter()
    result = fn()
    return result, time.perf_counter() - started


def confusion_matrix(y_true, y_pred, n_classes: int = 4) -> np.ndarray:
    """Counts matrix, rows = true class, columns = predicted class."""
    matrix = np.zeros((n_classes, n_classes), dtype=np.int64)
    for t, p in zip(np.asarray(y_true, int), np.asarray(y_pred, int)):
        matrix[t, p] += 1
    return matrix


def accuracy_from_confusion(matrix: np.ndarray) -> float:
    """Percent accuracy, exactly trace/sum."""
    total = matrix.sum()
    return 100.0 * float(np.trace(matrix)) / float(total) if total else 0.0


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParticipantSpec:
    """Either a directory on disk or a synthetic stand-in."""

    path: str | None = None
    synthetic_seed: int | None = None
    n_per_class: int = 25
    participant_id: str = ""
    ambiguous: bool = False

    def resolve(self) -> tuple[UtteranceDataset, UtteranceDataset, str]:
        if self.path is not None:
            train, test = load_participant(self.path)
            return train, test, Path(self.path).name
        if self.synthetic_seed is None:
            raise ConfigError("participant needs either a path or a synthetic seed")
        pid = self.participant_id or f"synth{self.synthetic_seed}"
        train, test = generate_synthetic(self.synthetic_seed, self.n_per_class, pid)
        return train, test, pid

    @staticmethod
    def from_dict(d: dict) -> "ParticipantSpec":
        return ParticipantSpec(
            path=d.get("path"),
            synthetic_seed=d.get("synthetic_seed"),
            n_per_class=d.get("n_per_class", 25),
            participant_id=d.get("id", ""),
            ambiguous=d.get("ambiguous", False),
        )


@dataclass(frozen=True)
class ExperimentConfig:
    participants: tuple
    model: str
    grid: tuple  # hyperparameter dicts, declaration order
    n_bands: int = 12
    select_k: int | None = None
    augment: str = "none"
    augment_plan: dict | None = None  # custom plan (config-file form)
    batch_size: int | None = None  # None -> 8 original / 64 augmented
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "participants", tuple(self.participants))
        object.__setattr__(self, "grid", tuple(dict(g) for g in self.grid))
        if not self.participants:
            raise ConfigError("experiment needs at least one participant")
        if self.model not in ALL_MODELS:
            raise ConfigError(f"unknown model {self.model!r}; pick one of {ALL_MODELS}")
        if not self.grid:
            raise ConfigError("hyperparameter grid must be non-empty")
        if self.augment not in AUGMENT_MODES:
            raise ConfigError(f"augment must be one of {AUGMENT_MODES}")
        if self.augment_plan is not None:
            plan_from_dict(self.augment_plan, self.seed).domain()  # validate early
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")

    def waveform_plan(self) -> AugmentationPlan:
        if self.augment_plan is not None:
            plan = plan_from_dict(self.augment_plan, self.seed)
            if plan.domain() == "waveform":
                return plan
        return default_waveform_plan(self.seed)

    def spectrogram_plan(self) -> AugmentationPlan:
        if self.augment_plan is not None:
            plan = plan_from_dict(self.augment_plan, self.seed + 1)
            if plan.domain() == "spectrogram":
                return plan
        return default_spectrogram_plan(self.seed + 1)


def default_model_grid(model: str) -> list[dict]:
    """Desk-scale default grids; classic models use their declared grids."""
    if model == "mlp":
        return [
            {"hidden": name, "learning_rate": lr}
            for name in ("half", "half_quarter", "quarter")
            for lr in (1e-2, 1e-3)
        ]
    if model == "cnn":
        return [
            {"conv_filters": (8, 16), "n_pools": 2, "learning_rate": lr}
            for lr in (1e-2, 1e-3, 1e-4)
        ] + [
            {"conv_filters": (8, 16, 32, 32), "n_pools": 2, "learning_rate": 1e-3},
        ]
    if model == "tcnn":
        return [
            {
                "conv_filters": (8, 16),
                "n_pools": 2,
                "embedding": emb,
                "strategy": "hardest_negative",
                "learning_rate": lr,
            }
            for emb in (16, 32)
            for lr in (1e-2, 1e-3)
        ]
    return classicml.default_grids(model)


# ---------------------------------------------------------------------------
# Per-participant pipeline
# ---------------------------------------------------------------------------

@dataclass
class PreparedData:
    """Candidate-independent preprocessing products for one participant."""

    participant_id: str
    ambiguous: bool
    y_train: np.ndarray
    y_test: np.ndarray
    X_train: np.ndarray  # features (n, k) or spectrograms (n, s, s)
    X_test: np.ndarray
    ranking: FeatureRanking | None
    selected: np.ndarray | None
    standardizer: object | None
    prep_seconds: float
    test_prep_seconds: float
    batch_size: int


def _auto_batch(cfg: ExperimentConfig, n_train: int) -> int:
    requested = cfg.batch_size or (8 if cfg.augment == "none" else 64)
    return max(1, min(requested, n_train // 10))


def prepare_participant(
    train: UtteranceDataset, test: UtteranceDataset, cfg: ExperimentConfig, pid: str,
    ambiguous: bool = False,
) -> PreparedData:
    """Run every candidate-independent stage, timing train/test sides."""
    uses_spectrograms = cfg.model in ("cnn", "tcnn")
    started = time.perf_counter()

    if cfg.augment in ("waveform", "both"):
        train = expand_dataset(train, cfg.waveform_plan())

    ranking = None
    selected = None
    standardizer = None
    if uses_spectrograms:
        X_train = spectrogram_stack(train.clips, cfg.n_bands)
        if cfg.augment in ("spectrogram", "both"):
            ds = SpectrogramDataset(
                [  # re-wrap so spectrogram transforms see MelSpectrogram items
                    _respec(v, cfg.n_bands) for v in X_train
                ],
                train.labels,
                pid,
                "train",
                list(train.provenance),
            )
            ds = expand_dataset(ds, cfg.spectrogram_plan())
            X_train = np.stack([s.values for s in ds.specs])
            y_train = ds.labels
        else:
            y_train = train.labels
    else:
        X_train = feature_matrix(train.clips)
        y_train = train.labels
        if cfg.select_k is not None:
            ranking = forest_importances(X_train, y_train, n_trees=100, seed=cfg.seed)
            selected = select_top_k(ranking, cfg.select_k)
            X_train = X_train[:, selected]
        if cfg.model != "mlp":  # the nn engine standardizes internally
            standardizer = fit_standardizer(X_train)
            X_train = standardizer(X_train)
    prep_seconds = time.perf_counter() - started

    started = time.perf_counter()
    if uses_spectrograms:
        X_test = spectrogram_stack(test.clips, cfg.n_bands)
    else:
        X_test = feature_matrix(test.clips)
        if selected is not None:
            X_test = X_test[:, selected]
        if standardizer is not None:
            X_test = standardizer(X_test)
    test_prep_seconds = time.perf_counter() - started

    return PreparedData(
        participant_id=pid,
        ambiguous=ambiguous,
        y_train=np.asarray(y_train, int),
        y_test=np.asarray(test.labels, int),
        X_train=X_train,
        X_test=X_test,
        ranking=ranking,
        selected=selected,
        standardizer=standardizer,
        prep_seconds=prep_seconds,
        test_prep_seconds=test_prep_seconds,
        batch_size=_auto_batch(cfg, len(y_train)),
    )


def _respec(values: np.ndarray, n_bands: int):
    from .dsp import MelSpectrogram

    return MelSpectrogram(values, n_bands)


def _resolve_hidden(name, n_inputs: int) -> tuple:
    choices = mlp_hidden_choices(n_inputs)
    named = {"half": choices[0], "half_quarter": choices[1], "quarter": choices[2]}
    if isinstance(name, str):
        if name not in named:
            raise ConfigError(f"unknown mlp hidden layout {name!r}")
        return named[name]
    return tuple(name)


@dataclass
class PipelineModel:
    """A fitted model plus the preprocessing it needs to score raw clips."""

    model_kind: str
    n_bands: int
    selected: np.ndarray | None
    standardizer: object | None  # classic models only; nn self-normalizes
    payload: object  # TrainedNetwork | ClassicTrainedModel | {"tcnn","slp"}

    def predict_prepared(self, X: np.ndarray) -> np.ndarray:
        """Predict on arrays shaped like PreparedData.X_test."""
        if self.model_kind == "tcnn":
            return self.payload["slp"].predict(self.payload["tcnn"].embed(X))
        return self.payload.predict(X)

    def predict_clips(self, clips) -> np.ndarray:
        """Full preprocessing from raw fixed-length clips to labels."""
        if self.model_kind in ("cnn", "tcnn"):
            X = spectrogram_stack(clips, self.n_bands)
        else:
            X = feature_matrix(clips)
            if self.selected is not None:
                X = X[:, self.selected]
            if self.standardizer is not None:
                X = self.standardizer(X)
        return self.predict_prepared(X)

    def to_dict(self) -> dict:
        from .nn.train import checkpoint_dict

        d = {
            "format_version": 1,
            "model_kind": self.model_kind,
            "n_bands": self.n_bands,
            "selected": None if self.selected is None else [int(i) for i in self.selected],
            "standardizer": None,
        }
        if self.standardizer is not None:
            d["standardizer"] = {
                "mean": self.standardizer.mean.tolist(),
                "std": self.standardizer.std.tolist(),
            }
        if self.model_kind == "tcnn":
            d["payload"] = {
                "tcnn": checkpoint_dict(self.payload["tcnn"]),
                "slp": checkpoint_dict(self.payload["slp"]),
            }
        elif self.model_kind in ("mlp", "cnn"):
            d["payload"] = checkpoint_dict(self.payload)
        else:
            d["payload"] = classicml.model_to_dict(self.payload)
        return d

    @staticmethod
    def from_dict(d: dict) -> "PipelineModel":
        from .dsp import Standardizer
        from .nn.train import trained_from_dict

        if d.get("format_version") != 1:
            raise ConfigError(f"unsupported pipeline format {d.get('format_version')!r}")
        kind = d["model_kind"]
        if kind == "tcnn":
            payload = {
                "tcnn": trained_from_dict(d["payload"]["tcnn"]),
                "slp": trained_from_dict(d["payload"]["slp"]),
            }
        elif kind in ("mlp", "cnn"):
            payload = trained_from_dict(d["payload"])
        else:
            payload = classicml.model_from_dict(d["payload"])
        standardizer = None
        if d.get("standardizer"):
            standardizer = Standardizer(
                np.asarray(d["standardizer"]["mean"]), np.asarray(d["standardizer"]["std"])
            )
        selected = None if d.get("selected") is None else np.asarray(d["selected"], int)
        return PipelineModel(
            model_kind=kind,
            n_bands=d.get("n_bands", 12),
            selected=selected,
            standardizer=standardizer,
            payload=payload,
        )


def save_pipeline(path, pipeline: PipelineModel) -> None:
    Path(path).write_text(json.dumps(pipeline.to_dict()))


def load_pipeline(path) -> PipelineModel:
    return PipelineModel.from_dict(json.loads(Path(path).read_text()))


@dataclass
class CandidateResult:
    candidate: dict
    val_accuracy: float
    seconds: float
    pipeline: PipelineModel

    def predict_test_on(self, prep: PreparedData) -> np.ndarray:
        return self.pipeline.predict_prepared(prep.X_test)


def train_candidate(
    prep: PreparedData, cfg: ExperimentConfig, candidate: dict, seed: int
) -> CandidateResult:
    """Fit one grid point on the train portion; score on validation."""
    model = cfg.model
    started = time.perf_counter()
    if model in NN_MODELS:
        lr = candidate.get("learning_rate", 1e-3)
        base = TrainConfig(
            learning_rate=lr, batch_size=prep.batch_size, seed=seed
        ).for_family(model)
        if model == "mlp":
            net_cfg = NetworkConfig(
                kind="mlp",
                n_inputs=prep.X_train.shape[1],
                hidden_sizes=_resolve_hidden(candidate.get("hidden", "half"), prep.X_train.shape[1]),
            )
        else:
            net_cfg = NetworkConfig(
                kind=model,
                n_bands=cfg.n_bands,
                conv_filters=tuple(candidate.get("conv_filters", (8, 16))),
                n_pools=candidate.get("n_pools", 2),
                output_size=(
                    candidate.get("embedding", 16) if model == "tcnn" else 4
                ),
            )
        if model == "tcnn":
            base = TrainConfig(
                **{**base.__dict__, "triplet_strategy": candidate.get("strategy", "hardest_negative")}
            )
        trained = train_network(net_cfg, prep.X_train, prep.y_train, base)
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed])))
        train_idx, val_idx = stratified_split(prep.y_train, base.validation_split, rng)
        if model == "tcnn":
            slp = fit_embedding_head(
                trained, prep.X_train[train_idx], prep.y_train[train_idx]
            )
            payload = {"tcnn": trained, "slp": slp}
        else:
            payload = trained
        pipeline = PipelineModel(
            model_kind=model,
            n_bands=cfg.n_bands,
            selected=prep.selected,
            standardizer=None,
            payload=payload,
        )
        val_pred = pipeline.predict_prepared(prep.X_train[val_idx])
        val_acc = 100.0 * float(np.mean(val_pred == prep.y_train[val_idx]))
    else:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed])))
        train_idx, val_idx = stratified_split(prep.y_train, 0.10, rng)
        spec = classicml.ClassicModelSpec(model, dict(candidate), seed=seed)
        fitted = classicml.fit(spec, prep.X_train[train_idx], prep.y_train[train_idx])
        pipeline = PipelineModel(
            model_kind=model,
            n_bands=cfg.n_bands,
            selected=prep.selected,
            standardizer=prep.standardizer,
            payload=fitted,
        )
        val_pred = pipeline.predict_prepared(prep.X_train[val_idx])
        val_acc = 100.0 * float(np.mean(val_pred == prep.y_train[val_idx]))
    return CandidateResult(
        candidate=dict(candidate),
        val_accuracy=val_acc,
        seconds=time.perf_counter() - started,
        pipeline=pipeline,
    )


# ---------------------------------------------------------------------------
# Grid search
# ---------------------------------------------------------------------------

@dataclass
class ParticipantReport:
    participant_id: str
    ambiguous: bool
    chosen: dict
    val_accuracy: float
    test_accuracy: float
    confusion: np.ndarray
    train_seconds: float  # preprocessing + winning candidate training
    test_seconds: float  # test preprocessing + winner inference
    error: str | None = None


@dataclass
class ExperimentReport:
    model: str
    participants: list
    grid: tuple

    @property
    def mean_test_accuracy(self) -> float:
        accs = [p.test_accuracy for p in self.participants if p.error is None]
        return float(np.mean(accs)) if accs else float("nan")

    @property
    def aggregate_confusion(self) -> np.ndarray:
        total = np.zeros((4, 4), dtype=np.int64)
        for p in self.participants:
            if p.error is None:
                total += p.confusion
        return total

    @property
    def mean_train_seconds(self) -> float:
        vals = [p.train_seconds for p in self.participants if p.error is None]
        return float(np.mean(vals)) if vals else float("nan")

    @property
    def mean_test_seconds(self) -> float:
        vals = [p.test_seconds for p in self.participants if p.error is None]
        return float(np.mean(vals)) if vals else float("nan")

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "grid": [dict(g) for g in self.grid],
            "mean_test_accuracy": self.mean_test_accuracy,
            "mean_train_seconds": round(self.mean_train_seconds, 3),
            "mean_test_seconds": round(self.mean_test_seconds, 3),
            "aggregate_confusion": self.aggregate_confusion.tolist(),
            "participants": [
                {
                    "participant_id": p.participant_id,
                    "ambiguous": p.ambiguous,
                    "chosen": _jsonable(p.chosen),
                    "val_accuracy": p.val_accuracy,
                    "test_accuracy": p.test_accuracy,
                    "confusion": p.confusion.tolist(),
                    "train_seconds": round(p.train_seconds, 3),
                    "test_seconds": round(p.test_seconds, 3),
                    "error": p.error,
                }
                for p in self.participants
            ],
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (tuple, list)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def _sweep_participant(spec: ParticipantSpec, cfg: ExperimentConfig) -> ParticipantReport:
    try:
        train, test, pid = spec.resolve()
        prep = prepare_participant(train, test, cfg, pid, spec.ambiguous)
        results = [train_candidate(prep, cfg, cand, cfg.seed) for cand in cfg.grid]
        best_idx = max(range(len(results)), key=lambda i: (results[i].val_accuracy, -i))
        winner = results[best_idx]
        test_pred, infer_seconds = timed(lambda: winner.predict_test_on(prep))
        confusion = confusion_matrix(prep.y_test, test_pred)
        return ParticipantReport(
            participant_id=pid,
            ambiguous=spec.ambiguous,
            chosen=winner.candidate,
            val_accuracy=winner.val_accuracy,
            test_accuracy=accuracy_from_confusion(confusion),
            confusion=confusion,
            train_seconds=prep.prep_seconds + winner.seconds,
            test_seconds=prep.test_prep_seconds + infer_seconds,
        )
    except VocalPercError as err:
        return ParticipantReport(
            participant_id=spec.participant_id or str(spec.path),
            ambiguous=spec.ambiguous,
            chosen={},
            val_accuracy=float("nan"),
            test_accuracy=float("nan"),
            confusion=np.zeros((4, 4), dtype=np.int64),
            train_seconds=0.0,
            test_seconds=0.0,
            error=str(err),
        )


def run_grid_search(cfg: ExperimentConfig) -> ExperimentReport:
    """Exhaustive sweep; winner by validation accuracy, evaluated once on test.

    Ties go to the earliest grid entry. Participant failures become error
    rows; the run only fails when every participant failed.
    """
    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            reports = list(pool.map(lambda s: _sweep_participant(s, cfg), cfg.participants))
    else:
        reports = [_sweep_participant(spec, cfg) for spec in cfg.participants]
    if all(r.error is not None for r in reports):
        raise ContractError(
            "every participant failed: " + "; ".join(r.error for r in reports)
        )
    return ExperimentReport(model=cfg.model, participants=reports, grid=cfg.grid)


def measure_efficiency(configs: dict[str, ExperimentConfig]) -> list[dict]:
    """Per model: mean wall-clock train/test seconds, preprocessing included.

    Runs the full grid-search pipeline per config and averages the winner's
    end-to-end timings across participants, at 1 ms resolution.
    """
    rows = []
    for name, cfg in configs.items():
        report = run_grid_search(cfg)
        rows.append(
            {
                "model": name,
                "train_seconds": round(report.mean_train_seconds, 3),
                "test_seconds": round(report.mean_test_seconds, 3),
                "mean_test_accuracy": report.mean_test_accuracy,
            }
        )
    return rows


# ---------------------------------------------------------------------------
# Stability studies
# ---------------------------------------------------------------------------

def silverman_bandwidth(samples: np.ndarray) -> float:
    """Silverman's rule of thumb with a floor tied to the output grid."""
    samples = np.asarray(samples, dtype=np.float64)
    n = len(samples)
    if n < 2:
        return 1.0
    std = samples.std(ddof=1)
    iqr = np.subtract(*np.percentile(samples, [75, 25]))
    scale = min(std, iqr / 1.34) if iqr > 0 else std
    if scale <= 0:
        return 1.0
    return max(0.9 * scale * n ** (-0.2), 1.0)


def gaussian_kde_curve(
    samples, lo: float = 0.0, hi: float = 100.0, n_points: int = 200
) -> tuple[np.ndarray, np.ndarray]:
    """Boundary-reflected Gaussian KDE sampled on a uniform grid.

    Reflection at lo/hi keeps the trapezoid integral over [lo, hi] at 1 even
    when samples pile up against the boundaries.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if len(samples) == 0:
        raise ContractError("KDE needs at least one sample")
    grid = np.linspace(lo, hi, n_points)
    h = silverman_bandwidth(samples)
    mirrored = np.concatenate([samples, 2 * lo - samples, 2 * hi - samples])
    z = (grid[:, None] - mirrored[None, :]) / h
    density = np.exp(-0.5 * z**2).sum(axis=1) / (len(samples) * h * np.sqrt(2 * np.pi))
    return grid, density


@dataclass
class StabilityResult:
    label: str
    samples: np.ndarray  # one accuracy per grid point / seed
    grid_points: list  # candidate dict or seed per sample
    kde_x: np.ndarray
    kde_y: np.ndarray

    def to_csv(self) -> str:
        lines = ["index,detail,accuracy"]
        for i, (point, acc) in enumerate(zip(self.grid_points, self.samples)):
            detail = json.dumps(_jsonable(point)).replace(",", ";")
            lines.append(f"{i},{detail},{acc:.10g}")
        return "\n".join(lines) + "\n"

    def kde_csv(self) -> str:
        lines = ["accuracy,density"]
        for x, y in zip(self.kde_x, self.kde_y):
            lines.append(f"{x:.10g},{y:.10g}")
        return "\n".join(lines) + "\n"


def run_stability_hyper(cfg: ExperimentConfig) -> StabilityResult:
    """Test accuracy of every grid point (mean across participants)."""
    per_point = np.zeros(len(cfg.grid))
    counted = 0
    for spec in cfg.participants:
        try:
            train, test, pid = spec.resolve()
        except VocalPercError:
            continue
        prep = prepare_participant(train, test, cfg, pid, spec.ambiguous)
        for i, cand in enumerate(cfg.grid):
            result = train_candidate(prep, cfg, cand, cfg.seed)
            pred = result.predict_test_on(prep)
            per_point[i] += accuracy_from_confusion(confusion_matrix(prep.y_test, pred))
        counted += 1
    if counted == 0:
        raise ContractError("every participant failed to load")
    samples = per_point / counted
    kde_x, kde_y = gaussian_kde_curve(samples)
    return StabilityResult(
        label="hyperparameters",
        samples=samples,
        grid_points=[dict(g) for g in cfg.grid],
        kde_x=kde_x,
        kde_y=kde_y,
    )


def run_stability_seed(
    cfg: ExperimentConfig, best_candidate: dict, n_seeds: int = 30
) -> StabilityResult:
    """Re-train one fixed configuration under n_seeds different seeds."""
    preps = []
    for spec in cfg.participants:
        try:
            train, test, pid = spec.resolve()
        except VocalPercError:
            continue
        preps.append(prepare_participant(train, test, cfg, pid, spec.ambiguous))
    if not preps:
        raise ContractError("every participant failed to load")
    samples = np.zeros(n_seeds)
    seeds = [cfg.seed + 1000 * (i + 1) for i in range(n_seeds)]
    for i, seed in enumerate(seeds):
        accs = []
        for prep in preps:
            result = train_candidate(prep, cfg, best_candidate, seed)
            pred = result.predict_test_on(prep)
            accs.append(accuracy_from_confusion(confusion_matrix(prep.y_test, pred)))
        samples[i] = float(np.mean(accs))
    kde_x, kde_y = gaussian_kde_curve(samples)
    return StabilityResult(
        label="random_initialisation",
        samples=samples,
        grid_points=seeds,
        kde_x=kde_x,
        kde_y=kde_y,
    )


# ---------------------------------------------------------------------------
# Interpretability
# ---------------------------------------------------------------------------

@dataclass
class InterpretabilityReport:
    feature_tally: np.ndarray  # how often each feature made a top-k selection
    aggregate_confusion: np.ndarray
    most_confused_pair: tuple[int, int] | None  # largest off-diagonal, None if clean

    def tally_csv(self) -> str:
        lines = ["feature,selected_count"]
        order = np.argsort(-self.feature_tally, kind="stable")
        for idx in order:
            if self.feature_tally[idx] > 0:
                lines.append(f"{FEATURE_NAMES[idx]},{int(self.feature_tally[idx])}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        pair = None
        if self.most_confused_pair is not None:
            i, j = self.most_confused_pair
            pair = [CLASS_NAMES[i], CLASS_NAMES[j]]
        return {
            "feature_tally": {
                FEATURE_NAMES[k]: int(v)
                for k, v in enumerate(self.feature_tally)
                if v > 0
            },
            "aggregate_confusion": self.aggregate_confusion.tolist(),
            "most_confused_pair": pair,
        }


def interpretability_report(
    rankings: list[FeatureRanking], k: int, confusions: list[np.ndarray]
) -> InterpretabilityReport:
    """Tally top-k selections across participants and aggregate confusions."""
    n_features = len(rankings[0].importance) if rankings else len(FEATURE_NAMES)
    tally = np.zeros(n_features, dtype=np.int64)
    for ranking in rankings:
        for idx in select_top_k(ranking, k, allow_any_k=True):
            tally[idx] += 1
    total = np.zeros((4, 4), dtype=np.int64)
    for confusion in confusions:
        total += np.asarray(confusion, dtype=np.int64)
    off = total.astype(np.float64).copy()
    np.fill_diagonal(off, -1.0)
    flat = int(np.argmax(off))
    pair = (flat // 4, flat % 4) if off.flat[flat] > 0 else None
    return InterpretabilityReport(
        feature_tally=tally,
        aggregate_confusion=total,
        most_confused_pair=pair,
    )


# ---------------------------------------------------------------------------
# Report files
# ---------------------------------------------------------------------------

def write_report_files(out_dir, report: ExperimentReport) -> None:
    """report.json + accuracy.csv under out_dir (stable filenames)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2))
    lines = ["participant,ambiguous,test_accuracy,val_accuracy,error"]
    for p in report.participants:
        lines.append(
            f"{p.participant_id},{int(p.ambiguous)},{p.test_accuracy:.10g},"
            f"{p.val_accuracy:.10g},{p.error or ''}"
        )
    lines.append(f"mean,,{report.mean_test_accuracy:.10g},,")
    (out / "accuracy.csv").write_text("\n".join(lines) + "\n")


def write_timing_csv(out_dir, rows: list[dict]) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["model,train_seconds,test_seconds,mean_test_accuracy"]
    for row in rows:
        lines.append(
            f"{row['model']},{row['train_seconds']:.3f},{row['test_seconds']:.3f},"
            f"{row['mean_test_accuracy']:.10g}"
        )
    (out / "timing.csv").write_text("\n".join(lines) + "\n")


def write_stability_files(out_dir, result: StabilityResult, which: str) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"stability_{which}.csv").write_text(result.to_csv())
    (out / f"stability_{which}_kde.csv").write_text(result.kde_csv())
