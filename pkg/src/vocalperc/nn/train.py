"""Training protocol: Adam, LR scheduling, early stopping, best-snapshot.

Protocol shared by all three network families: a stratified 10% validation
split, at most 200 epochs, Adam (0.9 / 0.999 / 1e-8), a learning rate from
the 11-point grid 10^-1 .. 10^-6, and a batch size no larger than a tenth
of the training set. The scheduler divides the LR by f_l after 4 epochs
without validation improvement (never below 0.1x the initial LR); early
stopping halts after N_e such epochs and the best-validation weights are
restored. Family defaults: MLP f_l=2, N_e=3; CNN f_l=3, N_e=8;
TCNN f_l=2, N_e=3.

Inputs are normalized inside the loop and the normalizer rides along with
the trained network: per-feature mean/std for feature vectors, a single
global mean/std pair for spectrogram stacks.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..dsp import Standardizer, fit_standardizer
from ..errors import ConfigError, ContractError
from .losses import MINING_STRATEGIES, cross_entropy_loss, mine_triplets, softmax, triplet_batch_loss
from .networks import Network, NetworkConfig, build_network

LEARNING_RATE_GRID = tuple(10.0 ** (-(1.0 + 0.5 * k)) for k in range(11))
FAMILY_DEFAULTS = {"mlp": (2.0, 3), "cnn": (3.0, 8), "tcnn": (2.0, 3)}

CHECKPOINT_FORMAT = 1


def family_defaults(kind: str) -> tuple[float, int]:
    """(LR divisor f_l, early-stop patience N_e) for a network family."""
    if kind not in FAMILY_DEFAULTS:
        raise ConfigError(f"unknown network family {kind!r}")
    return FAMILY_DEFAULTS[kind]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 8
    max_epochs: int = 200
    validation_split: float = 0.10
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    loss: str = "cross_entropy"  # or "triplet"
    lr_divisor: float = 2.0  # f_l
    scheduler_patience: int = 4
    early_stop_patience: int = 3  # N_e
    min_lr_ratio: float = 0.1  # LR never drops below ratio * initial LR
    margin: float = 0.0
    triplet_strategy: str = "hardest_negative"
    seed: int = 0
    allow_lr_off_grid: bool = False

    def __post_init__(self):
        if not self.allow_lr_off_grid and not any(
            np.isclose(self.learning_rate, lr) for lr in LEARNING_RATE_GRID
        ):
            raise ConfigError(
                f"learning rate {self.learning_rate} is outside the 11-point "
                f"grid 1e-1..1e-6; set allow_lr_off_grid to relax"
            )
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.loss not in ("cross_entropy", "triplet"):
            raise ConfigError(f"loss must be cross_entropy or triplet, got {self.loss!r}")
        if self.triplet_strategy not in MINING_STRATEGIES:
            raise ConfigError(f"triplet_strategy must be one of {MINING_STRATEGIES}")

    def for_family(self, kind: str) -> "TrainConfig":
        f_l, n_e = family_defaults(kind)
        return TrainConfig(
            **{
                **self.__dict__,
                "lr_divisor": f_l,
                "early_stop_patience": n_e,
                "loss": "triplet" if kind == "tcnn" else "cross_entropy",
            }
        )

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class ScalarNormalizer:
    """Single global mean/std pair for spectrogram stacks."""

    mean: float
    std: float

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std


class AdamState:
    """First/second moment buffers plus the step counter."""

    def __init__(self, params):
        self.m = [np.zeros_like(p.value) for p in params]
        self.v = [np.zeros_like(p.value) for p in params]
        self.t = 0


def adam_step(params, state: AdamState, lr: float, beta1=0.9, beta2=0.999, eps=1e-8) -> None:
    """Standard bias-corrected Adam update, in place."""
    state.t += 1
    correction1 = 1.0 - beta1**state.t
    correction2 = 1.0 - beta2**state.t
    for p, m, v in zip(params, state.m, state.v):
        m += (1.0 - beta1) * (p.grad - m)
        v += (1.0 - beta2) * (p.grad**2 - v)
        p.value -= lr * (m / correction1) / (np.sqrt(v / correction2) + eps)


def stratified_split(labels: np.ndarray, fraction: float, rng: np.random.Generator):
    """Per-class split indices: (train_idx, val_idx), val gets >= 1 per class."""
    labels = np.asarray(labels)
    train_idx, val_idx = [], []
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        members = members[rng.permutation(len(members))]
        if len(members) < 2:
            train_idx.extend(members)
            continue
        n_val = min(max(1, int(len(members) * fraction + 0.5)), len(members) - 1)
        val_idx.extend(members[:n_val])
        train_idx.extend(members[n_val:])
    return np.sort(np.array(train_idx, int)), np.sort(np.array(val_idx, int))


class TrainingProtocol:
    """Scheduler and early-stop bookkeeping over the validation-loss trace.

    Improvement is a strict decrease of the best validation loss. After
    `scheduler_patience` consecutive non-improving epochs the LR is divided
    by `lr_divisor` (never below `min_lr`); after `stop_patience` of them
    training stops. Both counters reset on improvement; the scheduler's
    also resets when it fires.
    """

    def __init__(self, lr, lr_divisor, scheduler_patience, stop_patience, min_lr):
        self.lr = lr
        self.lr_divisor = lr_divisor
        self.scheduler_patience = scheduler_patience
        self.stop_patience = stop_patience
        self.min_lr = min_lr
        self.best_val = np.inf
        self.best_epoch = 0
        self._scheduler_counter = 0
        self._stop_counter = 0

    def observe(self, epoch: int, val_loss: float) -> str:
        """Returns 'improved', 'continue' or 'stop'."""
        if val_loss < self.best_val:
            self.best_val = val_loss
            self.best_epoch = epoch
            self._scheduler_counter = 0
            self._stop_counter = 0
            return "improved"
        self._scheduler_counter += 1
        self._stop_counter += 1
        if self._stop_counter >= self.stop_patience:
            return "stop"
        if self._scheduler_counter >= self.scheduler_patience:
            self.lr = max(self.lr / self.lr_divisor, self.min_lr)
            self._scheduler_counter = 0
        return "continue"


@dataclass
class TrainedNetwork:
    """A fitted network: best-validation weights, normalizer and history."""

    network: Network
    train_config: TrainConfig
    normalizer: object
    history: list = field(default_factory=list)  # (epoch, train_loss, val_loss, lr)
    best_epoch: int = 0
    wall_seconds: float = 0.0
    seed: int = 0

    @property
    def config(self) -> NetworkConfig:
        return self.network.config

    def _prepare(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if self.config.kind != "mlp" and X.ndim == 3:
            X = X[:, None, :, :]  # add the channel axis
        return self.normalizer(X)

    def logits(self, X: np.ndarray) -> np.ndarray:
        return self.network.forward(self._prepare(X), mode="eval")

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = self.logits(X)
        return np.argmax(out, axis=1)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return softmax(self.logits(X))

    def embed(self, X: np.ndarray) -> np.ndarray:
        return self.logits(X)  # tcnn output layer is the embedding

    def history_csv(self) -> str:
        lines = ["epoch,train_loss,val_loss,lr"]
        for epoch, train_loss, val_loss, lr in self.history:
            lines.append(f"{epoch},{train_loss:.10g},{val_loss:.10g},{lr:.10g}")
        return "\n".join(lines) + "\n"


def _fit_normalizer(kind: str, X: np.ndarray):
    if kind == "mlp":
        return fit_standardizer(X)
    std = X.std()
    return ScalarNormalizer(float(X.mean()), float(std if std > 0 else 1.0))


def train_network(
    config: NetworkConfig, X: np.ndarray, y: np.ndarray, train_cfg: TrainConfig
) -> TrainedNetwork:
    """Run the full training protocol on a (features|spectrograms, labels) set.

    X is (n, features) for the MLP and (n, side, side) [or (n, 1, side,
    side)] for the convolutional families; y holds class ids (ignored by the
    triplet loss only for the margin term -- mining still needs it).
    """
    started = time.perf_counter()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(X) != len(y):
        raise ContractError("X and y must be parallel")
    if train_cfg.batch_size > len(X) // 10:
        raise ConfigError(
            f"batch_size {train_cfg.batch_size} exceeds a tenth of the "
            f"training set ({len(X)} samples)"
        )
    if config.kind != "mlp" and X.ndim == 3:
        X = X[:, None, :, :]

    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([train_cfg.seed])))
    normalizer = _fit_normalizer(config.kind, X)
    Xn = normalizer(X)
    train_idx, val_idx = stratified_split(y, train_cfg.validation_split, rng)
    X_train, y_train = Xn[train_idx], y[train_idx]
    X_val, y_val = Xn[val_idx], y[val_idx]

    network = build_network(config, rng)
    params = network.params()
    adam = AdamState(params)
    protocol = TrainingProtocol(
        lr=train_cfg.learning_rate,
        lr_divisor=train_cfg.lr_divisor,
        scheduler_patience=train_cfg.scheduler_patience,
        stop_patience=train_cfg.early_stop_patience,
        min_lr=train_cfg.min_lr_ratio * train_cfg.learning_rate,
    )
    best_snapshot = network.snapshot()
    history = []

    def batch_loss_and_grad(xb, yb, epoch_rng):
        out = network.forward(xb, mode="train")
        if train_cfg.loss == "cross_entropy":
            return cross_entropy_loss(out, yb)
        triplets = mine_triplets(
            out, yb, train_cfg.triplet_strategy, epoch_rng, train_cfg.margin
        )
        if not triplets:
            return None, None  # degenerate batch: skipped, logged upstream
        return triplet_batch_loss(out, triplets, train_cfg.margin)

    def validation_loss():
        if len(X_val) == 0:
            return np.inf
        out = network.forward(X_val, mode="eval")
        if train_cfg.loss == "cross_entropy":
            return cross_entropy_loss(out, y_val)[0]
        # hardest mining is deterministic, keeping epochs comparable
        triplets = mine_triplets(
            out, y_val, "hardest_negative", rng, train_cfg.margin
        )
        return triplet_batch_loss(out, triplets, train_cfg.margin)[0]

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for epoch in range(1, train_cfg.max_epochs + 1):
            order = rng.permutation(len(X_train))
            epoch_loss = 0.0
            seen = 0
            for start in range(0, len(order), train_cfg.batch_size):
                batch = order[start : start + train_cfg.batch_size]
                loss, grad = batch_loss_and_grad(X_train[batch], y_train[batch], rng)
                if loss is None:
                    continue
                network.backward(grad)
                adam_step(
                    params, adam, protocol.lr,
                    train_cfg.beta1, train_cfg.beta2, train_cfg.eps,
                )
                epoch_loss += loss * len(batch)
                seen += len(batch)
            train_loss = epoch_loss / seen if seen else np.nan
            val_loss = validation_loss()
            history.append((epoch, float(train_loss), float(val_loss), protocol.lr))

            decision = protocol.observe(epoch, val_loss)
            if decision == "improved":
                best_snapshot = network.snapshot()
            elif decision == "stop":
                break

    network.restore(best_snapshot)
    return TrainedNetwork(
        network=network,
        train_config=train_cfg,
        normalizer=normalizer,
        history=history,
        best_epoch=protocol.best_epoch,
        wall_seconds=time.perf_counter() - started,
        seed=train_cfg.seed,
    )


def fit_embedding_head(
    tcnn: TrainedNetwork,
    X_train: np.ndarray,
    y_train: np.ndarray,
    slp_cfg: TrainConfig | None = None,
) -> TrainedNetwork:
    """Train the separate single-layer classifier on TCNN embeddings."""
    if tcnn.config.kind != "tcnn":
        raise ContractError("the embedding head needs a trained tcnn")
    emb_train = tcnn.embed(X_train)
    if slp_cfg is None:
        slp_cfg = TrainConfig(
            learning_rate=tcnn.train_config.learning_rate,
            batch_size=max(1, min(tcnn.train_config.batch_size, len(emb_train) // 10)),
            seed=tcnn.train_config.seed,
            loss="cross_entropy",
            lr_divisor=2.0,
            early_stop_patience=3,
        )
    slp_config = NetworkConfig(
        kind="mlp",
        n_inputs=emb_train.shape[1],
        hidden_sizes=(),
        allow_override=True,  # no hidden layer: a bare input -> logits map
    )
    return train_network(slp_config, emb_train, y_train, slp_cfg)


def embed_and_classify(
    tcnn: TrainedNetwork,
    X_train: np.ndarray,
    y_train: np.ndarray,
    X_test: np.ndarray,
    slp_cfg: TrainConfig | None = None,
) -> np.ndarray:
    """Embeddings in eval mode, linear head fitted on train, test predictions."""
    slp = fit_embedding_head(tcnn, X_train, y_train, slp_cfg)
    return slp.predict(tcnn.embed(X_test))


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def checkpoint_dict(trained: TrainedNetwork) -> dict:
    """Versioned JSON-ready container: config, weights, normalizer, seed."""
    payload = {
        "format_version": CHECKPOINT_FORMAT,
        "network_config": trained.config.to_dict(),
        "train_config": trained.train_config.to_dict(),
        "seed": trained.seed,
        "best_epoch": trained.best_epoch,
        "wall_seconds": trained.wall_seconds,
        "weights": [w.tolist() for w in trained.network.snapshot()],
        "history": trained.history,
    }
    normalizer = trained.normalizer
    if isinstance(normalizer, Standardizer):
        payload["normalizer"] = {
            "kind": "per_feature",
            "mean": normalizer.mean.tolist(),
            "std": normalizer.std.tolist(),
        }
    else:
        payload["normalizer"] = {
            "kind": "scalar",
            "mean": normalizer.mean,
            "std": normalizer.std,
        }
    return payload


def trained_from_dict(payload: dict) -> TrainedNetwork:
    if payload.get("format_version") != CHECKPOINT_FORMAT:
        raise ConfigError(
            f"unsupported checkpoint format {payload.get('format_version')!r}"
        )
    config = NetworkConfig.from_dict(payload["network_config"])
    train_cfg = TrainConfig(**payload["train_config"])
    network = build_network(
        config, np.random.Generator(np.random.PCG64(np.random.SeedSequence([0])))
    )
    network.restore([np.asarray(w, dtype=np.float64) for w in payload["weights"]])
    norm = payload["normalizer"]
    if norm["kind"] == "per_feature":
        normalizer = Standardizer(np.asarray(norm["mean"]), np.asarray(norm["std"]))
    else:
        normalizer = ScalarNormalizer(norm["mean"], norm["std"])
    return TrainedNetwork(
        network=network,
        train_config=train_cfg,
        normalizer=normalizer,
        history=[tuple(h) for h in payload["history"]],
        best_epoch=payload["best_epoch"],
        wall_seconds=payload["wall_seconds"],
        seed=payload["seed"],
    )


def save_checkpoint(path, trained: TrainedNetwork) -> None:
    Path(path).write_text(json.dumps(checkpoint_dict(trained)))


def load_checkpoint(path) -> TrainedNetwork:
    return trained_from_dict(json.loads(Path(path).read_text()))
