"""Analytic-vs-numeric gradient verification for every layer and loss.

Each check builds a small random case, reduces the layer output to a scalar
through a fixed random projection, and compares the backward pass against
central finite differences (h = 1e-5) element by element. Relative error is
|g_a - g_n| / max(|g_a| + |g_n|, 1e-6).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layers import BatchNorm, Conv2d, Dense, MaxPool2d
from .losses import cross_entropy_loss, mine_triplets, triplet_batch_loss

FD_STEP = 1e-5


@dataclass
class CheckResult:
    name: str
    max_rel_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def _rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-6)
    return float(np.max(np.abs(analytic - numeric) / denom))


def numeric_gradient(fn, x: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """Central finite differences of a scalar function, elementwise."""
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + h
        up = fn()
        flat[i] = original - h
        down = fn()
        flat[i] = original
        gflat[i] = (up - down) / (2.0 * h)
    return grad


def _check_layer(name, layer, x, mode, rng, tolerance):
    """Compare input and parameter gradients of `layer` on input `x`."""
    projection = rng.standard_normal(layer.forward(x, mode).shape)

    def scalar():
        return float(np.sum(layer.forward(x, mode) * projection))

    scalar()  # populate caches
    dx = layer.backward(projection)
    results = [
        CheckResult(f"{name}/input", _rel_error(dx, numeric_gradient(scalar, x)), tolerance)
    ]
    for param in layer.params():
        analytic = param.grad.copy()
        numeric = numeric_gradient(scalar, param.value)
        results.append(
            CheckResult(f"{name}/{param.name}", _rel_error(analytic, numeric), tolerance)
        )
    return results


def gradient_check(n_trials: int = 100, seed: int = 0, tolerance: float = 1e-4):
    """Run every layer/loss check n_trials times; returns CheckResult list.

    Failures show up as entries with max_rel_error >= tolerance; nothing
    raises.
    """
    rng = np.random.default_rng(seed)
    worst: dict[str, float] = {}

    def record(results):
        for r in results:
            worst[r.name] = max(worst.get(r.name, 0.0), r.max_rel_error)

    for _ in range(n_trials):
        record(_check_layer(
            "dense", Dense(5, 3, rng), rng.standard_normal((2, 5)), "eval", rng, tolerance
        ))
        record(_check_layer(
            "conv2d", Conv2d(1, 1, rng), rng.standard_normal((1, 1, 4, 4)), "eval", rng, tolerance
        ))
        record(_check_layer(
            "maxpool", MaxPool2d(), rng.standard_normal((2, 1, 4, 4)), "eval", rng, tolerance
        ))
        record(_check_layer(
            "batchnorm_train", BatchNorm(3), rng.standard_normal((8, 3)) * 2.0 + 1.0,
            "train", rng, tolerance,
        ))

        # cross-entropy on random 4x4 logits
        logits = rng.standard_normal((4, 4))
        labels = rng.integers(0, 4, size=4)
        _, analytic = cross_entropy_loss(logits, labels)
        numeric = numeric_gradient(lambda: cross_entropy_loss(logits, labels)[0], logits)
        record([CheckResult("cross_entropy/logits", _rel_error(analytic, numeric), tolerance)])

        # triplet loss with the mined triplet list frozen, away from the hinge
        emb = rng.standard_normal((6, 3))
        trip_labels = np.array([0, 0, 0, 1, 1, 1])
        triplets = mine_triplets(emb, trip_labels, "hardest_negative", rng)
        active = [
            t for t in triplets
            if abs(np.linalg.norm(emb[t[0]] - emb[t[1]]) - np.linalg.norm(emb[t[0]] - emb[t[2]]))
            > 50 * FD_STEP
        ]
        if active:
            _, analytic = triplet_batch_loss(emb, active)
            numeric = numeric_gradient(lambda: triplet_batch_loss(emb, active)[0], emb)
            record([CheckResult("triplet/embeddings", _rel_error(analytic, numeric), tolerance)])

    return [CheckResult(name, err, tolerance) for name, err in sorted(worst.items())]


def format_report(results) -> str:
    lines = ["check                     max_rel_error   status"]
    for r in results:
        lines.append(f"{r.name:<25} {r.max_rel_error:12.3e}   {'ok' if r.passed else 'FAIL'}")
    return "\n".join(lines)
