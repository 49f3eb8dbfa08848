"""Losses: softmax cross-entropy and the hinge triplet loss with mining.

The triplet loss on embeddings a, p, n is max(d(a,p) - d(a,n) + margin, 0)
with Euclidean d; the subgradient at the hinge point is 0. Mining forms one
triplet per in-batch (anchor, positive) pair: either a uniformly random
violating negative or the nearest negative (the maximal-loss choice for a
fixed pair). Only selected triplets contribute gradients.
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractError

MINING_STRATEGIES = ("random_negative", "hardest_negative")


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def cross_entropy_loss(logits: np.ndarray, labels: np.ndarray):
    """Mean softmax cross-entropy; returns (loss, dLoss/dLogits)."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    batch, n_classes = logits.shape
    if labels.min() < 0 or labels.max() >= n_classes:
        raise ContractError(
            f"labels must lie in 0..{n_classes - 1}, got range "
            f"[{labels.min()}, {labels.max()}]"
        )
    probs = softmax(logits)
    loss = -np.mean(np.log(probs[np.arange(batch), labels] + 1e-300))
    grad = probs.copy()
    grad[np.arange(batch), labels] -= 1.0
    return loss, grad / batch


def triplet_loss(a: np.ndarray, p: np.ndarray, n: np.ndarray, margin: float = 0.0) -> float:
    """Hinge loss for a single (anchor, positive, negative) triplet."""
    a, p, n = (np.asarray(v, dtype=np.float64).reshape(-1) for v in (a, p, n))
    if a.shape != p.shape or a.shape != n.shape:
        raise ContractError("triplet embeddings must share one dimension")
    d_ap = np.linalg.norm(a - p)
    d_an = np.linalg.norm(a - n)
    return float(max(d_ap - d_an + margin, 0.0))


def mine_triplets(
    embeddings: np.ndarray,
    labels: np.ndarray,
    strategy: str,
    rng: np.random.Generator,
    margin: float = 0.0,
) -> list[tuple[int, int, int]]:
    """Pick one negative per same-label (anchor, positive) pair.

    random_negative draws uniformly among negatives with positive hinge loss
    (the pair is skipped if none violate); hardest_negative takes the
    nearest negative. A batch with fewer than 2 classes yields no triplets.
    """
    if strategy not in MINING_STRATEGIES:
        raise ContractError(f"strategy must be one of {MINING_STRATEGIES}")
    labels = np.asarray(labels, dtype=np.int64)
    if len(np.unique(labels)) < 2:
        return []
    emb = np.asarray(embeddings, dtype=np.float64)
    sq = np.sum(emb**2, axis=1)
    dist = np.sqrt(np.maximum(sq[:, None] + sq[None, :] - 2.0 * emb @ emb.T, 0.0))

    triplets = []
    n_items = len(labels)
    for anchor in range(n_items):
        negatives = np.flatnonzero(labels != labels[anchor])
        for positive in range(n_items):
            if positive == anchor or labels[positive] != labels[anchor]:
                continue
            if strategy == "hardest_negative":
                negative = negatives[np.argmin(dist[anchor, negatives])]
                triplets.append((anchor, positive, int(negative)))
            else:
                violating = negatives[
                    dist[anchor, positive] - dist[anchor, negatives] + margin > 0
                ]
                if len(violating) == 0:
                    continue
                triplets.append((anchor, positive, int(rng.choice(violating))))
    return triplets


def triplet_batch_loss(
    embeddings: np.ndarray,
    triplets: list[tuple[int, int, int]],
    margin: float = 0.0,
):
    """Mean hinge loss over selected triplets; returns (loss, dEmbeddings).

    Distances of 0 (duplicate points) get subgradient 0, like the hinge.
    """
    emb = np.asarray(embeddings, dtype=np.float64)
    grad = np.zeros_like(emb)
    if not triplets:
        return 0.0, grad
    total = 0.0
    scale = 1.0 / len(triplets)
    for anchor, positive, negative in triplets:
        ap = emb[anchor] - emb[positive]
        an = emb[anchor] - emb[negative]
        d_ap = np.linalg.norm(ap)
        d_an = np.linalg.norm(an)
        loss = d_ap - d_an + margin
        if loss <= 0.0:
            continue
        total += loss
        if d_ap > 0:
            unit_ap = ap / d_ap
            grad[anchor] += scale * unit_ap
            grad[positive] -= scale * unit_ap
        if d_an > 0:
            unit_an = an / d_an
            grad[anchor] -= scale * unit_an
            grad[negative] += scale * unit_an
    return total * scale, grad
