"""Two-layer graph-convolutional link predictor with explicit gradients.

The encoder is Z = N·rect(N·X·W1)·W2 with N the symmetrically normalized
self-looped adjacency; a pair's score is the dot product of its two embedding
rows. Training minimizes a logistic loss over the target edges against
uniformly sampled non-edges by full-batch gradient descent. All derivatives
are written out by hand, which keeps the dependency surface small and lets
the attribution code reuse the same backward pieces for gradients with
respect to the adjacency itself.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from dyport.corpus import Pair
from dyport.errors import (
    DyportWarning,
    SchemaVersionError,
    TrainingDivergedError,
    ValidationError,
)
from dyport.snapshots import FeatureMatrix, NewEdgeSet, SnapshotGraph

CHECKPOINT_VERSION = "1"


@dataclass(frozen=True)
class GcnConfig:
    hidden: int = 32
    z_dim: int = 16
    epochs: int = 200
    lr: float = 0.01
    neg_ratio: float = 1.0


@dataclass(frozen=True)
class GcnModel:
    w1: np.ndarray  # d x hidden
    w2: np.ndarray  # hidden x z
    seed: int

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.w1.shape[0], self.w1.shape[1], self.w2.shape[1])


def glorot_matrix(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_model(feature_dim: int, cfg: GcnConfig, seed: int) -> GcnModel:
    rng = np.random.default_rng(seed)
    w1 = glorot_matrix(rng, feature_dim, cfg.hidden)
    w2 = glorot_matrix(rng, cfg.hidden, cfg.z_dim)
    return GcnModel(w1=w1, w2=w2, seed=seed)


def normalized_adjacency(a: np.ndarray) -> np.ndarray:
    """D̃^{-1/2}(A + I)D̃^{-1/2} where D̃ are the self-looped row sums."""
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"adjacency must be square, got shape {a.shape}")
    at = a + np.eye(a.shape[0])
    d = at.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(d)
    return at * inv_sqrt[:, None] * inv_sqrt[None, :]


def gcn_forward(a: np.ndarray, x: np.ndarray, model: GcnModel) -> np.ndarray:
    """Node embeddings from a raw adjacency and feature matrix."""
    if x.shape[0] != a.shape[0]:
        raise ValidationError(
            f"feature rows {x.shape[0]} do not match adjacency size {a.shape[0]}"
        )
    if x.shape[1] != model.w1.shape[0]:
        raise ValidationError(
            f"feature dim {x.shape[1]} does not match model input dim {model.w1.shape[0]}"
        )
    n = normalized_adjacency(a)
    h = np.maximum(n @ x @ model.w1, 0.0)
    return n @ h @ model.w2


def decode(z: np.ndarray, pair: tuple[int, int]) -> float:
    i, j = pair
    return float(z[i] @ z[j])


def decode_many(z: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    return np.einsum("ik,ik->i", z[pairs[:, 0]], z[pairs[:, 1]])


def _resolve_targets(
    g: SnapshotGraph, targets: NewEdgeSet | Iterable[Pair]
) -> list[Pair]:
    pairs = list(targets.edges) if isinstance(targets, NewEdgeSet) else list(targets)
    if not pairs:
        raise ValidationError("no target edges to train on")
    for a, b in pairs:
        g.index_of(a)
        g.index_of(b)
    return pairs


def sample_non_edges(
    g: SnapshotGraph,
    count: int,
    rng: np.random.Generator,
    exclude: Iterable[Pair] = (),
) -> list[Pair]:
    """Uniform sample of distinct non-adjacent node pairs, never returning
    an existing edge or an excluded pair."""
    banned = set(exclude)
    names = sorted(g.node_ids)
    candidates = [
        (names[i], names[j])
        for i in range(len(names))
        for j in range(i + 1, len(names))
        if not g.has_edge((names[i], names[j])) and (names[i], names[j]) not in banned
    ]
    if count >= len(candidates):
        if count > len(candidates):
            warnings.warn(
                f"requested {count} non-edges but only {len(candidates)} exist",
                DyportWarning,
            )
        return candidates
    chosen = rng.choice(len(candidates), size=count, replace=False)
    return [candidates[k] for k in sorted(chosen)]


def train_link_predictor(
    g: SnapshotGraph,
    features: FeatureMatrix,
    targets: NewEdgeSet | Iterable[Pair],
    cfg: GcnConfig,
    seed: int,
) -> tuple[GcnModel, list[float]]:
    """Fit the encoder on the snapshot so that target pairs outscore sampled
    non-edges. Returns the model and the per-epoch loss trace (first entry is
    the pre-training loss, last the post-training loss)."""
    pos_pairs = _resolve_targets(g, targets)
    x = features.matrix
    if x.shape[0] != g.n_nodes:
        raise ValidationError("feature matrix does not match the snapshot")
    rng = np.random.default_rng(seed)
    model = init_model(x.shape[1], cfg, seed)
    n_neg = max(1, round(cfg.neg_ratio * len(pos_pairs)))
    neg_pairs = sample_non_edges(g, n_neg, rng, exclude=pos_pairs)

    idx = np.asarray(
        [[g.index_of(a), g.index_of(b)] for a, b in pos_pairs]
        + [[g.index_of(a), g.index_of(b)] for a, b in neg_pairs],
        dtype=np.int64,
    )
    y = np.concatenate([np.ones(len(pos_pairs)), -np.ones(len(neg_pairs))])

    n = normalized_adjacency(g.adjacency_matrix(weighted=True))
    p = n @ x
    w1, w2 = model.w1.copy(), model.w2.copy()
    losses: list[float] = []

    def loss_and_grads(w1, w2):
        u = p @ w1
        h = np.maximum(u, 0.0)
        q = n @ h
        z = q @ w2
        scores = decode_many(z, idx)
        margins = y * scores
        # mean softplus(-margin), computed stably for both signs
        loss = float(np.mean(np.logaddexp(0.0, -margins)))
        # sigmoid(-margin) via tanh, which never overflows
        dscore = -y * 0.5 * (1.0 - np.tanh(margins / 2.0)) / len(y)
        g_z = np.zeros_like(z)
        np.add.at(g_z, idx[:, 0], dscore[:, None] * z[idx[:, 1]])
        np.add.at(g_z, idx[:, 1], dscore[:, None] * z[idx[:, 0]])
        g_w2 = q.T @ g_z
        g_q = g_z @ w2.T
        g_h = n @ g_q  # n is symmetric
        g_u = g_h * (u > 0.0)
        g_w1 = p.T @ g_u
        return loss, g_w1, g_w2

    for epoch in range(cfg.epochs):
        loss, g_w1, g_w2 = loss_and_grads(w1, w2)
        if not np.isfinite(loss):
            raise TrainingDivergedError(epoch)
        losses.append(loss)
        w1 = w1 - cfg.lr * g_w1
        w2 = w2 - cfg.lr * g_w2
    final_loss, _, _ = loss_and_grads(w1, w2)
    if not np.isfinite(final_loss):
        raise TrainingDivergedError(cfg.epochs)
    losses.append(final_loss)
    return GcnModel(w1=w1, w2=w2, seed=seed), losses


def save_gcn(model: GcnModel, path: str | Path) -> None:
    payload = {
        "kind": "gcn",
        "schema_version": CHECKPOINT_VERSION,
        "dims": list(model.dims),
        "seed": model.seed,
        "w1": model.w1.tolist(),
        "w2": model.w2.tolist(),
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n", encoding="utf-8")


def load_gcn(path: str | Path) -> GcnModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("kind") != "gcn" or payload.get("schema_version") != CHECKPOINT_VERSION:
        raise SchemaVersionError(f"{path} is not a compatible encoder checkpoint")
    return GcnModel(
        w1=np.asarray(payload["w1"], dtype=np.float64),
        w2=np.asarray(payload["w2"], dtype=np.float64),
        seed=int(payload["seed"]),
    )
