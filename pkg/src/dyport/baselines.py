"""Reference predictors: translation and bilinear embeddings, neighborhood
heuristics, and a score-file adapter for external systems.

Both embedding variants train on the snapshot's edge list with uniform
head/tail corruption, one seeded sequential pass per epoch. Scores are
oriented so that higher always means more plausible; the translation
variant therefore returns the negated distance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from dyport.corpus import Pair
from dyport.errors import (
    CorpusFormatError,
    SchemaVersionError,
    TrainingDivergedError,
    ValidationError,
)
from dyport.snapshots import SnapshotGraph

CHECKPOINT_VERSION = "1"
SHARED_RELATION = "co_occurs"


@dataclass(frozen=True)
class KgeConfig:
    dim: int = 32
    margin: float = 1.0
    epochs: int = 200
    lr: float = 0.02
    norm: str = "l2"  # translation distance: "l1" or "l2"
    typed_relations: bool = False


@dataclass(frozen=True)
class KgeModel:
    variant: str  # "translation" | "bilinear"
    entity_index: dict[str, int]
    relation_index: dict[str, int]
    entities: np.ndarray  # n x dim
    relations: np.ndarray  # r x dim
    norm: str
    seed: int

    def entity(self, name: str) -> np.ndarray:
        try:
            return self.entities[self.entity_index[name]]
        except KeyError:
            raise ValidationError(f"unknown entity {name!r}")

    def relation(self, label: str) -> np.ndarray:
        """Embedding for a relation label; labels never seen in training
        fall back to the mean relation vector so evaluation-time type pairs
        that only occur among negatives still score."""
        idx = self.relation_index.get(label)
        if idx is None:
            return self.relations.mean(axis=0)
        return self.relations[idx]


def edge_relation_label(
    pair: Pair, node_types: Mapping[str, frozenset[str]] | None
) -> str:
    """Relation vocabulary: one shared label, or the unordered pair of the
    endpoints' (alphabetically first) semantic types when typing is on."""
    if node_types is None:
        return SHARED_RELATION
    try:
        ta = min(node_types[pair[0]])
        tb = min(node_types[pair[1]])
    except KeyError as exc:
        raise ValidationError(f"no semantic types for concept {exc.args[0]!r}")
    lo, hi = sorted((ta, tb))
    return f"{lo}|{hi}"


def score_translation(
    model: KgeModel, h: str, r: str, t: str
) -> float:
    """Negated translation distance -||h + r - t||; 0 is the best score."""
    hv = model.entity(h)
    tv = model.entity(t)
    rv = model.relation(r)
    d = hv + rv - tv
    if model.norm == "l1":
        return -float(np.sum(np.abs(d)))
    return -float(np.linalg.norm(d))


def score_bilinear(model: KgeModel, h: str, r: str, t: str) -> float:
    """Trilinear product, symmetric in head and tail."""
    return float(np.sum(model.entity(h) * model.relation(r) * model.entity(t)))


def score_pair(
    model: KgeModel,
    pair: Pair,
    node_types: Mapping[str, frozenset[str]] | None = None,
) -> float:
    """Score a canonical pair with the relation label the model was
    trained under: typed models need the node-type mapping, shared-label
    models ignore it."""
    if model.relation_index == {SHARED_RELATION: 0}:
        label = SHARED_RELATION
    else:
        if node_types is None:
            raise ValidationError(
                "typed-relation model needs the concept type mapping to score"
            )
        label = edge_relation_label(pair, node_types)
    h, t = pair
    if model.variant == "translation":
        return score_translation(model, h, label, t)
    return score_bilinear(model, h, label, t)


def train_kge(
    g: SnapshotGraph,
    variant: str,
    cfg: KgeConfig,
    seed: int,
    node_types: Mapping[str, frozenset[str]] | None = None,
) -> tuple[KgeModel, list[float]]:
    """Fit embeddings on the snapshot's edges.

    Translation uses margin-ranking loss, bilinear a logistic loss; both
    corrupt the head or tail of each edge uniformly at random per step.
    Corruption proposals that collide with a real edge (or the node
    itself) are redrawn a bounded number of times, since on small dense
    graphs unfiltered draws hit true edges often enough to wash out the
    ranking signal. Returns the model and the per-epoch mean loss trace.
    """
    if variant not in ("translation", "bilinear"):
        raise ValidationError(f"unknown embedding variant {variant!r}")
    if cfg.norm not in ("l1", "l2"):
        raise ValidationError(f"unknown norm {cfg.norm!r}")
    if g.n_edges == 0:
        raise ValidationError("cannot fit embeddings on an empty snapshot")
    types = node_types if cfg.typed_relations else None
    edges = sorted(g.edge_pairs)
    labels = [edge_relation_label(pair, types) for pair in edges]
    relation_names = sorted(set(labels))
    entity_names = list(g.node_ids)
    ent_index = {name: i for i, name in enumerate(entity_names)}
    rel_index = {name: i for i, name in enumerate(relation_names)}

    rng = np.random.default_rng(seed)
    if variant == "translation":
        bound = 6.0 / np.sqrt(cfg.dim)
        ent = rng.uniform(-bound, bound, size=(len(entity_names), cfg.dim))
        rel = rng.uniform(-bound, bound, size=(len(relation_names), cfg.dim))
    else:
        # A multiplicative scorer wants small symmetric starts: the wide
        # uniform box that suits translation puts initial logits deep in
        # sigmoid saturation and training stalls on some seeds.
        scale = 1.0 / np.sqrt(cfg.dim)
        ent = rng.normal(0.0, scale, size=(len(entity_names), cfg.dim))
        rel = rng.normal(0.0, scale, size=(len(relation_names), cfg.dim))

    edge_idx = [
        (ent_index[a], rel_index[lab], ent_index[b])
        for (a, b), lab in zip(edges, labels)
    ]
    n_ent = len(entity_names)
    edge_set = set()
    for hi, _ri, ti in edge_idx:
        edge_set.add((hi, ti))
        edge_set.add((ti, hi))
    step = _step_translation if variant == "translation" else _step_bilinear
    losses: list[float] = []

    for epoch in range(cfg.epochs):
        # Keep entity vectors inside the unit ball; without this the
        # margin objective can inflate norms instead of separating pairs.
        norms = np.linalg.norm(ent, axis=1, keepdims=True)
        np.divide(ent, norms, out=ent, where=norms > 1.0)
        total = 0.0
        for hi, ri, ti in edge_idx:
            nh, nt = hi, ti
            for _attempt in range(20):
                corrupt_head = bool(rng.integers(0, 2))
                ci = int(rng.integers(0, n_ent))
                nh, nt = (ci, ti) if corrupt_head else (hi, ci)
                if nh != nt and (nh, nt) not in edge_set:
                    break
            total += step(ent, rel, hi, ri, ti, nh, nt, cfg)
        mean_loss = total / len(edge_idx)
        if not np.isfinite(mean_loss):
            raise TrainingDivergedError(epoch)
        losses.append(mean_loss)
    model = KgeModel(
        variant=variant,
        entity_index=ent_index,
        relation_index=rel_index,
        entities=ent,
        relations=rel,
        norm=cfg.norm,
        seed=seed,
    )
    return model, losses


def _distance_and_grad(d: np.ndarray, norm: str) -> tuple[float, np.ndarray]:
    if norm == "l1":
        return float(np.sum(np.abs(d))), np.sign(d)
    dist = float(np.linalg.norm(d))
    if dist == 0.0:
        return 0.0, np.zeros_like(d)
    return dist, d / dist


def _step_translation(ent, rel, hi, ri, ti, nh, nt, cfg: KgeConfig) -> float:
    d_pos = ent[hi] + rel[ri] - ent[ti]
    d_neg = ent[nh] + rel[ri] - ent[nt]
    dist_pos, g_pos = _distance_and_grad(d_pos, cfg.norm)
    dist_neg, g_neg = _distance_and_grad(d_neg, cfg.norm)
    loss = cfg.margin + dist_pos - dist_neg
    if loss <= 0.0:
        return 0.0
    lr = cfg.lr
    ent[hi] -= lr * g_pos
    ent[ti] += lr * g_pos
    ent[nh] += lr * g_neg
    ent[nt] -= lr * g_neg
    rel[ri] -= lr * (g_pos - g_neg)
    return loss


def _step_bilinear(ent, rel, hi, ri, ti, nh, nt, cfg: KgeConfig) -> float:
    s_pos = float(np.sum(ent[hi] * rel[ri] * ent[ti]))
    s_neg = float(np.sum(ent[nh] * rel[ri] * ent[nt]))
    loss = float(np.logaddexp(0.0, -s_pos) + np.logaddexp(0.0, s_neg))
    sig_pos = 0.5 * (1.0 - np.tanh(s_pos / 2.0))  # sigmoid(-s_pos)
    sig_neg = 0.5 * (1.0 + np.tanh(s_neg / 2.0))  # sigmoid(+s_neg)
    lr = cfg.lr
    g_h = -sig_pos * rel[ri] * ent[ti]
    g_t = -sig_pos * rel[ri] * ent[hi]
    g_nh = sig_neg * rel[ri] * ent[nt]
    g_nt = sig_neg * rel[ri] * ent[nh]
    g_r = -sig_pos * ent[hi] * ent[ti] + sig_neg * ent[nh] * ent[nt]
    ent[hi] -= lr * g_h
    ent[ti] -= lr * g_t
    ent[nh] -= lr * g_nh
    ent[nt] -= lr * g_nt
    rel[ri] -= lr * g_r
    return loss


def score_common_neighbors(g: SnapshotGraph, pair: Pair) -> float:
    """Count of shared neighbors in the snapshot."""
    return float(len(g.neighbors(pair[0]) & g.neighbors(pair[1])))


# ---------------------------------------------------------------------------
# score files


@dataclass(frozen=True)
class ScoreFile:
    scores: dict[Pair, float]

    def __len__(self) -> int:
        return len(self.scores)

    def score(self, pair: Pair) -> float:
        try:
            return self.scores[pair]
        except KeyError:
            raise ValidationError(f"score file has no row for pair {pair}")


def load_scores(path: str | Path) -> ScoreFile:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except FileNotFoundError:
        raise ValidationError(f"score file not found: {path}")
    if not lines or lines[0] != "a\tb\tscore":
        raise CorpusFormatError(path, 1, "expected header 'a<TAB>b<TAB>score'")
    out: dict[Pair, float] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise CorpusFormatError(path, lineno, f"expected 3 fields, got {len(fields)}")
        a, b = fields[0], fields[1]
        if not a or not b or a == b:
            raise CorpusFormatError(path, lineno, f"bad pair ({a!r}, {b!r})")
        pair = (a, b) if a < b else (b, a)
        try:
            value = float(fields[2])
        except ValueError:
            raise CorpusFormatError(path, lineno, f"score is not a number: {fields[2]!r}")
        if not np.isfinite(value):
            raise CorpusFormatError(path, lineno, "score is not finite")
        if pair in out:
            raise CorpusFormatError(path, lineno, f"duplicate pair {pair}")
        out[pair] = value
    return ScoreFile(scores=out)


def write_scores(scores: Mapping[Pair, float], path: str | Path) -> None:
    lines = ["a\tb\tscore"]
    for pair in sorted(scores):
        lines.append(f"{pair[0]}\t{pair[1]}\t{repr(float(scores[pair]))}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def save_kge(model: KgeModel, path: str | Path) -> None:
    payload = {
        "kind": "kge",
        "schema_version": CHECKPOINT_VERSION,
        "variant": model.variant,
        "norm": model.norm,
        "seed": model.seed,
        "entity_names": sorted(model.entity_index, key=model.entity_index.get),
        "relation_names": sorted(model.relation_index, key=model.relation_index.get),
        "entities": model.entities.tolist(),
        "relations": model.relations.tolist(),
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n", encoding="utf-8")


def load_kge(path: str | Path) -> KgeModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("kind") != "kge" or payload.get("schema_version") != CHECKPOINT_VERSION:
        raise SchemaVersionError(f"{path} is not a compatible embedding checkpoint")
    return KgeModel(
        variant=payload["variant"],
        entity_index={n: i for i, n in enumerate(payload["entity_names"])},
        relation_index={n: i for i, n in enumerate(payload["relation_names"])},
        entities=np.asarray(payload["entities"], dtype=np.float64),
        relations=np.asarray(payload["relations"], dtype=np.float64),
        norm=payload["norm"],
        seed=int(payload["seed"]),
    )
