"""Cumulative yearly snapshots, new-edge sets and neighborhood queries.

``G_t`` contains every cross-referenced edge first mentioned in or before
year ``t``, weighted by the number of distinct mentioning documents through
``t``. Node indices are dense integers assigned in first-seen order over the
edge list sorted by (first mention year, pair); because that order is itself
cumulative, the indexing of ``G_t`` is a prefix of the indexing of ``G_{t+1}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from dyport.corpus import CorpusBundle, CrossRefCorpus, Pair
from dyport.errors import ValidationError

WEIGHT_MODES = ("cumulative", "yearly")


@dataclass(frozen=True)
class SnapshotGraph:
    """Immutable undirected weighted graph for one year of one corpus."""

    year: int
    node_ids: tuple[str, ...]
    edge_pairs: tuple[Pair, ...]
    weights: np.ndarray  # int64, aligned with edge_pairs
    token: str
    weight_mode: str = "cumulative"
    _index: dict[str, int] = field(default_factory=dict, repr=False, compare=False)
    _edge_index: dict[Pair, int] = field(default_factory=dict, repr=False, compare=False)
    _adj: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        self._index.update({c: i for i, c in enumerate(self.node_ids)})
        self._edge_index.update({p: i for i, p in enumerate(self.edge_pairs)})

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_edges(self) -> int:
        return len(self.edge_pairs)

    def index_of(self, concept: str) -> int:
        try:
            return self._index[concept]
        except KeyError:
            raise ValidationError(f"node {concept!r} not in snapshot year {self.year}")

    def has_node(self, concept: str) -> bool:
        return concept in self._index

    def has_edge(self, pair: Pair) -> bool:
        return pair in self._edge_index

    def weight_of(self, pair: Pair) -> int:
        return int(self.weights[self._edge_index[pair]])

    def neighbors(self, concept: str) -> frozenset[str]:
        self.index_of(concept)
        return self._neighbor_sets()[concept]

    def _neighbor_sets(self) -> dict[str, frozenset[str]]:
        cached = self._adj.get("nbrs")
        if cached is None:
            sets: dict[str, set[str]] = {c: set() for c in self.node_ids}
            for a, b in self.edge_pairs:
                sets[a].add(b)
                sets[b].add(a)
            cached = {c: frozenset(s) for c, s in sets.items()}
            self._adj["nbrs"] = cached
        return cached

    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Symmetric CSR arrays (indptr, indices, edge_ids), all int64.

        Each undirected edge appears once per direction, carrying the same
        edge id; both betweenness kernels consume this layout.
        """
        cached = self._adj.get("csr")
        if cached is None:
            n = self.n_nodes
            m = self.n_edges
            heads = np.empty(2 * m, dtype=np.int64)
            tails = np.empty(2 * m, dtype=np.int64)
            eids = np.empty(2 * m, dtype=np.int64)
            for e, (a, b) in enumerate(self.edge_pairs):
                i, j = self._index[a], self._index[b]
                heads[2 * e], tails[2 * e], eids[2 * e] = i, j, e
                heads[2 * e + 1], tails[2 * e + 1], eids[2 * e + 1] = j, i, e
            order = np.lexsort((tails, heads))
            heads, tails, eids = heads[order], tails[order], eids[order]
            indptr = np.zeros(n + 1, dtype=np.int64)
            np.add.at(indptr, heads + 1, 1)
            np.cumsum(indptr, out=indptr)
            cached = (indptr, tails, eids)
            self._adj["csr"] = cached
        return cached

    def adjacency_matrix(self, weighted: bool = True) -> np.ndarray:
        """Dense symmetric adjacency; entries are mention weights or 1s."""
        a = np.zeros((self.n_nodes, self.n_nodes), dtype=np.float64)
        for e, (u, v) in enumerate(self.edge_pairs):
            i, j = self._index[u], self._index[v]
            w = float(self.weights[e]) if weighted else 1.0
            a[i, j] = w
            a[j, i] = w
        return a

    def degrees(self, weighted: bool = False) -> np.ndarray:
        deg = np.zeros(self.n_nodes, dtype=np.float64)
        for e, (u, v) in enumerate(self.edge_pairs):
            w = float(self.weights[e]) if weighted else 1.0
            deg[self._index[u]] += w
            deg[self._index[v]] += w
        return deg

    def __iter__(self) -> Iterator[Pair]:
        return iter(self.edge_pairs)


@dataclass(frozen=True)
class NewEdgeSet:
    """Edges first appearing after ``base_year`` whose endpoints already
    existed at ``base_year``."""

    year: int
    base_year: int
    edges: tuple[Pair, ...]
    token: str

    def __len__(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class FeatureMatrix:
    year: int
    dim: int
    matrix: np.ndarray  # |N| x dim, float64, rows follow snapshot indexing


def build_snapshot(
    xref: CrossRefCorpus, year: int, weight_mode: str = "cumulative"
) -> SnapshotGraph:
    """Materialize ``G_year`` from the cross-referenced edge set.

    Cumulative mode weights each edge by its distinct mentioning documents
    through ``year``; yearly mode counts only documents dated exactly
    ``year`` (and may therefore yield weight 0 for old edges).
    """
    if weight_mode not in WEIGHT_MODES:
        raise ValidationError(f"unknown weight_mode {weight_mode!r}")
    man = xref.manifest
    if not man.year_min <= year <= man.year_max:
        raise ValidationError(
            f"snapshot year {year} outside corpus range [{man.year_min}, {man.year_max}]"
        )
    records = sorted(
        (rec for rec in xref.edges.values() if rec.first_year <= year),
        key=lambda r: (r.first_year, r.a, r.b),
    )
    node_ids: list[str] = []
    seen: set[str] = set()
    pairs: list[Pair] = []
    weights: list[int] = []
    for rec in records:
        for c in (rec.a, rec.b):
            if c not in seen:
                seen.add(c)
                node_ids.append(c)
        pairs.append(rec.pair)
        if weight_mode == "cumulative":
            weights.append(sum(1 for _, y in rec.mentions if y <= year))
        else:
            weights.append(sum(1 for _, y in rec.mentions if y == year))
    return SnapshotGraph(
        year=year,
        node_ids=tuple(node_ids),
        edge_pairs=tuple(pairs),
        weights=np.asarray(weights, dtype=np.int64),
        token=xref.token,
        weight_mode=weight_mode,
    )


def new_edges(g_prev: SnapshotGraph, g_next: SnapshotGraph) -> NewEdgeSet:
    """Edges of ``g_next`` absent from ``g_prev`` with both endpoints in
    ``g_prev``'s node set."""
    if g_prev.token != g_next.token:
        raise ValidationError("snapshots come from different corpora")
    if g_next.year <= g_prev.year:
        raise ValidationError(
            f"expected increasing years, got {g_prev.year} -> {g_next.year}"
        )
    kept = tuple(
        pair
        for pair in g_next.edge_pairs
        if not g_prev.has_edge(pair)
        and g_prev.has_node(pair[0])
        and g_prev.has_node(pair[1])
    )
    return NewEdgeSet(
        year=g_next.year, base_year=g_prev.year, edges=kept, token=g_next.token
    )


def second_order_neighborhood(g: SnapshotGraph, u: str) -> frozenset[str]:
    """Union of the neighborhoods of u's neighbors; contains u itself
    whenever u has any neighbor, and is empty for isolated nodes."""
    nbrs = g.neighbors(u)
    out: set[str] = set()
    for w in nbrs:
        out |= g.neighbors(w)
    return frozenset(out)


def synth_features(g: SnapshotGraph, dim: int, seed: int) -> FeatureMatrix:
    """Deterministic node features: normalized degree, normalized weighted
    degree, then seeded gaussian columns up to ``dim``."""
    if dim < 1:
        raise ValidationError("feature dimension must be >= 1")
    n = g.n_nodes
    cols: list[np.ndarray] = []
    deg = g.degrees(weighted=False)
    cols.append(deg / deg.max() if n and deg.max() > 0 else deg)
    if dim >= 2:
        wdeg = g.degrees(weighted=True)
        cols.append(wdeg / wdeg.max() if n and wdeg.max() > 0 else wdeg)
    if dim > 2:
        rng = np.random.default_rng(seed)
        cols.append(rng.standard_normal((n, dim - 2)))
    matrix = np.column_stack(cols) if n else np.zeros((0, dim))
    return FeatureMatrix(year=g.year, dim=dim, matrix=matrix[:, :dim])


def features_from_bundle(
    g: SnapshotGraph, bundle: CorpusBundle, year: int | None = None
) -> FeatureMatrix:
    """Feature rows loaded from the corpus feature table at ``year``
    (defaults to the snapshot year); every snapshot node must have a row."""
    if bundle.features is None:
        raise ValidationError("corpus bundle carries no feature table")
    year = g.year if year is None else year
    dim = bundle.manifest.feature_dim
    if dim is None:
        dim = len(next(iter(bundle.features.values())))
    matrix = np.zeros((g.n_nodes, dim), dtype=np.float64)
    for i, concept in enumerate(g.node_ids):
        vec = bundle.features.get((concept, year))
        if vec is None:
            raise ValidationError(
                f"no feature row for concept {concept!r} at year {year}"
            )
        matrix[i] = vec
    return FeatureMatrix(year=year, dim=dim, matrix=matrix)


def write_snapshot(g: SnapshotGraph, edges_path: str | Path, meta_path: str | Path) -> None:
    """Edge-list TSV (a, b, weight) plus a small JSON summary."""
    lines = ["a\tb\tweight"]
    for e, (a, b) in enumerate(g.edge_pairs):
        lines.append(f"{a}\t{b}\t{int(g.weights[e])}")
    Path(edges_path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    meta = {"year": g.year, "n_nodes": g.n_nodes, "n_edges": g.n_edges}
    Path(meta_path).write_text(json.dumps(meta, sort_keys=True) + "\n", encoding="utf-8")
