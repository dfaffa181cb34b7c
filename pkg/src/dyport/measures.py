"""Per-edge importance components and their percentile-rank combination.

Six components per edge: integrated-gradients attribution (computed in
:mod:`dyport.attribution` and passed in), shortest-path edge betweenness
restricted to future-connection endpoints, the change of the eigenvector
centrality gap across consecutive snapshots, second-order Jaccard overlap
(low overlap = more surprising edge), distinct-document mention counts, and
accumulated citations of the mentioning documents. The combined score is the
mean percentile rank of the six, each oriented so larger means more important.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from dyport._kernels import edge_betweenness_kernel
from dyport.corpus import EdgeRecord, Pair
from dyport.errors import ConvergenceError, DyportWarning, ValidationError
from dyport.snapshots import SnapshotGraph, second_order_neighborhood

COMPONENT_ORDER = ("ig", "bc", "ec_delta", "jc2", "mentions", "citations")


@dataclass(frozen=True)
class ImportanceVector:
    edge: Pair
    ig: float
    bc: float
    ec_delta: float
    jc2: float
    mentions: int
    citations: int
    combined: float


# ---------------------------------------------------------------------------
# betweenness


def edge_betweenness_restricted(
    g: SnapshotGraph, targets: Iterable[str]
) -> dict[Pair, float]:
    """Edge betweenness summed over unordered pairs of target nodes.

    For each pair {s, t} of distinct targets the edge receives the fraction
    of s-t shortest paths (by hop count) running through it; unreachable
    pairs contribute nothing. ``targets`` equal to the whole node set gives
    ordinary edge betweenness.
    """
    target_list = sorted(set(targets))
    for t in target_list:
        g.index_of(t)  # raises on unknown nodes
    if not target_list:
        warnings.warn(
            "empty betweenness target set: all edge scores are 0", DyportWarning
        )
        return {pair: 0.0 for pair in g.edge_pairs}
    indptr, indices, edge_ids = g.csr()
    is_target = np.zeros(g.n_nodes, dtype=np.uint8)
    sources = np.asarray([g.index_of(t) for t in target_list], dtype=np.int64)
    is_target[sources] = 1
    bc = edge_betweenness_kernel(
        g.n_nodes, indptr, indices, edge_ids, g.n_edges, sources, is_target
    )
    return {pair: float(bc[e]) for e, pair in enumerate(g.edge_pairs)}


# ---------------------------------------------------------------------------
# eigenvector centrality


def _components(g: SnapshotGraph) -> list[list[int]]:
    indptr, indices, _ = g.csr()
    seen = np.zeros(g.n_nodes, dtype=bool)
    comps: list[list[int]] = []
    for start in range(g.n_nodes):
        if seen[start]:
            continue
        comp = [start]
        seen[start] = True
        head = 0
        while head < len(comp):
            u = comp[head]
            head += 1
            for v in indices[indptr[u] : indptr[u + 1]]:
                if not seen[v]:
                    seen[v] = True
                    comp.append(int(v))
        comps.append(comp)
    return comps


def eigenvector_centrality(
    g: SnapshotGraph, tol: float = 1e-8, max_iters: int = 10000
) -> dict[str, float]:
    """Principal eigenvector of the weighted adjacency by power iteration.

    Each connected component is solved and L2-normalized independently, so
    values are non-negative and every component contributes unit norm. The
    iteration runs on A + I: the shift leaves eigenvectors untouched while
    breaking the +/- eigenvalue symmetry of bipartite components that would
    otherwise keep plain power iteration oscillating forever.
    """
    if g.n_nodes == 0:
        raise ValidationError("eigenvector centrality of an empty graph")
    a = g.adjacency_matrix(weighted=True)
    out = np.zeros(g.n_nodes)
    for comp in _components(g):
        if len(comp) == 1:
            out[comp[0]] = 1.0
            continue
        idx = np.asarray(comp)
        sub = a[np.ix_(idx, idx)]
        v = np.ones(len(comp))
        v /= np.linalg.norm(v)
        for _ in range(max_iters):
            nxt = sub @ v + v
            nxt /= np.linalg.norm(nxt)
            if np.max(np.abs(nxt - v)) < tol:
                v = nxt
                break
            v = nxt
        else:
            raise ConvergenceError(max_iters)
        out[idx] = v
    return {concept: float(out[i]) for i, concept in enumerate(g.node_ids)}


def edge_ec_delta(
    g_t: SnapshotGraph,
    g_next: SnapshotGraph,
    pairs: Iterable[Pair] | None = None,
) -> dict[Pair, float]:
    """Change of the per-edge centrality gap |C(u) - C(v)| from one snapshot
    to the next; positive when the endpoints drift apart in centrality."""
    cent_t = eigenvector_centrality(g_t)
    cent_next = eigenvector_centrality(g_next)
    chosen = tuple(pairs) if pairs is not None else g_t.edge_pairs
    out: dict[Pair, float] = {}
    for u, v in chosen:
        if u not in cent_t or v not in cent_t:
            raise ValidationError(f"edge ({u}, {v}) has an endpoint outside year {g_t.year}")
        if u not in cent_next or v not in cent_next:
            raise ValidationError(
                f"edge ({u}, {v}) has an endpoint outside year {g_next.year}"
            )
        gap_t = abs(cent_t[u] - cent_t[v])
        gap_next = abs(cent_next[u] - cent_next[v])
        out[(u, v)] = gap_next - gap_t
    return out


# ---------------------------------------------------------------------------
# neighborhood overlap and literature counts


def jaccard2(g_prev: SnapshotGraph, pair: Pair) -> float:
    """Jaccard overlap of the two-hop neighborhoods of the endpoints in the
    snapshot preceding the edge's appearance; 0 when both are empty."""
    u, v = pair
    n2u = second_order_neighborhood(g_prev, u)
    n2v = second_order_neighborhood(g_prev, v)
    union = n2u | n2v
    if not union:
        return 0.0
    return len(n2u & n2v) / len(union)


def mention_count(rec: EdgeRecord, horizon: int) -> int:
    """Distinct documents mentioning the edge in years up to ``horizon``."""
    return len(rec.docs_through(horizon))


def citation_sum(
    rec: EdgeRecord,
    citations: frozenset[tuple[str, str]],
    doc_years: Mapping[str, int],
    horizon: int,
) -> int:
    """Citations received by the edge's mentioning documents through
    ``horizon``. A citing document of unknown year counts: the citation
    graph carries no dates of its own, and only documents seen in the
    mention table have a derivable year."""
    docs = rec.docs_through(horizon)
    total = 0
    for citing, cited in citations:
        if cited in docs:
            year = doc_years.get(citing)
            if year is None or year <= horizon:
                total += 1
    return total


# ---------------------------------------------------------------------------
# percentile ranks and combination


def pct_rank(values: Sequence[float]) -> np.ndarray:
    """Percentile rank of each value in its multiset: average-tie rank
    divided by the multiset size, so the maximum always maps to 1.0."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ValidationError("percentile rank of an empty multiset")
    n = arr.size
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(n, dtype=np.float64)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        avg = (i + j + 2) / 2.0  # mean of 1-based ranks i+1 .. j+1
        ranks[order[i : j + 1]] = avg
        i = j + 1
    return ranks / n


def combine_importance(
    components: Mapping[str, Mapping[Pair, float]],
    edges: Iterable[Pair],
) -> dict[Pair, ImportanceVector]:
    """Mean percentile rank of the six components per edge.

    The overlap component is negated before ranking (an edge whose two-hop
    neighborhoods barely overlap is the surprising, important one); all
    other components rank as-is, larger first.
    """
    edge_list = sorted(edges)
    if not edge_list:
        return {}
    missing = [name for name in COMPONENT_ORDER if name not in components]
    if missing:
        raise ValidationError(f"missing importance components: {missing}")
    raw: dict[str, np.ndarray] = {}
    for name in COMPONENT_ORDER:
        col = np.empty(len(edge_list))
        for k, pair in enumerate(edge_list):
            if pair not in components[name]:
                raise ValidationError(f"component {name!r} lacks a value for {pair}")
            col[k] = components[name][pair]
        if not np.all(np.isfinite(col)):
            raise ValidationError(f"component {name!r} has non-finite values")
        raw[name] = col
    ranked = np.empty((len(edge_list), len(COMPONENT_ORDER)))
    for c, name in enumerate(COMPONENT_ORDER):
        col = -raw[name] if name == "jc2" else raw[name]
        ranked[:, c] = pct_rank(col)
    combined = ranked.mean(axis=1)
    out: dict[Pair, ImportanceVector] = {}
    for k, pair in enumerate(edge_list):
        out[pair] = ImportanceVector(
            edge=pair,
            ig=float(raw["ig"][k]),
            bc=float(raw["bc"][k]),
            ec_delta=float(raw["ec_delta"][k]),
            jc2=float(raw["jc2"][k]),
            mentions=int(raw["mentions"][k]),
            citations=int(raw["citations"][k]),
            combined=float(combined[k]),
        )
    return out


def write_importance(vectors: Mapping[Pair, ImportanceVector], path: str | Path) -> None:
    """Tab-separated export, one row per edge in canonical pair order."""
    lines = ["a\tb\tig\tbc\tec_delta\tjc2\tmentions\tcitations\tcombined"]
    for pair in sorted(vectors):
        v = vectors[pair]
        lines.append(
            "\t".join(
                [
                    pair[0],
                    pair[1],
                    repr(v.ig),
                    repr(v.bc),
                    repr(v.ec_delta),
                    repr(v.jc2),
                    str(v.mentions),
                    str(v.citations),
                    repr(v.combined),
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_importance(path: str | Path) -> dict[Pair, ImportanceVector]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    expected = "a\tb\tig\tbc\tec_delta\tjc2\tmentions\tcitations\tcombined"
    if not lines or lines[0] != expected:
        raise ValidationError(f"{path}: bad importance table header")
    out: dict[Pair, ImportanceVector] = {}
    for line in lines[1:]:
        if not line:
            continue
        a, b, ig, bc, ecd, jc2v, men, cit, comb = line.split("\t")
        out[(a, b)] = ImportanceVector(
            edge=(a, b),
            ig=float(ig),
            bc=float(bc),
            ec_delta=float(ecd),
            jc2=float(jc2v),
            mentions=int(men),
            citations=int(cit),
            combined=float(comb),
        )
    return out
