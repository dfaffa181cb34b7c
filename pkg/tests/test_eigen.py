"""Power-iteration eigenvector centrality against a dense eigensolver."""

from __future__ import annotations

import numpy as np
import pytest

from dyport.errors import ConvergenceError, ValidationError
from dyport.measures import edge_ec_delta, eigenvector_centrality
from graphgen import graph_from_pairs, make_xref, random_graph
from dyport.snapshots import build_snapshot
from oracles import dense_eigen_centrality


def test_cycle_values_all_equal():
    g = graph_from_pairs([("a", "b"), ("b", "c"), ("c", "d"), ("a", "d")])
    cent = eigenvector_centrality(g)
    vals = list(cent.values())
    assert all(v == pytest.approx(vals[0], abs=1e-7) for v in vals)
    assert vals[0] == pytest.approx(0.5, abs=1e-7)


def test_star_center_and_leaves():
    g = graph_from_pairs([("hub", "l1"), ("hub", "l2"), ("hub", "l3")])
    cent = eigenvector_centrality(g)
    assert cent["hub"] == pytest.approx(0.70711, abs=1e-5)
    for leaf in ("l1", "l2", "l3"):
        assert cent[leaf] == pytest.approx(0.40825, abs=1e-5)


def test_single_edge():
    g = graph_from_pairs([("a", "b")])
    cent = eigenvector_centrality(g)
    assert cent["a"] == pytest.approx(1 / np.sqrt(2), abs=1e-8)
    assert cent["b"] == pytest.approx(1 / np.sqrt(2), abs=1e-8)


def test_bipartite_graph_converges():
    # complete bipartite K_{3,3}: plain power iteration would oscillate
    left = ["a1", "a2", "a3"]
    right = ["b1", "b2", "b3"]
    g = graph_from_pairs([(l, r) for l in left for r in right])
    cent = eigenvector_centrality(g)
    for node in left + right:
        assert cent[node] == pytest.approx(1 / np.sqrt(6), abs=1e-6)


def test_components_normalized_independently():
    g = graph_from_pairs([("a", "b"), ("c", "d"), ("d", "e"), ("c", "e")])
    cent = eigenvector_centrality(g)
    pair_norm = np.hypot(cent["a"], cent["b"])
    tri_norm = np.sqrt(cent["c"] ** 2 + cent["d"] ** 2 + cent["e"] ** 2)
    assert pair_norm == pytest.approx(1.0, abs=1e-7)
    assert tri_norm == pytest.approx(1.0, abs=1e-7)


def test_weights_shift_mass_toward_heavy_edge():
    g = graph_from_pairs([("a", "b"), ("b", "c")], weights=[5, 1])
    cent = eigenvector_centrality(g)
    assert cent["a"] > cent["c"]


def test_iteration_budget_error_carries_count():
    g = graph_from_pairs([("a", "b"), ("b", "c"), ("c", "d")])
    with pytest.raises(ConvergenceError) as exc:
        eigenvector_centrality(g, max_iters=2)
    assert exc.value.iterations == 2


def test_empty_graph_rejected():
    xref = make_xref([("a", "b", [("d1", 2005)])])
    g = build_snapshot(xref, 2001)
    with pytest.raises(ValidationError, match="empty graph"):
        eigenvector_centrality(g)


@pytest.mark.parametrize("seed", range(25))
def test_matches_dense_oracle_on_random_graphs(seed):
    rng = np.random.default_rng(1000 + seed)
    g = random_graph(rng, n=int(rng.integers(5, 30)), p=0.25)
    fast = eigenvector_centrality(g)
    slow = dense_eigen_centrality(g)
    for node in g.node_ids:
        assert fast[node] == pytest.approx(slow[node], abs=1e-6)


class TestEcDelta:
    def test_identical_snapshots_give_zero(self):
        xref = make_xref([("a", "b", [("d1", 2001)]), ("b", "c", [("d2", 2001)])])
        g1 = build_snapshot(xref, 2001)
        g2 = build_snapshot(xref, 2002)
        delta = edge_ec_delta(g1, g2)
        assert all(v == pytest.approx(0.0, abs=1e-9) for v in delta.values())

    def test_vertex_transitive_snapshot_has_zero_gaps(self):
        g = graph_from_pairs([("a", "b"), ("b", "c"), ("c", "d"), ("a", "d")])
        delta = edge_ec_delta(g, g)
        assert all(v == pytest.approx(0.0, abs=1e-9) for v in delta.values())

    def test_path_to_star_matches_oracle(self):
        xref = make_xref(
            [
                ("a", "b", [("d1", 2001)]),
                ("b", "c", [("d2", 2001)]),
                ("b", "d", [("d3", 2002)]),
            ]
        )
        g1 = build_snapshot(xref, 2001)  # path a-b-c
        g2 = build_snapshot(xref, 2002)  # star centered at b
        delta = edge_ec_delta(g1, g2, pairs=[("a", "b")])
        c1 = dense_eigen_centrality(g1)
        c2 = dense_eigen_centrality(g2)
        expected = abs(c2["a"] - c2["b"]) - abs(c1["a"] - c1["b"])
        assert delta[("a", "b")] == pytest.approx(expected, abs=1e-6)

    def test_sign_is_preserved(self):
        # b's centrality pulls away from a's as b gains neighbors, so the
        # gap grows and the delta must come back positive, not folded by abs
        xref = make_xref(
            [
                ("a", "b", [("d1", 2001)]),
                ("b", "c", [("d2", 2001)]),
                ("b", "d", [("d3", 2002)]),
                ("b", "e", [("d4", 2002)]),
            ]
        )
        g1 = build_snapshot(xref, 2001)
        g2 = build_snapshot(xref, 2002)
        delta = edge_ec_delta(g1, g2, pairs=[("a", "b")])
        assert delta[("a", "b")] > 0

    def test_endpoint_missing_from_snapshot_rejected(self):
        xref = make_xref(
            [("a", "b", [("d1", 2001)]), ("c", "d", [("d2", 2002)])]
        )
        g1 = build_snapshot(xref, 2001)
        g2 = build_snapshot(xref, 2002)
        with pytest.raises(ValidationError, match="outside year 2001"):
            edge_ec_delta(g1, g2, pairs=[("c", "d")])
