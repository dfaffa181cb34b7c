"""Acceptance gate: eleven quantitative criteria, one pass/fail line each.

Each test aggregates its checks into a single verdict appended to the
session log that conftest echoes after the run. Tolerances and runtime
budgets are pinned constants here, not knobs.
"""

from __future__ import annotations

import json
import subprocess
import sys
import time
import warnings
from pathlib import Path

import numpy as np
import pytest

from dyport.attribution import gcn_value_and_grad, integrated_gradients
from dyport.baselines import KgeConfig, score_common_neighbors, score_pair, train_kge
from dyport.config import load_run_config
from dyport.corpus import cross_reference, parse_corpus
from dyport.evaluation import (
    EvalRecord,
    positive_records,
    roc_auc,
    sample_negatives,
    stratify_importance,
)
from dyport.gcn import (
    GcnConfig,
    GcnModel,
    decode,
    gcn_forward,
    init_model,
    train_link_predictor,
)
from dyport.measures import (
    COMPONENT_ORDER,
    combine_importance,
    edge_betweenness_restricted,
    eigenvector_centrality,
    read_importance,
)
from dyport.pipeline import run_pipeline
from dyport.snapshots import build_snapshot, new_edges, synth_features

from graphgen import graph_from_pairs, random_graph
from oracles import auc_double_loop, brute_force_edge_betweenness, dense_eigen_centrality

pytestmark = pytest.mark.filterwarnings("ignore::dyport.errors.DyportWarning")

MASTER_SEED = 0


def check(log, label: str, ok: bool, detail: str) -> None:
    line = f"{label}: {'PASS' if ok else 'FAIL'} ({detail})"
    log.append(line)
    assert ok, line


# -- shared pipeline runs --------------------------------------------------


@pytest.fixture(scope="session")
def demo_runs(demo_dir, tmp_path_factory):
    """Two CLI invocations of the full demo pipeline into fresh out dirs."""
    outs = []
    times = []
    for name in ("demo_a", "demo_b"):
        out = tmp_path_factory.mktemp(name)
        started = time.monotonic()
        proc = subprocess.run(
            [
                sys.executable, "-m", "dyport", "run",
                "--config", str(demo_dir / "run.cfg"),
                "--out", str(out),
                "--seed", str(MASTER_SEED),
            ],
            capture_output=True,
            text=True,
        )
        times.append(time.monotonic() - started)
        assert proc.returncode == 0, proc.stderr
        outs.append(out)
    return outs, times


def load_eval_records(out_dir: Path) -> tuple[dict[int, list[EvalRecord]], dict]:
    payload = json.loads((out_dir / "eval" / "records.json").read_text())
    by_year: dict[int, list[EvalRecord]] = {}
    for year_str, rows in payload["years"].items():
        by_year[int(year_str)] = [
            EvalRecord(
                subject=row["subject"],
                object=row["object"],
                label=row["label"],
                semantic_pairs=frozenset(tuple(tp) for tp in row["semantic_pairs"]),
                discovery_year=row["discovery_year"],
                importance=row["importance"],
                spawned_by=tuple(row["spawned_by"]) if row["spawned_by"] else None,
            )
            for row in rows
        ]
    scores = {
        model: {tuple(k.split("\t")): v for k, v in table.items()}
        for model, table in payload["models"].items()
    }
    return by_year, scores


# -- criteria --------------------------------------------------------------


def test_01_restricted_betweenness_matches_enumeration(acceptance_log):
    budget_s = 30.0
    rng = np.random.default_rng(MASTER_SEED)
    started = time.monotonic()
    worst = 0.0
    for _ in range(200):
        g = random_graph(rng, n=int(rng.integers(2, 13)), p=0.3)
        got = edge_betweenness_restricted(g, list(g.node_ids))
        want = brute_force_edge_betweenness(g, list(g.node_ids))
        assert got.keys() == want.keys()
        worst = max(worst, max(abs(got[p] - want[p]) for p in want))
    elapsed = time.monotonic() - started
    ok = worst <= 1e-9 and elapsed < budget_s
    check(
        acceptance_log,
        "criterion 1 betweenness vs enumeration",
        ok,
        f"200 graphs, max abs diff {worst:.2e}, {elapsed:.1f}s",
    )


def test_02_power_iteration_matches_dense_eigensolver(acceptance_log):
    budget_s = 30.0
    rng = np.random.default_rng(MASTER_SEED + 1)
    started = time.monotonic()
    worst = 0.0
    produced = 0
    while produced < 100:
        n = int(rng.integers(2, 51))
        g = random_graph(rng, n=n, p=float(rng.uniform(0.1, 0.5)))
        seen = {g.node_ids[0]}
        frontier = [g.node_ids[0]]
        while frontier:
            fresh = g.neighbors(frontier.pop()) - seen
            seen.update(fresh)
            frontier.extend(fresh)
        if len(seen) != g.n_nodes:
            continue
        produced += 1
        got = eigenvector_centrality(g)
        want = dense_eigen_centrality(g)
        worst = max(worst, max(abs(got[c] - want[c]) for c in want))
    elapsed = time.monotonic() - started
    ok = worst <= 1e-6 and elapsed < budget_s
    check(
        acceptance_log,
        "criterion 2 eigencentrality vs dense solver",
        ok,
        f"100 connected graphs, max abs diff {worst:.2e}, {elapsed:.1f}s",
    )


def _load_edge_list(path: Path) -> list[tuple[str, str]]:
    lines = path.read_text(encoding="utf-8").splitlines()
    return [tuple(line.split("\t")) for line in lines[1:]]


def _attribution_span(model, g, feats, targets) -> dict:
    adj = g.adjacency_matrix(weighted=False)
    z = gcn_forward(adj, feats.matrix, model)
    z0 = gcn_forward(np.zeros_like(adj), feats.matrix, model)
    spans = {}
    for a, b in targets:
        ia, ib = g.index_of(a), g.index_of(b)
        spans[(a, b)] = float(z[ia] @ z[ib]) - float(z0[ia] @ z0[ib])
    return spans


def test_03_attribution_sums_match_score_difference(acceptance_log, ig_fixture_dir):
    budget_s = 60.0
    fixtures = {
        "kite_4": [("a", "d"), ("b", "d")],
        "irregular_8": [("n0", "n7"), ("n1", "n5"), ("n2", "n6"), ("n3", "n7")],
    }
    started = time.monotonic()
    worst_rel = 0.0
    all_monotone = True
    for name, targets in fixtures.items():
        g = graph_from_pairs(_load_edge_list(ig_fixture_dir / f"{name}.tsv"))
        feats = synth_features(g, 4, seed=11)
        trained, _ = train_link_predictor(
            g, feats, [g.edge_pairs[0]], GcnConfig(epochs=40), seed=3
        )
        raw = init_model(4, GcnConfig(), seed=9)
        curved = GcnModel(w1=np.abs(raw.w1), w2=raw.w2, seed=9)
        for model in (trained, curved):
            spans = _attribution_span(model, g, feats, targets)
            result = integrated_gradients(model, g, feats, targets, steps=200)
            for t in targets:
                rel = result.residuals[t] / max(1.0, abs(spans[t]))
                worst_rel = max(worst_rel, rel)
        # the positive-curvature model keeps the midpoint-rule error well
        # above rounding noise, so each doubling must shrink the residual
        residues = [
            max(integrated_gradients(curved, g, feats, targets, steps=m).residuals.values())
            for m in (25, 50, 100, 200, 400)
        ]
        all_monotone &= all(a > b for a, b in zip(residues, residues[1:]))
    elapsed = time.monotonic() - started
    ok = worst_rel <= 1e-3 and all_monotone and elapsed < budget_s
    check(
        acceptance_log,
        "criterion 3 attribution completeness",
        ok,
        f"worst relative residual {worst_rel:.2e} at 200 steps, "
        f"monotone over 25..400: {all_monotone}, {elapsed:.1f}s",
    )


def test_04_adjacency_gradient_matches_finite_differences(acceptance_log):
    budget_s = 60.0
    started = time.monotonic()
    eps = 1e-4
    worst_rel = 0.0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        g = random_graph(rng, n=int(rng.integers(4, 11)), p=0.4)
        x = rng.standard_normal((g.n_nodes, 4))
        model = init_model(4, GcnConfig(hidden=6, z_dim=3), seed=seed)
        fn = gcn_value_and_grad(model, x, (0, g.n_nodes - 1))
        s = 0.6 * g.adjacency_matrix() + 0.1
        _, grad = fn(s)
        numeric = np.zeros_like(s)
        for i in range(g.n_nodes):
            for j in range(g.n_nodes):
                sp = s.copy()
                sp[i, j] += eps
                sm = s.copy()
                sm[i, j] -= eps
                numeric[i, j] = (fn(sp)[0] - fn(sm)[0]) / (2 * eps)
        rel = np.abs(grad - numeric) / np.maximum(np.abs(numeric), 1e-5)
        worst_rel = max(worst_rel, float(rel.max()))
    elapsed = time.monotonic() - started
    ok = worst_rel <= 1e-4 and elapsed < budget_s
    check(
        acceptance_log,
        "criterion 4 adjacency gradient vs finite differences",
        ok,
        f"50 weight seeds, worst relative error {worst_rel:.2e}, {elapsed:.1f}s",
    )


def _score_records(pos: list[float], neg: list[float]) -> list[EvalRecord]:
    out = []
    for i, s in enumerate(pos):
        out.append(EvalRecord(subject=f"p{i}", object=f"q{i}", label="positive", score=s))
    for i, s in enumerate(neg):
        out.append(EvalRecord(subject=f"n{i}", object=f"m{i}", label="negative", score=s))
    return out


def test_05_auc_equals_pairwise_indicator_mean(acceptance_log):
    rng = np.random.default_rng(MASTER_SEED + 5)
    mismatches = 0
    for trial in range(1000):
        total = int(rng.integers(2, 201))
        n_pos = int(rng.integers(1, total))
        if trial % 2 == 0:
            scores = rng.standard_normal(total)
        else:
            # coarse grid forces plenty of exact ties
            scores = rng.integers(0, 8, size=total).astype(np.float64)
        pos, neg = list(scores[:n_pos]), list(scores[n_pos:])
        if roc_auc(_score_records(pos, neg)) != auc_double_loop(pos, neg):
            mismatches += 1
    perfect = roc_auc(_score_records([2.0, 3.0], [0.0, 1.0]))
    inverted = roc_auc(_score_records([0.0, 1.0], [2.0, 3.0]))
    ok = mismatches == 0 and perfect == 1.0 and inverted == 0.0
    check(
        acceptance_log,
        "criterion 5 rank AUC vs pairwise indicator",
        ok,
        f"1000 record sets, {mismatches} mismatches, "
        f"perfect {perfect}, inverted {inverted}",
    )


def test_06_combined_importance_bounds_and_rank_invariance(acceptance_log):
    rng = np.random.default_rng(MASTER_SEED + 6)
    in_bounds = True
    invariant = True
    for _ in range(100):
        n = int(rng.integers(2, 30))
        pairs = [(f"c{2 * k:03d}", f"c{2 * k + 1:03d}") for k in range(n)]
        components = {}
        for name in COMPONENT_ORDER:
            if name in ("mentions", "citations"):
                values = rng.integers(0, 50, size=n).astype(np.float64)
            else:
                values = np.round(rng.standard_normal(n), 4)
            components[name] = dict(zip(pairs, values.tolist()))
        base = combine_importance(components, pairs)
        in_bounds &= all(0.0 <= v.combined <= 1.0 for v in base.values())
        for name in COMPONENT_ORDER:
            shifted = dict(components)
            shifted[name] = {p: 10.0 * v + 3.0 for p, v in components[name].items()}
            redone = combine_importance(shifted, pairs)
            invariant &= all(
                redone[p].combined == base[p].combined for p in base
            )
    ok = in_bounds and invariant
    check(
        acceptance_log,
        "criterion 6 combined importance bounds and affine invariance",
        ok,
        f"100 corpora, bounds {in_bounds}, bit-identical under 10x+3 {invariant}",
    )


def test_07_negative_sampling_contract_on_demo(acceptance_log, demo_runs, demo_dir):
    (out, _), _times = demo_runs[0], demo_runs[1]
    by_year, _scores = load_eval_records(out)
    bundle = parse_corpus(demo_dir)
    xref = cross_reference(bundle)
    cfg = load_run_config(demo_dir / "run.cfg")
    assert cfg.negatives_per_positive == 10
    checked = 0
    violations = []
    for year, records in by_year.items():
        g_year = build_snapshot(xref, year)
        positives = {r.pair for r in records if r.label == "positive"}
        for r in records:
            if r.label != "negative":
                continue
            checked += 1
            src = r.spawned_by
            if src is None or r.subject != src[0]:
                violations.append((year, r.pair, "subject"))
            elif not (
                bundle.nodes[r.object].semantic_types
                & bundle.nodes[src[1]].semantic_types
            ):
                violations.append((year, r.pair, "type"))
            elif g_year.has_edge(r.pair):
                violations.append((year, r.pair, "present"))
            elif r.pair in positives:
                violations.append((year, r.pair, "positive"))
    ok = checked > 0 and not violations
    check(
        acceptance_log,
        "criterion 7 negative sampling contract",
        ok,
        f"{checked} negatives over {len(by_year)} years, "
        f"{len(violations)} violations, N=10",
    )


def test_08_importance_tertiles(acceptance_log, demo_runs):
    (out, _), _times = demo_runs[0], demo_runs[1]
    by_year, scores = load_eval_records(out)
    imp = {p: v.combined for p, v in read_importance(out / "importance.tsv").items()}
    records = [r.scored(scores["gcn"][r.pair]) for r in by_year[2008]]
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        reports = stratify_importance(records, imp, bins=3)
    positives = [r for r in records if r.label == "positive"]
    sizes = [rep.n_pos for rep in reports]
    sizes_ok = len(reports) == 3 and max(sizes) - min(sizes) <= 1
    coverage_ok = sum(sizes) == len(positives)

    ordered = sorted(positives, key=lambda r: (imp[r.pair], r.pair))
    chunks = np.array_split(np.arange(len(ordered)), 3)
    recomputed_ok = True
    disjoint_ok = True
    seen_pairs = set()
    for rep, chunk in zip(reports, chunks):
        bin_pos = [ordered[i] for i in chunk]
        bin_pairs = {r.pair for r in bin_pos}
        if bin_pairs & seen_pairs:
            disjoint_ok = False
        seen_pairs |= bin_pairs
        bin_neg = [
            r for r in records if r.label == "negative" and r.spawned_by in bin_pairs
        ]
        recomputed_ok &= rep.auc == roc_auc(bin_pos + bin_neg)
        recomputed_ok &= rep.n_neg == len(bin_neg)
    ok = sizes_ok and coverage_ok and disjoint_ok and recomputed_ok
    check(
        acceptance_log,
        "criterion 8 importance tertiles",
        ok,
        f"bins {sizes}, disjoint {disjoint_ok}, cover {coverage_ok}, "
        f"per-bin AUC recomputed {recomputed_ok}",
    )


def test_09_predictors_beat_floors_on_two_cluster(acceptance_log, two_cluster_dir):
    budget_s = 120.0
    started = time.monotonic()
    bundle = parse_corpus(two_cluster_dir)
    xref = cross_reference(bundle)
    g_prev, g_train, g_test = (build_snapshot(xref, y) for y in (1999, 2000, 2001))
    positives = [(a, b, 2001) for a, b in new_edges(g_train, g_test).edges]
    metas = {n: bundle.nodes[n] for n in g_train.node_ids}
    records = positive_records(positives, metas) + sample_negatives(
        positives, metas, g_test, 10, MASTER_SEED
    )
    pairs = sorted({r.pair for r in records})

    feats_prev = synth_features(g_prev, 8, MASTER_SEED)
    feats_train = synth_features(g_train, 8, MASTER_SEED)
    gcn, _ = train_link_predictor(
        g_prev, feats_prev, new_edges(g_prev, g_train), GcnConfig(), MASTER_SEED
    )
    z = gcn_forward(g_train.adjacency_matrix(weighted=True), feats_train.matrix, gcn)
    scores = {
        "gcn": {
            p: decode(z, (g_train.index_of(p[0]), g_train.index_of(p[1])))
            for p in pairs
        }
    }
    for variant in ("translation", "bilinear"):
        model, _ = train_kge(g_train, variant, KgeConfig(), MASTER_SEED)
        scores[variant] = {p: score_pair(model, p) for p in pairs}
    scores["common_neighbors"] = {
        p: float(score_common_neighbors(g_train, p)) for p in pairs
    }
    rng = np.random.default_rng(MASTER_SEED)
    scores["random"] = {p: float(rng.random()) for p in pairs}

    auc = {
        name: roc_auc([r.scored(table[r.pair]) for r in records])
        for name, table in scores.items()
    }
    elapsed = time.monotonic() - started
    ok = (
        auc["gcn"] >= 0.8
        and auc["translation"] >= 0.8
        and auc["bilinear"] >= 0.8
        and auc["common_neighbors"] >= 0.7
        and 0.4 <= auc["random"] <= 0.6
        and elapsed < budget_s
    )
    detail = ", ".join(f"{k} {v:.3f}" for k, v in auc.items())
    check(acceptance_log, "criterion 9 learning floors", ok, f"{detail}, {elapsed:.1f}s")


def test_10_temporal_reports_and_refit_comparison(acceptance_log, drift_dir, tmp_path):
    aucs = {}
    temporal_keys = {}
    for name in ("stale", "retrained"):
        cfg = load_run_config(
            drift_dir / f"{name}.cfg", out_dir=tmp_path / name, seed=MASTER_SEED
        )
        run_pipeline(cfg)
        rows = json.loads((tmp_path / name / "report.json").read_text())
        temporal = {
            r["stratum_key"]: r["auc"]
            for r in rows
            if r["stratum_kind"] == "temporal" and r["model_id"] == "gcn"
        }
        temporal_keys[name] = sorted(temporal)
        aucs[name] = temporal["2003"]
    shape_ok = temporal_keys["stale"] == ["2001", "2002", "2003"]
    margin = aucs["retrained"] - aucs["stale"]
    ok = shape_ok and margin >= -0.02
    check(
        acceptance_log,
        "criterion 10 temporal protocol and refit",
        ok,
        f"stale years {temporal_keys['stale']}, final-year stale {aucs['stale']:.3f} "
        f"vs retrained {aucs['retrained']:.3f}",
    )


def test_11_end_to_end_determinism_and_runtime(acceptance_log, demo_runs):
    (out_a, out_b), times = demo_runs
    budget_s = 180.0
    report_a = (out_a / "report.json").read_bytes()
    report_b = (out_b / "report.json").read_bytes()
    identical = report_a == report_b
    fast = max(times) < budget_s
    ok = identical and fast
    check(
        acceptance_log,
        "criterion 11 end-to-end determinism",
        ok,
        f"report.json byte-identical {identical}, "
        f"runs {times[0]:.1f}s / {times[1]:.1f}s",
    )
