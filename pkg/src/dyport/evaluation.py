"""Typed negative sampling, exact ROC AUC, and stratified reporting.

The AUC here follows the strict-inequality convention: a tie between a
positive and a negative score earns no credit. `tie_credit=True` switches
to the conventional half-credit treatment for comparison against other
toolkits; it is off by default.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from dyport.corpus import NodeMeta, Pair, canonical_pair
from dyport.errors import DyportWarning, ValidationError
from dyport.snapshots import SnapshotGraph

TypePair = tuple[str, str]


def type_pairs(
    subject_types: frozenset[str], object_types: frozenset[str]
) -> frozenset[TypePair]:
    """All unordered semantic-type pairs an edge belongs to. Concepts with
    several types place the edge in every applicable stratum."""
    out = set()
    for ts in subject_types:
        for to in object_types:
            out.add((ts, to) if ts <= to else (to, ts))
    return frozenset(out)


@dataclass(frozen=True)
class EvalRecord:
    """One scored pair in the evaluation set.

    Negatives inherit `semantic_pairs` from the positive that spawned
    them and point back to it through `spawned_by`; `discovery_year` and
    `importance` are populated for positives only.
    """

    subject: str
    object: str
    label: str  # "positive" | "negative"
    score: float = 0.0
    semantic_pairs: frozenset[TypePair] = field(default_factory=frozenset)
    discovery_year: int | None = None
    importance: float | None = None
    spawned_by: Pair | None = None

    @property
    def pair(self) -> Pair:
        return canonical_pair(self.subject, self.object)

    def scored(self, value: float) -> "EvalRecord":
        return replace(self, score=float(value))


@dataclass(frozen=True)
class StratumReport:
    kind: str  # "overall" | "semantic" | "importance" | "temporal"
    key: str
    auc: float
    n_pos: int
    n_neg: int


def positive_records(
    positives: Iterable[tuple[str, str, int]],
    nodes: Mapping[str, NodeMeta],
    importance: Mapping[Pair, float] | None = None,
) -> list[EvalRecord]:
    """Wrap discovered (subject, object, year) triples as evaluation
    records, attaching semantic-type pairs and optional importance."""
    out = []
    for s, o, year in sorted(positives):
        if s not in nodes or o not in nodes:
            raise ValidationError(f"positive ({s!r}, {o!r}) has unknown concepts")
        pair = canonical_pair(s, o)
        out.append(
            EvalRecord(
                subject=s,
                object=o,
                label="positive",
                semantic_pairs=type_pairs(
                    nodes[s].semantic_types, nodes[o].semantic_types
                ),
                discovery_year=year,
                importance=None if importance is None else importance.get(pair),
            )
        )
    return out


def sample_negatives(
    positives: Iterable[tuple[str, str, int]],
    nodes: Mapping[str, NodeMeta],
    g_test: SnapshotGraph,
    n_per_positive: int,
    seed: int,
) -> list[EvalRecord]:
    """For each positive (s, o, year), draw up to `n_per_positive` distinct
    corrupted pairs (s, o') where o' shares a semantic type with o, the
    pair is no edge of the test-year snapshot, and it is not itself a
    positive. Sampling is uniform without replacement and seeded; an
    exhausted candidate pool yields fewer negatives plus a warning.
    """
    if n_per_positive < 1:
        raise ValidationError("need at least one negative per positive")
    positives = sorted(positives)
    positive_pairs = {canonical_pair(s, o) for s, o, _ in positives}
    by_type: dict[str, list[str]] = {}
    for name in sorted(nodes):
        for t in nodes[name].semantic_types:
            by_type.setdefault(t, []).append(name)
    rng = np.random.default_rng(seed)
    out = []
    for s, o, _year in positives:
        if o not in nodes:
            raise ValidationError(f"positive object {o!r} has no metadata")
        pool = set()
        for t in nodes[o].semantic_types:
            pool.update(by_type.get(t, ()))
        pool.discard(o)
        pool.discard(s)
        candidates = [
            cand
            for cand in sorted(pool)
            if canonical_pair(s, cand) not in positive_pairs
            and not g_test.has_edge(canonical_pair(s, cand))
        ]
        take = min(n_per_positive, len(candidates))
        if take < n_per_positive:
            warnings.warn(
                f"candidate pool exhausted for positive ({s}, {o}): "
                f"{take} of {n_per_positive} negatives",
                DyportWarning,
            )
        if take == 0:
            continue
        chosen = rng.choice(len(candidates), size=take, replace=False)
        pairs = type_pairs(nodes[s].semantic_types, nodes[o].semantic_types)
        for idx in sorted(chosen):
            out.append(
                EvalRecord(
                    subject=s,
                    object=candidates[idx],
                    label="negative",
                    semantic_pairs=pairs,
                    spawned_by=canonical_pair(s, o),
                )
            )
    return out


def _split_scores(records: Sequence[EvalRecord]) -> tuple[np.ndarray, np.ndarray]:
    pos = np.array([r.score for r in records if r.label == "positive"], dtype=np.float64)
    neg = np.array([r.score for r in records if r.label == "negative"], dtype=np.float64)
    if len(pos) == 0 or len(neg) == 0:
        raise ValidationError("AUC needs at least one positive and one negative")
    if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(neg))):
        raise ValidationError("AUC scores must be finite")
    return pos, neg


def roc_auc(records: Sequence[EvalRecord], tie_credit: bool = False) -> float:
    """Fraction of (negative, positive) pairs ranked correctly, computed
    with sorted-array rank counts instead of the quadratic double loop.
    Ties count 0 by default, 1/2 with `tie_credit`."""
    pos, neg = _split_scores(records)
    neg_sorted = np.sort(neg)
    below = np.searchsorted(neg_sorted, pos, side="left")
    wins = float(below.sum())
    if tie_credit:
        upto = np.searchsorted(neg_sorted, pos, side="right")
        wins += 0.5 * float((upto - below).sum())
    return wins / (len(pos) * len(neg))


def _report(kind: str, key: str, records: Sequence[EvalRecord], tie_credit: bool) -> StratumReport:
    return StratumReport(
        kind=kind,
        key=key,
        auc=roc_auc(records, tie_credit=tie_credit),
        n_pos=sum(1 for r in records if r.label == "positive"),
        n_neg=sum(1 for r in records if r.label == "negative"),
    )


def overall_report(records: Sequence[EvalRecord], tie_credit: bool = False) -> StratumReport:
    return _report("overall", "all", records, tie_credit)


def stratify_semantic(
    records: Sequence[EvalRecord], tie_credit: bool = False
) -> list[StratumReport]:
    """One report per unordered semantic-type pair holding both classes;
    multi-type records are counted in every stratum they belong to."""
    strata: dict[TypePair, list[EvalRecord]] = {}
    for r in records:
        for tp in r.semantic_pairs:
            strata.setdefault(tp, []).append(r)
    out = []
    for tp in sorted(strata):
        members = strata[tp]
        labels = {r.label for r in members}
        if labels != {"positive", "negative"}:
            warnings.warn(
                f"semantic stratum {tp[0]}|{tp[1]} lacks a class; omitted",
                DyportWarning,
            )
            continue
        out.append(_report("semantic", f"{tp[0]}|{tp[1]}", members, tie_credit))
    return out


def _bin_names(bins: int) -> list[str]:
    if bins == 3:
        return ["low", "medium", "high"]
    return [f"bin{i + 1}" for i in range(bins)]


def stratify_importance(
    records: Sequence[EvalRecord],
    importance: Mapping[Pair, float],
    bins: int = 3,
    tie_credit: bool = False,
) -> list[StratumReport]:
    """Cut positives into `bins` contiguous groups of near-equal size by
    ascending combined importance (score ties broken by canonical pair);
    negatives follow the positive that spawned them."""
    if bins < 1:
        raise ValidationError("bins must be >= 1")
    pos = [r for r in records if r.label == "positive"]
    if len(pos) < bins:
        raise ValidationError(f"cannot cut {len(pos)} positives into {bins} bins")
    missing = [r.pair for r in pos if r.pair not in importance]
    if missing:
        raise ValidationError(f"positives lack importance scores: {missing[:3]}")
    order = sorted(pos, key=lambda r: (importance[r.pair], r.pair))
    names = _bin_names(bins)
    bin_of: dict[Pair, str] = {}
    buckets: dict[str, list[EvalRecord]] = {name: [] for name in names}
    for chunk, name in zip(np.array_split(np.arange(len(order)), bins), names):
        for i in chunk:
            rec = order[int(i)]
            bin_of[rec.pair] = name
            buckets[name].append(rec)
    for r in records:
        if r.label != "negative":
            continue
        if r.spawned_by is None or r.spawned_by not in bin_of:
            raise ValidationError(
                f"negative ({r.subject}, {r.object}) has no binned spawning positive"
            )
        buckets[bin_of[r.spawned_by]].append(r)
    return [_report("importance", name, buckets[name], tie_credit) for name in names]


def stratify_temporal(
    records_by_year: Mapping[int, Sequence[EvalRecord]],
    tie_credit: bool = False,
) -> list[StratumReport]:
    """One report per test year; years without both classes are omitted
    with a warning."""
    out = []
    for year in sorted(records_by_year):
        members = records_by_year[year]
        labels = {r.label for r in members}
        if labels != {"positive", "negative"}:
            warnings.warn(f"test year {year} lacks a class; omitted", DyportWarning)
            continue
        out.append(_report("temporal", str(year), members, tie_credit))
    return out


# ---------------------------------------------------------------------------
# report files


def report_rows(
    reports_by_model: Mapping[str, Sequence[StratumReport]],
    train_year: int,
    test_year: int,
    horizon_year: int,
) -> list[dict]:
    rows = []
    for model_id in sorted(reports_by_model):
        for rep in sorted(reports_by_model[model_id], key=lambda r: (r.kind, r.key)):
            rows.append(
                {
                    "stratum_kind": rep.kind,
                    "stratum_key": rep.key,
                    "auc": rep.auc,
                    "n_pos": rep.n_pos,
                    "n_neg": rep.n_neg,
                    "model_id": model_id,
                    "train_year": train_year,
                    "test_year": test_year,
                    "horizon_year": horizon_year,
                }
            )
    return rows


REPORT_FIELDS = [
    "stratum_kind",
    "stratum_key",
    "auc",
    "n_pos",
    "n_neg",
    "model_id",
    "train_year",
    "test_year",
    "horizon_year",
]


def write_report_json(rows: Sequence[dict], path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(list(rows), sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def write_report_csv(rows: Sequence[dict], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in REPORT_FIELDS})


def write_plot_csv(rows: Sequence[dict], path: str | Path) -> None:
    """Year-by-model AUC table for the temporal strata, for plotting."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["year", "model_id", "auc"])
        for row in rows:
            if row["stratum_kind"] != "temporal":
                continue
            writer.writerow([row["stratum_key"], row["model_id"], row["auc"]])
