"""Regenerate the committed corpus fixtures under tests/data/.

Every fixture is produced deterministically from fixed seeds, so a rerun
leaves the committed files byte-identical. Run with --verify to also
parse each corpus through the library and print basic counts.
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

REPO = Path(__file__).resolve().parent.parent
DATA = REPO / "tests" / "data"

# a 6-clique split into edges present from the start, edges appearing at
# the training year, and edges appearing at the test year
CLIQUE_BASE = [(0, 1), (0, 4), (0, 5), (1, 2), (1, 5), (2, 3), (3, 4), (3, 5), (4, 5)]
CLIQUE_TRAIN = [(0, 2), (1, 3), (2, 4)]
CLIQUE_TEST = [(0, 3), (1, 4), (2, 5)]


def write_tsv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    lines = ["\t".join(header)] + ["\t".join(row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_manifest(path: Path, year_min: int, year_max: int, types: list[str]) -> None:
    text = (
        f"schema_version = 1\n"
        f"year_min = {year_min}\n"
        f"year_max = {year_max}\n"
        f"semantic_types = {';'.join(types)}\n"
        f"time_resolution = year\n"
    )
    path.write_text(text, encoding="utf-8")


def write_config(path: Path, entries: list[tuple[str, str]]) -> None:
    lines = [f"{key} = {value}" for key, value in entries]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


class CorpusWriter:
    """Accumulates nodes, dated edges, and citations, then writes TSVs."""

    def __init__(self, out_dir: Path, year_min: int, year_max: int, types: list[str]):
        self.out = out_dir
        self.year_min = year_min
        self.year_max = year_max
        self.types = types
        self.nodes: dict[str, str] = {}
        self.mentions: list[tuple[str, str, str, int]] = []
        self.curated: list[tuple[str, str, str]] = []
        self.citations: list[tuple[str, str]] = []
        self.doc_year: dict[str, int] = {}
        self._doc_serial = 0

    def node(self, concept: str, semantic: str) -> str:
        self.nodes[concept] = semantic
        return concept

    def new_doc(self, year: int) -> str:
        doc = f"p{self._doc_serial:04d}"
        self._doc_serial += 1
        self.doc_year[doc] = year
        return doc

    def mention(self, a: str, b: str, year: int, doc: str | None = None) -> str:
        if doc is None:
            doc = self.new_doc(year)
        lo, hi = sorted((a, b))
        self.mentions.append((lo, hi, doc, year))
        return doc

    def curate(self, a: str, b: str, source: str = "dbA") -> None:
        lo, hi = sorted((a, b))
        self.curated.append((lo, hi, source))

    def edge(self, a: str, b: str, year: int, source: str = "dbA") -> str:
        """A curated pair first mentioned in the given year."""
        self.curate(a, b, source)
        return self.mention(a, b, year)

    def cite(self, citing: str, cited: str) -> None:
        self.citations.append((citing, cited))

    def write(self) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        write_manifest(self.out / "manifest.cfg", self.year_min, self.year_max, self.types)
        write_tsv(
            self.out / "nodes.tsv",
            ["concept_id", "semantic_types", "display_name"],
            [[c, t, ""] for c, t in sorted(self.nodes.items())],
        )
        seen = set()
        curated_rows = []
        for a, b, src in sorted(set(self.curated)):
            if (a, b, src) not in seen:
                seen.add((a, b, src))
                curated_rows.append([a, b, src])
        write_tsv(self.out / "curated.tsv", ["concept_a", "concept_b", "source_db"], curated_rows)
        write_tsv(
            self.out / "mentions.tsv",
            ["concept_a", "concept_b", "doc_id", "year"],
            [[a, b, d, str(y)] for a, b, d, y in sorted(self.mentions)],
        )
        write_tsv(
            self.out / "citations.tsv",
            ["citing_doc", "cited_doc"],
            [[c, d] for c, d in sorted(set(self.citations))],
        )


def make_two_cluster() -> None:
    """Two 6-cliques joined by three bridges.

    In-clique edges are withheld until 2000 (training targets) and 2001
    (test positives); two extra bridges appear in 2002 so attribution has
    upcoming links to explain.
    """
    w = CorpusWriter(DATA / "two_cluster", 1998, 2002, ["thing"])
    for prefix in ("a", "b"):
        for i in range(6):
            w.node(f"{prefix}{i}", "thing")
    first_docs = []
    for prefix in ("a", "b"):
        for i, j in CLIQUE_BASE:
            first_docs.append(w.edge(f"{prefix}{i}", f"{prefix}{j}", 1999))
    for i in (0, 2, 4):
        first_docs.append(w.edge(f"a{i}", f"b{i}", 1999))
    later_docs = []
    for prefix in ("a", "b"):
        for i, j in CLIQUE_TRAIN:
            later_docs.append(w.edge(f"{prefix}{i}", f"{prefix}{j}", 2000))
        for i, j in CLIQUE_TEST:
            later_docs.append(w.edge(f"{prefix}{i}", f"{prefix}{j}", 2001))
    for i in (1, 3):
        later_docs.append(w.edge(f"a{i}", f"b{i}", 2002))
    for k, doc in enumerate(later_docs):
        w.cite(doc, first_docs[k % len(first_docs)])
    w.write()
    write_config(
        DATA / "two_cluster" / "run.cfg",
        [
            ("corpus_dir", "."),
            ("train_year", "2000"),
            ("test_year", "2001"),
            ("horizon_year", "2001"),
        ],
    )


def make_drift() -> None:
    """Three 8-node ring communities whose interconnections shift over time.

    Through 2000 the k ring is isolated; bridges into it appear in 2001
    and 2002, and the 2003 edges close wedges those bridges created. A
    model scoring with the 2000 snapshot cannot see any of that structure,
    while one refit on the 2002 cut can.
    """
    w = CorpusWriter(DATA / "drift", 1998, 2004, ["thing"])
    for prefix in ("g", "h", "k"):
        for i in range(8):
            w.node(f"{prefix}{i}", "thing")
    base_docs = []
    for prefix in ("g", "h", "k"):
        for i in range(8):
            base_docs.append(w.edge(f"{prefix}{i}", f"{prefix}{(i + 1) % 8}", 1999))
    schedule = {
        2000: [("g0", "g2"), ("g4", "g6"), ("h0", "h2"), ("h4", "h6"), ("g0", "h0")],
        2001: [("g1", "g3"), ("h1", "h3"), ("k0", "k2"), ("g2", "h2"), ("h0", "k0")],
        2002: [("k1", "k3"), ("g5", "g7"), ("h5", "h7"), ("g4", "k4"), ("h6", "k6")],
        2003: [("g4", "k5"), ("h0", "k1"), ("h6", "k7"), ("g4", "k3"),
               ("h0", "k7"), ("g5", "k4")],
        2004: [("k5", "k7"), ("g3", "g5")],
    }
    k = 0
    for year in sorted(schedule):
        for a, b in schedule[year]:
            doc = w.edge(a, b, year)
            w.cite(doc, base_docs[k % len(base_docs)])
            k += 1
    w.write()
    shared = [
        ("corpus_dir", "."),
        ("models", "gcn"),
    ]
    write_config(
        DATA / "drift" / "stale.cfg",
        shared + [("train_year", "2000"), ("test_year", "2001"), ("horizon_year", "2003")],
    )
    write_config(
        DATA / "drift" / "retrained.cfg",
        shared + [("train_year", "2002"), ("test_year", "2003"), ("horizon_year", "2003")],
    )


def make_demo(seed: int = 20240811) -> None:
    """A 120-node three-type corpus with ten years of edge growth.

    All nodes are connected by 2000 via a random backbone; each later year
    adds a batch of fresh pairs, so the 2008-2010 window has enough new
    edges for stratified evaluation. A handful of mentioned-but-uncurated
    and curated-but-unmentioned pairs exercise the cross-reference filter.
    """
    rng = np.random.default_rng(seed)
    w = CorpusWriter(DATA / "demo", 2000, 2010, ["gene", "disease", "chem"])
    names = []
    for prefix, semantic in (("gn", "gene"), ("ds", "disease"), ("ch", "chem")):
        for i in range(40):
            names.append(w.node(f"{prefix}{i:02d}", semantic))
    dual = {
        "gn38": "gene;chem",
        "gn39": "gene;disease",
        "ds38": "disease;chem",
        "ds39": "disease;gene",
        "ch38": "chem;gene",
        "ch39": "chem;disease",
    }
    for concept, semantic in dual.items():
        w.node(concept, semantic)

    existing: set[tuple[str, str]] = set()
    docs_by_year: dict[int, list[str]] = {y: [] for y in range(2000, 2011)}

    def add_edge(a: str, b: str, year: int) -> None:
        pair = tuple(sorted((a, b)))
        existing.add(pair)
        doc = w.edge(a, b, year)
        docs_by_year[year].append(doc)
        # some pairs keep getting mentioned in later years
        for later in range(year + 1, 2011):
            if rng.random() < 0.15:
                extra = w.mention(a, b, later)
                docs_by_year[later].append(extra)

    order = list(names)
    rng.shuffle(order)
    for i in range(1, len(order)):
        j = int(rng.integers(0, i))
        add_edge(order[i], order[j], 2000)

    per_year = {y: 20 for y in range(2001, 2008)}
    per_year.update({2008: 18, 2009: 18, 2010: 18})
    for year in sorted(per_year):
        added = 0
        while added < per_year[year]:
            a, b = rng.choice(len(names), size=2, replace=False)
            pair = tuple(sorted((names[int(a)], names[int(b)])))
            if pair in existing:
                continue
            add_edge(pair[0], pair[1], year)
            added += 1

    # mentioned but never curated: dropped by the cross-reference step
    for k in range(5):
        a, b = rng.choice(len(names), size=2, replace=False)
        pair = tuple(sorted((names[int(a)], names[int(b)])))
        if pair not in existing:
            w.mention(pair[0], pair[1], 2004 + k % 3)
    # curated but never mentioned: likewise dropped
    for k in range(5):
        a, b = rng.choice(len(names), size=2, replace=False)
        pair = tuple(sorted((names[int(a)], names[int(b)])))
        if pair not in existing:
            w.curate(pair[0], pair[1], "dbB")

    all_docs = sorted(w.doc_year)
    for doc in all_docs:
        year = w.doc_year[doc]
        older = [d for y in range(2000, year) for d in docs_by_year[y]]
        if not older:
            continue
        n_cites = int(rng.integers(0, 4))
        for idx in rng.choice(len(older), size=min(n_cites, len(older)), replace=False):
            w.cite(doc, older[int(idx)])
    w.write()
    write_config(
        DATA / "demo" / "run.cfg",
        [
            ("corpus_dir", "."),
            ("train_year", "2007"),
            ("test_year", "2008"),
            ("horizon_year", "2010"),
        ],
    )


def make_attribution_graphs() -> None:
    """Small fixed graphs for attribution sum checks: a 4-node kite and an
    8-node graph with mixed degrees."""
    out = DATA / "ig_fixtures"
    out.mkdir(parents=True, exist_ok=True)
    kite = [("a", "b"), ("b", "c"), ("a", "c"), ("c", "d")]
    write_tsv(out / "kite_4.tsv", ["a", "b"], [[a, b] for a, b in kite])
    eight = [
        ("n0", "n1"), ("n0", "n2"), ("n0", "n3"), ("n1", "n2"), ("n3", "n4"),
        ("n4", "n5"), ("n5", "n6"), ("n6", "n7"), ("n5", "n7"), ("n2", "n4"),
    ]
    write_tsv(out / "irregular_8.tsv", ["a", "b"], [[a, b] for a, b in eight])


def verify() -> None:
    from dyport.corpus import cross_reference, parse_corpus
    from dyport.snapshots import build_snapshot, new_edges

    for name in ("two_cluster", "drift", "demo"):
        bundle = parse_corpus(DATA / name)
        xref = cross_reference(bundle)
        man = bundle.manifest
        print(f"{name}: {len(bundle.nodes)} nodes, {len(xref)} edges, "
              f"years {man.year_min}..{man.year_max}")
        for year in range(man.year_min + 1, man.year_max + 1):
            prev = build_snapshot(xref, year - 1)
            cur = build_snapshot(xref, year)
            print(f"  {year}: {cur.n_edges} edges ({len(new_edges(prev, cur))} new)")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--verify", action="store_true", help="parse the results and print counts")
    args = parser.parse_args()
    make_two_cluster()
    make_drift()
    make_demo()
    make_attribution_graphs()
    print(f"fixtures written under {DATA}")
    if args.verify:
        verify()


if __name__ == "__main__":
    main()
