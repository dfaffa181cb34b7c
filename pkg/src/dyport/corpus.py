"""Corpus ingestion: TSV parsing, cross-referencing and bundle persistence.

A corpus is five UTF-8 TSV files (header row required) plus a flat
key-value manifest:

* ``nodes.tsv``      ``concept_id <TAB> semantic_types(;-sep) [<TAB> display_name]``
* ``curated.tsv``    ``concept_a <TAB> concept_b <TAB> source_db``
* ``mentions.tsv``   ``concept_a <TAB> concept_b <TAB> doc_id <TAB> year``
* ``citations.tsv``  ``citing_doc <TAB> cited_doc``
* ``features.tsv``   ``concept_id <TAB> year <TAB> v1,v2,...,vd``   (optional)

Curated pairs form the set of database-backed edges, mention rows the set of
literature co-occurrences; the benchmark keeps exactly the pairs present in
both, each carrying all of its (doc, year) mentions.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from dyport.errors import CorpusFormatError, SchemaVersionError, ValidationError

BUNDLE_SCHEMA_VERSION = "1"

Pair = tuple[str, str]


def canonical_pair(a: str, b: str) -> Pair:
    """Unordered pair, canonicalized lexicographically."""
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class NodeMeta:
    concept: str
    semantic_types: frozenset[str]
    display_name: str | None = None


@dataclass(frozen=True)
class MentionRecord:
    a: str
    b: str
    doc_id: str
    year: int

    @property
    def pair(self) -> Pair:
        return (self.a, self.b)


@dataclass(frozen=True)
class CorpusManifest:
    year_min: int
    year_max: int
    schema_version: str
    semantic_types: frozenset[str]
    feature_dim: int | None = None
    time_resolution: str = "year"
    provenance: str = ""

    def as_dict(self) -> dict:
        return {
            "year_min": self.year_min,
            "year_max": self.year_max,
            "schema_version": self.schema_version,
            "semantic_types": sorted(self.semantic_types),
            "feature_dim": self.feature_dim,
            "time_resolution": self.time_resolution,
            "provenance": self.provenance,
        }


@dataclass(frozen=True)
class CorpusPaths:
    nodes: Path
    curated: Path
    mentions: Path
    citations: Path
    manifest: Path
    features: Path | None = None

    @classmethod
    def from_dir(cls, directory: str | Path) -> "CorpusPaths":
        d = Path(directory)
        features = d / "features.tsv"
        return cls(
            nodes=d / "nodes.tsv",
            curated=d / "curated.tsv",
            mentions=d / "mentions.tsv",
            citations=d / "citations.tsv",
            manifest=d / "manifest.cfg",
            features=features if features.exists() else None,
        )


@dataclass
class CorpusBundle:
    """Validated corpus: nodes, curated pairs, mentions, citations, features."""

    nodes: dict[str, NodeMeta]
    curated: dict[Pair, frozenset[str]]
    mentions: tuple[MentionRecord, ...]
    citations: frozenset[tuple[str, str]]
    features: dict[tuple[str, int], np.ndarray] | None
    manifest: CorpusManifest

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CorpusBundle):
            return NotImplemented
        if (
            self.nodes != other.nodes
            or self.curated != other.curated
            or self.mentions != other.mentions
            or self.citations != other.citations
            or self.manifest != other.manifest
        ):
            return False
        if (self.features is None) != (other.features is None):
            return False
        if self.features is not None:
            assert other.features is not None
            if self.features.keys() != other.features.keys():
                return False
            return all(
                np.array_equal(v, other.features[k]) for k, v in self.features.items()
            )
        return True

    def mention_pairs(self) -> set[Pair]:
        """Unique unordered pairs appearing in the mention set."""
        return {m.pair for m in self.mentions}

    def doc_years(self) -> dict[str, int]:
        """Publication year per document, the minimum over its mention rows."""
        years: dict[str, int] = {}
        for m in self.mentions:
            prev = years.get(m.doc_id)
            if prev is None or m.year < prev:
                years[m.doc_id] = m.year
        return years


@dataclass(frozen=True)
class EdgeRecord:
    """One cross-referenced edge with every (doc, year) mention it carries."""

    a: str
    b: str
    mentions: tuple[tuple[str, int], ...]  # (doc_id, year), sorted by (year, doc)
    sources: frozenset[str]

    @property
    def pair(self) -> Pair:
        return (self.a, self.b)

    @property
    def first_year(self) -> int:
        return self.mentions[0][1]

    def docs_through(self, horizon: int) -> frozenset[str]:
        return frozenset(d for d, y in self.mentions if y <= horizon)


@dataclass(frozen=True)
class CrossRefCorpus:
    """The curated-and-mentioned edge set, keyed by canonical pair."""

    edges: dict[Pair, EdgeRecord] = field(hash=False)
    manifest: CorpusManifest = field(hash=False)
    token: str = ""

    def __len__(self) -> int:
        return len(self.edges)

    def sorted_edges(self) -> list[EdgeRecord]:
        return [self.edges[p] for p in sorted(self.edges)]


# ---------------------------------------------------------------------------
# manifest + TSV readers


def parse_manifest(path: str | Path) -> CorpusManifest:
    path = Path(path)
    raw: dict[str, str] = {}
    for lineno, line in enumerate(_read_lines(path), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise CorpusFormatError(path, lineno, "expected 'key = value'")
        key, _, value = stripped.partition("=")
        raw[key.strip()] = value.strip()

    def require(key: str) -> str:
        if key not in raw:
            raise CorpusFormatError(path, 0, f"manifest missing required key {key!r}")
        return raw[key]

    def as_int(key: str, value: str) -> int:
        try:
            return int(value)
        except ValueError:
            raise CorpusFormatError(path, 0, f"manifest key {key!r} is not an integer: {value!r}")

    year_min = as_int("year_min", require("year_min"))
    year_max = as_int("year_max", require("year_max"))
    if year_min > year_max:
        raise CorpusFormatError(path, 0, f"year_min {year_min} exceeds year_max {year_max}")
    types = frozenset(t for t in require("semantic_types").split(";") if t)
    if not types:
        raise CorpusFormatError(path, 0, "manifest declares no semantic types")
    resolution = raw.get("time_resolution", "year")
    if resolution != "year":
        raise CorpusFormatError(
            path, 0, f"unsupported time_resolution {resolution!r} (only 'year' is implemented)"
        )
    feature_dim = as_int("feature_dim", raw["feature_dim"]) if "feature_dim" in raw else None
    if feature_dim is not None and feature_dim < 1:
        raise CorpusFormatError(path, 0, "feature_dim must be >= 1")
    return CorpusManifest(
        year_min=year_min,
        year_max=year_max,
        schema_version=require("schema_version"),
        semantic_types=types,
        feature_dim=feature_dim,
        time_resolution=resolution,
        provenance=raw.get("provenance", ""),
    )


def _read_lines(path: Path) -> list[str]:
    try:
        return path.read_text(encoding="utf-8").splitlines()
    except FileNotFoundError:
        raise ValidationError(f"corpus file not found: {path}")


def _tsv_rows(path: Path, columns: list[str], optional_last: bool = False):
    """Yield (lineno, fields) for each data row, enforcing the header."""
    lines = _read_lines(path)
    if not lines:
        raise CorpusFormatError(path, 1, "missing header row")
    header = lines[0].split("\t")
    required = columns[:-1] if optional_last else columns
    if header != columns and header != required:
        raise CorpusFormatError(
            path, 1, f"bad header {header!r}, expected {columns!r}"
        )
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) == len(columns) or (optional_last and len(fields) == len(required)):
            yield lineno, fields
        else:
            raise CorpusFormatError(
                path, lineno, f"expected {len(columns)} tab-separated fields, got {len(fields)}"
            )


def _check_concept_token(path: Path, lineno: int, token: str, label: str) -> str:
    if not token:
        raise CorpusFormatError(path, lineno, f"empty {label}")
    if any(ch.isspace() for ch in token):
        raise CorpusFormatError(path, lineno, f"{label} {token!r} contains whitespace")
    return token


def _parse_nodes(path: Path, manifest: CorpusManifest) -> dict[str, NodeMeta]:
    nodes: dict[str, NodeMeta] = {}
    for lineno, fields in _tsv_rows(
        path, ["concept_id", "semantic_types", "display_name"], optional_last=True
    ):
        concept = _check_concept_token(path, lineno, fields[0], "concept_id")
        if concept in nodes:
            raise CorpusFormatError(path, lineno, f"duplicate concept {concept!r}")
        types = frozenset(t for t in fields[1].split(";") if t)
        if not types:
            raise CorpusFormatError(path, lineno, f"node {concept!r} has no semantic types")
        unknown = types - manifest.semantic_types
        if unknown:
            raise CorpusFormatError(
                path,
                lineno,
                f"semantic types {sorted(unknown)} not in the manifest vocabulary",
            )
        display = fields[2] if len(fields) > 2 and fields[2] else None
        nodes[concept] = NodeMeta(concept=concept, semantic_types=types, display_name=display)
    return nodes


def _require_known(path: Path, lineno: int, concept: str, nodes: Mapping[str, NodeMeta]) -> None:
    if concept not in nodes:
        raise CorpusFormatError(path, lineno, f"unknown concept {concept!r} (not in nodes.tsv)")


def _parse_curated(path: Path, nodes: Mapping[str, NodeMeta]) -> dict[Pair, frozenset[str]]:
    curated: dict[Pair, set[str]] = {}
    for lineno, fields in _tsv_rows(path, ["concept_a", "concept_b", "source_db"]):
        a = _check_concept_token(path, lineno, fields[0], "concept_a")
        b = _check_concept_token(path, lineno, fields[1], "concept_b")
        if a == b:
            raise CorpusFormatError(path, lineno, f"self-loop pair ({a!r}, {b!r})")
        _require_known(path, lineno, a, nodes)
        _require_known(path, lineno, b, nodes)
        if not fields[2]:
            raise CorpusFormatError(path, lineno, "empty source_db")
        curated.setdefault(canonical_pair(a, b), set()).add(fields[2])
    return {pair: frozenset(srcs) for pair, srcs in curated.items()}


def _parse_mentions(
    path: Path, nodes: Mapping[str, NodeMeta], manifest: CorpusManifest
) -> tuple[MentionRecord, ...]:
    seen: set[tuple[str, str, str]] = set()
    records: list[MentionRecord] = []
    for lineno, fields in _tsv_rows(path, ["concept_a", "concept_b", "doc_id", "year"]):
        a = _check_concept_token(path, lineno, fields[0], "concept_a")
        b = _check_concept_token(path, lineno, fields[1], "concept_b")
        if a == b:
            raise CorpusFormatError(path, lineno, f"self-loop mention ({a!r}, {b!r})")
        _require_known(path, lineno, a, nodes)
        _require_known(path, lineno, b, nodes)
        doc = _check_concept_token(path, lineno, fields[2], "doc_id")
        try:
            year = int(fields[3])
        except ValueError:
            raise CorpusFormatError(path, lineno, f"year is not an integer: {fields[3]!r}")
        if not manifest.year_min <= year <= manifest.year_max:
            raise CorpusFormatError(
                path,
                lineno,
                f"year {year} outside manifest range [{manifest.year_min}, {manifest.year_max}]",
            )
        pair = canonical_pair(a, b)
        key = (pair[0], pair[1], doc)
        if key in seen:
            raise CorpusFormatError(
                path, lineno, f"duplicate mention of pair {pair} in document {doc!r}"
            )
        seen.add(key)
        records.append(MentionRecord(a=pair[0], b=pair[1], doc_id=doc, year=year))
    records.sort(key=lambda m: (m.a, m.b, m.year, m.doc_id))
    return tuple(records)


def _parse_citations(path: Path) -> frozenset[tuple[str, str]]:
    edges: set[tuple[str, str]] = set()
    for lineno, fields in _tsv_rows(path, ["citing_doc", "cited_doc"]):
        citing = _check_concept_token(path, lineno, fields[0], "citing_doc")
        cited = _check_concept_token(path, lineno, fields[1], "cited_doc")
        if citing == cited:
            raise CorpusFormatError(path, lineno, f"document {citing!r} cites itself")
        edges.add((citing, cited))
    return frozenset(edges)


def _parse_features(
    path: Path, nodes: Mapping[str, NodeMeta], manifest: CorpusManifest
) -> dict[tuple[str, int], np.ndarray]:
    features: dict[tuple[str, int], np.ndarray] = {}
    dim = manifest.feature_dim
    for lineno, fields in _tsv_rows(path, ["concept_id", "year", "vector"]):
        concept = _check_concept_token(path, lineno, fields[0], "concept_id")
        _require_known(path, lineno, concept, nodes)
        try:
            year = int(fields[1])
        except ValueError:
            raise CorpusFormatError(path, lineno, f"year is not an integer: {fields[1]!r}")
        if not manifest.year_min <= year <= manifest.year_max:
            raise CorpusFormatError(path, lineno, f"year {year} outside manifest range")
        try:
            vec = np.array([float(v) for v in fields[2].split(",")], dtype=np.float64)
        except ValueError:
            raise CorpusFormatError(path, lineno, f"bad feature vector {fields[2]!r}")
        if not np.all(np.isfinite(vec)):
            raise CorpusFormatError(path, lineno, "feature vector has non-finite entries")
        if dim is None:
            dim = len(vec)
        if len(vec) != dim:
            raise CorpusFormatError(
                path, lineno, f"feature vector has dimension {len(vec)}, expected {dim}"
            )
        key = (concept, year)
        if key in features:
            raise CorpusFormatError(path, lineno, f"duplicate feature row for {key}")
        features[key] = vec
    return features


def parse_corpus(paths: CorpusPaths | str | Path) -> CorpusBundle:
    """Parse and validate a corpus directory or explicit path set.

    Rows violating an invariant are rejected with file and line diagnostics
    rather than silently dropped.
    """
    if not isinstance(paths, CorpusPaths):
        paths = CorpusPaths.from_dir(paths)
    manifest = parse_manifest(paths.manifest)
    nodes = _parse_nodes(paths.nodes, manifest)
    curated = _parse_curated(paths.curated, nodes)
    mentions = _parse_mentions(paths.mentions, nodes, manifest)
    citations = _parse_citations(paths.citations)
    features = None
    if paths.features is not None:
        features = _parse_features(paths.features, nodes, manifest)
    return CorpusBundle(
        nodes=nodes,
        curated=curated,
        mentions=mentions,
        citations=citations,
        features=features,
        manifest=manifest,
    )


# ---------------------------------------------------------------------------
# cross-referencing


def cross_reference(bundle: CorpusBundle) -> CrossRefCorpus:
    """Keep exactly the pairs present in both the curated set and the
    mention set; each kept edge carries all of its (doc, year) mentions."""
    by_pair: dict[Pair, list[tuple[str, int]]] = {}
    for m in bundle.mentions:
        by_pair.setdefault(m.pair, []).append((m.doc_id, m.year))
    edges: dict[Pair, EdgeRecord] = {}
    for pair, sources in bundle.curated.items():
        mention_list = by_pair.get(pair)
        if mention_list is None:
            continue
        mention_list.sort(key=lambda dy: (dy[1], dy[0]))
        edges[pair] = EdgeRecord(
            a=pair[0], b=pair[1], mentions=tuple(mention_list), sources=sources
        )
    token = _corpus_token(edges, bundle.manifest)
    return CrossRefCorpus(edges=edges, manifest=bundle.manifest, token=token)


def _corpus_token(edges: Mapping[Pair, EdgeRecord], manifest: CorpusManifest) -> str:
    h = hashlib.sha256()
    h.update(json.dumps(manifest.as_dict(), sort_keys=True).encode())
    for pair in sorted(edges):
        rec = edges[pair]
        h.update(repr((rec.a, rec.b, rec.mentions)).encode())
    return h.hexdigest()[:16]


# ---------------------------------------------------------------------------
# persistence


def save_bundle(bundle: CorpusBundle, path: str | Path) -> None:
    """Write the bundle as canonical JSON (sorted keys, sorted sets)."""
    payload = {
        "schema_version": BUNDLE_SCHEMA_VERSION,
        "manifest": bundle.manifest.as_dict(),
        "nodes": [
            [n.concept, sorted(n.semantic_types), n.display_name]
            for n in sorted(bundle.nodes.values(), key=lambda n: n.concept)
        ],
        "curated": [
            [a, b, sorted(bundle.curated[(a, b)])] for a, b in sorted(bundle.curated)
        ],
        "mentions": [[m.a, m.b, m.doc_id, m.year] for m in bundle.mentions],
        "citations": [list(c) for c in sorted(bundle.citations)],
        "features": None
        if bundle.features is None
        else [
            [cid, year, [float(v) for v in bundle.features[(cid, year)]]]
            for cid, year in sorted(bundle.features)
        ],
    }
    Path(path).write_text(
        json.dumps(payload, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )


def load_bundle(path: str | Path) -> CorpusBundle:
    """Inverse of :func:`save_bundle`; round-trips field for field."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise SchemaVersionError(f"unreadable bundle {path}: {exc}")
    if not isinstance(payload, dict) or payload.get("schema_version") != BUNDLE_SCHEMA_VERSION:
        raise SchemaVersionError(
            f"bundle {path} has schema_version {payload.get('schema_version')!r}, "
            f"expected {BUNDLE_SCHEMA_VERSION!r}"
        )
    man = payload["manifest"]
    manifest = CorpusManifest(
        year_min=man["year_min"],
        year_max=man["year_max"],
        schema_version=man["schema_version"],
        semantic_types=frozenset(man["semantic_types"]),
        feature_dim=man["feature_dim"],
        time_resolution=man["time_resolution"],
        provenance=man["provenance"],
    )
    nodes = {
        concept: NodeMeta(
            concept=concept, semantic_types=frozenset(types), display_name=display
        )
        for concept, types, display in payload["nodes"]
    }
    curated = {(a, b): frozenset(srcs) for a, b, srcs in payload["curated"]}
    mentions = tuple(
        MentionRecord(a=a, b=b, doc_id=doc, year=year)
        for a, b, doc, year in payload["mentions"]
    )
    citations = frozenset((c, d) for c, d in payload["citations"])
    features = None
    if payload["features"] is not None:
        features = {
            (cid, year): np.array(vec, dtype=np.float64)
            for cid, year, vec in payload["features"]
        }
    return CorpusBundle(
        nodes=nodes,
        curated=curated,
        mentions=mentions,
        citations=citations,
        features=features,
        manifest=manifest,
    )
