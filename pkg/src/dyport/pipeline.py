"""Stage orchestration from corpus ingestion to stratified reports.

Stages run in a fixed order; each one records a fingerprint of its inputs
(file digests plus the config entries it reads) in `cache.json` under the
output directory and is skipped when nothing changed. All randomness is
derived from the master seed via `stage_seed`, so repeated runs with the
same corpus, config, and seed write byte-identical reports.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
import warnings
from pathlib import Path
from typing import Mapping

from dyport import __version__
from dyport.attribution import integrated_gradients
from dyport.baselines import (
    load_kge,
    load_scores,
    save_kge,
    score_common_neighbors,
    score_pair,
    train_kge,
    write_scores,
)
from dyport.config import STAGES, ModelSpec, RunConfig, stage_seed
from dyport.corpus import (
    BUNDLE_SCHEMA_VERSION,
    CorpusPaths,
    Pair,
    cross_reference,
    load_bundle,
    parse_corpus,
    save_bundle,
)
from dyport.errors import (
    CorpusFormatError,
    DyportError,
    DyportWarning,
    SchemaVersionError,
    ValidationError,
)
from dyport.evaluation import (
    EvalRecord,
    overall_report,
    positive_records,
    report_rows,
    sample_negatives,
    stratify_importance,
    stratify_semantic,
    stratify_temporal,
    write_plot_csv,
    write_report_csv,
    write_report_json,
)
from dyport.gcn import decode, gcn_forward, load_gcn, save_gcn, train_link_predictor
from dyport.measures import (
    citation_sum,
    combine_importance,
    edge_betweenness_restricted,
    edge_ec_delta,
    jaccard2,
    mention_count,
    read_importance,
    write_importance,
)
from dyport.snapshots import (
    build_snapshot,
    features_from_bundle,
    new_edges,
    synth_features,
    write_snapshot,
)

log = logging.getLogger("dyport")


class StageError(DyportError):
    """A pipeline stage failed; carries the stage name and the cause."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")

    @property
    def is_validation(self) -> bool:
        """True when the cause is a problem with the user's inputs rather
        than an internal failure; drives the CLI's exit code."""
        return isinstance(
            self.cause, (ValidationError, CorpusFormatError, SchemaVersionError)
        )


def _digest(*parts) -> str:
    payload = json.dumps(parts, sort_keys=True, default=str)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _safe_id(model_id: str) -> str:
    return model_id.replace(":", "_")


class PipelineRun:
    """One pipeline invocation over a parsed configuration.

    Intermediate objects (bundle, snapshots, features, models) are
    memoized per process and reloaded from stage artifacts when a prior
    invocation produced them, which is what makes piecewise subcommand
    execution equal to a single `run`.
    """

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out = Path(cfg.out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self._cache_path = self.out / "cache.json"
        self.cache = self._load_json(self._cache_path) or {}
        self._bundle = None
        self._xref = None
        self._graphs = {}
        self._features = {}
        self._models = {}
        self._attr_scores = None
        self._importance = None
        self._year_records = None
        self._model_scores = None

    # -- shared lazy state -------------------------------------------------

    @staticmethod
    def _load_json(path: Path):
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def bundle(self):
        if self._bundle is None:
            saved = self.out / "artifacts" / "bundle.json"
            if saved.exists():
                self._bundle = load_bundle(saved)
            else:
                self._bundle = parse_corpus(self.cfg.corpus_dir)
        return self._bundle

    def xref(self):
        if self._xref is None:
            self._xref = cross_reference(self.bundle())
        return self._xref

    def graph(self, year: int):
        if year not in self._graphs:
            self._graphs[year] = build_snapshot(self.xref(), year, self.cfg.weight_mode)
        return self._graphs[year]

    def features(self, year: int):
        if year not in self._features:
            g = self.graph(year)
            if self.bundle().features is not None:
                self._features[year] = features_from_bundle(g, self.bundle(), year)
            else:
                # one shared seed keeps each node's random columns identical
                # across years, since snapshot indexing is prefix-consistent
                self._features[year] = synth_features(
                    g, self.cfg.feature_dim, stage_seed(self.cfg.seed, "features")
                )
        return self._features[year]

    def needed_years(self) -> list[int]:
        cfg = self.cfg
        years = set(range(cfg.train_year - 1, cfg.horizon_year + 1))
        years.add(cfg.test_year + 1)
        return sorted(years)

    def check_year_coverage(self) -> None:
        man = self.bundle().manifest
        cfg = self.cfg
        if cfg.train_year - 1 < man.year_min:
            raise ValidationError(
                f"training needs the year {cfg.train_year - 1} snapshot, "
                f"but the corpus starts at {man.year_min}"
            )
        if cfg.test_year + 1 > man.year_max:
            raise ValidationError(
                f"importance needs the year {cfg.test_year + 1} snapshot, "
                f"but the corpus ends at {man.year_max}"
            )
        if cfg.horizon_year > man.year_max:
            raise ValidationError(
                f"horizon year {cfg.horizon_year} exceeds the corpus range "
                f"(ends {man.year_max})"
            )

    def node_types(self) -> dict[str, frozenset[str]]:
        return {n: meta.semantic_types for n, meta in self.bundle().nodes.items()}

    # -- fingerprints ------------------------------------------------------

    def _corpus_digest(self) -> str:
        paths = CorpusPaths.from_dir(self.cfg.corpus_dir)
        files = [paths.manifest, paths.nodes, paths.curated, paths.mentions, paths.citations]
        if paths.features is not None:
            files.append(paths.features)
        try:
            return _digest([(p.name, _file_digest(p)) for p in sorted(files)])
        except FileNotFoundError as exc:
            raise ValidationError(f"corpus file missing: {exc.filename}")

    def _entry_subset(self, keys) -> dict[str, str]:
        table = dict(self.cfg.entries)
        return {k: table[k] for k in keys if k in table}

    def fingerprint(self, stage: str) -> str:
        cfg = self.cfg
        if stage == "ingest":
            return _digest("ingest", BUNDLE_SCHEMA_VERSION, self._corpus_digest())
        years = ["train_year", "test_year", "horizon_year"]
        gnn = ["gnn_hidden", "gnn_z_dim", "gnn_epochs", "gnn_lr", "gnn_neg_ratio"]
        kge = ["kge_dim", "kge_margin", "kge_epochs", "kge_lr", "kge_norm", "kge_typed_relations"]
        if stage == "snapshot":
            return _digest(
                "snapshot",
                self.fingerprint("ingest"),
                self._entry_subset(years + ["weight_mode"]),
            )
        if stage == "train":
            return _digest(
                "train",
                self.fingerprint("snapshot"),
                self._entry_subset(gnn + kge + ["feature_dim", "seed", "models"]),
            )
        if stage == "attribute":
            return _digest(
                "attribute",
                self.fingerprint("snapshot"),
                self._entry_subset(gnn + ["feature_dim", "seed", "ig_steps", "ig_weighted"]),
            )
        if stage == "importance":
            return _digest("importance", self.fingerprint("attribute"))
        if stage == "evaluate":
            return _digest(
                "evaluate",
                self.fingerprint("train"),
                self.fingerprint("importance"),
                self._entry_subset(["negatives_per_positive", "seed"]),
            )
        if stage == "report":
            return _digest(
                "report",
                self.fingerprint("evaluate"),
                self._entry_subset(["importance_bins"]),
            )
        raise ValidationError(f"unknown stage {stage!r}")

    # -- stages ------------------------------------------------------------

    def stage_ingest(self) -> list[str]:
        bundle = parse_corpus(self.cfg.corpus_dir)
        self._bundle = bundle
        self._xref = None
        art_dir = self.out / "artifacts"
        art_dir.mkdir(exist_ok=True)
        save_bundle(bundle, art_dir / "bundle.json")
        log.info(
            "ingest: %d nodes, %d curated pairs, %d cross-referenced edges",
            len(bundle.nodes),
            len(bundle.curated),
            len(self.xref()),
        )
        return ["artifacts/bundle.json"]

    def stage_snapshot(self) -> list[str]:
        self.check_year_coverage()
        snap_dir = self.out / "snapshots"
        snap_dir.mkdir(exist_ok=True)
        arts = []
        for year in self.needed_years():
            g = self.graph(year)
            edges = snap_dir / f"year_{year}_edges.tsv"
            meta = snap_dir / f"year_{year}_meta.json"
            write_snapshot(g, edges, meta)
            arts.extend([f"snapshots/{edges.name}", f"snapshots/{meta.name}"])
            log.info("snapshot %d: %d nodes, %d edges", year, g.n_nodes, g.n_edges)
        return arts

    def _trainable(self) -> list[ModelSpec]:
        return [m for m in self.cfg.models if m.kind in ("gcn", "translation", "bilinear")]

    def stage_train(self) -> list[str]:
        cfg = self.cfg
        self.check_year_coverage()
        model_dir = self.out / "models"
        model_dir.mkdir(exist_ok=True)
        arts = []
        for spec in self._trainable():
            seed = stage_seed(cfg.seed, f"train:{spec.kind}")
            if spec.kind == "gcn":
                g_prev = self.graph(cfg.train_year - 1)
                targets = new_edges(g_prev, self.graph(cfg.train_year))
                if len(targets) == 0:
                    raise ValidationError(
                        f"no new edges at year {cfg.train_year} to train on"
                    )
                model, losses = train_link_predictor(
                    g_prev, self.features(cfg.train_year - 1), targets, cfg.gnn, seed
                )
                path = model_dir / "gcn.json"
                save_gcn(model, path)
            else:
                types = self.node_types() if cfg.kge.typed_relations else None
                model, losses = train_kge(
                    self.graph(cfg.train_year), spec.kind, cfg.kge, seed, types
                )
                path = model_dir / f"kge_{spec.kind}.json"
                save_kge(model, path)
            self._models[spec.kind] = model
            arts.append(f"models/{path.name}")
            log.info(
                "train %s: loss %.4f -> %.4f",
                spec.kind,
                losses[0] if losses else float("nan"),
                losses[-1] if losses else float("nan"),
            )
        return arts

    def stage_attribute(self) -> list[str]:
        cfg = self.cfg
        self.check_year_coverage()
        g_test = self.graph(cfg.test_year)
        targets = new_edges(g_test, self.graph(cfg.test_year + 1))
        if len(targets) == 0:
            raise ValidationError(
                f"no new edges at year {cfg.test_year + 1}: nothing to attribute"
            )
        model_dir = self.out / "models"
        model_dir.mkdir(exist_ok=True)
        feats = self.features(cfg.test_year)
        model, _losses = train_link_predictor(
            g_test, feats, targets, cfg.gnn, stage_seed(cfg.seed, "attribute")
        )
        save_gcn(model, model_dir / "attribution_gcn.json")
        result = integrated_gradients(
            model, g_test, feats, targets, steps=cfg.ig_steps, weighted=cfg.ig_weighted
        )
        write_scores(result.scores, self.out / "attribution.tsv")
        residuals = {f"{a}\t{b}": v for (a, b), v in result.residuals.items()}
        (self.out / "attribution_residuals.json").write_text(
            json.dumps(residuals, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        self._attr_scores = dict(result.scores)
        log.info(
            "attribute: %d targets, max completeness residual %.2e",
            len(targets),
            max(abs(v) for v in result.residuals.values()),
        )
        return [
            "models/attribution_gcn.json",
            "attribution.tsv",
            "attribution_residuals.json",
        ]

    def attribution_scores(self) -> Mapping[Pair, float]:
        if self._attr_scores is None:
            self._attr_scores = dict(load_scores(self.out / "attribution.tsv").scores)
        return self._attr_scores

    def stage_importance(self) -> list[str]:
        cfg = self.cfg
        self.check_year_coverage()
        discovered = new_edges(self.graph(cfg.test_year - 1), self.graph(cfg.test_year))
        pairs = list(discovered.edges)
        if not pairs:
            raise ValidationError(f"no new edges at test year {cfg.test_year}")
        g_test = self.graph(cfg.test_year)
        future = new_edges(g_test, self.graph(cfg.test_year + 1))
        bc_targets = sorted({node for pair in future.edges for node in pair})
        bc_all = edge_betweenness_restricted(g_test, bc_targets)
        attr = self.attribution_scores()
        g_prev = self.graph(cfg.test_year - 1)
        xref = self.xref()
        doc_years = self.bundle().doc_years()
        citations = self.bundle().citations
        components = {
            "ig": {p: attr[p] for p in pairs},
            "bc": {p: bc_all[p] for p in pairs},
            "ec_delta": edge_ec_delta(g_test, self.graph(cfg.test_year + 1), pairs),
            "jc2": {p: jaccard2(g_prev, p) for p in pairs},
            "mentions": {
                p: float(mention_count(xref.edges[p], cfg.horizon_year)) for p in pairs
            },
            "citations": {
                p: float(citation_sum(xref.edges[p], citations, doc_years, cfg.horizon_year))
                for p in pairs
            },
        }
        vectors = combine_importance(components, pairs)
        write_importance(vectors, self.out / "importance.tsv")
        self._importance = {p: v.combined for p, v in vectors.items()}
        log.info("importance: scored %d discovered edges", len(pairs))
        return ["importance.tsv"]

    def importance_map(self) -> Mapping[Pair, float]:
        if self._importance is None:
            table = read_importance(self.out / "importance.tsv")
            self._importance = {p: v.combined for p, v in table.items()}
        return self._importance

    def _predictor(self, spec: ModelSpec):
        if spec.kind in self._models:
            return self._models[spec.kind]
        if spec.kind == "gcn":
            model = load_gcn(self.out / "models" / "gcn.json")
        else:
            model = load_kge(self.out / "models" / f"kge_{spec.kind}.json")
        self._models[spec.kind] = model
        return model

    def _score_model(self, spec: ModelSpec, pairs: list[Pair]) -> dict[Pair, float]:
        cfg = self.cfg
        g_train = self.graph(cfg.train_year)
        if spec.kind == "gcn":
            model = self._predictor(spec)
            z = gcn_forward(
                g_train.adjacency_matrix(weighted=True),
                self.features(cfg.train_year).matrix,
                model,
            )
            return {
                (a, b): decode(z, (g_train.index_of(a), g_train.index_of(b)))
                for a, b in pairs
            }
        if spec.kind in ("translation", "bilinear"):
            model = self._predictor(spec)
            types = self.node_types() if cfg.kge.typed_relations else None
            return {p: score_pair(model, p, types) for p in pairs}
        if spec.kind == "common_neighbors":
            return {p: score_common_neighbors(g_train, p) for p in pairs}
        score_file = load_scores(spec.score_path)
        return {p: score_file.score(p) for p in pairs}

    def stage_evaluate(self) -> list[str]:
        cfg = self.cfg
        self.check_year_coverage()
        g_train = self.graph(cfg.train_year)
        metas = {n: self.bundle().nodes[n] for n in g_train.node_ids}
        imp = self.importance_map()
        year_records: dict[int, list[EvalRecord]] = {}
        for year in range(cfg.test_year, cfg.horizon_year + 1):
            discovered = new_edges(self.graph(year - 1), self.graph(year))
            positives = [
                (a, b, year)
                for a, b in discovered.edges
                if a in metas and b in metas
            ]
            if not positives:
                warnings.warn(
                    f"no evaluable new edges at year {year}; omitted", DyportWarning
                )
                continue
            pos = positive_records(
                positives, metas, importance=imp if year == cfg.test_year else None
            )
            neg = sample_negatives(
                positives,
                metas,
                self.graph(year),
                cfg.negatives_per_positive,
                stage_seed(cfg.seed, f"evaluate:{year}"),
            )
            year_records[year] = pos + neg
            log.info(
                "evaluate %d: %d positives, %d negatives", year, len(pos), len(neg)
            )
        if cfg.test_year not in year_records:
            raise ValidationError(
                f"no evaluable positives at test year {cfg.test_year}"
            )
        eval_dir = self.out / "eval"
        eval_dir.mkdir(exist_ok=True)
        all_pairs = sorted(
            {r.pair for records in year_records.values() for r in records}
        )
        pair_lines = ["a\tb"] + [f"{a}\t{b}" for a, b in all_pairs]
        (eval_dir / "eval_pairs.tsv").write_text(
            "\n".join(pair_lines) + "\n", encoding="utf-8"
        )
        arts = ["eval/eval_pairs.tsv"]
        model_scores: dict[str, dict[Pair, float]] = {}
        for spec in self.cfg.models:
            scores = self._score_model(spec, all_pairs)
            model_scores[spec.model_id] = scores
            score_path = eval_dir / f"scores_{_safe_id(spec.model_id)}.tsv"
            write_scores(scores, score_path)
            arts.append(f"eval/{score_path.name}")
        self._year_records = year_records
        self._model_scores = model_scores
        payload = {
            "years": {
                str(year): [
                    {
                        "subject": r.subject,
                        "object": r.object,
                        "label": r.label,
                        "discovery_year": r.discovery_year,
                        "semantic_pairs": sorted(map(list, r.semantic_pairs)),
                        "importance": r.importance,
                        "spawned_by": list(r.spawned_by) if r.spawned_by else None,
                    }
                    for r in records
                ]
                for year, records in year_records.items()
            },
            "models": {
                model_id: {f"{a}\t{b}": s for (a, b), s in scores.items()}
                for model_id, scores in model_scores.items()
            },
        }
        (eval_dir / "records.json").write_text(
            json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        arts.append("eval/records.json")
        return arts

    def _load_eval_state(self):
        if self._year_records is not None and self._model_scores is not None:
            return
        payload = self._load_json(self.out / "eval" / "records.json")
        if payload is None:
            raise ValidationError("evaluation records missing; run evaluate first")
        year_records = {}
        for year_str, rows in payload["years"].items():
            records = []
            for row in rows:
                records.append(
                    EvalRecord(
                        subject=row["subject"],
                        object=row["object"],
                        label=row["label"],
                        semantic_pairs=frozenset(
                            tuple(tp) for tp in row["semantic_pairs"]
                        ),
                        discovery_year=row["discovery_year"],
                        importance=row["importance"],
                        spawned_by=tuple(row["spawned_by"]) if row["spawned_by"] else None,
                    )
                )
            year_records[int(year_str)] = records
        self._year_records = year_records
        self._model_scores = {
            model_id: {
                tuple(key.split("\t")): value for key, value in table.items()
            }
            for model_id, table in payload["models"].items()
        }

    def stage_report(self) -> list[str]:
        cfg = self.cfg
        self._load_eval_state()
        imp = self.importance_map()
        reports_by_model = {}
        for spec in cfg.models:
            scores = self._model_scores[spec.model_id]
            scored_by_year = {
                year: [r.scored(scores[r.pair]) for r in records]
                for year, records in self._year_records.items()
            }
            test_records = scored_by_year[cfg.test_year]
            reports = [overall_report(test_records)]
            reports.extend(stratify_semantic(test_records))
            reports.extend(
                stratify_importance(test_records, imp, bins=cfg.importance_bins)
            )
            reports.extend(stratify_temporal(scored_by_year))
            reports_by_model[spec.model_id] = reports
        rows = report_rows(
            reports_by_model, cfg.train_year, cfg.test_year, cfg.horizon_year
        )
        write_report_json(rows, self.out / "report.json")
        write_report_csv(rows, self.out / "report.csv")
        write_plot_csv(rows, self.out / "plot_data.csv")
        log.info("report: %d strata rows for %d models", len(rows), len(reports_by_model))
        return ["report.json", "report.csv", "plot_data.csv"]

    # -- driver ------------------------------------------------------------

    def _artifacts_exist(self, names) -> bool:
        return all((self.out / name).exists() for name in names)

    def run(self, upto: str = "report") -> dict:
        if upto not in STAGES:
            raise ValidationError(f"unknown stage {upto!r}")
        ledger = {
            "config_hash": self.cfg.hash(),
            "package_version": __version__,
            "stages": [],
        }
        runners = {
            "ingest": self.stage_ingest,
            "snapshot": self.stage_snapshot,
            "train": self.stage_train,
            "attribute": self.stage_attribute,
            "importance": self.stage_importance,
            "evaluate": self.stage_evaluate,
            "report": self.stage_report,
        }
        try:
            for stage in STAGES:
                started = time.monotonic()
                if stage == "train" and not self._trainable():
                    ledger["stages"].append(
                        {"stage": stage, "status": "skipped", "wall_time_s": 0.0, "artifacts": []}
                    )
                    log.info("train: no trainable models in roster, skipped")
                elif self._reusable(stage):
                    ledger["stages"].append(
                        {
                            "stage": stage,
                            "status": "cached",
                            "wall_time_s": 0.0,
                            "artifacts": self.cache[stage]["artifacts"],
                        }
                    )
                    log.info("%s: inputs unchanged, reusing artifacts", stage)
                else:
                    try:
                        arts = runners[stage]()
                    except Exception as exc:
                        ledger["stages"].append(
                            {
                                "stage": stage,
                                "status": "failed",
                                "wall_time_s": round(time.monotonic() - started, 3),
                                "artifacts": [],
                            }
                        )
                        raise StageError(stage, exc) from exc
                    self.cache[stage] = {
                        "fingerprint": self.fingerprint(stage),
                        "artifacts": arts,
                    }
                    self._cache_path.write_text(
                        json.dumps(self.cache, sort_keys=True, indent=2) + "\n",
                        encoding="utf-8",
                    )
                    ledger["stages"].append(
                        {
                            "stage": stage,
                            "status": "ran",
                            "wall_time_s": round(time.monotonic() - started, 3),
                            "artifacts": arts,
                        }
                    )
                if stage == upto:
                    break
        finally:
            (self.out / "ledger.json").write_text(
                json.dumps(ledger, sort_keys=True, indent=2) + "\n", encoding="utf-8"
            )
        return ledger

    def _reusable(self, stage: str) -> bool:
        entry = self.cache.get(stage)
        if not entry:
            return False
        if entry["fingerprint"] != self.fingerprint(stage):
            return False
        return self._artifacts_exist(entry["artifacts"])


def run_pipeline(cfg: RunConfig, upto: str = "report") -> dict:
    return PipelineRun(cfg).run(upto=upto)


def export_snapshot(cfg: RunConfig, year: int) -> list[str]:
    """The `snapshot --year` path: write one year's edge list and summary."""
    bundle = parse_corpus(cfg.corpus_dir)
    man = bundle.manifest
    if not man.year_min <= year <= man.year_max:
        raise ValidationError(
            f"year {year} outside corpus range [{man.year_min}, {man.year_max}]"
        )
    g = build_snapshot(cross_reference(bundle), year, cfg.weight_mode)
    out = Path(cfg.out_dir)
    snap_dir = out / "snapshots"
    snap_dir.mkdir(parents=True, exist_ok=True)
    edges = snap_dir / f"year_{year}_edges.tsv"
    meta = snap_dir / f"year_{year}_meta.json"
    write_snapshot(g, edges, meta)
    return [f"snapshots/{edges.name}", f"snapshots/{meta.name}"]
