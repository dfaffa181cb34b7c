"""End-to-end pipeline behavior on the committed two-cluster corpus."""

from __future__ import annotations

import json

import pytest

from dyport.config import load_run_config
from dyport.errors import ValidationError
from dyport.pipeline import PipelineRun, StageError, export_snapshot, run_pipeline

# the tight two-cluster corpus exhausts its negative pools by design
pytestmark = pytest.mark.filterwarnings("ignore::dyport.errors.DyportWarning")


@pytest.fixture()
def cluster_cfg(two_cluster_dir, tmp_path):
    def make(**kwargs):
        overrides = [f"{k}={v}" for k, v in kwargs.items()]
        return load_run_config(
            two_cluster_dir / "run.cfg", overrides=overrides, out_dir=tmp_path / "out"
        )

    return make


def stage_status(ledger: dict) -> dict[str, str]:
    return {entry["stage"]: entry["status"] for entry in ledger["stages"]}


class TestFullRun:
    def test_artifacts_and_ledger(self, cluster_cfg, tmp_path):
        cfg = cluster_cfg()
        ledger = run_pipeline(cfg)
        out = tmp_path / "out"
        for name in (
            "artifacts/bundle.json",
            "snapshots/year_1999_edges.tsv",
            "snapshots/year_2001_meta.json",
            "models/gcn.json",
            "models/kge_translation.json",
            "models/kge_bilinear.json",
            "models/attribution_gcn.json",
            "attribution.tsv",
            "attribution_residuals.json",
            "importance.tsv",
            "eval/eval_pairs.tsv",
            "eval/scores_gcn.tsv",
            "eval/records.json",
            "report.json",
            "report.csv",
            "plot_data.csv",
            "cache.json",
            "ledger.json",
        ):
            assert (out / name).exists(), name
        assert stage_status(ledger) == {s: "ran" for s in stage_status(ledger)}
        assert ledger["config_hash"] == cfg.hash()
        on_disk = json.loads((out / "ledger.json").read_text())
        assert on_disk["config_hash"] == cfg.hash()

    def test_report_rows_cover_roster_and_strata(self, cluster_cfg, tmp_path):
        run_pipeline(cluster_cfg())
        rows = json.loads((tmp_path / "out" / "report.json").read_text())
        models = {r["model_id"] for r in rows}
        assert models == {"gcn", "translation", "bilinear", "common_neighbors"}
        kinds = {r["stratum_kind"] for r in rows}
        assert kinds == {"overall", "semantic", "importance", "temporal"}
        for row in rows:
            assert row["train_year"] == 2000
            assert row["test_year"] == 2001
            assert row["horizon_year"] == 2001
            assert 0.0 <= row["auc"] <= 1.0

    def test_second_run_is_fully_cached(self, cluster_cfg):
        cfg = cluster_cfg()
        run_pipeline(cfg)
        again = run_pipeline(cfg)
        assert set(stage_status(again).values()) == {"cached"}

    def test_seed_change_reruns_only_seeded_stages(self, cluster_cfg):
        run_pipeline(cluster_cfg())
        ledger = run_pipeline(cluster_cfg(seed=1))
        status = stage_status(ledger)
        assert status["ingest"] == "cached"
        assert status["snapshot"] == "cached"
        assert status["train"] == "ran"
        assert status["evaluate"] == "ran"

    def test_bin_change_reruns_only_report(self, cluster_cfg):
        run_pipeline(cluster_cfg())
        ledger = run_pipeline(cluster_cfg(importance_bins=2))
        status = stage_status(ledger)
        assert status["evaluate"] == "cached"
        assert status["report"] == "ran"

    def test_corpus_edit_invalidates_ingest(self, cluster_cfg, two_cluster_dir, tmp_path):
        run_pipeline(cluster_cfg())
        corpus = tmp_path / "corpus_copy"
        corpus.mkdir()
        for name in ("nodes.tsv", "curated.tsv", "mentions.tsv", "citations.tsv", "manifest.cfg"):
            (corpus / name).write_bytes((two_cluster_dir / name).read_bytes())
        cfg = load_run_config(
            two_cluster_dir / "run.cfg",
            overrides=[f"corpus_dir={corpus}"],
            out_dir=tmp_path / "out",
        )
        with (corpus / "mentions.tsv").open("a", encoding="utf-8") as fh:
            fh.write("a0\ta2\tpx99\t2002\n")
        ledger = run_pipeline(cfg)
        assert stage_status(ledger)["ingest"] == "ran"


class TestComposability:
    def test_stagewise_equals_single_run(self, cluster_cfg):
        cfg = cluster_cfg()
        for stage in ("ingest", "snapshot", "train", "attribute", "importance", "evaluate"):
            ledger = PipelineRun(cfg).run(upto=stage)
            assert ledger["stages"][-1]["stage"] == stage
            assert ledger["stages"][-1]["status"] == "ran"
        final = PipelineRun(cfg).run(upto="report")
        status = stage_status(final)
        assert status["report"] == "ran"
        assert all(v == "cached" for k, v in status.items() if k != "report")

    def test_piecewise_report_matches_direct_run(self, two_cluster_dir, tmp_path):
        cfg_a = load_run_config(two_cluster_dir / "run.cfg", out_dir=tmp_path / "a")
        for stage in ("snapshot", "attribute", "report"):
            PipelineRun(cfg_a).run(upto=stage)
        cfg_b = load_run_config(two_cluster_dir / "run.cfg", out_dir=tmp_path / "b")
        run_pipeline(cfg_b)
        assert (tmp_path / "a" / "report.json").read_bytes() == (
            tmp_path / "b" / "report.json"
        ).read_bytes()

    def test_report_from_fresh_process_reloads_artifacts(self, cluster_cfg):
        cfg = cluster_cfg()
        PipelineRun(cfg).run(upto="evaluate")
        # a brand-new PipelineRun has no in-memory state, so the report
        # stage must reload records, scores, and importance from disk
        ledger = PipelineRun(cfg).run(upto="report")
        assert stage_status(ledger)["report"] == "ran"


class TestScoreFileModels:
    def test_score_file_only_roster_skips_training(self, two_cluster_dir, tmp_path):
        cfg = load_run_config(
            two_cluster_dir / "run.cfg",
            overrides=["models=common_neighbors"],
            out_dir=tmp_path / "cn_run",
        )
        ledger = run_pipeline(cfg)
        assert stage_status(ledger)["train"] == "skipped"
        rows = json.loads((tmp_path / "cn_run" / "report.json").read_text())
        assert {r["model_id"] for r in rows} == {"common_neighbors"}

    def test_external_scores_are_reported(self, two_cluster_dir, tmp_path):
        seed_cfg = load_run_config(
            two_cluster_dir / "run.cfg",
            overrides=["models=common_neighbors"],
            out_dir=tmp_path / "seed_run",
        )
        run_pipeline(seed_cfg)
        score_path = tmp_path / "seed_run" / "eval" / "scores_common_neighbors.tsv"
        cfg = load_run_config(
            two_cluster_dir / "run.cfg",
            overrides=[f"models=gcn,score_file:{score_path}"],
            out_dir=tmp_path / "ext_run",
        )
        run_pipeline(cfg)
        rows = json.loads((tmp_path / "ext_run" / "report.json").read_text())
        ids = {r["model_id"] for r in rows}
        assert ids == {"gcn", "score_file:scores_common_neighbors"}

    def test_score_file_missing_pair_fails_validation(self, two_cluster_dir, tmp_path):
        partial = tmp_path / "partial.tsv"
        partial.write_text("a\tb\tscore\na0\ta3\t1.0\n", encoding="utf-8")
        cfg = load_run_config(
            two_cluster_dir / "run.cfg",
            overrides=[f"models=score_file:{partial}"],
            out_dir=tmp_path / "partial_run",
        )
        with pytest.raises(StageError) as err:
            run_pipeline(cfg)
        assert err.value.stage == "evaluate"
        assert err.value.is_validation


class TestFailureHandling:
    def test_stage_error_names_stage_and_writes_ledger(self, two_cluster_dir, tmp_path):
        cfg = load_run_config(
            two_cluster_dir / "run.cfg",
            overrides=["train_year=1998", "test_year=1999", "horizon_year=2001"],
            out_dir=tmp_path / "bad",
        )
        # train year 1998 needs the 1997 snapshot, which predates the corpus
        with pytest.raises(StageError) as err:
            run_pipeline(cfg)
        assert err.value.stage == "snapshot"
        assert err.value.is_validation
        ledger = json.loads((tmp_path / "bad" / "ledger.json").read_text())
        assert ledger["stages"][-1]["status"] == "failed"
        assert ledger["stages"][-1]["stage"] == "snapshot"

    def test_missing_corpus_fails_ingest(self, two_cluster_dir, tmp_path):
        cfg = load_run_config(
            two_cluster_dir / "run.cfg",
            overrides=[f"corpus_dir={tmp_path / 'nowhere'}"],
            out_dir=tmp_path / "bad",
        )
        with pytest.raises(StageError) as err:
            run_pipeline(cfg)
        assert err.value.stage == "ingest"


class TestExportSnapshot:
    def test_single_year_export(self, cluster_cfg, tmp_path):
        arts = export_snapshot(cluster_cfg(), 2000)
        assert arts == ["snapshots/year_2000_edges.tsv", "snapshots/year_2000_meta.json"]
        meta = json.loads((tmp_path / "out" / "snapshots" / "year_2000_meta.json").read_text())
        assert meta["year"] == 2000
        assert meta["n_edges"] == 27

    def test_out_of_range_year_rejected(self, cluster_cfg):
        with pytest.raises(ValidationError, match=r"\[1998, 2002\]"):
            export_snapshot(cluster_cfg(), 1990)
