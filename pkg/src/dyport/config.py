"""Run configuration: a flat key=value file, command-line overrides, a
content hash for provenance, and per-stage seed derivation."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from dyport.baselines import KgeConfig
from dyport.errors import ValidationError
from dyport.gcn import GcnConfig

STAGES = (
    "ingest",
    "snapshot",
    "train",
    "attribute",
    "importance",
    "evaluate",
    "report",
)

MODEL_KINDS = ("gcn", "translation", "bilinear", "common_neighbors", "score_file")

DEFAULTS = {
    "out_dir": "out",
    "negatives_per_positive": "10",
    "importance_bins": "3",
    "models": "gcn,translation,bilinear,common_neighbors",
    "seed": "0",
    "weight_mode": "cumulative",
    "feature_dim": "8",
    "gnn_hidden": "32",
    "gnn_z_dim": "16",
    "gnn_epochs": "200",
    "gnn_lr": "0.01",
    "gnn_neg_ratio": "1.0",
    "kge_dim": "32",
    "kge_margin": "1.0",
    "kge_epochs": "200",
    "kge_lr": "0.02",
    "kge_norm": "l2",
    "kge_typed_relations": "false",
    "ig_steps": "50",
    "ig_weighted": "false",
}

REQUIRED = ("corpus_dir", "train_year", "test_year", "horizon_year")


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    model_id: str
    score_path: Path | None = None


@dataclass(frozen=True)
class RunConfig:
    corpus_dir: Path
    out_dir: Path
    train_year: int
    test_year: int
    horizon_year: int
    negatives_per_positive: int
    importance_bins: int
    models: tuple[ModelSpec, ...]
    seed: int
    weight_mode: str
    feature_dim: int
    gnn: GcnConfig
    kge: KgeConfig
    ig_steps: int
    ig_weighted: bool
    entries: tuple[tuple[str, str], ...]  # canonical key=value pairs as parsed

    def hash(self) -> str:
        """Digest of every entry except the output location, so moving a
        run's destination never invalidates its cache."""
        lines = [f"{k}={v}" for k, v in sorted(self.entries) if k != "out_dir"]
        return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()[:16]


def stage_seed(master_seed: int, stage_name: str) -> int:
    """Per-stage seed from a stable digest, so introducing a stage never
    shifts the random draws of any other."""
    digest = hashlib.sha256(f"{master_seed}:{stage_name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def _parse_entries(path: Path) -> dict[str, str]:
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except FileNotFoundError:
        raise ValidationError(f"config file not found: {path}")
    out: dict[str, str] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ValidationError(f"{path}:{lineno}: empty key or value")
        if key in out:
            raise ValidationError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _to_int(entries: Mapping[str, str], key: str) -> int:
    try:
        return int(entries[key])
    except ValueError:
        raise ValidationError(f"config key {key!r} must be an integer, got {entries[key]!r}")


def _to_float(entries: Mapping[str, str], key: str) -> float:
    try:
        return float(entries[key])
    except ValueError:
        raise ValidationError(f"config key {key!r} must be a number, got {entries[key]!r}")


def _to_bool(entries: Mapping[str, str], key: str) -> bool:
    value = entries[key]
    if value not in ("true", "false"):
        raise ValidationError(f"config key {key!r} must be true or false, got {value!r}")
    return value == "true"


def _parse_models(value: str, base: Path) -> tuple[ModelSpec, ...]:
    specs = []
    seen = set()
    for token in value.split(","):
        token = token.strip()
        if not token:
            continue
        if token.startswith("score_file:"):
            raw_path = token.split(":", 1)[1]
            if not raw_path:
                raise ValidationError("score_file roster entry is missing its path")
            path = (base / raw_path).resolve() if not Path(raw_path).is_absolute() else Path(raw_path)
            spec = ModelSpec(
                kind="score_file",
                model_id=f"score_file:{Path(raw_path).stem}",
                score_path=path,
            )
        elif token in MODEL_KINDS:
            spec = ModelSpec(kind=token, model_id=token)
        else:
            raise ValidationError(f"unknown model roster entry {token!r}")
        if spec.model_id in seen:
            raise ValidationError(f"duplicate model roster entry {spec.model_id!r}")
        seen.add(spec.model_id)
        specs.append(spec)
    if not specs:
        raise ValidationError("model roster is empty")
    return tuple(specs)


def load_run_config(
    path: str | Path,
    overrides: Iterable[str] = (),
    out_dir: str | Path | None = None,
    seed: int | None = None,
) -> RunConfig:
    """Parse and validate a run configuration.

    `overrides` are key=value strings applied on top of the file;
    `out_dir` and `seed` correspond to the dedicated CLI flags and win
    over both.
    """
    path = Path(path)
    entries = _parse_entries(path)
    for item in overrides:
        if "=" not in item:
            raise ValidationError(f"override {item!r} is not of the form key=value")
        key, value = (part.strip() for part in item.split("=", 1))
        if not key or not value:
            raise ValidationError(f"override {item!r} has an empty key or value")
        entries[key] = value
    if out_dir is not None:
        entries["out_dir"] = str(out_dir)
    if seed is not None:
        entries["seed"] = str(seed)

    unknown = set(entries) - set(DEFAULTS) - set(REQUIRED)
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    missing = [key for key in REQUIRED if key not in entries]
    if missing:
        raise ValidationError(f"missing config keys: {missing}")
    for key, default in DEFAULTS.items():
        entries.setdefault(key, default)

    base = path.parent
    corpus_dir = Path(entries["corpus_dir"])
    if not corpus_dir.is_absolute():
        corpus_dir = (base / corpus_dir).resolve()
    out_path = Path(entries["out_dir"])

    train_year = _to_int(entries, "train_year")
    test_year = _to_int(entries, "test_year")
    horizon_year = _to_int(entries, "horizon_year")
    if not train_year < test_year <= horizon_year:
        raise ValidationError(
            f"need train_year < test_year <= horizon_year, "
            f"got {train_year} / {test_year} / {horizon_year}"
        )
    n_neg = _to_int(entries, "negatives_per_positive")
    if n_neg < 1:
        raise ValidationError("negatives_per_positive must be >= 1")
    bins = _to_int(entries, "importance_bins")
    if bins < 1:
        raise ValidationError("importance_bins must be >= 1")
    feature_dim = _to_int(entries, "feature_dim")
    if feature_dim < 2:
        raise ValidationError("feature_dim must be >= 2")
    ig_steps = _to_int(entries, "ig_steps")
    if ig_steps < 1:
        raise ValidationError("ig_steps must be >= 1")
    weight_mode = entries["weight_mode"]
    if weight_mode not in ("cumulative", "yearly"):
        raise ValidationError(f"unknown weight_mode {weight_mode!r}")
    kge_norm = entries["kge_norm"]
    if kge_norm not in ("l1", "l2"):
        raise ValidationError(f"kge_norm must be l1 or l2, got {kge_norm!r}")

    gnn = GcnConfig(
        hidden=_to_int(entries, "gnn_hidden"),
        z_dim=_to_int(entries, "gnn_z_dim"),
        epochs=_to_int(entries, "gnn_epochs"),
        lr=_to_float(entries, "gnn_lr"),
        neg_ratio=_to_float(entries, "gnn_neg_ratio"),
    )
    kge = KgeConfig(
        dim=_to_int(entries, "kge_dim"),
        margin=_to_float(entries, "kge_margin"),
        epochs=_to_int(entries, "kge_epochs"),
        lr=_to_float(entries, "kge_lr"),
        norm=kge_norm,
        typed_relations=_to_bool(entries, "kge_typed_relations"),
    )
    return RunConfig(
        corpus_dir=corpus_dir,
        out_dir=out_path,
        train_year=train_year,
        test_year=test_year,
        horizon_year=horizon_year,
        negatives_per_positive=n_neg,
        importance_bins=bins,
        models=_parse_models(entries["models"], base),
        seed=_to_int(entries, "seed"),
        weight_mode=weight_mode,
        feature_dim=feature_dim,
        gnn=gnn,
        kge=kge,
        ig_steps=ig_steps,
        ig_weighted=_to_bool(entries, "ig_weighted"),
        entries=tuple(sorted(entries.items())),
    )
