"""Stage-based pipeline: extract, map, label, train, classify, lookup, report.

Each stage writes its outputs atomically plus a manifest recording input
hashes, its config hash and output hashes.  Re-running a completed stage
with unchanged inputs is a no-op; a tampered intermediate file is detected
by hash mismatch before any dependent stage runs.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import yaml

from . import crossref, labeling, report as report_mod
from .dump_ingest import DumpSource, is_citable_article, stream_pages
from .features import (DEFAULT_MIN_COUNT, DEFAULT_POS_TOP, DEFAULT_SECTIONS_TOP,
                       DEFAULT_SUBWORD_BUCKETS, MAX_STATEMENT_WORDS, Vocabulary,
                       featurize)
from .labeling import CLASS_LABELS, LabeledCitation, assign_label, partition
from .model import (ModelConfig, TrainConfig, evaluate, forward,
                    load_checkpoint, pretrain_char_embeddings,
                    save_checkpoint, train, training_vocabulary)
from .uniform import AliasTable, CitationRecord, record_from_raw
from .wikicode import RawCitation, extract_citations, load_template_config

log = logging.getLogger(__name__)

MANIFEST_VERSION = 1


class ConfigError(Exception):
    """Invalid pipeline configuration; ``errors`` lists every violation."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


class DependencyError(Exception):
    """An upstream stage has not produced its outputs yet."""


class IntegrityError(Exception):
    """An intermediate file no longer matches its manifest hash."""


# ---------------------------------------------------------------------------
# Configuration


@dataclass
class LookupStageConfig:
    max_rps: float = 50.0
    retained_results: int = 3
    score_threshold: float = 34.997
    retries: int = 3
    backoff_base: float = 1.0
    cache_dir: str | None = None
    replay_file: str | None = None
    gold_file: str | None = None
    live: bool = False
    contact_env: str = "WIKICITE_CONTACT"


@dataclass
class ReportStageConfig:
    formats: tuple[str, ...] = ("csv", "png")
    smoothing_window: int = 4
    centered: bool = True


@dataclass
class PipelineConfig:
    dump: str | None = None
    templates_file: str | None = None
    aliases_file: str | None = None
    output_dir: str = "pipeline_out"
    workers: int = 1
    seed: int = 0
    statement_max_words: int = MAX_STATEMENT_WORDS
    min_count: int = DEFAULT_MIN_COUNT
    pos_top: int = DEFAULT_POS_TOP
    sections_top: int = DEFAULT_SECTIONS_TOP
    subword_buckets: int = DEFAULT_SUBWORD_BUCKETS
    label_targets: dict[str, int] | None = None
    label_seed: int | None = None
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    use_pretrained_chars: bool = False
    lookup: LookupStageConfig = field(default_factory=LookupStageConfig)
    report: ReportStageConfig = field(default_factory=ReportStageConfig)

    @property
    def out(self) -> Path:
        return Path(self.output_dir)


_SCHEMA = {
    "dump": str, "templates_file": str, "aliases_file": str,
    "output_dir": str, "workers": int, "seed": int,
    "statement_max_words": int, "min_count": int, "pos_top": int,
    "sections_top": int, "subword_buckets": int,
    "use_pretrained_chars": bool,
    "label": {"targets": dict, "seed": int},
    "model": {"char_embed_dim": int, "token_embed_dim": int,
              "statement_encoder_dim": int, "hidden_layers": list,
              "dropout": float, "encoder_kind": str, "activation": str},
    "train": {"epochs": int, "split": float, "lr": float, "min_lr": float,
              "patience": int, "batch_size": int, "seed": int,
              "freeze_chars": bool, "binary_loss": bool},
    "lookup": {"max_rps": float, "retained_results": int,
               "score_threshold": float, "retries": int,
               "backoff_base": float, "cache_dir": str, "replay_file": str,
               "gold_file": str, "live": bool, "contact_env": str},
    "report": {"formats": list, "smoothing_window": int, "centered": bool},
}


def _check_unknown(data: dict, schema: dict, prefix: str, errors: list[str]) -> None:
    for key, value in data.items():
        if key not in schema:
            errors.append(f"{prefix}{key}: unknown key")
            continue
        expected = schema[key]
        if isinstance(expected, dict):
            if not isinstance(value, dict):
                errors.append(f"{prefix}{key}: expected a mapping")
            else:
                _check_unknown(value, expected, f"{prefix}{key}.", errors)
        elif expected is float:
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                errors.append(f"{prefix}{key}: expected a number")
        elif expected is int:
            if not isinstance(value, int) or isinstance(value, bool):
                errors.append(f"{prefix}{key}: expected an integer")
        elif not isinstance(value, expected):
            errors.append(f"{prefix}{key}: expected {expected.__name__}")


def validate_config(raw_text: str) -> PipelineConfig:
    """Parse and validate a YAML/JSON config; every violation is reported.

    Absent keys take the pipeline defaults (40 statement words, top-35 tags,
    top-150 sections, 5 epochs, threshold 34.997, 50 rps).
    """
    errors: list[str] = []
    try:
        data = yaml.safe_load(raw_text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError([f"config is not valid YAML/JSON: {exc}"]) from exc
    if not isinstance(data, dict):
        raise ConfigError(["config root must be a mapping"])
    _check_unknown(data, _SCHEMA, "", errors)
    if errors:
        raise ConfigError(errors)

    cfg = PipelineConfig()
    for key in ("dump", "templates_file", "aliases_file", "output_dir", "workers",
                "seed", "statement_max_words", "min_count", "pos_top",
                "sections_top", "subword_buckets", "use_pretrained_chars"):
        if key in data:
            setattr(cfg, key, data[key])
    label_cfg = data.get("label", {})
    cfg.label_targets = label_cfg.get("targets")
    cfg.label_seed = label_cfg.get("seed")

    model_cfg = dict(data.get("model", {}))
    if "hidden_layers" in model_cfg:
        model_cfg["hidden_layers"] = tuple(model_cfg["hidden_layers"])
    try:
        cfg.model = ModelConfig(**model_cfg)
    except (ValueError, TypeError) as exc:
        errors.append(f"model: {exc}")
    train_cfg = dict(data.get("train", {}))
    train_cfg.setdefault("seed", cfg.seed)
    try:
        cfg.train = TrainConfig(**train_cfg)
    except (ValueError, TypeError) as exc:
        errors.append(f"train: {exc}")
    try:
        cfg.lookup = LookupStageConfig(**data.get("lookup", {}))
        crossref.LookupConfig(max_rps=cfg.lookup.max_rps,
                              retained_results=cfg.lookup.retained_results,
                              score_threshold=cfg.lookup.score_threshold)
    except (ValueError, TypeError) as exc:
        errors.append(f"lookup: {exc}")
    report_cfg = dict(data.get("report", {}))
    if "formats" in report_cfg:
        report_cfg["formats"] = tuple(report_cfg["formats"])
    try:
        cfg.report = ReportStageConfig(**report_cfg)
    except TypeError as exc:
        errors.append(f"report: {exc}")
    if cfg.report.smoothing_window < 1:
        errors.append("report.smoothing_window: must be >= 1")
    if cfg.statement_max_words < 1:
        errors.append("statement_max_words: must be >= 1")
    if cfg.workers < 1:
        errors.append("workers: must be >= 1")
    if errors:
        raise ConfigError(errors)
    return cfg


def load_config(path: str | Path | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    with open(path, encoding="utf-8") as fh:
        return validate_config(fh.read())


# ---------------------------------------------------------------------------
# JSONL and manifest plumbing


def write_jsonl(path: Path, dicts) -> int:
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            for d in dicts:
                fh.write(json.dumps(d, ensure_ascii=False))
                fh.write("\n")
                count += 1
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return count


def read_jsonl(path: Path):
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


def file_sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _manifest_path(cfg: PipelineConfig, stage: str) -> Path:
    return cfg.out / "manifests" / f"{stage}.json"


def _load_manifest(cfg: PipelineConfig, stage: str) -> dict | None:
    path = _manifest_path(cfg, stage)
    if not path.exists():
        return None
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _write_manifest(cfg: PipelineConfig, stage: str, inputs: dict,
                    outputs: dict, config_hash: str, counts: dict) -> dict:
    manifest = {
        "version": MANIFEST_VERSION,
        "stage": stage,
        "inputs": inputs,
        "outputs": outputs,
        "config_hash": config_hash,
        "counts": counts,
    }
    path = _manifest_path(cfg, stage)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest


def _hash_files(paths: dict[str, Path]) -> dict[str, str]:
    return {str(p): file_sha256(p) for p in paths.values() if p.exists()}


def _stage_config_hash(cfg: PipelineConfig, stage: str) -> str:
    relevant: dict = {"seed": cfg.seed}
    if stage in ("extract", "map"):
        relevant.update(templates=cfg.templates_file, aliases=cfg.aliases_file)
    if stage == "label":
        relevant.update(targets=cfg.label_targets, label_seed=cfg.label_seed)
    if stage in ("pretrain-chars", "train", "evaluate", "classify"):
        relevant.update(model=asdict(cfg.model), train=asdict(cfg.train),
                        vocab=[cfg.min_count, cfg.pos_top, cfg.sections_top,
                               cfg.subword_buckets, cfg.statement_max_words],
                        pretrain=cfg.use_pretrained_chars)
    if stage == "lookup":
        relevant.update(lookup=asdict(cfg.lookup))
    if stage == "report":
        relevant.update(report=asdict(cfg.report))
    payload = json.dumps(relevant, sort_keys=True, default=str).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


# ---------------------------------------------------------------------------
# Stage implementations.  Each returns (outputs: dict[name, Path], counts).


def _paths(cfg: PipelineConfig) -> dict[str, Path]:
    out = cfg.out
    return {
        "raw_citations": out / "raw_citations.jsonl",
        "citations": out / "citations.jsonl",
        "train": out / "train.jsonl",
        "unlabeled": out / "unlabeled.jsonl",
        "char_embeddings": out / "char_embeddings.npz",
        "model": out / "model.npz",
        "vocab": out / "vocab.json",
        "metrics": out / "metrics.jsonl",
        "evaluation": out / "evaluation.json",
        "predictions": out / "predictions.jsonl",
        "enriched": out / "enriched.jsonl",
        "citations_enriched": out / "citations_enriched.jsonl",
        "lookup_report": out / "lookup_report.json",
        "heuristics": out / "heuristics.json",
        "report_dir": out / "report",
    }


def _load_records(path: Path) -> list[CitationRecord]:
    return [CitationRecord.from_dict(d) for d in read_jsonl(path)]


def _load_labeled(path: Path) -> list[LabeledCitation]:
    return [LabeledCitation.from_dict(d) for d in read_jsonl(path)]


def stage_extract(cfg: PipelineConfig):
    if not cfg.dump:
        raise DependencyError("extract needs a dump file (--dump or config dump:)")
    templates = load_template_config(cfg.templates_file)
    paths = _paths(cfg)
    pages = citable = rows = 0

    def generate():
        nonlocal pages, citable, rows
        for page in stream_pages(DumpSource(cfg.dump)):
            pages += 1
            if not is_citable_article(page):
                continue
            citable += 1
            for citation in extract_citations(page, templates):
                rows += 1
                yield citation.to_dict()

    write_jsonl(paths["raw_citations"], generate())
    counts = {"pages": pages, "citable_pages": citable, "citations": rows}
    return {"raw_citations": paths["raw_citations"]}, counts


def stage_map(cfg: PipelineConfig):
    paths = _paths(cfg)
    aliases = AliasTable.load(cfg.aliases_file) if cfg.aliases_file else None
    from collections import Counter
    counters: Counter = Counter()

    def generate():
        for d in read_jsonl(paths["raw_citations"]):
            raw = RawCitation.from_dict(d)
            yield record_from_raw(raw, aliases, counters).to_dict()

    rows = write_jsonl(paths["citations"], generate())
    counts = {"citations": rows, **{k: int(v) for k, v in sorted(counters.items())}}
    return {"citations": paths["citations"]}, counts


def stage_label(cfg: PipelineConfig):
    paths = _paths(cfg)
    records = _load_records(paths["citations"])
    seed = cfg.label_seed if cfg.label_seed is not None else cfg.seed
    sample = labeling.build_training_set(records, cfg.label_targets, seed)
    _, unlabeled = partition(records)
    write_jsonl(paths["train"], (item.to_dict() for item in sample))
    write_jsonl(paths["unlabeled"], (r.to_dict() for r in unlabeled))
    counts = {
        "train": len(sample),
        "unlabeled": len(unlabeled),
        **{f"train_{label.lower()}": sum(1 for i in sample if i.label == label)
           for label in CLASS_LABELS},
    }
    return {"train": paths["train"], "unlabeled": paths["unlabeled"]}, counts


def _vocab_kwargs(cfg: PipelineConfig) -> dict:
    return dict(min_count=cfg.min_count, pos_top=cfg.pos_top,
                sections_top=cfg.sections_top,
                subword_buckets=cfg.subword_buckets,
                max_words=cfg.statement_max_words)


def stage_pretrain_chars(cfg: PipelineConfig):
    paths = _paths(cfg)
    dataset = _load_labeled(paths["train"])
    vocab = training_vocabulary(dataset, cfg.train, **_vocab_kwargs(cfg))
    emb, accuracy = pretrain_char_embeddings(
        dataset, cfg.model, vocab, epochs=cfg.train.epochs,
        lr=cfg.train.lr, seed=cfg.train.seed, batch_size=cfg.train.batch_size)
    np.savez_compressed(paths["char_embeddings"], char_emb=emb,
                        vocab_hash=np.frombuffer(
                            vocab.content_hash().encode(), dtype=np.uint8))
    counts = {"dummy_task_accuracy": round(float(accuracy), 4)}
    return {"char_embeddings": paths["char_embeddings"]}, counts


def stage_train(cfg: PipelineConfig):
    paths = _paths(cfg)
    dataset = _load_labeled(paths["train"])
    vocab = training_vocabulary(dataset, cfg.train, **_vocab_kwargs(cfg))
    char_init = None
    if cfg.use_pretrained_chars:
        if not paths["char_embeddings"].exists():
            raise DependencyError(
                "use_pretrained_chars is set; run the pretrain-chars stage first")
        with np.load(paths["char_embeddings"]) as data:
            saved_hash = bytes(data["vocab_hash"]).decode()
            if saved_hash != vocab.content_hash():
                raise DependencyError(
                    "char_embeddings.npz was built for a different vocabulary; "
                    "re-run pretrain-chars")
            char_init = data["char_emb"].copy()
    result = train(dataset, cfg.model, cfg.train, vocab=vocab, char_init=char_init)
    vocab.save(paths["vocab"])
    save_checkpoint(result.params, paths["model"], extra={
        "test_indices": result.test_indices,
        "metrics": result.metrics,
        "diverged": result.diverged,
    })
    write_jsonl(paths["metrics"], result.metrics)
    counts = {
        "examples": len(dataset),
        "holdout": len(result.test_indices),
        "final_accuracy": round(result.metrics[-1]["holdout_accuracy"], 4)
        if result.metrics else None,
        "diverged": result.diverged,
    }
    return {"model": paths["model"], "vocab": paths["vocab"],
            "metrics": paths["metrics"]}, counts


def stage_evaluate(cfg: PipelineConfig):
    paths = _paths(cfg)
    params, extra = load_checkpoint(paths["model"])
    vocab = Vocabulary.load(paths["vocab"])
    dataset = _load_labeled(paths["train"])
    class_index = {label: i for i, label in enumerate(CLASS_LABELS)}
    test = [(featurize(dataset[i], vocab, cfg.statement_max_words),
             class_index[dataset[i].label]) for i in extra["test_indices"]]
    result = evaluate(params, test)
    with open(paths["evaluation"], "w", encoding="utf-8") as fh:
        json.dump(result.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    counts = {"test_examples": len(test), "accuracy": round(result.accuracy, 4)}
    return {"evaluation": paths["evaluation"]}, counts


def stage_classify(cfg: PipelineConfig):
    paths = _paths(cfg)
    params, _ = load_checkpoint(paths["model"])
    vocab = Vocabulary.load(paths["vocab"])

    def generate():
        for d in read_jsonl(paths["unlabeled"]):
            record = CitationRecord.from_dict(d)
            fv = featurize(record, vocab, cfg.statement_max_words)
            pred = forward(params, fv)
            yield {
                "key": report_mod.record_key(record),
                "label": pred.label,
                "probs": [round(float(p), 6) for p in pred.probs],
                "max_prob": round(float(pred.max_prob), 6),
            }

    rows = write_jsonl(paths["predictions"], generate())
    return {"predictions": paths["predictions"]}, {"predictions": rows}


def stage_lookup(cfg: PipelineConfig):
    paths = _paths(cfg)
    records = _load_records(paths["citations"])
    eligible = {d["key"] for d in read_jsonl(paths["predictions"])
                if d["label"] == labeling.JOURNAL_ARTICLE}
    lookup_cfg = crossref.LookupConfig(
        max_rps=cfg.lookup.max_rps,
        retained_results=cfg.lookup.retained_results,
        score_threshold=cfg.lookup.score_threshold,
        retries=cfg.lookup.retries,
        backoff_base=cfg.lookup.backoff_base,
        cache_dir=cfg.lookup.cache_dir,
        replay_file=cfg.lookup.replay_file,
        contact_env=cfg.lookup.contact_env,
    )
    cache = crossref.ResponseCache(cfg.lookup.cache_dir) if cfg.lookup.cache_dir else None
    transport = None
    mode = "off"
    if cfg.lookup.replay_file:
        transport = crossref.ReplayTransport(cfg.lookup.replay_file)
        mode = "replay"
    elif cfg.lookup.live:
        transport = crossref.LiveTransport(lookup_cfg)
        mode = "live"

    if transport is None:
        rows, lookup_report = [], crossref.LookupReport()
    else:
        rows, lookup_report = crossref.enrich_corpus(
            records, eligible, lookup_cfg, transport, cache)
        crossref.apply_enrichment(records, rows)

    write_jsonl(paths["enriched"], (row.to_dict() for row in rows))
    write_jsonl(paths["citations_enriched"], (r.to_dict() for r in records))
    blob = {"mode": mode, **lookup_report.to_dict()}
    with open(paths["lookup_report"], "w", encoding="utf-8") as fh:
        json.dump(blob, fh, indent=2, sort_keys=True)
        fh.write("\n")
    outputs = {"enriched": paths["enriched"],
               "citations_enriched": paths["citations_enriched"],
               "lookup_report": paths["lookup_report"]}

    if cfg.lookup.gold_file and transport is not None:
        gold = []
        for d in read_jsonl(Path(cfg.lookup.gold_file)):
            gold.append((crossref.LookupQuery(title=d["title"],
                                              first_author=d.get("first_author", "")),
                         d["doi"]))
        heuristic = crossref.evaluate_heuristics(
            gold, lookup_cfg, transport, cache, seed=cfg.seed)
        with open(paths["heuristics"], "w", encoding="utf-8") as fh:
            json.dump(heuristic.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        outputs["heuristics"] = paths["heuristics"]

    counts = {"mode": mode, **lookup_report.to_dict()}
    return outputs, counts


def stage_report(cfg: PipelineConfig):
    paths = _paths(cfg)
    originals = _load_records(paths["citations"])
    enriched = _load_records(paths["citations_enriched"])

    class_map: dict[str, tuple[str, str]] = {}
    for record in originals:
        label = assign_label(record.citation)
        if label is not None:
            class_map[report_mod.record_key(record)] = (label, "known")
    for d in read_jsonl(paths["predictions"]):
        if d["key"] not in class_map:
            class_map[d["key"]] = (d["label"], "predicted")

    lookup_report = {}
    if paths["lookup_report"].exists():
        with open(paths["lookup_report"], encoding="utf-8") as fh:
            lookup_report = json.load(fh)
    pr_curve = None
    if paths["heuristics"].exists():
        with open(paths["heuristics"], encoding="utf-8") as fh:
            pr_curve = json.load(fh)

    stats = report_mod.compute_stats(
        enriched, class_map, lookup_report,
        smoothing_window=cfg.report.smoothing_window,
        centered=cfg.report.centered)
    written = report_mod.emit_report(stats, paths["report_dir"],
                                     formats=cfg.report.formats, pr_curve=pr_curve)
    counts = {"files": len(written), "citations": stats.citations_total,
              "pages": stats.pages_total}
    return {"report_dir": paths["report_dir"]}, counts


# ---------------------------------------------------------------------------
# Stage graph and runner


STAGES = {
    "extract": ([], stage_extract),
    "map": (["extract"], stage_map),
    "label": (["map"], stage_label),
    "pretrain-chars": (["label"], stage_pretrain_chars),
    "train": (["label"], stage_train),
    "evaluate": (["train"], stage_evaluate),
    "classify": (["train", "label"], stage_classify),
    "lookup": (["classify", "map"], stage_lookup),
    "report": (["lookup", "classify", "map"], stage_report),
}

ALL_ORDER = ("extract", "map", "label", "train", "evaluate",
             "classify", "lookup", "report")


def _external_inputs(cfg: PipelineConfig, stage: str) -> dict[str, Path]:
    paths = {}
    if stage == "extract":
        if cfg.dump:
            paths["dump"] = Path(cfg.dump)
        if cfg.templates_file:
            paths["templates"] = Path(cfg.templates_file)
    if stage == "map" and cfg.aliases_file:
        paths["aliases"] = Path(cfg.aliases_file)
    if stage == "lookup":
        if cfg.lookup.replay_file:
            paths["replay"] = Path(cfg.lookup.replay_file)
        if cfg.lookup.gold_file:
            paths["gold"] = Path(cfg.lookup.gold_file)
    return paths


def _verify_upstream(cfg: PipelineConfig, stage: str) -> dict[str, str]:
    """Collect dep-output hashes, checking manifests exist and files match."""
    inputs: dict[str, str] = {}
    for dep in STAGES[stage][0]:
        manifest = _load_manifest(cfg, dep)
        if manifest is None:
            raise DependencyError(
                f"stage {stage!r} needs outputs of {dep!r}; run `{dep}` first")
        for path_str, recorded in manifest["outputs"].items():
            path = Path(path_str)
            if not path.exists():
                raise DependencyError(
                    f"output {path} of stage {dep!r} is missing; re-run `{dep}`")
            if path.is_file():
                actual = file_sha256(path)
                if actual != recorded:
                    raise IntegrityError(
                        f"{path} does not match the manifest of stage {dep!r} "
                        "(file changed on disk); re-run that stage")
                inputs[path_str] = actual
    return inputs


def run_stage(name: str, cfg: PipelineConfig, force: bool = False) -> dict:
    """Run one stage (or skip it when nothing changed); returns its manifest."""
    if name == "all":
        manifest = {}
        order = list(ALL_ORDER)
        if cfg.use_pretrained_chars:
            order.insert(order.index("train"), "pretrain-chars")
        for stage in order:
            manifest = run_stage(stage, cfg, force=force)
        return manifest
    if name not in STAGES:
        raise ValueError(f"unknown stage {name!r}")

    inputs = _verify_upstream(cfg, name)
    for key, path in _external_inputs(cfg, name).items():
        if not path.exists():
            raise DependencyError(f"{name}: input file {path} does not exist")
        inputs[str(path)] = file_sha256(path)
    config_hash = _stage_config_hash(cfg, name)

    existing = _load_manifest(cfg, name)
    if existing is not None and not force:
        outputs_ok = all(
            Path(p).is_dir() or (Path(p).exists() and file_sha256(Path(p)) == h)
            for p, h in existing["outputs"].items())
        if (existing.get("inputs") == inputs
                and existing.get("config_hash") == config_hash and outputs_ok):
            log.info("stage=%s event=skipped (up to date)", name)
            return existing

    log.info("stage=%s event=start", name)
    outputs, counts = STAGES[name][1](cfg)
    output_hashes = {}
    for path in outputs.values():
        if path.is_dir():
            output_hashes[str(path)] = "dir"
        else:
            output_hashes[str(path)] = file_sha256(path)
    manifest = _write_manifest(cfg, name, inputs, output_hashes, config_hash, counts)
    log.info("stage=%s event=done %s", name,
             " ".join(f"{k}={v}" for k, v in counts.items()))
    return manifest
