"""Experiment orchestration and the ``rcg`` command line interface.

Wires corpus -> encoder -> index -> retrieval -> prompts -> generation
-> evaluation from a single JSON config. Reports are byte-deterministic
for identical configs and inputs; wall-clock timestamps live only in the
run manifest.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from .corpus import Corpus, build_frequency_table, frequency_bucket_stats, load_corpus
from .encoder import build_bow_encoder, load_precomputed_encoder, remote_encoder
from .errors import (
    AlignmentError,
    ConfigError,
    DimensionMismatch,
    DuplicateId,
    EmptyCorpus,
    EmptyInput,
    EncoderUnavailable,
    GeneratorUnavailable,
    InvalidBudget,
    InvalidThresholds,
    MalformedRecord,
    MissingVector,
    NoExemplar,
    ZeroQuery,
)
from .evaluation import DEFAULT_LFGT_THRESHOLDS, SMOOTHING_MODES, build_eval_report
from .generate import (
    DEFAULT_MAX_NEW_TOKENS,
    MOCK_MODES,
    GenerationRequest,
    ir_passthrough,
    mock_generate,
    remote_generate,
)
from .index import build_index, load_index, lowest_id_entries, retrieve, save_index
from .prompt import DEFAULT_BUDGET, STRATEGIES, build_prompt

SCHEMA_VERSION = 1
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_BACKEND = 4

DEFAULT_STATS_THRESHOLDS = (1, 5, 10, 20, 50, 100)
DEFAULT_SWEEP_KS = tuple(range(9))

_DATA_ERRORS = (
    FileNotFoundError,
    DuplicateId,
    MalformedRecord,
    AlignmentError,
    EmptyCorpus,
    EmptyInput,
    InvalidThresholds,
    DimensionMismatch,
    MissingVector,
    NoExemplar,
)
_BACKEND_ERRORS = (EncoderUnavailable, GeneratorUnavailable)


@dataclass
class ExperimentConfig:
    data: dict
    encoder: str
    generator: str
    strategy: str
    k: int
    budget: int
    max_new_tokens: int
    decode_hint: str
    dedup_identical: bool
    lfgt_thresholds: tuple[int, ...]
    stats_thresholds: tuple[int, ...]
    code_bucket: int
    comment_bucket: int
    smoothing: str
    k_values: tuple[int, ...]
    seed: int
    output_dir: Path
    index_dir: Path | None
    resolved: dict


def load_config(
    path: str | Path,
    *,
    k: int | None = None,
    out: str | None = None,
    dedup_identical: bool | None = None,
    k_values: list[int] | None = None,
) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")

    def pick(key, default):
        return raw.get(key, default)

    data = pick("data", None)
    if not isinstance(data, dict):
        raise ConfigError("config needs a 'data' object with split paths")
    encoder_spec = str(pick("encoder", "bow"))
    generator_spec = str(pick("generator", "ir"))
    strategy = str(pick("strategy", "pair"))
    k_value = int(raw["k"]) if "k" in raw else 1
    budget = int(pick("budget", DEFAULT_BUDGET))
    max_new_tokens = int(pick("max_new_tokens", DEFAULT_MAX_NEW_TOKENS))
    decode_hint = str(pick("decode_hint", ""))
    dedup = bool(pick("dedup_identical", False))
    eval_opts = pick("eval", {})
    if not isinstance(eval_opts, dict):
        raise ConfigError("'eval' must be an object")
    lfgt_thresholds = tuple(int(x) for x in eval_opts.get("lfgt_thresholds", DEFAULT_LFGT_THRESHOLDS))
    stats_thresholds = tuple(int(x) for x in eval_opts.get("stats_thresholds", DEFAULT_STATS_THRESHOLDS))
    code_bucket = int(eval_opts.get("code_bucket", 20))
    comment_bucket = int(eval_opts.get("comment_bucket", 10))
    smoothing = str(eval_opts.get("smoothing", "add_one"))
    sweep_ks = tuple(int(x) for x in pick("k_values", DEFAULT_SWEEP_KS))
    seed = int(pick("seed", 0))
    output_dir = pick("output_dir", "out")
    index_dir = pick("index_dir", None)

    # command line overrides
    if k is not None:
        k_value = k
    if out is not None:
        output_dir = out
    if dedup_identical is not None:
        dedup = dedup_identical
    if k_values is not None:
        sweep_ks = tuple(k_values)

    # environment overrides apply to endpoint URLs only
    if encoder_spec.startswith("remote:") and os.environ.get("RCG_ENCODER_URL"):
        encoder_spec = "remote:" + os.environ["RCG_ENCODER_URL"]
    if generator_spec.startswith("remote:") and os.environ.get("RCG_GENERATOR_URL"):
        generator_spec = "remote:" + os.environ["RCG_GENERATOR_URL"]

    if strategy not in STRATEGIES:
        raise ConfigError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    if k_value < 0:
        raise ConfigError(f"k must be >= 0, got {k_value}")
    if k_value == 0:
        strategy = "none"
    if budget < 1:
        raise ConfigError(f"budget must be >= 1, got {budget}")
    if max_new_tokens < 1:
        raise ConfigError(f"max_new_tokens must be >= 1, got {max_new_tokens}")
    if smoothing not in SMOOTHING_MODES:
        raise ConfigError(f"unknown smoothing {smoothing!r}")
    if generator_spec == "ir" and k_value == 0:
        raise ConfigError("generator 'ir' needs k >= 1 (it reuses the rank-1 exemplar)")
    if generator_spec.startswith("mock:") and generator_spec[5:] not in MOCK_MODES:
        raise ConfigError(f"unknown mock mode {generator_spec[5:]!r}")
    elif not (
        generator_spec == "ir"
        or generator_spec.startswith("mock:")
        or generator_spec.startswith("remote:")
    ):
        raise ConfigError(f"unknown generator spec {generator_spec!r}")
    if not (encoder_spec == "bow" or encoder_spec.startswith(("precomputed:", "remote:"))):
        raise ConfigError(f"unknown encoder spec {encoder_spec!r}")

    resolved = {
        "data": data,
        "encoder": encoder_spec,
        "generator": generator_spec,
        "strategy": strategy,
        "k": k_value,
        "budget": budget,
        "max_new_tokens": max_new_tokens,
        "decode_hint": decode_hint,
        "dedup_identical": dedup,
        "eval": {
            "lfgt_thresholds": list(lfgt_thresholds),
            "stats_thresholds": list(stats_thresholds),
            "code_bucket": code_bucket,
            "comment_bucket": comment_bucket,
            "smoothing": smoothing,
        },
        "k_values": list(sweep_ks),
        "seed": seed,
        "output_dir": str(output_dir),
        "index_dir": None if index_dir is None else str(index_dir),
    }
    return ExperimentConfig(
        data=data,
        encoder=encoder_spec,
        generator=generator_spec,
        strategy=strategy,
        k=k_value,
        budget=budget,
        max_new_tokens=max_new_tokens,
        decode_hint=decode_hint,
        dedup_identical=dedup,
        lfgt_thresholds=lfgt_thresholds,
        stats_thresholds=stats_thresholds,
        code_bucket=code_bucket,
        comment_bucket=comment_bucket,
        smoothing=smoothing,
        k_values=sweep_ks,
        seed=seed,
        output_dir=Path(output_dir),
        index_dir=None if index_dir is None else Path(index_dir),
        resolved=resolved,
    )


def config_hash(cfg: ExperimentConfig) -> str:
    canonical = json.dumps(cfg.resolved, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _load_split(cfg: ExperimentConfig, split: str) -> Corpus:
    if split not in cfg.data:
        raise ConfigError(f"config data has no '{split}' entry")
    entry = cfg.data[split]
    fmt = cfg.data.get("format", "jsonl")
    if fmt == "paired_text":
        if not (isinstance(entry, dict) and "code" in entry and "comment" in entry):
            raise ConfigError(
                f"paired_text split '{split}' must be an object with 'code' and 'comment' paths"
            )
        return load_corpus(entry["code"], "paired_text", comment_path=entry["comment"], split=split)
    if fmt == "jsonl":
        return load_corpus(entry, "jsonl")
    raise ConfigError(f"unknown data format {fmt!r}")


def make_encoder(cfg: ExperimentConfig, train: Corpus):
    if cfg.encoder == "bow":
        return build_bow_encoder(train)
    if cfg.encoder.startswith("precomputed:"):
        return load_precomputed_encoder(cfg.encoder.split(":", 1)[1])
    if cfg.encoder.startswith("remote:"):
        return remote_encoder(cfg.encoder.split(":", 1)[1])
    raise ConfigError(f"unknown encoder spec {cfg.encoder!r}")


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


def _write_json(path: Path, document: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(document, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _write_jsonl(path: Path, records) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")


def _write_manifest(out_dir: Path, cfg_hash: str, fingerprint: str | None, artifacts: dict,
                    status: str, started_at: str) -> None:
    _write_json(
        out_dir / "manifest.json",
        {
            "schema_version": SCHEMA_VERSION,
            "config_hash": cfg_hash,
            "encoder_fingerprint": fingerprint,
            "status": status,
            "started_at": started_at,
            "finished_at": _now(),
            "artifacts": artifacts,
        },
    )


def _retrieve_all(cfg: ExperimentConfig, db, encoder, test: Corpus, k: int):
    """Per test example: (example, RetrievalResult | None, zero_query_flag)."""
    rows = []
    for ex in test:
        if k < 1:
            rows.append((ex, None, False))
            continue
        query = encoder.encode_example(ex)
        exclude_code = ex.code if cfg.dedup_identical else None
        try:
            result = retrieve(db, query, k, exclude_identical_code=exclude_code, query_id=ex.id)
            rows.append((ex, result, False))
        except ZeroQuery:
            fallback = lowest_id_entries(db, k, exclude_identical_code=exclude_code, query_id=ex.id)
            rows.append((ex, fallback, True))
    return rows


def _build_prompts(cfg: ExperimentConfig, db, rows):
    prompts = []
    for ex, result, _ in rows:
        exemplars = db.resolve(result) if result is not None else []
        prompts.append(build_prompt(ex.id, ex.code, exemplars, cfg.strategy, cfg.budget))
    return prompts


def _generate(cfg: ExperimentConfig, db, rows, prompts):
    if cfg.generator == "ir":
        resolved = [(ex.id, db.resolve(result)) for ex, result, _ in rows]
        return ir_passthrough(resolved)
    request = GenerationRequest(
        prompts=tuple(prompts),
        max_new_tokens=cfg.max_new_tokens,
        decode_hint=cfg.decode_hint,
    )
    if cfg.generator.startswith("mock:"):
        return mock_generate(request, cfg.generator.split(":", 1)[1])
    return remote_generate(cfg.generator.split(":", 1)[1], request)


def _evaluate(cfg: ExperimentConfig, train: Corpus, test: Corpus, outputs):
    freq = build_frequency_table(train, "comment")
    return build_eval_report(
        codes=[ex.code for ex in test],
        candidates=[o.text for o in outputs],
        references=[ex.comment for ex in test],
        freq_table=freq,
        lfgt_thresholds=cfg.lfgt_thresholds,
        smoothing=cfg.smoothing,
        code_bucket=cfg.code_bucket,
        comment_bucket=cfg.comment_bucket,
    )


def _run_arm(cfg: ExperimentConfig, cfg_hash: str, db, rows, prompts, train, test, out_dir: Path):
    """Generate and evaluate one configuration arm; returns the report document."""
    _write_jsonl(out_dir / "prompts.jsonl", (p.to_record() for p in prompts))
    outputs = _generate(cfg, db, rows, prompts)
    _write_jsonl(
        out_dir / "outputs.jsonl",
        ({"query_id": o.query_id, "text": o.text, "backend": o.backend} for o in outputs),
    )
    report = _evaluate(cfg, train, test, outputs)
    document = {
        "schema_version": SCHEMA_VERSION,
        "config_hash": cfg_hash,
        "encoder_fingerprint": db.fingerprint,
        "backend": outputs[0].backend if outputs else cfg.generator,
        "strategy": cfg.strategy,
        "k": cfg.k,
        "budget": cfg.budget,
        "dedup_identical": cfg.dedup_identical,
        "zero_query_ids": sorted(ex.id for ex, _, zero in rows if zero),
        "metrics": report.to_dict(),
    }
    _write_json(out_dir / "report.json", document)
    return document


def cmd_index(cfg: ExperimentConfig) -> int:
    started = _now()
    cfg_hash = config_hash(cfg)
    out_dir = cfg.output_dir
    train = _load_split(cfg, "train")
    encoder = make_encoder(cfg, train)
    db = build_index(train, encoder)
    index_dir = out_dir / "index"
    save_index(db, index_dir)
    _write_manifest(
        out_dir, cfg_hash, db.fingerprint,
        {"index": str(index_dir)}, "ok", started,
    )
    print(f"indexed {db.size} entries -> {index_dir}")
    return EXIT_OK


def _prepare(cfg: ExperimentConfig):
    train = _load_split(cfg, "train")
    encoder = make_encoder(cfg, train)
    if cfg.index_dir is not None:
        db = load_index(cfg.index_dir, train)
        if db.fingerprint != encoder.descriptor.fingerprint:
            raise ConfigError(
                "index_dir was built with a different encoder "
                f"({db.fingerprint[:12]}... vs {encoder.descriptor.fingerprint[:12]}...)"
            )
    else:
        db = build_index(train, encoder)
    return train, encoder, db


def cmd_run(cfg: ExperimentConfig) -> int:
    started = _now()
    cfg_hash = config_hash(cfg)
    out_dir = cfg.output_dir
    artifacts: dict[str, str] = {}
    fingerprint = None
    try:
        train, encoder, db = _prepare(cfg)
        fingerprint = db.fingerprint
        test = _load_split(cfg, "test")
        rows = _retrieve_all(cfg, db, encoder, test, cfg.k)
        prompts = _build_prompts(cfg, db, rows)
        artifacts["prompts"] = str(out_dir / "prompts.jsonl")
        artifacts["outputs"] = str(out_dir / "outputs.jsonl")
        artifacts["report"] = str(out_dir / "report.json")
        document = _run_arm(cfg, cfg_hash, db, rows, prompts, train, test, out_dir)
    except _BACKEND_ERRORS:
        _write_manifest(out_dir, cfg_hash, fingerprint, artifacts, "failed", started)
        raise
    _write_manifest(out_dir, cfg_hash, fingerprint, artifacts, "ok", started)
    metrics = document["metrics"]
    print(
        f"n={metrics['n_instances']} em={metrics['em_pct']:.2f}% "
        f"bleu={metrics['bleu_sentence']['score']:.2f} "
        f"(corpus {metrics['bleu_corpus']['score']:.2f}) -> {out_dir / 'report.json'}"
    )
    return EXIT_OK


def cmd_sweep(cfg: ExperimentConfig) -> int:
    started = _now()
    cfg_hash = config_hash(cfg)
    out_dir = cfg.output_dir
    k_values = cfg.k_values
    if not k_values:
        raise ConfigError("sweep needs at least one k value")
    if any(k < 0 for k in k_values):
        raise ConfigError(f"sweep k values must be >= 0: {k_values}")
    if cfg.generator == "ir" and 0 in k_values:
        raise ConfigError("generator 'ir' cannot produce the k=0 arm")
    artifacts: dict[str, str] = {}
    fingerprint = None
    try:
        train, encoder, db = _prepare(cfg)
        fingerprint = db.fingerprint
        test = _load_split(cfg, "test")
        k_max = max(k_values)
        rows_max = _retrieve_all(cfg, db, encoder, test, k_max)
        table = []
        for k in sorted(set(k_values)):
            arm_cfg = _arm_config(cfg, k)
            arm_hash = config_hash(arm_cfg)
            if k == 0:
                rows = [(ex, None, False) for ex, _, _ in rows_max]
            else:
                rows = [
                    (
                        ex,
                        None
                        if result is None
                        else type(result)(result.query_id, result.neighbors[:k], k),
                        zero,
                    )
                    for ex, result, zero in rows_max
                ]
            prompts = _build_prompts(arm_cfg, db, rows)
            arm_dir = out_dir / f"k{k}"
            document = _run_arm(arm_cfg, arm_hash, db, rows, prompts, train, test, arm_dir)
            artifacts[f"k{k}"] = str(arm_dir / "report.json")
            table.append(
                {
                    "k": k,
                    "strategy": arm_cfg.strategy,
                    "em_pct": document["metrics"]["em_pct"],
                    "bleu_sentence": document["metrics"]["bleu_sentence"]["score"],
                    "bleu_corpus": document["metrics"]["bleu_corpus"]["score"],
                }
            )
    except _BACKEND_ERRORS:
        _write_manifest(out_dir, cfg_hash, fingerprint, artifacts, "failed", started)
        raise
    sweep_doc = {"schema_version": SCHEMA_VERSION, "config_hash": cfg_hash, "rows": table}
    _write_json(out_dir / "sweep.json", sweep_doc)
    artifacts["sweep"] = str(out_dir / "sweep.json")
    _write_manifest(out_dir, cfg_hash, fingerprint, artifacts, "ok", started)
    print(f"{'k':>3} {'em%':>8} {'bleu':>8}")
    for row in table:
        print(f"{row['k']:>3} {row['em_pct']:>8.2f} {row['bleu_sentence']:>8.2f}")
    return EXIT_OK


def _arm_config(cfg: ExperimentConfig, k: int) -> ExperimentConfig:
    resolved = dict(cfg.resolved)
    strategy = "none" if k == 0 else cfg.strategy
    resolved.update({"k": k, "strategy": strategy})
    arm = ExperimentConfig(**{**cfg.__dict__, "k": k, "strategy": strategy, "resolved": resolved})
    return arm


def cmd_stats(cfg: ExperimentConfig) -> int:
    started = _now()
    cfg_hash = config_hash(cfg)
    out_dir = cfg.output_dir
    train = _load_split(cfg, "train")
    table = build_frequency_table(train, "comment")
    stats = frequency_bucket_stats(table, train, cfg.stats_thresholds, "comment")
    buckets = [
        {
            "threshold": stat.threshold,
            "unique_tokens": stat.unique_tokens,
            "unique_pct": 100.0 * stat.unique_tokens / table.unique_tokens,
            "comments_containing": stat.comments_containing,
            "comments_pct": 100.0 * stat.comments_containing / len(train),
        }
        for stat in stats
    ]
    document = {
        "schema_version": SCHEMA_VERSION,
        "config_hash": cfg_hash,
        "field": "comment",
        "n_comments": len(train),
        "total_tokens": table.total_tokens,
        "unique_tokens": table.unique_tokens,
        "buckets": buckets,
    }
    _write_json(out_dir / "stats.json", document)
    _write_manifest(out_dir, cfg_hash, None, {"stats": str(out_dir / "stats.json")}, "ok", started)
    print(f"{'freq<=':>8} {'tokens':>10} {'tok%':>7} {'comments':>10} {'com%':>7}")
    for b in buckets:
        print(
            f"{b['threshold']:>8} {b['unique_tokens']:>10} {b['unique_pct']:>6.2f}% "
            f"{b['comments_containing']:>10} {b['comments_pct']:>6.2f}%"
        )
    print(
        f"{'all':>8} {table.unique_tokens:>10} {100.0:>6.2f}% {len(train):>10} {100.0:>6.2f}%"
    )
    return EXIT_OK


def cmd_retrieve(cfg: ExperimentConfig) -> int:
    started = _now()
    cfg_hash = config_hash(cfg)
    out_dir = cfg.output_dir
    if cfg.k < 1:
        raise ConfigError("retrieve needs k >= 1")
    train, encoder, db = _prepare(cfg)
    test = _load_split(cfg, "test")
    rows = _retrieve_all(cfg, db, encoder, test, cfg.k)
    _write_jsonl(
        out_dir / "retrievals.jsonl",
        (
            {
                "query_id": ex.id,
                "neighbors": [[entry_id, score] for entry_id, score in result.neighbors],
                "zero_query": zero,
            }
            for ex, result, zero in rows
        ),
    )
    _write_manifest(
        out_dir, cfg_hash, db.fingerprint,
        {"retrievals": str(out_dir / "retrievals.jsonl")}, "ok", started,
    )
    print(f"retrieved top-{cfg.k} for {len(test)} queries -> {out_dir / 'retrievals.jsonl'}")
    return EXIT_OK


def cmd_prompt(cfg: ExperimentConfig) -> int:
    started = _now()
    cfg_hash = config_hash(cfg)
    out_dir = cfg.output_dir
    train, encoder, db = _prepare(cfg)
    test = _load_split(cfg, "test")
    rows = _retrieve_all(cfg, db, encoder, test, cfg.k)
    prompts = _build_prompts(cfg, db, rows)
    _write_jsonl(out_dir / "prompts.jsonl", (p.to_record() for p in prompts))
    _write_manifest(
        out_dir, cfg_hash, db.fingerprint,
        {"prompts": str(out_dir / "prompts.jsonl")}, "ok", started,
    )
    print(f"built {len(prompts)} prompts -> {out_dir / 'prompts.jsonl'}")
    return EXIT_OK


_COMMANDS = {
    "index": cmd_index,
    "run": cmd_run,
    "sweep": cmd_sweep,
    "stats": cmd_stats,
    "retrieve": cmd_retrieve,
    "prompt": cmd_prompt,
}


def _parse_args(argv):
    parser = argparse.ArgumentParser(
        prog="rcg",
        description="Retrieval-augmented code review comment generation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("index", "build and serialize the retrieval database"),
        ("run", "full pipeline: retrieve, prompt, generate, evaluate"),
        ("sweep", "run once per k in k_values and consolidate a k-vs-score table"),
        ("stats", "training comment token frequency distribution"),
        ("retrieve", "dump top-k neighbors for the test split"),
        ("prompt", "dump budget-packed prompts without generating"),
    ):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, help="path to the experiment JSON config")
        sp.add_argument("--out", help="override the config output_dir")
        if name in ("run", "sweep", "retrieve", "prompt"):
            sp.add_argument("--k", type=int, help="override the config k")
            sp.add_argument(
                "--dedup-identical",
                action="store_true",
                default=None,
                help="exclude retrieved entries whose code is byte-identical to the query",
            )
        if name == "sweep":
            sp.add_argument("--k-values", help="comma-separated k values, e.g. 0,1,2,4,8")
    return parser.parse_args(argv)


def main(argv=None) -> int:
    args = _parse_args(argv)
    try:
        k_values = None
        if getattr(args, "k_values", None):
            k_values = [int(x) for x in args.k_values.split(",") if x.strip()]
        cfg = load_config(
            args.config,
            k=getattr(args, "k", None),
            out=args.out,
            dedup_identical=getattr(args, "dedup_identical", None),
            k_values=k_values,
        )
        return _COMMANDS[args.command](cfg)
    except (ConfigError, InvalidBudget, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except _BACKEND_ERRORS as exc:
        print(f"backend unavailable: {exc}", file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
