import json
from pathlib import Path

from conftest import write_jsonl_corpus
from rcg.corpus import build_frequency_table, load_corpus
from rcg.encoder import build_bow_encoder
from rcg.evaluation import build_eval_report
from rcg.generate import ir_passthrough
from rcg.index import build_index, retrieve
from rcg.runner import (
    EXIT_BACKEND,
    EXIT_CONFIG,
    EXIT_DATA,
    EXIT_OK,
    load_config,
    main,
)


def fixture_rows(n=10):
    rows = []
    for i in range(n):
        code = " ".join(f"tok{i}_{j}" for j in range(4)) + f" shared{i % 3}"
        rows.append((f"t{i:03d}", code, f"review comment number {i} with detail_{i}"))
    return rows


def write_config(tmp_path, overrides=None, train_rows=None, test_rows=None):
    train_rows = train_rows if train_rows is not None else fixture_rows()
    test_rows = (
        test_rows
        if test_rows is not None
        else [(f"q{i:03d}", code, comment) for i, (_, code, comment) in enumerate(train_rows)]
    )
    train = write_jsonl_corpus(tmp_path / "train.jsonl", train_rows, split="train")
    test = write_jsonl_corpus(tmp_path / "test.jsonl", test_rows, split="test")
    config = {
        "data": {"format": "jsonl", "train": str(train), "test": str(test)},
        "encoder": "bow",
        "generator": "ir",
        "strategy": "pair",
        "k": 1,
        "budget": 512,
        "output_dir": str(tmp_path / "out"),
    }
    config.update(overrides or {})
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config, indent=2), encoding="utf-8")
    return path, config


def test_cmd_index_writes_entries_and_is_reproducible(tmp_path):
    cfg_path, config = write_config(tmp_path)
    assert main(["index", "--config", str(cfg_path)]) == EXIT_OK
    out = Path(config["output_dir"])
    vectors = (out / "index" / "vectors.jsonl").read_bytes()
    assert len(vectors.splitlines()) == 10
    manifest = json.loads((out / "manifest.json").read_text())
    first_hash = manifest["config_hash"]
    assert main(["index", "--config", str(cfg_path)]) == EXIT_OK
    assert (out / "index" / "vectors.jsonl").read_bytes() == vectors
    assert json.loads((out / "manifest.json").read_text())["config_hash"] == first_hash
    for artifact in manifest["artifacts"].values():
        assert Path(artifact).exists()


def test_missing_dataset_is_data_error(tmp_path):
    cfg_path, _ = write_config(tmp_path)
    config = json.loads(cfg_path.read_text())
    config["data"]["train"] = str(tmp_path / "missing.jsonl")
    cfg_path.write_text(json.dumps(config))
    assert main(["run", "--config", str(cfg_path)]) == EXIT_DATA


def test_bad_config_is_config_error(tmp_path):
    cfg_path, _ = write_config(tmp_path, overrides={"strategy": "bogus"})
    assert main(["run", "--config", str(cfg_path)]) == EXIT_CONFIG


def test_unreachable_remote_is_backend_error_with_failed_manifest(tmp_path):
    cfg_path, config = write_config(
        tmp_path, overrides={"encoder": "remote:http://127.0.0.1:1", "generator": "mock:fixed"}
    )
    assert main(["run", "--config", str(cfg_path)]) == EXIT_BACKEND
    manifest = json.loads((Path(config["output_dir"]) / "manifest.json").read_text())
    assert manifest["status"] == "failed"


def test_run_ir_on_duplicated_split_is_perfect(tmp_path):
    cfg_path, config = write_config(tmp_path)
    assert main(["run", "--config", str(cfg_path)]) == EXIT_OK
    report = json.loads((Path(config["output_dir"]) / "report.json").read_text())
    assert report["metrics"]["em_pct"] == 100.0
    assert report["metrics"]["bleu_sentence"]["score"] == 100.0
    assert report["backend"] == "ir"


def test_run_matches_manual_pipeline(tmp_path):
    cfg_path, config = write_config(tmp_path)
    assert main(["run", "--config", str(cfg_path)]) == EXIT_OK
    report = json.loads((Path(config["output_dir"]) / "report.json").read_text())

    train = load_corpus(config["data"]["train"], "jsonl")
    test = load_corpus(config["data"]["test"], "jsonl")
    enc = build_bow_encoder(train)
    db = build_index(train, enc)
    resolved = []
    for ex in test:
        result = retrieve(db, enc.encode_example(ex), 1, query_id=ex.id)
        resolved.append((ex.id, db.resolve(result)))
    outputs = ir_passthrough(resolved)
    manual = build_eval_report(
        codes=[ex.code for ex in test],
        candidates=[o.text for o in outputs],
        references=[ex.comment for ex in test],
        freq_table=build_frequency_table(train, "comment"),
    )
    assert report["metrics"]["em_pct"] == manual.em_pct
    assert report["metrics"]["bleu_sentence"]["score"] == manual.bleu.score
    assert report["metrics"]["bleu_corpus"]["score"] == manual.bleu_corpus.score
    assert report["metrics"]["lfgt"]["counts"] == list(manual.lfgt.counts)


def test_mock_fixed_gives_zero_em(tmp_path):
    cfg_path, config = write_config(tmp_path, overrides={"generator": "mock:fixed"})
    assert main(["run", "--config", str(cfg_path)]) == EXIT_OK
    report = json.loads((Path(config["output_dir"]) / "report.json").read_text())
    assert report["metrics"]["em_pct"] == 0.0


def test_run_reports_are_byte_identical(tmp_path):
    cfg_path, config = write_config(tmp_path)
    assert main(["run", "--config", str(cfg_path)]) == EXIT_OK
    first = (Path(config["output_dir"]) / "report.json").read_bytes()
    assert main(["run", "--config", str(cfg_path)]) == EXIT_OK
    second = (Path(config["output_dir"]) / "report.json").read_bytes()
    assert first == second


def test_k_zero_forces_strategy_none(tmp_path):
    cfg_path, _ = write_config(tmp_path, overrides={"k": 0, "generator": "mock:fixed"})
    cfg = load_config(cfg_path)
    assert cfg.strategy == "none"


def test_ir_with_k_zero_rejected(tmp_path):
    cfg_path, _ = write_config(tmp_path, overrides={"k": 0, "generator": "ir"})
    assert main(["run", "--config", str(cfg_path)]) == EXIT_CONFIG


def test_sweep_emits_report_per_k(tmp_path):
    cfg_path, config = write_config(
        tmp_path, overrides={"generator": "mock:fixed", "k_values": [0, 1, 2, 3]}
    )
    assert main(["sweep", "--config", str(cfg_path)]) == EXIT_OK
    out = Path(config["output_dir"])
    sweep = json.loads((out / "sweep.json").read_text())
    assert [row["k"] for row in sweep["rows"]] == [0, 1, 2, 3]
    assert sweep["rows"][0]["strategy"] == "none"
    for k in (0, 1, 2, 3):
        report = json.loads((out / f"k{k}" / "report.json").read_text())
        assert report["k"] == k
    k0_prompts = (out / "k0" / "prompts.jsonl").read_text()
    assert "[nsep]" not in k0_prompts


def test_sweep_k_prefix_matches_direct_run(tmp_path):
    cfg_path, config = write_config(
        tmp_path, overrides={"generator": "mock:copy_first_exemplar", "k_values": [1, 2]}
    )
    assert main(["sweep", "--config", str(cfg_path)]) == EXIT_OK
    out = Path(config["output_dir"])
    sweep_k2 = json.loads((out / "k2" / "report.json").read_text())
    cfg2_path, config2 = write_config(
        tmp_path,
        overrides={
            "generator": "mock:copy_first_exemplar",
            "k": 2,
            "output_dir": str(tmp_path / "direct"),
        },
    )
    assert main(["run", "--config", str(cfg2_path)]) == EXIT_OK
    direct = json.loads((Path(config2["output_dir"]) / "report.json").read_text())
    assert sweep_k2["metrics"] == direct["metrics"]


def test_stats_toy_bucket(tmp_path, capsys):
    rows = [("1", "x y", "a a b")]
    cfg_path, config = write_config(tmp_path, train_rows=rows, test_rows=rows)
    assert main(["stats", "--config", str(cfg_path)]) == EXIT_OK
    stats = json.loads((Path(config["output_dir"]) / "stats.json").read_text())
    by_threshold = {b["threshold"]: b for b in stats["buckets"]}
    assert by_threshold[1]["unique_tokens"] == 1
    assert by_threshold[1]["comments_containing"] == 1
    assert stats["n_comments"] == 1


def test_stats_rejects_empty_thresholds(tmp_path):
    cfg_path, _ = write_config(tmp_path, overrides={"eval": {"stats_thresholds": []}})
    assert main(["stats", "--config", str(cfg_path)]) == EXIT_DATA


def test_retrieve_dump(tmp_path):
    cfg_path, config = write_config(tmp_path, overrides={"k": 3})
    assert main(["retrieve", "--config", str(cfg_path)]) == EXIT_OK
    lines = (Path(config["output_dir"]) / "retrievals.jsonl").read_text().splitlines()
    assert len(lines) == 10
    row = json.loads(lines[0])
    assert row["query_id"] == "q000"
    assert len(row["neighbors"]) == 3
    assert row["zero_query"] is False


def test_prompt_dump_schema(tmp_path):
    cfg_path, config = write_config(tmp_path, overrides={"k": 2})
    assert main(["prompt", "--config", str(cfg_path)]) == EXIT_OK
    lines = (Path(config["output_dir"]) / "prompts.jsonl").read_text().splitlines()
    record = json.loads(lines[0])
    assert set(record) == {"query_id", "text", "exemplars", "strategy", "token_count"}
    assert record["strategy"] == "pair"


def test_zero_query_fallback_is_flagged(tmp_path):
    train_rows = fixture_rows(4)
    test_rows = [("q0", "totally unseen vocabulary", "whatever comment")]
    cfg_path, config = write_config(
        tmp_path, overrides={"generator": "mock:fixed"}, train_rows=train_rows, test_rows=test_rows
    )
    assert main(["run", "--config", str(cfg_path)]) == EXIT_OK
    report = json.loads((Path(config["output_dir"]) / "report.json").read_text())
    assert report["zero_query_ids"] == ["q0"]
    retr = json.loads(
        (Path(config["output_dir"]) / "prompts.jsonl").read_text().splitlines()[0]
    )
    assert retr["exemplars"] == ["t000"]  # lowest-id fallback neighbor
