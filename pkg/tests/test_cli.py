import json

import pytest

from commenteval.cli import run, z_for_confidence

from conftest import write_corpus_file
from mock_openai import MockChatServer


@pytest.fixture
def corpus_path(tmp_path, three_pair_records):
    return write_corpus_file(tmp_path / "corpus.jsonl", three_pair_records)


def test_stats_subcommand(corpus_path, capsys):
    assert run(["stats", "--in", str(corpus_path)]) == 0
    out = capsys.readouterr().out
    payload = json.loads(out)
    assert payload["pair_count"] == 3
    assert payload["tokenizer_id"] == "whitespace"


def test_unknown_flag_exits_2(corpus_path, capsys):
    with pytest.raises(SystemExit) as excinfo:
        run(["stats", "--in", str(corpus_path), "--frobnicate"])
    assert excinfo.value.code == 2


def test_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as excinfo:
        run(["definitely-not-a-command"])
    assert excinfo.value.code == 2


def test_sample_prints_357(capsys):
    assert run(["sample", "--n", "4985", "--confidence", "0.95",
                "--margin", "0.05"]) == 0
    assert capsys.readouterr().out.strip() == "357"


def test_sample_with_explicit_z(capsys):
    assert run(["sample", "--n", "4985", "--z", "1.96"]) == 0
    assert capsys.readouterr().out.strip() == "357"


def test_z_for_confidence_table_and_fallback():
    assert z_for_confidence(0.95) == 1.96
    assert z_for_confidence(0.99) == 2.576
    assert abs(z_for_confidence(0.954) - 2.0) < 0.01


def test_missing_file_is_domain_error(tmp_path, capsys):
    assert run(["stats", "--in", str(tmp_path / "nope.jsonl")]) == 1
    assert "error" in capsys.readouterr().err


def test_ingest_writes_outputs_and_manifest(tmp_path, capsys):
    raw = tmp_path / "raw.jsonl"
    lines = [
        json.dumps({"id": "a", "code": "x", "docstring": "fine"}),
        "broken line",
    ]
    raw.write_text("\n".join(lines) + "\n", encoding="utf-8")
    out = tmp_path / "corpus.jsonl"
    assert run(["ingest", "--in", str(raw), "--out", str(out)]) == 0
    assert out.exists()
    assert (tmp_path / "raw.jsonl.errors").exists()
    manifest = json.loads((tmp_path / "corpus.jsonl.manifest.json")
                          .read_text(encoding="utf-8"))
    assert manifest["subcommand"] == "ingest"
    assert str(raw) in manifest["inputs"]
    assert manifest["tool_version"]


def test_eval_ref_and_report(tmp_path, capsys, three_pair_records):
    pred = write_corpus_file(tmp_path / "pred.jsonl", three_pair_records)
    ref = write_corpus_file(tmp_path / "ref.jsonl", three_pair_records)
    out = tmp_path / "report.jsonl"
    assert run(["eval-ref", "--pred", str(pred), "--ref", str(ref),
                "--out", str(out)]) == 0
    table = capsys.readouterr().out
    assert "corpus BLEU" in table
    assert run(["report", "--in", str(out)]) == 0
    assert "exact-match rate" in capsys.readouterr().out


def test_eval_ref_deterministic_bytes(tmp_path, three_pair_records):
    pred = write_corpus_file(tmp_path / "pred.jsonl", three_pair_records)
    ref = write_corpus_file(tmp_path / "ref.jsonl", three_pair_records)
    out_a = tmp_path / "a.jsonl"
    out_b = tmp_path / "b.jsonl"
    run(["eval-ref", "--pred", str(pred), "--ref", str(ref), "--out", str(out_a)])
    run(["eval-ref", "--pred", str(pred), "--ref", str(ref), "--out", str(out_b)])
    assert out_a.read_bytes() == out_b.read_bytes()


def test_ccid_build_subcommand(tmp_path, capsys):
    pairs = tmp_path / "pairs.jsonl"
    pairs.write_text(json.dumps({
        "id": "s", "code_before": "a", "code_after": "b",
        "comment_before": "old", "comment_after": "new",
    }) + "\n", encoding="utf-8")
    out = tmp_path / "ccid.jsonl"
    assert run(["ccid-build", "--in", str(pairs), "--out", str(out)]) == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 2
    assert "2 inconsistent" in capsys.readouterr().out


def test_eval_incrate_with_verdict_file(tmp_path, capsys, three_pair_records):
    corpus = write_corpus_file(tmp_path / "c.jsonl", three_pair_records)
    verdicts = tmp_path / "verdicts.jsonl"
    verdicts.write_text("\n".join(
        json.dumps({"id": r["id"], "inconsistent": i == 0})
        for i, r in enumerate(three_pair_records)) + "\n", encoding="utf-8")
    assert run(["eval-incrate", "--in", str(corpus),
                "--verdicts", str(verdicts)]) == 0
    assert "(1/3)" in capsys.readouterr().out


def test_eval_mrr_with_vector_file(tmp_path, capsys, three_pair_records):
    corpus = write_corpus_file(tmp_path / "c.jsonl", three_pair_records)
    vectors = tmp_path / "vectors.jsonl"
    lines = []
    for i, r in enumerate(three_pair_records):
        one_hot = [1.0 if j == i else 0.0 for j in range(3)]
        lines.append(json.dumps({"id": r["id"], "kind": "comment_query",
                                 "vector": one_hot}))
        lines.append(json.dumps({"id": r["id"], "kind": "code", "vector": one_hot}))
    vectors.write_text("\n".join(lines) + "\n", encoding="utf-8")
    out = tmp_path / "mrr.json"
    assert run(["eval-mrr", "--in", str(corpus), "--vectors", str(vectors),
                "--batch-size", "3", "--out", str(out)]) == 0
    payload = json.loads(out.read_text(encoding="utf-8"))
    assert payload["mrr"] == 1.0
    assert "MRR: 1.0000" in capsys.readouterr().out


def test_eval_use_with_vector_files(tmp_path, capsys, three_pair_records):
    pred = write_corpus_file(tmp_path / "pred.jsonl", three_pair_records)
    ref = write_corpus_file(tmp_path / "ref.jsonl", three_pair_records)
    vec_lines = [json.dumps({"id": r["id"], "kind": "summary",
                             "vector": [1.0, float(i)]})
                 for i, r in enumerate(three_pair_records)]
    vectors = tmp_path / "v.jsonl"
    vectors.write_text("\n".join(vec_lines) + "\n", encoding="utf-8")
    assert run(["eval-use", "--pred", str(pred), "--ref", str(ref),
                "--vectors", str(vectors), "--ref-vectors", str(vectors)]) == 0
    assert "mean USE similarity: 1.0000" in capsys.readouterr().out


def test_assign_export_round_trip(tmp_path, capsys, three_pair_records):
    snippets = tmp_path / "snippets.txt"
    snippets.write_text("p1\np2\n", encoding="utf-8")
    system_a = write_corpus_file(tmp_path / "sysA.jsonl", three_pair_records)
    system_b = write_corpus_file(tmp_path / "sysB.jsonl", [
        dict(r, docstring=r["docstring"] + " alt") for r in three_pair_records
    ])
    assignments = tmp_path / "assignments.json"
    assert run(["assign", "--snippets", str(snippets),
                "--systems", "sysA,sysB", "--raters", "r1,r2,r3",
                "--seed", "3", "--out", str(assignments),
                "--comments", f"sysA={system_a}",
                "--comments", f"sysB={system_b}"]) == 0
    assert assignments.exists()

    log = tmp_path / "ratings.jsonl"
    out = tmp_path / "final.jsonl"
    assert run(["export", "--assignments", str(assignments),
                "--log", str(log), "--out", str(out)]) == 0
    lines = [json.loads(line) for line in out.read_text(encoding="utf-8").splitlines()]
    assert len(lines) == 4
    assert all(record["status"] == "unresolved" for record in lines)


def test_estimate_cost_subcommand(tmp_path, capsys, three_pair_records):
    corpus = write_corpus_file(tmp_path / "c.jsonl", three_pair_records)
    config = tmp_path / "config.json"
    config.write_text(json.dumps({
        "endpoint": "http://unused:1", "model": "m",
        "price_input_per_million": 1.0, "price_output_per_million": 2.0,
    }), encoding="utf-8")
    assert run(["estimate-cost", "--in", str(corpus), "--config", str(config)]) == 0
    assert "estimated cost" in capsys.readouterr().out


def test_rebuild_subcommand(tmp_path, capsys, three_pair_records):
    corpus = write_corpus_file(tmp_path / "c.jsonl", three_pair_records)
    out = tmp_path / "rebuilt.jsonl"
    with MockChatServer() as server:
        config = tmp_path / "config.json"
        config.write_text(json.dumps({
            "endpoint": server.url, "model": "mock-model",
            "price_input_per_million": 0.5, "price_output_per_million": 1.5,
            "base_delay": 0.01,
        }), encoding="utf-8")
        assert run(["rebuild", "--in", str(corpus), "--config", str(config),
                    "--out", str(out), "--cache", str(tmp_path / "cache"),
                    "--max-in-flight", "2"]) == 0
        assert server.request_count == 3
    rebuilt = [json.loads(line) for line in out.read_text(encoding="utf-8").splitlines()]
    assert len(rebuilt) == 3
    assert all(r["source"] == "model:mock-model" for r in rebuilt)
    assert (tmp_path / "rebuilt.jsonl.cost.json").exists()
    assert (tmp_path / "rebuilt.jsonl.manifest.json").exists()
