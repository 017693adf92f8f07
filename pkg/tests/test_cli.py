from __future__ import annotations

import json
import sys

import pytest
from typer.testing import CliRunner

from mtcurate import __version__
from mtcurate.cli import app, run
from mtcurate.corpus import load

from conftest import FakeResponse


runner = CliRunner()


def invoke(*args):
    return runner.invoke(app, ["--log-level", "ERROR", *map(str, args)])


@pytest.fixture
def five_pairs(write_jsonl):
    return write_jsonl(
        "five.jsonl",
        [
            {"en": "Hello", "vi": "Xin chào", "domain": "news", "score": 0.9},
            {"en": "Thank you", "vi": "Cảm ơn", "domain": "law", "score": 0.2},
            {"en": "hello", "vi": "xin chào", "domain": "news", "score": 0.5},
            {"en": "Good night", "vi": "Chúc ngủ ngon", "domain": "law", "score": 0.7},
            {"en": "Bye", "vi": "Tạm biệt", "domain": "news", "score": 0.1},
        ],
    )


def test_version():
    result = runner.invoke(app, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.stdout


def test_unknown_subcommand_fails():
    result = runner.invoke(app, ["frobnicate"])
    assert result.exit_code != 0


def test_stats(five_pairs):
    result = invoke("stats", "--in", five_pairs)
    assert result.exit_code == 0, result.output
    data = json.loads(result.stdout)
    assert data["total"] == 5
    assert data["per_domain"] == {"law": 2, "news": 3}


def test_errors_are_json_with_exit_code_one(tmp_path):
    result = invoke("stats", "--in", tmp_path / "missing.jsonl")
    assert result.exit_code == 1
    assert '"error": "MissingFileError"' in result.output


def test_ingest_and_merge(tmp_path):
    (tmp_path / "a.en").write_text("one\ntwo\n", encoding="utf-8")
    (tmp_path / "a.vi").write_text("một\nhai\n", encoding="utf-8")
    out = tmp_path / "a.jsonl"
    result = invoke(
        "ingest", "--in", tmp_path / "a", "--format", "line-pair", "--domain", "wiki", "--out", out
    )
    assert result.exit_code == 0, result.output
    assert json.loads(result.stdout)["pairs"] == 2
    assert {p.domain.value for p in load(out)} == {"wiki"}

    merged = tmp_path / "m.jsonl"
    result = invoke("merge", "--in", out, "--in", out, "--out", merged)
    assert result.exit_code == 0, result.output
    assert len(load(merged)) == 4


def test_ingest_line_count_mismatch(tmp_path):
    (tmp_path / "b.en").write_text("one\ntwo\n", encoding="utf-8")
    (tmp_path / "b.vi").write_text("một\n", encoding="utf-8")
    result = invoke("ingest", "--in", tmp_path / "b", "--format", "line-pair", "--out", tmp_path / "b.jsonl")
    assert result.exit_code == 1
    assert "LineCountMismatchError" in result.output


def test_bleu_command(tmp_path):
    hyp = tmp_path / "hyp.txt"
    ref = tmp_path / "ref.txt"
    hyp.write_text("the cat sat\n", encoding="utf-8")
    ref.write_text("the cat sat\n", encoding="utf-8")
    result = invoke("bleu", "--hyp", hyp, "--ref", ref)
    assert result.exit_code == 0, result.output
    assert json.loads(result.stdout)["score"] == pytest.approx(100.0)

    ref.write_text("the cat sat\nextra\n", encoding="utf-8")
    assert invoke("bleu", "--hyp", hyp, "--ref", ref).exit_code == 1


def test_dedup_command(five_pairs, tmp_path):
    out = tmp_path / "d.jsonl"
    report = tmp_path / "d.json"
    result = invoke("dedup", "--in", five_pairs, "--out", out, "--report", report)
    assert result.exit_code == 0, result.output
    assert json.loads(result.stdout)["removed"] == 1
    assert json.loads(report.read_text(encoding="utf-8"))["kept"] == 4

    result = invoke("dedup", "--in", five_pairs, "--out", out, "--policy", "nocasefold")
    assert json.loads(result.stdout)["removed"] == 0

    result = invoke("dedup", "--in", five_pairs, "--out", out, "--policy", "stemming")
    assert result.exit_code == 1
    assert "ConfigError" in result.output


def test_filter_with_existing_scores(five_pairs, tmp_path):
    out = tmp_path / "top.jsonl"
    result = invoke("filter", "--in", five_pairs, "--out", out, "--k", 2)
    assert result.exit_code == 0, result.output
    assert [p.en.text for p in load(out)] == ["Hello", "Good night"]
    assert json.loads(result.stdout)["threshold_score"] == pytest.approx(0.7)

    result = invoke("filter", "--in", five_pairs, "--out", out, "--k", 2, "--lower-is-better")
    assert [p.en.text for p in load(out)] == ["Thank you", "Bye"]

    result = invoke("filter", "--in", five_pairs, "--out", out, "--k", 9)
    assert result.exit_code == 1
    assert "SelectionRangeError" in result.output

    result = invoke("filter", "--in", five_pairs, "--out", out)
    assert result.exit_code == 1


def test_sample_test_command(five_pairs, tmp_path):
    result = invoke(
        "--seed", 3, "sample-test", "--in", five_pairs, "--per-domain", "law=1,news=2",
        "--test-out", tmp_path / "test.jsonl", "--rest-out", tmp_path / "rest.jsonl",
    )
    assert result.exit_code == 0, result.output
    data = json.loads(result.stdout)
    assert data == {"test": 3, "rest": 2, "seed": 3}


def test_align_command(tmp_path):
    (tmp_path / "lex.tsv").write_text("cat\tmèo\nblack\tđen\n", encoding="utf-8")
    (tmp_path / "d.en").write_text("black cat\nsome header\n", encoding="utf-8")
    (tmp_path / "d.vi").write_text("đen mèo\n", encoding="utf-8")
    (tmp_path / "pairs.tsv").write_text(f"{tmp_path / 'd.en'}\t{tmp_path / 'd.vi'}\tlaw\n", encoding="utf-8")
    out = tmp_path / "aligned.jsonl"
    result = invoke(
        "align", "--pairs", tmp_path / "pairs.tsv", "--lexicon", tmp_path / "lex.tsv",
        "--out", out, "--report", tmp_path / "align.json",
    )
    assert result.exit_code == 0, result.output
    assert json.loads(result.stdout) == {"documents": 1, "failures": 0, "total_matches": 1}
    (pair,) = load(out)
    assert (pair.en.text, pair.vi.text, pair.tier) == ("black cat", "đen mèo", 3)


def test_eval_matrix_command(tmp_path):
    manifest = tmp_path / "m.json"
    manifest.write_text(
        json.dumps(
            {
                "cells": {
                    "Multi-domain": {
                        "en->vi": {"law": 22.07, "religion": 34.77},
                        "vi->en": {"law": 20.45},
                    }
                }
            }
        ),
        encoding="utf-8",
    )
    result = invoke("eval-matrix", "--manifest", manifest, "--out", tmp_path / "m.out.json")
    assert result.exit_code == 0, result.output
    row = [line for line in result.stdout.splitlines() if line.startswith("Multi-domain")][0]
    assert row.split()[1:] == ["22.07", "34.77", "20.45"]
    assert (tmp_path / "m.out.json").exists()


def test_budget_command(tmp_path):
    sup = tmp_path / "sup.csv"
    pre = tmp_path / "pre.csv"
    sup.write_text("data_amount,bleu\n1,30\n100,38\n", encoding="utf-8")
    pre.write_text("data_amount,bleu\n100,30\n1000000,38\n", encoding="utf-8")
    out = tmp_path / "budget.json"
    result = invoke("budget", "--supervised", sup, "--pretraining", pre, "--target", 34, "--out", out)
    assert result.exit_code == 0, result.output
    assert "data ratio 1000 (exact)" in result.stdout
    assert json.loads(out.read_text(encoding="utf-8"))["data_ratio"] == pytest.approx(1000.0)

    result = invoke("budget", "--supervised", sup, "--pretraining", pre, "--target", 99)
    assert result.exit_code == 1
    assert "BudgetError" in result.output


def test_time_report_command(tmp_path):
    records = tmp_path / "t.csv"
    records.write_text("tier,human_hours,machine_hours,pairs\n1,2,0,100\n3,0,1,500\n", encoding="utf-8")
    result = invoke("time-report", "--records", records)
    assert result.exit_code == 0, result.output
    lines = result.stdout.splitlines()
    assert lines[-1].split() == ["total", "2", "1", "600", "200.00"]


def _error(result):
    """The JSON error object the CLI wrote on its last stderr line."""
    return json.loads(result.output.strip().splitlines()[-1])


def test_invalid_option_values_are_json_errors(five_pairs, tmp_path):
    result = invoke(
        "sample-test", "--in", five_pairs, "--per-domain", "law=-1",
        "--test-out", tmp_path / "test.jsonl", "--rest-out", tmp_path / "rest.jsonl",
    )
    assert result.exit_code == 1
    payload = _error(result)
    assert payload["error"] == "ConfigError"
    assert payload["stage"] == "sample"
    assert payload["domain"] == "law"
    assert not (tmp_path / "test.jsonl").exists()

    result = invoke(
        "align", "--pairs", five_pairs, "--lexicon", five_pairs, "--lexicon-direction", "en-fr",
        "--out", tmp_path / "aligned.jsonl",
    )
    assert result.exit_code == 1
    assert _error(result)["error"] == "ConfigError"


def test_non_numeric_remote_losses_are_json_errors(five_pairs, tmp_path, monkeypatch, fake_session):
    session = fake_session(lambda url, p: FakeResponse(200, {"losses": ["n/a"] * len(p["pairs"])}))
    monkeypatch.setattr("mtcurate.quality.build_session", lambda retries: session)
    result = invoke(
        "score", "--in", five_pairs, "--out", tmp_path / "scored.jsonl",
        "--scorer", "remote", "--endpoint", "http://score.local",
    )
    assert result.exit_code == 1
    payload = _error(result)
    assert payload["error"] == "RemoteError"
    assert payload["url"] == "http://score.local/score"


def test_pipeline_option_errors_stop_before_the_first_stage(tmp_path):
    (tmp_path / "a.en").write_text("one\n", encoding="utf-8")
    (tmp_path / "a.vi").write_text("một\n", encoding="utf-8")
    (tmp_path / "pairs.tsv").write_text("a.en\ta.vi\n", encoding="utf-8")
    config = tmp_path / "p.json"
    config.write_text(
        json.dumps(
            {
                "stages": [
                    {"stage": "ingest", "inputs": [{"path": "a", "format": "line-pair"}], "out": "first.jsonl"},
                    {
                        "stage": "align",
                        "pairs": "pairs.tsv",
                        "backend": {"kind": "lexicon", "path": "lex.tsv"},
                        "out": "aligned.jsonl",
                        "min_pair_score": -1,
                    },
                ]
            }
        ),
        encoding="utf-8",
    )
    result = invoke("pipeline", "--config", config)
    assert result.exit_code == 1
    payload = _error(result)
    assert payload["error"] == "ConfigError"
    assert payload["index"] == 1
    assert not (tmp_path / "first.jsonl").exists()


def test_filter_accepts_the_scorer_options_of_score(five_pairs, tmp_path):
    lexicon = tmp_path / "lex.tsv"
    lexicon.write_text("Xin chào\tHello\nCảm ơn\tThank you\n", encoding="utf-8")
    out = tmp_path / "top.jsonl"
    result = invoke(
        "filter", "--in", five_pairs, "--out", out, "--k", 1, "--scorer", "roundtrip",
        "--lexicon", lexicon, "--lexicon-direction", "vi-en", "--no-strict",
    )
    assert result.exit_code == 0, result.output
    assert len(load(out)) == 1

    result = invoke(
        "filter", "--in", five_pairs, "--out", out, "--k", 1, "--scorer", "roundtrip",
        "--lexicon", lexicon, "--lexicon-direction", "xx",
    )
    assert result.exit_code == 1
    assert _error(result)["error"] == "ConfigError"


def test_entry_point_reports_usage_errors_as_json(five_pairs, monkeypatch, capsys):
    monkeypatch.setattr(sys, "argv", ["mtcurate", "--log-level", "ERROR", "stats", "--bogus"])
    with pytest.raises(SystemExit) as info:
        run()
    assert info.value.code == 2
    payload = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert payload["error"] == "NoSuchOption"
    assert payload["stage"] == "cli"
    assert "--bogus" in payload["message"]
    assert "stats" in payload["usage"]

    monkeypatch.setattr(sys, "argv", ["mtcurate", "--log-level", "ERROR", "stats", "--in", str(five_pairs)])
    with pytest.raises(SystemExit) as info:
        run()
    assert info.value.code == 0
    assert json.loads(capsys.readouterr().out)["total"] == 5
