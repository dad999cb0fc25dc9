"""CLI surfaces driven through main() with no subprocesses."""

from __future__ import annotations

import json

import pytest

from mmqasynth.cli import main
from mmqasynth.corpus import parse_document
from mmqasynth.store import document_from_record, read_jsonl

from conftest import FIXTURES


@pytest.fixture(scope="module")
def synth_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli")
    out = tmp / "run" / "dataset.jsonl"
    rc = main([
        "synth", "--pool", str(FIXTURES / "pool"), "--backend", "demo",
        "--store", str(tmp / "ts"), "--seed", "42", "--out", str(out),
    ])
    assert rc == 0
    return tmp, out


def test_synth_writes_dataset_and_ledger(synth_run):
    tmp, out = synth_run
    assert len(read_jsonl(out)) == 4
    ledger = read_jsonl(out.parent / "rejections.jsonl")
    assert {rec["reason"] for rec in ledger} == {"single_modality", "vote_split"}


def test_pool_exports_canonical_documents(tmp_path):
    out = tmp_path / "pool.jsonl"
    rc = main(["pool", "--pool", str(FIXTURES / "pool"), "--out", str(out)])
    assert rc == 0
    records = read_jsonl(out)
    assert len(records) == 12
    # canonical round trip against a fresh parse
    raw = (FIXTURES / "pool" / "apollo_11.html").read_text(encoding="utf-8")
    fresh = parse_document(raw, "apollo_11")
    stored = next(document_from_record(r) for r in records if r["id"] == "apollo_11")
    assert stored == fresh


def test_stats_and_ledger_commands(synth_run, capsys):
    tmp, out = synth_run
    assert main(["stats", str(out)]) == 0
    captured = capsys.readouterr().out
    assert "image modality: 100.0%" in captured
    assert main(["ledger", str(out.parent)]) == 0
    captured = capsys.readouterr().out
    assert "reason vote_split: 1" in captured


def test_eval_command(synth_run, tmp_path, capsys):
    _, out = synth_run
    preds = tmp_path / "preds.jsonl"
    with open(preds, "w", encoding="utf-8") as fh:
        for rec in read_jsonl(out):
            fh.write(json.dumps({"id": rec["id"], "answer": rec["answer_short"]}) + "\n")
    assert main(["eval", "--pred", str(preds), "--gold", str(out), "--stratify"]) == 0
    captured = capsys.readouterr().out
    assert "EM: 1.0000" in captured


def test_kappa_command(capsys):
    assert main(["kappa", str(FIXTURES / "kappa_judgments.csv")]) == 0
    assert "0.333333" in capsys.readouterr().out


def test_curate_command(tmp_path, capsys):
    scores = tmp_path / "scores.jsonl"
    with open(scores, "w", encoding="utf-8") as fh:
        for i in range(6):
            fh.write(json.dumps({"id": f"c{i}", "scores": [1, 1, 1 if i < 3 else 0]}) + "\n")
    assert main(["curate", "--scores", str(scores), "--threshold", "0.75"]) == 0
    kept = [json.loads(line) for line in capsys.readouterr().out.splitlines() if line]
    assert [k["id"] for k in kept] == ["c0", "c1", "c2"]
