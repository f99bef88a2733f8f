import json
import shutil

import pytest

from asrcorrect.cli import main
from asrcorrect.correction import read_outcomes
from asrcorrect.metrics import werr

from conftest import CORPUS20, GOLDEN, REPLAY
from pipeline import REPLAY_ARGS, correct, full_run, run, score


def test_golden_files(tmp_path, update_golden):
    produced = full_run(tmp_path)
    if update_golden:
        GOLDEN.mkdir(exist_ok=True)
        for path in produced:
            shutil.copy(path, GOLDEN / path.name)
        pytest.skip("golden files rewritten")
    for path in produced:
        golden = GOLDEN / path.name
        assert golden.exists(), f"missing golden file {golden.name}"
        assert path.read_bytes() == golden.read_bytes(), f"{path.name} differs from golden"


def test_manifest_written_next_to_outcomes(tmp_path):
    out = correct(tmp_path, "closest", 1)
    manifest = json.loads((tmp_path / "closest_1shot.jsonl.manifest.json").read_text())
    assert manifest["run"]["strategy"]["strategy"] == "closest"
    assert manifest["run"]["backend"] == "replay"
    assert manifest["run"]["model"] == "gpt-3.5-turbo-0613"
    assert len(manifest["run"]["template_sha256"]) == 64
    assert manifest["corpus"][0]["sha256"]
    assert "--strategy closest" in manifest["command_line"]
    assert {"timestamp", "version", "normalizer"} <= set(manifest)
    report = json.loads(score(tmp_path, out).read_text())
    assert report["manifest"] == "closest_1shot.report.json.manifest.json"
    assert (tmp_path / report["manifest"]).exists()


def test_missing_input_file(tmp_path, capsys):
    code = run("correct", "--strategy", "uncon", *REPLAY_ARGS, "--in", tmp_path / "nope.jsonl", "--out", tmp_path / "o.jsonl")
    assert code != 0
    assert "nope.jsonl" in capsys.readouterr().err


def test_select_one_shot_rejected_before_backend(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("OPENAI_API_KEY", raising=False)
    code = run("correct", "--strategy", "select", "--shots", "1", "--in", CORPUS20, "--out", tmp_path / "o.jsonl")
    assert code == 2
    err = capsys.readouterr().err
    assert "select" in err and "API key" not in err
    assert not (tmp_path / "o.jsonl").exists()


def test_live_backend_without_key(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv("OPENAI_API_KEY", raising=False)
    code = run("correct", "--strategy", "uncon", "--in", CORPUS20, "--out", tmp_path / "o.jsonl")
    assert code == 2
    assert "OPENAI_API_KEY" in capsys.readouterr().err


def test_replay_needs_cache(tmp_path, capsys):
    code = run("correct", "--strategy", "uncon", "--backend", "replay", "--in", CORPUS20, "--out", tmp_path / "o.jsonl")
    assert code == 2
    assert "--cache" in capsys.readouterr().err


def test_replay_misses_degrade_not_abort(tmp_path, capsys):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    code = run("correct", "--strategy", "closest", "--backend", "replay", "--cache", empty,
               "--in", CORPUS20, "--out", tmp_path / "o.jsonl")
    assert code == 0
    outs = read_outcomes(tmp_path / "o.jsonl")
    assert all(o.flags == {"llm_error", "fallback_to_onebest"} and o.selected_rank == 1 for o in outs.values())
    assert "llm_error=20" in capsys.readouterr().out


def test_score_exact_references(tmp_path, capsys):
    outcomes = tmp_path / "refs.jsonl"
    with open(CORPUS20) as f:
        outcomes.write_text("".join(
            json.dumps({"utterance_id": r["id"], "corrected_text": r["reference"]}) + "\n" for r in map(json.loads, f)
        ))
    assert run("score", "--in", CORPUS20, "--outcomes", outcomes) == 0
    system_row = [l for l in capsys.readouterr().out.splitlines() if l.startswith("system")][0]
    assert system_row.split()[1:5] == ["0.00", "0.00", "0.00", "0.00"]


def test_score_id_mismatch(tmp_path, capsys):
    outcomes = tmp_path / "o.jsonl"
    outcomes.write_text(json.dumps({"utterance_id": "utt00", "corrected_text": "x"}) + "\n"
                        + json.dumps({"utterance_id": "stranger", "corrected_text": "x"}) + "\n")
    assert run("score", "--in", CORPUS20, "--outcomes", outcomes) == 1
    err = capsys.readouterr().err
    assert "utt01" in err and "stranger" in err


def test_score_with_baseline_file(tmp_path):
    base = correct(tmp_path, "uncon", 0)
    system = correct(tmp_path, "closest", 1)
    report_path = tmp_path / "r.json"
    assert run("score", "--in", CORPUS20, "--outcomes", system, "--baseline", base, "--report", report_path) == 0
    report = json.loads(report_path.read_text())
    assert report["werr"] == werr(report["baseline"]["wer"], report["system"]["wer"])


def test_ablate_row_matches_correct_plus_score(tmp_path):
    report_path = tmp_path / "ablate.json"
    assert run("ablate", "--strategy", "select", "--sizes", "3", *REPLAY_ARGS, "--in", CORPUS20,
               "--report", report_path) == 0
    row = json.loads(report_path.read_text())["rows"][0]
    out = tmp_path / "sel3.jsonl"
    assert run("correct", "--strategy", "select", "--nbest", 3, *REPLAY_ARGS, "--in", CORPUS20, "--out", out) == 0
    scored = json.loads(score(tmp_path, out).read_text())["system"]
    assert row["n_best"] == 3
    assert {k: row[k] for k in ("wer", "substitutions", "deletions", "insertions")} == \
           {k: scored[k] for k in ("wer", "substitutions", "deletions", "insertions")}


def test_split_requires_selected_rank(tmp_path, capsys):
    out = correct(tmp_path, "uncon", 1)
    assert run("split", "--in", CORPUS20, "--outcomes", out) == 1
    assert "closest" in capsys.readouterr().err


def test_stats_prints_one_decimal(capsys):
    assert run("stats", "--in", CORPUS20) == 0
    line = capsys.readouterr().out.splitlines()[1].split()
    assert line[0] == "corpus20"
    assert all(len(cell.split(".")[1]) == 1 for cell in line[1:])


def test_bad_corpus_line(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": "a", "nbest": [{"text": "x"}]}\n{oops\n')
    assert run("stats", "--in", bad) == 1
    assert "line 2" in capsys.readouterr().err


def test_module_entry_point():
    import subprocess
    import sys

    proc = subprocess.run([sys.executable, "-m", "asrcorrect", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "correct" in proc.stdout
