import json
import subprocess
import sys

import pytest

from metatune.cli import main
from metatune.metrics import read_eval_csv

from conftest import tiny_corpus_files


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    """Small synthetic corpus shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    config = root / "synth.json"
    config.write_text(json.dumps({
        "seed": 11, "n_groups": 3, "tasks_per_group": 1, "labels_per_task": 3,
        "keywords_per_label": 4, "examples_per_label": 20,
        "paraphrases_per_label": 2, "noise_rate": 0.2,
    }), encoding="utf-8")
    out = root / "corpus"
    assert main(["synth", "--config", str(config), "--out", str(out)]) == 0
    return out


def test_validate_ok(synth_dir, capsys):
    assert main(["validate", "--corpus", str(synth_dir)]) == 0
    out = capsys.readouterr().out
    assert "g0t0: 3 labels, 6 descriptions, 60 examples" in out


def test_validate_dangling_reference(tmp_path, capsys):
    root = tiny_corpus_files(tmp_path / "broken")
    examples = root / "datasets" / "imdb.examples.jsonl"
    examples.write_text('{"id": "m1", "text": "x", "labels": ["nope"]}\n', encoding="utf-8")
    assert main(["validate", "--corpus", str(root)]) == 1
    assert "unknown label 'nope'" in capsys.readouterr().err


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == 2


def test_split_writes_plans(synth_dir, tmp_path):
    out = tmp_path / "splits.json"
    assert main(["split", "--corpus", str(synth_dir), "--mode", "unseen",
                 "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["mode"] == "unseen"
    assert len(doc["plans"]) == 3
    plan = next(p for p in doc["plans"] if p["eval"] == "g0t0")
    assert sorted(plan["train"]) == ["g1t0", "g2t0"]
    assert (tmp_path / "splits.json.manifest.json").exists()


def test_sample_preview_deterministic(synth_dir, capsys):
    argv = ["sample-preview", "--corpus", str(synth_dir),
            "--split-id", "unseen:g0t0", "--seed", "5", "--n", "10"]
    assert main(argv) == 0
    first = capsys.readouterr().out
    records = [json.loads(line) for line in first.splitlines()]
    assert len(records) == 10
    assert all(r["answer"] in ("Yes", "No") for r in records)
    assert all(r["dataset_id"] in ("g1t0", "g2t0") for r in records)
    assert main(argv) == 0
    assert capsys.readouterr().out == first


def test_train_eval_compare_roundtrip(synth_dir, tmp_path, capsys):
    run1, run2 = tmp_path / "run1", tmp_path / "run2"
    argv = ["train", "--corpus", str(synth_dir), "--split-id", "unseen:g0t0",
            "--scorer", "native", "--steps", "10", "--batch", "8", "--seed", "3"]
    assert main(argv + ["--out", str(run1)]) == 0
    assert main(argv + ["--out", str(run2)]) == 0
    ckpt1 = run1 / "checkpoint-0000010.ckpt"
    ckpt2 = run2 / "checkpoint-0000010.ckpt"
    # same seed, same corpus -> byte-identical checkpoints
    assert ckpt1.read_bytes() == ckpt2.read_bytes()
    manifest = json.loads((run1 / "manifest.json").read_text())
    assert manifest["command"] == "train"
    assert manifest["config"]["seed"] == 3

    eval_dir = tmp_path / "eval"
    assert main(["eval", "--corpus", str(synth_dir), "--split-id", "unseen:g0t0",
                 "--scorer", "native", "--checkpoint", str(ckpt1),
                 "--workers", "1", "--out", str(eval_dir)]) == 0
    aucs = read_eval_csv(eval_dir / "eval.csv")
    assert len(aucs) == 6  # 3 labels x 2 paraphrases
    assert all(a.dataset_id == "g0t0" for a in aucs)

    ens_dir = tmp_path / "eval-ens"
    assert main(["eval", "--corpus", str(synth_dir), "--split-id", "unseen:g0t0",
                 "--scorer", "native", "--checkpoint", str(ckpt1), "--ensemble",
                 "--workers", "1", "--out", str(ens_dir)]) == 0
    ens = read_eval_csv(ens_dir / "eval.csv")
    assert sorted(a.description_id for a in ens) == ["ens:l0", "ens:l1", "ens:l2"]

    # compare a table against itself: identity stats, exit 0
    stats_path = tmp_path / "stats.json"
    assert main(["compare", "--base", str(eval_dir / "eval.csv"),
                 "--cand", str(eval_dir / "eval.csv"), "--out", str(stats_path)]) == 0
    doc = json.loads(stats_path.read_text())
    assert doc["weighting"] == "description"
    assert doc["e_delta"] == 0.0
    assert doc["n_descriptions"] == 6

    # all-weighting identity comparison fails the verdict -> exit 1
    scatter = tmp_path / "scatter.csv"
    assert main(["compare", "--base", str(eval_dir / "eval.csv"),
                 "--cand", str(eval_dir / "eval.csv"), "--weighting", "all",
                 "--out", str(stats_path), "--scatter", str(scatter)]) == 1
    doc = json.loads(stats_path.read_text())
    assert [b["weighting"] for b in doc["stats"]] == ["description", "label", "dataset"]
    assert doc["verdict"]["better"] is False
    assert len(doc["verdict"]["failed_conditions"]) == 12
    assert scatter.exists()
    assert (tmp_path / "scatter.png").exists()
    out = capsys.readouterr().out
    assert "verdict: not better" in out


def test_compare_trained_beats_untrained(synth_dir, tmp_path):
    run = tmp_path / "run"
    assert main(["train", "--corpus", str(synth_dir), "--split-id", "unseen:g0t0",
                 "--steps", "200", "--batch", "8", "--seed", "1",
                 "--out", str(run)]) == 0
    ckpt = sorted(run.glob("checkpoint-*.ckpt"))[-1]
    base_dir, cand_dir = tmp_path / "base", tmp_path / "cand"
    assert main(["eval", "--corpus", str(synth_dir), "--split-id", "unseen:g0t0",
                 "--workers", "1", "--out", str(base_dir)]) == 0  # untrained
    assert main(["eval", "--corpus", str(synth_dir), "--split-id", "unseen:g0t0",
                 "--checkpoint", str(ckpt), "--workers", "1",
                 "--out", str(cand_dir)]) == 0
    stats_path = tmp_path / "stats.json"
    assert main(["compare", "--base", str(base_dir / "eval.csv"),
                 "--cand", str(cand_dir / "eval.csv"), "--weighting", "all",
                 "--out", str(stats_path)]) == 0
    doc = json.loads(stats_path.read_text())
    assert doc["verdict"]["better"] is True


def test_benchmark(synth_dir, tmp_path, capsys):
    run = tmp_path / "run"
    assert main(["train", "--corpus", str(synth_dir), "--split-id", "unseen:g0t0",
                 "--steps", "200", "--batch", "8", "--seed", "1",
                 "--out", str(run)]) == 0
    ckpt = sorted(run.glob("checkpoint-*.ckpt"))[-1]
    out = tmp_path / "benchmark.json"
    assert main(["benchmark", "--corpus", str(synth_dir), "--split-id", "unseen:g0t0",
                 "--checkpoint", str(ckpt), "--metric", "weighted-f1",
                 "--workers", "1", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["metric"] == "weighted-f1"
    assert 0.0 <= doc["value"] <= 1.0
    assert doc["n_examples"] == 60
    assert "weighted-f1" in capsys.readouterr().out


def test_curve(synth_dir, tmp_path):
    run = tmp_path / "run"
    assert main(["train", "--corpus", str(synth_dir), "--split-id", "unseen:g0t0",
                 "--steps", "40", "--batch", "8", "--seed", "2",
                 "--checkpoint-every", "20", "--out", str(run)]) == 0
    evals = []
    for step in (20, 40):
        out_dir = tmp_path / f"eval{step}"
        assert main(["eval", "--corpus", str(synth_dir), "--split-id", "unseen:g0t0",
                     "--checkpoint", str(run / f"checkpoint-{step:07d}.ckpt"),
                     "--workers", "1", "--out", str(out_dir)]) == 0
        evals.append(f"{step}:{out_dir / 'eval.csv'}")
    curve_dir = tmp_path / "curve"
    assert main(["curve", "--evals", ",".join(evals), "--relative-step", "20",
                 "--out", str(curve_dir)]) == 0
    doc = json.loads((curve_dir / "curve.json").read_text())
    assert doc["reference_step"] == 20
    assert doc["points"][0]["relative"] == 0.0
    assert (curve_dir / "curve.csv").exists()
    assert (curve_dir / "curve.png").exists()


def test_external_scorer_through_cli(synth_dir, tmp_path):
    out = tmp_path / "eval-ext"
    scorer = f'external:"{sys.executable}" -m metatune.echo_stub'
    assert main(["eval", "--corpus", str(synth_dir), "--split-id", "unseen:g0t0",
                 "--scorer", scorer, "--workers", "1", "--out", str(out)]) == 0
    aucs = read_eval_csv(out / "eval.csv")
    assert len(aucs) == 6


def test_io_error_exit_code(tmp_path, capsys):
    assert main(["compare", "--base", str(tmp_path / "no.csv"),
                 "--cand", str(tmp_path / "no.csv"),
                 "--out", str(tmp_path / "s.json")]) == 3
    assert "error:" in capsys.readouterr().err


def test_console_entry_point(synth_dir):
    result = subprocess.run(
        [sys.executable, "-m", "metatune.cli", "validate", "--corpus", str(synth_dir)],
        capture_output=True, text=True,
    )
    assert result.returncode == 0
    assert "g0t0" in result.stdout
