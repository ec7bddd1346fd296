"""End-to-end command-line interface: run directories, exit codes, determinism."""

import json

import pytest

from ssdpsem import cli


def run(argv, capsys=None):
    code = cli.main(argv)
    return code


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    assert cli.main(["synth", "--seed", "5", "--out", str(out),
                     "--train", "48", "--dev", "16", "--test", "16"]) == 0
    return out


@pytest.fixture(scope="module")
def train_dir(tmp_path_factory, data_dir):
    out = tmp_path_factory.mktemp("run")
    cfg = tmp_path_factory.mktemp("cfg") / "config.json"
    cfg.write_text(json.dumps({
        "epochs": 1, "layers": 2, "heads": 2, "d_model": 16, "d_ff": 32,
        "batch_size": 8, "seed": 0, "mode": "asp_saib",
    }), encoding="utf-8")
    assert cli.main(["train", "--config", str(cfg), "--data", str(data_dir),
                     "--out", str(out)]) == 0
    return out


def test_help_exits_zero(capsys):
    assert run(["--help"]) == 0
    assert run(["train", "--help"]) == 0
    out = capsys.readouterr().out
    assert "--config" in out


def test_missing_required_argument_exits_one(capsys):
    assert run(["train", "--data", "x"]) == 1
    assert run(["bogus-subcommand"]) == 1
    assert run([]) == 1


def test_synth_writes_manifest_and_splits(data_dir):
    names = {p.name for p in data_dir.iterdir()}
    assert {"manifest.json", "train.jsonl", "dev.jsonl", "test.jsonl",
            "log.txt"} <= names
    manifest = json.loads((data_dir / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["split_sizes"]["train"] == 48
    assert len((data_dir / "train.jsonl").read_text(encoding="utf-8").splitlines()) == 48


def test_synth_is_deterministic(tmp_path, data_dir):
    again = tmp_path / "again"
    assert run(["synth", "--seed", "5", "--out", str(again),
                "--train", "48", "--dev", "16", "--test", "16"]) == 0
    for name in ("manifest.json", "train.jsonl", "dev.jsonl", "test.jsonl"):
        assert (again / name).read_bytes() == (data_dir / name).read_bytes()


def test_train_run_directory_contents(train_dir):
    names = {p.name for p in train_dir.iterdir()}
    assert {"config.json", "metrics.csv", "model.ckpt", "log.txt"} <= names
    metrics = (train_dir / "metrics.csv").read_text(encoding="utf-8").splitlines()
    assert metrics[0] == "step,l_re,l_asp,l_ib,total"
    assert len(metrics) > 1
    log = (train_dir / "log.txt").read_text(encoding="utf-8")
    assert "epoch 0" in log and "wall time" in log


def test_train_rejects_unknown_config_key(tmp_path, data_dir, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"epochs": 1, "learning_rate_typo": 3}), encoding="utf-8")
    assert run(["train", "--config", str(cfg), "--data", str(data_dir),
                "--out", str(tmp_path / "o")]) == 1
    assert "unknown" in capsys.readouterr().err


def test_train_missing_data_dir_exits_one(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text("{\"epochs\": 1}", encoding="utf-8")
    assert run(["train", "--config", str(cfg), "--data", str(tmp_path / "nowhere"),
                "--out", str(tmp_path / "o")]) == 1


def test_eval_writes_report(tmp_path, data_dir, train_dir):
    out = tmp_path / "eval"
    assert run(["eval", "--checkpoint", str(train_dir / "model.ckpt"),
                "--split", str(data_dir / "test.jsonl"),
                "--manifest", str(data_dir / "manifest.json"),
                "--out", str(out)]) == 0
    report = (out / "report.txt").read_text(encoding="utf-8")
    assert "micro_f1" in report
    per_rel = (out / "per_relation.csv").read_text(encoding="utf-8").splitlines()
    assert per_rel[0] == "relation,precision,recall,f1,tp,fp,fn"


def test_annotate_from_jsonl(tmp_path, data_dir):
    out = tmp_path / "ann"
    assert run(["annotate", "--jsonl", str(data_dir / "dev.jsonl"),
                "--variant", "SPL", "--out", str(out)]) == 0
    stats = json.loads((out / "annotate_stats.json").read_text(encoding="utf-8"))
    assert stats["instances"] == 16
    lines = (out / "annotated.jsonl").read_text(encoding="utf-8").splitlines()
    assert len(lines) == 16
    first = json.loads(lines[0])
    assert first["tokens"][0] in ("positive", "negative")


def test_annotate_requires_an_input(tmp_path, capsys):
    assert run(["annotate", "--out", str(tmp_path / "x")]) == 1
    assert "provide" in capsys.readouterr().err


def test_ablate_grid(tmp_path, data_dir):
    grid = tmp_path / "grid.json"
    base = {"epochs": 1, "layers": 2, "heads": 2, "d_model": 16, "d_ff": 32,
            "batch_size": 8, "seed": 0}
    grid.write_text(json.dumps([dict(base, mode="baseline"),
                                dict(base, mode="asp_saib")]), encoding="utf-8")
    out = tmp_path / "abl"
    assert run(["ablate", "--grid", str(grid), "--data", str(data_dir),
                "--eval-split", "dev", "--out", str(out)]) == 0
    lines = (out / "grid.csv").read_text(encoding="utf-8").splitlines()
    assert len(lines) == 3
    assert "mode" in lines[0] and "micro_f1" in lines[0]


def test_gradcheck_cli_passes(tmp_path):
    out = tmp_path / "gc"
    assert run(["gradcheck", "--instances", "1", "--coords", "3",
                "--out", str(out)]) == 0
    text = (out / "gradcheck.txt").read_text(encoding="utf-8")
    assert "overall PASS" in text


def test_inspect_exports_attention(tmp_path, data_dir, train_dir):
    first_id = json.loads(
        (data_dir / "test.jsonl").read_text(encoding="utf-8").splitlines()[0]
    )["id"]
    out = tmp_path / "ins"
    assert run(["inspect", "--instance", first_id,
                "--checkpoint", str(train_dir / "model.ckpt"),
                "--data", str(data_dir / "test.jsonl"), "--out", str(out)]) == 0
    assert (out / f"attention_{first_id}.csv").exists()
    assert (out / f"attention_{first_id}.svg").exists()


def test_inspect_unknown_instance_exits_one(tmp_path, data_dir, train_dir, capsys):
    assert run(["inspect", "--instance", "no-such-id",
                "--checkpoint", str(train_dir / "model.ckpt"),
                "--data", str(data_dir / "test.jsonl"),
                "--out", str(tmp_path / "x")]) == 1
    assert "not found" in capsys.readouterr().err


def test_sdp_dump_to_stdout(data_dir, capsys):
    assert run(["sdp", "dump", "--jsonl", str(data_dir / "dev.jsonl")]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 16
    rec = json.loads(lines[0])
    assert {"id", "subj_head", "obj_head", "path", "tokens", "fallback"} <= set(rec)
    assert rec["subj_head"] in rec["path"] and rec["obj_head"] in rec["path"]


def test_sdp_dump_to_directory(tmp_path, data_dir):
    out = tmp_path / "dump"
    assert run(["sdp", "dump", "--jsonl", str(data_dir / "dev.jsonl"),
                "--out", str(out)]) == 0
    assert len((out / "sdp.jsonl").read_text(encoding="utf-8").splitlines()) == 16


def test_corrupt_checkpoint_exits_one(tmp_path, data_dir, capsys):
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"garbage")
    assert run(["eval", "--checkpoint", str(bad),
                "--split", str(data_dir / "test.jsonl"),
                "--out", str(tmp_path / "o")]) == 1
