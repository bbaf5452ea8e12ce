import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from calloc.cli import main
from calloc.data import load_csv


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A generated dataset plus a briefly trained CALLOC and DNN checkpoint."""
    root = tmp_path_factory.mktemp("cli")
    assert main(["gen", "--aps", "10", "--path", "7", "--seed", "3", "--out", str(root / "d")]) == 0
    cfg = root / "cfg.json"
    cfg.write_text(json.dumps({"epochs_per_lesson": 2, "batch_size": 16, "dnn.epochs": 5}))
    assert main(["train", "--data", str(root / "d"), "--config", str(cfg), "--out", str(root / "m.ckpt"), "--log", str(root / "log.jsonl")]) == 0
    assert main(["train", "--data", str(root / "d"), "--config", str(cfg), "--arch", "dnn", "--out", str(root / "dnn.ckpt")]) == 0
    return root


def test_gen_building3(tmp_path, capsys):
    assert main(["gen", "--aps", "78", "--path", "88", "--seed", "7", "--out", str(tmp_path / "b3")]) == 0
    ds = load_csv(tmp_path / "b3")
    assert (ds.n_aps, ds.n_rps, ds.name) == (78, 89, "b3")
    assert json.loads((tmp_path / "b3" / "manifest.json").read_text())["meta"]["seed"] == 7
    assert "89 RPs" in capsys.readouterr().out


def test_gen_named_building(tmp_path):
    assert main(["gen", "--building", "5", "--out", str(tmp_path / "x")]) == 0
    ds = load_csv(tmp_path / "x")
    assert (ds.n_aps, ds.n_rps, ds.name) == (218, 61, "building5")


def test_gen_needs_dimensions(tmp_path, capsys):
    assert main(["gen", "--out", str(tmp_path)]) == 1
    assert "error" in capsys.readouterr().err


def test_train_writes_log(workspace):
    records = [json.loads(line) for line in (workspace / "log.jsonl").read_text().splitlines()]
    assert {r["lesson"] for r in records} == set(range(1, 11))


def test_eval_axis_product(workspace, capsys):
    out = workspace / "rep"
    args = ["eval", "--model", str(workspace / "m.ckpt"), "--data", str(workspace / "d"), "--attack", "pgd"]
    args += ["--eps", "0.1:0.5:0.1", "--phi", "10:100:10", "--steps", "2", "--out", str(out)]
    assert main(args) == 0
    with open(out / "report.csv", newline="") as fh:
        assert len(list(csv.DictReader(fh))) == 50
    assert "50 cells" in capsys.readouterr().out
    assert main(["report", "--in", str(out)]) == 0
    table = capsys.readouterr().out
    assert "pgd / d / all" in table and "eps\\phi" in table


def test_eval_each_device_and_knn(workspace):
    out = workspace / "knn"
    args = ["eval", "--arch", "knn", "--surrogate", str(workspace / "dnn.ckpt"), "--data", str(workspace / "d")]
    args += ["--eps", "0.2", "--phi", "50", "--devices", "each", "--per-sample", "--out", str(out)]
    assert main(args) == 0
    doc = json.loads((out / "report.json").read_text())
    assert set(doc["results"]["fgsm"]["d"]) == {"BLU", "HTC", "S7", "LG", "MOTO", "OP3"}
    assert doc["config"]["arch"] == "knn"
    assert (out / "per_sample.csv").exists()


def test_eval_knn_without_surrogate_fails(workspace, capsys):
    args = ["eval", "--arch", "knn", "--data", str(workspace / "d"), "--eps", "0.2", "--phi", "50", "--out", str(workspace / "z")]
    assert main(args) == 1
    assert "surrogate" in capsys.readouterr().err


def test_attack_csv_and_manifest(workspace, capsys):
    out = workspace / "adv" / "pgd.csv"
    args = ["attack", "--in", str(workspace / "d"), "--model", str(workspace / "m.ckpt"), "--kind", "pgd"]
    args += ["--eps", "0.3", "--phi", "50", "--mode", "spoof", "--out", str(out)]
    assert main(args) == 0
    assert "attacked" in capsys.readouterr().out
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    ds = load_csv(workspace / "d")
    assert len(rows) == len(ds.test)
    assert list(rows[0])[-1] == "attacked"
    assert {r["attacked"] for r in rows} == {"1"}
    manifest = json.loads((workspace / "adv" / "pgd.manifest.json").read_text())
    assert manifest["attack"]["mode"] == "spoofing" and manifest["n_targeted_aps"] == 5
    rss = np.array([[float(r[a]) for a in ds.ap_ids] for r in rows])
    assert rss.min() >= -100 and rss.max() <= 0


def test_model_dataset_mismatch(workspace, tmp_path, capsys):
    main(["gen", "--aps", "11", "--path", "7", "--out", str(tmp_path / "other")])
    capsys.readouterr()
    args = ["attack", "--in", str(tmp_path / "other"), "--model", str(workspace / "m.ckpt"), "--out", str(tmp_path / "a.csv")]
    assert main(args) == 1
    assert "error" in capsys.readouterr().err


def test_gradcheck_passes(capsys):
    assert main(["gradcheck", "--n-in", "20", "--classes", "6", "--samples", "40"]) == 0
    out = capsys.readouterr().out
    assert "max relative error" in out and out.strip().endswith("PASS")


def test_gradcheck_fails_on_impossible_tolerance(capsys):
    assert main(["gradcheck", "--n-in", "20", "--classes", "6", "--samples", "40", "--tolerance", "1e-30"]) == 1
    assert capsys.readouterr().out.strip().endswith("FAIL")


def test_unknown_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["gen", "--bogus"])
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "calloc.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("calloc ")
    proc = subprocess.run([sys.executable, "-m", "calloc.cli", "nope"], capture_output=True, text=True)
    assert proc.returncode == 2
