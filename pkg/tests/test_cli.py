import subprocess
import sys

import numpy as np
import pytest

from armac3.cli import main
from armac3.datasets import load_features
from armac3.encoder import load_checkpoint


@pytest.fixture
def sbm_files(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["gen-sbm", "--n", "60", "--k", "2", "--seed", "7"]) == 0
    return tmp_path


def test_gen_sbm_files_and_determinism(sbm_files):
    feats = (sbm_files / "sbm_features.csv").read_bytes()
    labels = (sbm_files / "sbm_labels.txt").read_bytes()
    assert len(feats.decode().splitlines()) == 61 and len(labels.decode().splitlines()) == 60
    main(["gen-sbm", "--n", "60", "--k", "2", "--seed", "7"])
    assert (sbm_files / "sbm_features.csv").read_bytes() == feats
    assert (sbm_files / "sbm_labels.txt").read_bytes() == labels


def test_gen_sbm_bad_probabilities(tmp_path, capsys):
    code = main(["gen-sbm", "--p-out", "0.9", "--p-in", "0.1", "--out", str(tmp_path / "f.csv")])
    err = capsys.readouterr().err
    assert code == 5 and "ContractError" in err and len(err.strip().splitlines()) == 1


def make_dump(root, subjects=3, rois=9, empty=None):
    rng = np.random.default_rng(0)
    root.mkdir()
    for s in range(subjects):
        lines = [f"{r}\t{float(v)!r}" for r in range(rois) for v in rng.random(15) if (s, r) != empty]
        (root / f"sub{s:02d}.tsv").write_text("\n".join(lines) + "\n")
    return root


@pytest.mark.parametrize("bins, width", [(None, 180), ("10", 90)])
def test_features_command(tmp_path, bins, width):
    dump = make_dump(tmp_path / "dump")
    args = ["features", "--roi-dump", str(dump), "--out", str(tmp_path / "f.csv")]
    if bins:
        args += ["--bins", bins]
    assert main(args) == 0
    fm = load_features(tmp_path / "f.csv")
    assert fm.values.shape == (3, width) and fm.subject_ids == ["sub00", "sub01", "sub02"]


def test_features_empty_roi(tmp_path, capsys):
    dump = make_dump(tmp_path / "dump", empty=(1, 4))
    code = main(["features", "--roi-dump", str(dump), "--out", str(tmp_path / "f.csv")])
    err = capsys.readouterr().err
    assert code == 3 and "sub01" in err and "ROI 4" in err


def test_train_smoke_writes_three_artifacts(sbm_files):
    code = main(["train", "--features", "sbm_features.csv", "--labels", "sbm_labels.txt", "--epochs", "1",
                 "--runs", "2", "--hidden-dim", "8"])
    assert code == 0
    for name in ("model.armac3", "train_log.csv", "report.csv"):
        assert (sbm_files / name).stat().st_size > 0
    log = (sbm_files / "train_log.csv").read_text()
    assert "iter,l_mod,l_collapse,l_struct,l1,l2,l_con,l_sup,total,lr" in log
    assert "# epochs = 1" in log
    assert (sbm_files / "report.csv").read_text().splitlines()[-1].startswith("mean±std,")


def test_config_file_and_override_echo(sbm_files):
    (sbm_files / "run.cfg").write_text(
        "features = sbm_features.csv\nlabels = sbm_labels.txt\nepochs = 3\nhidden_dim = 8\nn_runs = 1\nalpha = 0.6\n")
    assert main(["train", "--config", "run.cfg", "--alpha", "0.4", "--set", "lambda_con=0.5"]) == 0
    text = (sbm_files / "report.csv").read_text()
    assert "# alpha = 0.4" in text and "# lambda_con = 0.5" in text and "# epochs = 3" in text
    assert load_checkpoint(sbm_files / "model.armac3").cfg.alpha == 0.4


def test_unknown_config_key(sbm_files, capsys):
    (sbm_files / "run.cfg").write_text("epoch = 3\n")
    assert main(["train", "--config", "run.cfg"]) == 2
    assert "epoch" in capsys.readouterr().err


def test_semi_without_labels(sbm_files, capsys):
    assert main(["train", "--features", "sbm_features.csv", "--mode", "semi", "--epochs", "1"]) == 2


def test_unsup_without_labels_writes_assignments(sbm_files):
    assert main(["train", "--features", "sbm_features.csv", "--epochs", "2", "--runs", "1",
                 "--hidden-dim", "8"]) == 0
    lines = [ln for ln in (sbm_files / "report.csv").read_text().splitlines() if not ln.startswith("#")]
    assert lines[0].startswith("node,cluster,p0,p1") and len(lines) == 61


@pytest.mark.parametrize("mode", ["unsup", "semi"])
def test_eval_reproduces_first_run(sbm_files, capsys, mode):
    base = ["--features", "sbm_features.csv", "--labels", "sbm_labels.txt"]
    assert main(["train", *base, "--epochs", "15", "--runs", "2", "--folds", "2", "--hidden-dim", "16",
                 "--mode", mode]) == 0
    capsys.readouterr()
    assert main(["eval", "--checkpoint", "model.armac3", *base, "--report-out", "eval.csv"]) == 0
    train_row = [ln for ln in (sbm_files / "report.csv").read_text().splitlines() if ln.startswith("0,")][0]
    eval_row = [ln for ln in (sbm_files / "eval.csv").read_text().splitlines() if ln.startswith("0,")][0]
    assert train_row == eval_row


def test_eval_bad_magic(sbm_files, capsys):
    (sbm_files / "bad.armac3").write_bytes(b"NOTACKPT" + b"\0" * 20)
    code = main(["eval", "--checkpoint", "bad.armac3", "--features", "sbm_features.csv"])
    assert code == 6 and "magic" in capsys.readouterr().err


def test_compare_reports(tmp_path, capsys):
    rows = "run,accuracy,precision,recall,f1,auc\n"
    a = rows + "".join(f"{i},{0.8 + i / 100},0.5,0.5,0.5,\n" for i in range(10)) + "mean±std,,,,,\n"
    b = rows + "".join(f"{i},{0.7 + i / 200},0.5,0.5,0.5,\n" for i in range(10))
    (tmp_path / "a.csv").write_text(a)
    (tmp_path / "b.csv").write_text(b)
    assert main(["eval", "--compare", str(tmp_path / "a.csv"), str(tmp_path / "b.csv")]) == 0
    out = capsys.readouterr()
    assert "accuracy,0.0009765625" in out.out and "precision,nan" in out.out


def test_module_entry_point_exit_code(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "armac3", "train", "--features", str(tmp_path / "missing.csv")],
                          capture_output=True, text=True)
    assert proc.returncode == 3
    assert proc.stderr.count("\n") == 1 and "missing.csv" in proc.stderr
