import json

import pytest

from miml.bagdata import load_dataset
from miml.cli import main


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data = root / "synth.jsonl"
    assert main(["gen-synth", "--out", str(data), "--bags", "36", "--labels", "3", "--feat", "3",
                 "--ni-min", "2", "--ni-max", "4", "--chain-dep", "true", "--seed", "5"]) == 0
    cfg = root / "run.cfg"
    cfg.write_text(f"dataset.path = {data}\ncluster.k = 4\ncluster.n_init = 2\ncv.n_folds = 3\n"
                   "ga.generations = 2\nga.population = 4\n")
    return root, data, cfg


def test_gen_synth(workspace):
    _, data, _ = workspace
    ds = load_dataset(data)
    assert (ds.n_bag, ds.n_labels, ds.n_feat) == (36, 3, 3)
    assert {b.n_instances for b in ds.bags} <= {2, 3, 4}


def test_gen_synth_csv(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["gen-synth", "--out", str(out), "--bags", "5", "--format", "instance-csv"]) == 0
    assert load_dataset(out, "instance-csv").n_bag == 5


def test_cv_reports_are_byte_identical(workspace, capsys):
    root, _, cfg = workspace
    out = root / "report.json"
    assert main(["cv", "--config", str(cfg), "--set", f"output={out}"]) == 0
    first = out.read_bytes()
    assert main(["cv", "--config", str(cfg), "--set", f"output={out}"]) == 0
    assert out.read_bytes() == first
    report = json.loads(first)
    assert report["method"] == "chain-ga" and report["config"]["cluster.k"] == 4
    out = capsys.readouterr().out
    assert "Method" in out and "EM" in out


def test_sweep(workspace, capsys):
    root, _, cfg = workspace
    out = root / "sweep.json"
    assert main(["sweep", "--config", str(cfg), "--axis", "svm.C", "--values", "0.01,1",
                 "--set", "method=mimlsvm-baseline", "--set", f"output={out}"]) == 0
    reports = json.loads(out.read_text())
    assert [r["config"]["svm.C"] for r in reports] == [0.01, 1.0]
    assert "svm.C" in capsys.readouterr().out


def test_train_then_predict(workspace):
    root, data, cfg = workspace
    model = root / "model.json"
    preds = root / "pred.jsonl"
    assert main(["train", "--config", str(cfg), "--model-out", str(model)]) == 0
    assert main(["predict", "--model", str(model), "--data", str(data), "--out", str(preds)]) == 0
    rows = [json.loads(l) for l in preds.read_text().splitlines()]
    assert len(rows) == 36 and set(rows[0]) == {"bag_id", "scores", "labels"}


@pytest.mark.parametrize("argv_tail, code", [
    (["--set", "nope=1"], 1),
    (["--set", "svm.C=zero"], 1),
    (["--set", "dataset.path=/does/not/exist.jsonl"], 2),
])
def test_exit_codes(workspace, argv_tail, code, capsys):
    _, _, cfg = workspace
    assert main(["cv", "--config", str(cfg), *argv_tail]) == code
    assert capsys.readouterr().err


def test_missing_config_file():
    assert main(["cv", "--config", "/does/not/exist.cfg"]) == 1


def test_corrupt_model_exit_code(tmp_path, workspace):
    _, data, _ = workspace
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    assert main(["predict", "--model", str(bad), "--data", str(data),
                 "--out", str(tmp_path / "p.jsonl")]) == 2


def test_runtime_error_exit_code(monkeypatch, workspace):
    from miml import harness
    from miml.errors import ConvergenceError

    def fail(cfg):
        raise ConvergenceError("solver diverged")

    monkeypatch.setattr(harness, "run_cv", fail)
    _, _, cfg = workspace
    assert main(["cv", "--config", str(cfg)]) == 3


def test_bad_boolean_flag(tmp_path):
    with pytest.raises(SystemExit):
        main(["gen-synth", "--out", str(tmp_path / "x"), "--bags", "3", "--chain-dep", "maybe"])
