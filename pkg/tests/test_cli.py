import json
import math
import subprocess
import sys

import numpy as np
import pytest

from conftest import TWO_STATE
from windkshmm import cli, dataset, kernels, kshmm

FAST = ["--arma-cap", "3", "--sigma-grid", "1,0.1", "--c-grid", "10,1"]


@pytest.fixture
def train_csv(tmp_path):
    s = dataset.synth_hmm_series(TWO_STATE, 150, seed=2, turbine_id="t1")
    path = tmp_path / "t1.csv"
    dataset.write_csv(s, path)
    return path


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_synth_writes_fixture(tmp_path, capsys):
    code, _, _ = run(["synth", "--seed", "3", "--length", "50", "--out", str(tmp_path / "s.csv")], capsys)
    assert code == 0
    s = dataset.load_csv(tmp_path / "s.csv")
    assert len(s) == 50
    assert s.values.tobytes() == cli_fixture(50, 3).values.tobytes()


def cli_fixture(length, seed):
    return dataset.synth_hmm_series(cli.SYNTHETIC_SPEC, length, seed)


def test_benchmark_synthetic_is_deterministic(tmp_path, capsys):
    base = ["benchmark", "--synthetic", "--seed", "1", "--train-len", "100", "--test-len", "30", *FAST]
    for name in ("a", "b"):
        code, out, _ = run(base + ["--out", str(tmp_path / name), "--format", "csv"], capsys)
        assert code == 0
    header = (tmp_path / "a" / "summary.csv").read_text().splitlines()[0].split(",")
    assert header[1:7] == list(cli.methods.METHOD_NAMES)
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert len(files) == 7
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    code, _, _ = run(base + ["--out", str(tmp_path / "t.md"), "--format", "markdown"], capsys)
    assert code == 0 and (tmp_path / "t.md").read_text().count("**") == 2


def test_benchmark_parallel_matches_serial(tmp_path, capsys):
    base = ["benchmark", "--synthetic", "--seed", "2", "--train-len", "80", "--test-len", "20", *FAST,
            "--methods", "PST,KSHMM,KSHMM-PST,ARMA-AIC", "--format", "markdown"]
    assert run(base + ["--jobs", "1", "--out", str(tmp_path / "s.md")], capsys)[0] == 0
    assert run(base + ["--jobs", "2", "--out", str(tmp_path / "p.md")], capsys)[0] == 0
    assert (tmp_path / "s.md").read_bytes() == (tmp_path / "p.md").read_bytes()


def test_benchmark_from_csv_pairs(tmp_path, capsys):
    s = dataset.synth_hmm_series(TWO_STATE, 200, seed=5)
    tr, te = dataset.split(s, dataset.SplitSpec(0, 120, 150, 50))
    dataset.write_csv(tr, tmp_path / "tr.csv")
    dataset.write_csv(te, tmp_path / "te.csv")
    code, out, _ = run(["benchmark", "--train-csv", str(tmp_path / "tr.csv"), "--test-csv",
                        str(tmp_path / "te.csv"), "--turbine-id", "2028", "--methods", "PST,KSHMM-PST",
                        "--out", str(tmp_path / "r"), "--jobs", "1"], capsys)
    assert code == 0
    assert "| 2028 |" in out
    assert (tmp_path / "r" / "2028__KSHMM-PST.csv").exists()


def test_missing_file_is_data_error(tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    code, _, err = run(["benchmark", "--train-csv", str(missing), "--test-csv", str(missing),
                        "--out", str(tmp_path / "r")], capsys)
    assert code == 2 and str(missing) in err
    assert not (tmp_path / "r").exists()


@pytest.mark.parametrize("extra", [
    ["--methods", "PST,LSTM"], ["--rank", "0"], ["--lambda", "-1"], ["--format", "xml"],
    ["--epsilon", "-0.5"], ["--sigma-grid", "0,1"], ["--rank", "six"],
])
def test_invalid_config_exits_1_without_output(tmp_path, capsys, extra):
    out = tmp_path / "r"
    code, _, _ = run(["benchmark", "--synthetic", "--out", str(out), *extra], capsys)
    assert code == 1
    assert not out.exists()


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"synthetic": True, "train_len": 60, "test_len": 10, "methods": ["PST"],
                               "format": "markdown", "seed": 4}))
    code, out, _ = run(["benchmark", "--config", str(cfg), "--out", str(tmp_path / "a.md"), "--seed", "5"], capsys)
    assert code == 0 and "synthetic-5" in out
    cfg.write_text(json.dumps({"colour": "red"}))
    assert run(["benchmark", "--config", str(cfg), "--out", str(tmp_path / "b.md")], capsys)[0] == 1


def test_forecast_from_training_data_and_model(tmp_path, train_csv, capsys):
    model_path = tmp_path / "m.npz"
    code, out, _ = run(["forecast", "--train-csv", str(train_csv), "--observations", "4.0,5.5,6.1",
                        "--save-model", str(model_path)], capsys)
    assert code == 0
    first = json.loads(out)
    for key in ("pred_mean", "pred_var", "mode", "forecast"):
        assert isinstance(first[key], float) and math.isfinite(first[key])
    assert isinstance(first["stable"], bool) and first["switched"] == (not first["stable"])
    code, out, _ = run(["forecast", "--model", str(model_path), "--observations", "4.0,5.5,6.1"], capsys)
    assert code == 0 and json.loads(out) == first


def test_forecast_unstable_prints_persistence(tmp_path, train_csv, capsys):
    code, out, _ = run(["forecast", "--train-csv", str(train_csv), "--observations", "4.0,500"], capsys)
    res = json.loads(out)
    assert code == 0 and res["switched"] is True and res["forecast"] == 500.0


def test_forecast_needs_model_or_data(capsys):
    assert run(["forecast", "--observations", "1,2"], capsys)[0] == 1


def test_diagnose(train_csv, capsys):
    code, out, _ = run(["diagnose", "--train-csv", str(train_csv), "--rank", "4"], capsys)
    res = json.loads(out)
    assert code == 0
    assert res["m"] == 148 and res["lambda"] == 0.01 / math.sqrt(148)
    assert len(res["eigenvalues"]) == 4
    assert res["sigma"] > 0 and res["pacf_cutoff"] >= 0


def test_diagnose_uses_leading_train_window(train_csv, capsys):
    code, out, _ = run(["diagnose", "--train-csv", str(train_csv), "--train-len", "60", "--rank", "2"], capsys)
    res = json.loads(out)
    assert code == 0 and res["n"] == 60 and res["m"] == 58
    x = dataset.load_csv(train_csv).values[:60]
    assert res["sigma"] == kernels.median_heuristic(x)


def test_diagnose_constant_series(tmp_path, capsys):
    ts = np.datetime64("2007-01-01T00:00:00") + np.arange(30) * np.timedelta64(1, "h")
    dataset.write_csv(dataset.WindSeries("c", ts, np.full(30, 4.0)), tmp_path / "c.csv")
    code, _, err = run(["diagnose", "--train-csv", str(tmp_path / "c.csv")], capsys)
    assert code == 2 and "zero" in err


def test_model_artifact_garbage(tmp_path, capsys):
    bad = tmp_path / "bad.npz"
    bad.write_bytes(b"not a model")
    assert run(["forecast", "--model", str(bad), "--observations", "1"], capsys)[0] == 2


def test_module_entry_point(tmp_path):
    out = tmp_path / "s.csv"
    proc = subprocess.run([sys.executable, "-m", "windkshmm", "synth", "--length", "10", "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and out.exists()
    proc = subprocess.run([sys.executable, "-m", "windkshmm", "benchmark"], capture_output=True, text=True)
    assert proc.returncode == 1
