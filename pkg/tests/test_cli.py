import json

import numpy as np
import pandas as pd
import pytest

import sdpNet
from sdpnn import artifacts, experiment


@pytest.fixture
def config_path(tmp_path, toy_csv):
    cfg = {
        "logging": {"level": "WARNING", "color": False, "dir": str(tmp_path / "logs")},
        "solver": {"max_iters": 20000, "log_every": 0},
        "rounding": {"R": 10, "iters": 40},
        "sgd": {"lr": 1e-3, "iters": 200, "restarts": 1, "width": 8},
        "data": {"cache_dir": str(tmp_path / "cache")},
        "datasets": {"toy": {"path": str(toy_csv), "label_column": "label"}},
        "output": {"dir": str(tmp_path / "runs")},
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def run(config_path, *argv):
    return sdpNet.main(["--config", str(config_path), *argv])


def test_generate_caches_dataset(config_path, tmp_path):
    rc = run(config_path, "generate", "--dataset", "spiral", "--seed", "2")
    assert rc == sdpNet.EXIT_OK
    cached = list((tmp_path / "cache").glob("*.npz"))
    assert len(cached) == 1


def test_solve_round_evaluate_pipeline(config_path, tmp_path):
    out = tmp_path / "solve"
    rc = run(
        config_path, "solve", "--dataset", "toy", "--gamma", "0.1", "--out", str(out), "--sdpa"
    )
    assert rc == sdpNet.EXIT_OK
    expected = ["lambda_star.bin", "lambda_star.json", "trace.csv", "manifest.json"]
    for name in expected + ["problem.dat-s"]:
        assert (out / name).exists()
    manifest = artifacts.load_json(out / "manifest.json")
    assert manifest["problem"]["p"] == 2 * 6 + 2 + 2
    assert manifest["experiment"]["gamma"] == 0.1
    assert set(manifest["artifacts"]) >= {"lambda_star.bin", "trace.csv"}
    assert len(pd.read_csv(out / "trace.csv")) == manifest["solution"]["iterations"]

    assert run(config_path, "round", "--run", str(out)) == sdpNet.EXIT_OK
    weights = artifacts.load_json(out / "weights.json")
    assert weights["d"] == 2 and weights["c"] == 2 and weights["m"] <= 10
    assert len(pd.read_csv(out / "phi_history.csv")) == 40
    assert np.isfinite(artifacts.load_json(out / "round.json")["training_loss"])

    assert run(config_path, "evaluate", "--run", str(out), "--kernel") == sdpNet.EXIT_OK
    metrics = artifacts.load_json(out / "metrics.json")
    assert 0.0 <= metrics["accuracy"] <= 1.0
    assert artifacts.read_matrix(out / "kernel.bin").shape == (6, 6)

    assert run(config_path, "status", "--run", str(out)) == sdpNet.EXIT_OK


def test_max_iterations_exit_code(config_path, tmp_path):
    out = str(tmp_path / "s")
    rc = run(config_path, "solve", "--dataset", "toy", "--max-iters", "3", "--out", out)
    assert rc == sdpNet.EXIT_MAXITER


def test_invalid_gamma_fails(config_path, tmp_path):
    rc = run(config_path, "solve", "--gamma", "-1", "--out", str(tmp_path / "s"))
    assert rc == sdpNet.EXIT_FAIL


def test_round_rejects_stale_or_missing_artifacts(config_path, tmp_path):
    assert run(config_path, "round", "--run", str(tmp_path / "nowhere")) == sdpNet.EXIT_FAIL
    out = tmp_path / "solve"
    run(config_path, "solve", "--dataset", "toy", "--max-iters", "20", "--out", str(out))
    artifacts.write_matrix(out / "lambda_star.bin", np.zeros((16, 16)))
    assert run(config_path, "round", "--run", str(out)) == sdpNet.EXIT_FAIL
    assert run(config_path, "status", "--run", str(out)) == sdpNet.EXIT_FAIL


def test_train_then_evaluate(config_path, tmp_path):
    out = tmp_path / "train"
    rc = run(config_path, "train", "--dataset", "toy", "--out", str(out))
    assert rc == sdpNet.EXIT_OK
    assert artifacts.load_json(out / "weights.json")["m"] == 8
    rc = run(config_path, "evaluate", "--run", str(out), "--rule", "positive")
    assert rc == sdpNet.EXIT_OK


def test_evaluate_without_test_split_fails(config_path, tmp_path):
    out = tmp_path / "train"
    rc = run(config_path, "train", "--dataset", "random", "--out", str(out))
    assert rc == sdpNet.EXIT_OK
    assert run(config_path, "evaluate", "--run", str(out)) == sdpNet.EXIT_FAIL


def test_reproduce_marks_failed_rows(config_path, tmp_path):
    out = tmp_path / "rep"
    rc = run(config_path, "reproduce", "AR", "--dataset", "toy", "--dataset", "missing-set",
             "--gamma", "0.1", "--quick", "--out", str(out))
    assert rc == sdpNet.EXIT_OK
    table = pd.read_csv(out / "table_AR.csv")
    assert list(table["status"]) == ["OK", "FAILED"]
    assert table.loc[0, "ar_percent"] > 0
    assert artifacts.load_json(out / "manifest.json")["failed_rows"] == 1


def test_reproduce_prediction_row(config_path, tmp_path):
    out = tmp_path / "rep"
    rc = run(config_path, "reproduce", "Prediction", "--dataset", "toy", "--gamma", "0.1",
             "--methods", "sdp", "--methods", "sgd", "--quick", "--out", str(out))
    assert rc == sdpNet.EXIT_OK
    table = pd.read_csv(out / "table_Prediction.csv")
    assert list(table["method"]) == ["sdp", "sgd"]
    assert (table["status"] == "OK").all()
    assert table["accuracy"].between(0, 1).all()


def test_reproduce_ar_reports_width_sweep(config_path, tmp_path):
    out = tmp_path / "rep"
    rc = run(config_path, "reproduce", "AR", "--dataset", "toy", "--gamma", "0.1",
             "--quick", "--out", str(out))
    assert rc == sdpNet.EXIT_OK
    row = pd.read_csv(out / "table_AR.csv").iloc[0]
    assert row["status"] == "OK"
    for m in (5, 8, 10, 100, 200, 300):
        assert np.isfinite(row[f"sgd_{m}"])
        assert pd.isna(row[f"diff_sgd_{m}"])
    assert row["runtime_s"] > 0


def test_reproduce_isolates_unexpected_row_errors(config_path, tmp_path, monkeypatch):
    def broken(*args, **kwargs):
        raise ValueError("array must not contain infs or NaNs")

    monkeypatch.setattr(experiment, "score_weights", broken)
    out = tmp_path / "rep"
    rc = run(config_path, "reproduce", "Prediction", "--dataset", "toy", "--gamma", "0.1",
             "--methods", "sdp", "--methods", "sgd", "--quick", "--out", str(out))
    assert rc == sdpNet.EXIT_OK
    table = pd.read_csv(out / "table_Prediction.csv")
    assert list(table["status"]) == ["FAILED", "FAILED"]
    assert table["error"].str.contains("infs or NaNs").all()
    assert artifacts.load_json(out / "manifest.json")["failed_rows"] == 2


def test_max_iterations_is_logged_as_warning(config_path, tmp_path):
    out = str(tmp_path / "s")
    rc = run(config_path, "solve", "--dataset", "toy", "--max-iters", "3", "--out", out)
    assert rc == sdpNet.EXIT_MAXITER
    lines = (tmp_path / "logs" / "sdpnn.log").read_text().splitlines()
    final = [line for line in lines if "Command 'solve'" in line]
    assert len(final) == 1
    assert "[WARNING]" in final[0] and "stopped at max_iters" in final[0]
    assert not [line for line in lines if "[ERROR]" in line]
