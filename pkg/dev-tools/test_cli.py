"""
End-to-end tests of the jofc command line on small problems.
"""

import json

import numpy as np
import pytest

import main as cli
from data_io import load_embedding, load_vector, save_embedding, save_vector
from embed_core import Configuration
from errors import NumericalError


@pytest.fixture
def simulated(tmp_path):
    out = tmp_path / "problem"
    code = cli.main(["simulate", "--setting", "anomaly", "--n", "12", "--m", "2", "--n-anomalies", "2",
                     "--seed", "3", "--out", str(out)])
    assert code == 0
    return out


def test_simulate_writes_problem(simulated):
    assert (simulated / "modality_1.csv").is_file()
    assert (simulated / "modality_2.csv").is_file()
    np.testing.assert_array_equal(load_vector(simulated / "anomalies.csv"), [0, 1])
    assert load_vector(simulated / "labels.csv").size == 12


def test_embed_then_eval(tmp_path, simulated):
    run = tmp_path / "run.env"
    run.write_text(f"INPUTS={simulated / 'modality_1.csv'},{simulated / 'modality_2.csv'}\nW=1\nD=2\n")
    embedding = tmp_path / "out" / "embedding.csv"
    assert cli.main(["embed", "--config", str(run), "--out", str(embedding), "--eps", "1e-5"]) == 0

    config_ = load_embedding(embedding)
    assert (config_.m, config_.n, config_.d) == (2, 12, 2)
    report = json.loads((tmp_path / "out" / "embedding.report.json").read_text())
    assert report["algorithm"] == "fjofc"
    assert report["final_normalized_stress"] >= 0
    assert len(report["step_times"]) == report["iterations"]

    report_path = tmp_path / "eval.json"
    code = cli.main(["eval", "--embedding", str(embedding), "--labels", str(simulated / "labels.csv"),
                     "--anomalies", str(simulated / "anomalies.csv"), "--out", str(report_path)])
    assert code == 0
    scores = json.loads(report_path.read_text())
    assert -1.0 <= scores["ari"] <= 1.0
    assert scores["confusion_ratio"] >= 0


def test_embed_generator_reference_algorithm(tmp_path, capsys):
    run = tmp_path / "run.env"
    run.write_text("GENERATOR=matched\nN=8\nM=2\nMAX_ITERATIONS=5\n")
    assert cli.main(["embed", "--config", str(run), "--algorithm", "jofc", "--seed", "1"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["algorithm"] == "jofc"
    assert report["seed"] == 1
    assert report["ari"] is not None


def test_oos_command(tmp_path, rng):
    points = rng.normal(size=(6, 2))
    embedding = save_embedding(Configuration(np.stack([points, points])), tmp_path / "x.jofc")
    target = np.array([0.2, 0.1])
    deltas = np.linalg.norm(points - target, axis=1)
    first = save_vector(deltas, tmp_path / "d1.csv")
    second = save_vector(deltas, tmp_path / "d2.csv")
    out = tmp_path / "y.csv"
    code = cli.main(["oos", "--embedding", str(embedding), "--deltas", str(first), str(second),
                     "--w", "1", "--out", str(out)])
    assert code == 0
    y = np.loadtxt(out, delimiter=",", ndmin=2)
    assert y.shape == (2, 2)
    assert np.all(np.isfinite(y))


def test_bench_command(tmp_path):
    grid = tmp_path / "grid.env"
    grid.write_text("N_VALUES=6\nM_VALUES=2\nREPLICATES=1\nITERATIONS=2\n")
    out = tmp_path / "bench.csv"
    assert cli.main(["bench", "--grid", str(grid), "--out", str(out)]) == 0
    header = out.read_text().splitlines()[0].split(",")
    assert header[:3] == ["n", "m", "algorithm"]
    assert "speedup" in header


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["embed"],
        ["frobnicate"],
        ["simulate", "--n", "1", "--out", "unused"],
        ["embed", "--config", "does-not-exist.env"],
    ],
)
def test_validation_failures_exit_1(tmp_path, monkeypatch, argv):
    monkeypatch.chdir(tmp_path)
    assert cli.main(argv) == 1


def test_bad_input_matrix_exits_1(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("0,-1\n-1,0\n")
    run = tmp_path / "run.env"
    run.write_text(f"INPUTS={bad}\n")
    assert cli.main(["embed", "--config", str(run)]) == 1


def test_numerical_failure_exits_2(tmp_path, monkeypatch):
    def diverge(*args, **kwargs):
        raise NumericalError("stress became non-finite")

    monkeypatch.setattr(cli, "fjofc_embed", diverge)
    run = tmp_path / "run.env"
    run.write_text("GENERATOR=matched\nN=6\nM=2\n")
    assert cli.main(["embed", "--config", str(run)]) == 2
