import csv
import json
import os

import pytest

from config import load_run_config
from copulas import EmpiricalCopula, VineCopula, load_model
from database import ReportDatabase
from main import _parse_seeds, main


def write_config(tmp_path, **values):
    payload = {"simulate": {"d": 2, "n": 400, "seed": 0}, "schemes": ["independent", "scalar-l2"]}
    payload.update(values)
    path = tmp_path / "run.json"
    path.write_text(json.dumps(payload))
    return str(path)


def read_rows(path):
    with open(path, newline="") as handle:
        return list(csv.reader(handle))


def test_parse_seeds():
    assert _parse_seeds("0-4") == [0, 1, 2, 3, 4]
    assert _parse_seeds("3,1") == [3, 1]
    assert _parse_seeds(None) is None


def test_simulate_writes_the_dataset(tmp_path, capsys):
    out = tmp_path / "sim" / "data.csv"
    assert main(["simulate", "--n", "500", "--seed", "1", "--out", str(out)]) == 0
    rows = read_rows(out)
    assert rows[0] == ["x0", "x1", "x2", "x3", "x4", "x5", "x6", "y0", "y1", "y2"]
    assert len(rows) == 501
    assert "Wrote 500 rows" in capsys.readouterr().out


def test_simulate_argument_errors(tmp_path, capsys):
    out = str(tmp_path / "data.csv")
    assert main(["simulate", "--n", "500", "--out", out]) == 2
    assert "seed required" in capsys.readouterr().err
    assert main(["simulate", "--n", "0", "--seed", "1", "--out", out]) == 2
    assert not os.path.exists(out)


def test_calibrate_writes_reports_and_csv(tmp_path):
    config = write_config(tmp_path, seeds=[0, 1])
    out_dir = tmp_path / "out"
    assert main(["calibrate", "--config", config, "--out-dir", str(out_dir)]) == 0

    reports = sorted(os.listdir(out_dir / "reports"))
    assert len(reports) == 4
    with open(out_dir / "reports" / "independent_a0.1_n100_s0.json") as handle:
        report = json.load(handle)
    assert report["schema"] == 1
    assert report["error"] is None
    assert len(report["quantile"]) == 2

    rows = read_rows(out_dir / "results.csv")
    assert rows[0][:6] == ["scheme", "alpha", "n_cal", "seed", "coverage", "efficiency"]
    assert rows[0][6:8] == ["quantile_0", "quantile_1"]
    assert len(rows) == 5


def test_calibrate_persists_the_fitted_copula(tmp_path):
    config = write_config(tmp_path, schemes=["independent", "plugin-split"])
    out_dir = tmp_path / "out"
    assert main(["calibrate", "--config", config, "--out-dir", str(out_dir)]) == 0

    with open(out_dir / "reports" / "plugin-split_a0.1_n100_s0.json") as handle:
        report = json.load(handle)
    assert report["model_file"] == os.path.join("models", "plugin-split_a0.1_n100_s0.json")
    model = load_model(str(out_dir / report["model_file"]))
    assert isinstance(model, EmpiricalCopula)
    assert model.dim == 2

    with open(out_dir / "reports" / "independent_a0.1_n100_s0.json") as handle:
        assert "model_file" not in json.load(handle)
    assert os.listdir(out_dir / "models") == ["plugin-split_a0.1_n100_s0.json"]


def test_calibrate_csv_is_reproducible(tmp_path):
    config = write_config(tmp_path, seeds=[0, 1, 2])
    for name in ("first", "second"):
        assert main(["calibrate", "--config", config, "--out-dir", str(tmp_path / name)]) == 0
    first = (tmp_path / "first" / "results.csv").read_bytes()
    second = (tmp_path / "second" / "results.csv").read_bytes()
    assert first == second


def test_calibrate_with_a_csv_file(tmp_path):
    data = tmp_path / "data.csv"
    assert main(["simulate", "--n", "300", "--d", "2", "--seed", "4", "--out", str(data)]) == 0
    out_dir = tmp_path / "out"
    assert main(["calibrate", "--data", str(data), "--targets", "y0,y1",
                 "--schemes", "independent,empirical-copula", "--seeds", "0-1",
                 "--out-dir", str(out_dir)]) == 0
    assert len(read_rows(out_dir / "results.csv")) == 5


def test_calibrate_flags_override_the_config(tmp_path):
    config = write_config(tmp_path)
    out_dir = tmp_path / "out"
    assert main(["calibrate", "--config", config, "--alpha", "0.2", "--schemes", "independent",
                 "--n-cal", "150", "--n-test", "50", "--out-dir", str(out_dir)]) == 0
    rows = read_rows(out_dir / "results.csv")
    assert rows[1][:4] == ["independent", "0.2", "150", "0"]


def test_calibrate_rejects_bad_config(tmp_path, capsys):
    config = write_config(tmp_path, schemes=["jackknife"])
    assert main(["calibrate", "--config", config, "--out-dir", str(tmp_path / "out")]) == 2
    assert "unknown scheme" in capsys.readouterr().err
    assert main(["calibrate", "--out-dir", str(tmp_path / "out")]) == 2


def test_sweep_over_alpha(tmp_path):
    config = write_config(tmp_path, schemes=["independent", "empirical-copula"])
    out_dir = tmp_path / "sweep"
    assert main(["sweep", "--config", config, "--seeds", "0-4", "--axis", "alpha",
                 "--values", "0.05,0.1,0.2,0.3", "--out-dir", str(out_dir)]) == 0
    expected_hash = load_run_config(config, {"seeds": [0, 1, 2, 3, 4]}).config_hash()
    rows = read_rows(out_dir / "sweep.csv")
    assert rows[0] == ["axis", "value", "scheme", "seed", "coverage", "efficiency", "config_hash"]
    assert {row[6] for row in rows[1:]} == {expected_hash}
    assert len(rows) == 41
    assert [row[1] for row in rows[1:11]] == ["0.05"] * 10
    assert len(os.listdir(out_dir / "reports")) == 40


def test_sweep_over_calibration_size(tmp_path):
    config = write_config(tmp_path, schemes=["independent"])
    out_dir = tmp_path / "sweep"
    assert main(["sweep", "--config", config, "--seeds", "0,1", "--axis", "n_cal",
                 "--values", "50,100", "--n-test", "100", "--out-dir", str(out_dir)]) == 0
    rows = read_rows(out_dir / "sweep.csv")
    assert [row[1] for row in rows[1:]] == ["50", "50", "100", "100"]


def test_calibrate_stores_reports_in_the_database(tmp_path, capsys):
    config = write_config(tmp_path, seeds=[0, 1])
    db_path = str(tmp_path / "reports.db")
    assert main(["calibrate", "--config", config, "--out-dir", str(tmp_path / "out"),
                 "--db", db_path]) == 0
    out = capsys.readouterr().out
    assert "Stored runs for config" in out
    assert any(line.split()[:3] == ["independent", "2", "0"] for line in out.splitlines())
    db = ReportDatabase(db_path)
    try:
        assert len(db.get_reports()) == 4
    finally:
        db.close()


@pytest.mark.slow
def test_corrected_scheme_end_to_end(tmp_path):
    config = write_config(tmp_path, schemes=["corrected"], mc_samples=2000,
                          simulate={"d": 3, "n": 600, "seed": 2, "noise_copula": "gumbel:2"})
    out_dir = tmp_path / "out"
    assert main(["calibrate", "--config", config, "--out-dir", str(out_dir)]) == 0
    with open(out_dir / "reports" / "corrected_a0.1_n150_s0.json") as handle:
        report = json.load(handle)
    assert report["error"] is None
    assert report["quantile_plugin"] is not None
    assert isinstance(load_model(str(out_dir / report["model_file"])), VineCopula)
