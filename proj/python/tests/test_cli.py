import json
import subprocess


def run(cli, *args):
    return subprocess.run([cli, *map(str, args)], capture_output=True, text=True)


def error_of(proc):
    return json.loads(proc.stderr)["error"]


def test_usage_error(cli):
    proc = run(cli, "stage1", "--run", "x")
    assert proc.returncode == 64
    assert error_of(proc)["category"] == "usage"


def test_missing_config_is_io_error(cli, tmp_path):
    proc = run(cli, "stage1", "--config", tmp_path / "nope.json", "--run", tmp_path / "run")
    assert proc.returncode == 3
    assert error_of(proc)["category"] == "io"


def test_invalid_config(cli, tmp_path):
    assert run(cli, "simulate", "--out", tmp_path / "d", "--seed", 1).returncode == 0
    cfg = tmp_path / "d" / "config.json"
    doc = json.loads(cfg.read_text())
    doc["split"]["test_start"] = doc["split"]["train_end"]
    cfg.write_text(json.dumps(doc))
    proc = run(cli, "ingest", "--config", cfg, "--out", tmp_path / "panel.csv")
    assert proc.returncode == 2
    err = error_of(proc)
    assert err["category"] == "config"
    assert err["exit_code"] == 2


def test_forecast_without_fit(cli, tmp_path):
    assert run(cli, "simulate", "--out", tmp_path / "d", "--seed", 1).returncode == 0
    proc = run(cli, "forecast", "--config", tmp_path / "d" / "config.json", "--run", tmp_path / "run")
    assert proc.returncode == 3
    assert error_of(proc)["category"] == "io"


def test_ingest_and_features(cli, tmp_path):
    assert run(cli, "simulate", "--out", tmp_path / "d", "--seed", 2).returncode == 0
    cfg = tmp_path / "d" / "config.json"
    proc = run(cli, "ingest", "--config", cfg, "--out", tmp_path / "panel.csv")
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["status"] == "ok"
    header = (tmp_path / "panel.csv").read_text().splitlines()[0]
    assert "count" in header
    proc = run(cli, "features", "--config", cfg, "--out", tmp_path / "f.csv", "--variant", "area")
    assert proc.returncode == 0, proc.stderr
    assert len((tmp_path / "f.csv").read_text().splitlines()) > 1
