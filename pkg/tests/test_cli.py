# tests/test_cli.py
import json

import pandas as pd
import pytest

from kcell_lab.cli import EXIT_CONFIG, EXIT_FAILED, EXIT_OK, main
from kcell_lab.utils.file_handler import CSV_COLUMNS


def write_config(path, **overrides):
    data = {
        "campaign_id": "small_gap",
        "experiment": "gap",
        "d": 2,
        "body": {"type": "ball", "center": [0.0, 0.0], "radius": 1.0},
        "n_grid": [8, 16],
        "reps": 12,
        "master_seed": 77,
    }
    data.update(overrides)
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


@pytest.fixture
def config_path(tmp_path):
    return write_config(tmp_path / "small_gap.json")


@pytest.fixture
def finished_run(tmp_path, config_path):
    out = tmp_path / "out"
    assert main(["run", str(config_path), "--out", str(out)]) == EXIT_OK
    return out


class TestRun:
    def test_malformed_body(self, tmp_path, capsys):
        path = write_config(tmp_path / "bad.json", body={"type": "ball", "center": [0, 0]})
        assert main(["run", str(path)]) == EXIT_CONFIG
        assert "body.radius" in capsys.readouterr().err

    def test_writes_outputs(self, finished_run):
        csv = finished_run / "small_gap.csv"
        assert csv.exists()
        assert (finished_run / "small_gap.json").exists()
        assert (finished_run / "small_gap.svg").read_text(encoding="utf-8").lstrip().startswith("<svg")

        header = csv.read_text(encoding="utf-8").split("\n")[0]
        assert header.split(",") == CSV_COLUMNS
        frame = pd.read_csv(csv, dtype={"seed": str})
        assert frame["n"].tolist() == [8.0, 16.0]
        assert set(frame["seed"]) == {"77"}
        assert (frame["mean_gap"] > 0).all()

    def test_summary_contents(self, finished_run):
        summary = json.loads((finished_run / "small_gap.json").read_text(encoding="utf-8"))
        assert summary["campaign_id"] == "small_gap"
        assert summary["seed"] == "77"
        assert summary["passed"] is True
        assert summary["run"]["workers"] == 1
        assert len(summary["csv"]["sha256"]) == 64

    def test_no_svg_flag(self, tmp_path, config_path):
        out = tmp_path / "plain"
        assert main(["run", str(config_path), "--out", str(out), "--no-svg"]) == EXIT_OK
        assert not (out / "small_gap.svg").exists()

    def test_bad_worker_count(self, config_path):
        assert main(["--workers", "0", "run", str(config_path)]) == EXIT_CONFIG

    def test_failed_check_sets_exit_code(self, tmp_path):
        path = write_config(tmp_path / "inflated.json", campaign_id="inflated", experiment="lowerbound",
                            n_grid=[16], reps=20, inflate=10.0, oracle_points=20000,
                            outputs={"svg": False})
        out = tmp_path / "lb"
        assert main(["run", str(path), "--out", str(out)]) == EXIT_OK
        assert main(["run", str(path), "--out", str(out), "--check"]) == EXIT_FAILED


class TestReplay:
    def test_identical(self, finished_run, config_path, capsys):
        assert main(["replay", str(finished_run / "small_gap.csv"), str(config_path)]) == EXIT_OK
        assert "replay identical" in capsys.readouterr().out

    def test_identical_with_two_workers(self, finished_run, config_path):
        csv = finished_run / "small_gap.csv"
        assert main(["--workers", "2", "replay", str(csv), str(config_path)]) == EXIT_OK
        assert main(["replay", str(csv), str(config_path), "--workers", "2"]) == EXIT_OK

    def test_changed_seed_is_reported(self, finished_run, tmp_path, capsys):
        other = write_config(tmp_path / "other.json", master_seed=78)
        assert main(["replay", str(finished_run / "small_gap.csv"), str(other)]) == EXIT_FAILED
        assert "row 1" in capsys.readouterr().err

    def test_missing_csv(self, tmp_path, config_path):
        assert main(["replay", str(tmp_path / "none.csv"), str(config_path)]) == EXIT_CONFIG


class TestSeedOverride:
    def test_environment_seed_wins(self, tmp_path, config_path, fresh_settings, monkeypatch):
        monkeypatch.setenv("SEED", "5")
        out = tmp_path / "seeded"
        assert main(["run", str(config_path), "--out", str(out), "--no-svg"]) == EXIT_OK
        frame = pd.read_csv(out / "small_gap.csv", dtype={"seed": str})
        assert set(frame["seed"]) == {"5"}
