import json

import pytest

from arsim.cli import main
from arsim.ingest import load_trips
from arsim.marl.maddpg import load_bundle

from conftest import DATA


def test_oracle_smoke(capsys):
    assert main(["oracle", "--drivers", "2", "--riders", "3", "--seed", "1"]) == 0
    out = capsys.readouterr().out
    assert "optimal assignment" in out and "optimal fitness" in out


def test_invalid_agents_exit_two(capsys, tmp_path):
    assert main(["simulate", "--agents", "1", "--out", str(tmp_path)]) == 2
    assert "agents" in capsys.readouterr().err


def test_unknown_flag_exit_two(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--agnets", "5"])
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_simulate_then_report(tmp_path, capsys):
    out = tmp_path / "run"
    args = ["simulate", "--agents", "10", "--days", "2", "--matcher", "pso", "--seed", "7", "--out", str(out)]
    assert main(args) == 0
    assert (out / "summary.dat").exists() and (out / "daylogs.jsonl").exists()
    assert json.loads((out / "manifest.json").read_text())["seed"] == 7
    again = tmp_path / "again"
    assert main(["report", "--logs", str(out), "--out", str(again)]) == 0
    for name in ("distance.dat", "acceptance.dat", "lorenz.dat"):
        assert (again / name).read_text() == (out / name).read_text()


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("sim:\n  agents: 8\n  days: 3\n  matcher: none\n")
    out = tmp_path / "run"
    assert main(["simulate", "--config", str(cfg), "--days", "2", "--out", str(out)]) == 0
    assert len((out / "distance.dat").read_text().splitlines()) == 3


def test_train_actor_only(tmp_path):
    path = tmp_path / "ck.npz"
    assert main(["train", "--agents", "4", "--days", "2", "--episodes", "2", "--actor-only", "--out", str(path)]) == 0
    bundle, meta = load_bundle(path)
    assert meta["actor_only"] and meta["episodes"] == 2 and bundle.n_agents == 4


def test_ingest_sample(tmp_path, capsys):
    out = tmp_path / "trips.txt"
    assert main(["ingest", str(DATA / "tlc_sample.csv"), "--out", str(out)]) == 0
    assert "rows 100 skipped 10 in_window 70 same_cell 10 written 60" in capsys.readouterr().out
    assert len(load_trips(out)) == 60


def test_ingest_bad_quad(tmp_path):
    assert main(["ingest", str(DATA / "tlc_sample.csv"), "--out", str(tmp_path / "t"), "--quad", "1,2,3"]) == 2
