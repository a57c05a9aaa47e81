import csv
import json

import pytest

from scripkit.cli import run_command

from conftest import two_type_game


@pytest.fixture
def config(tmp_path):
    doc = two_type_game().to_json()
    doc["simulate"] = {"rounds": 50000, "seed": 3}
    path = tmp_path / "game.json"
    path.write_text(json.dumps(doc))
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_equilibrium(config, tmp_path, capsys):
    out = tmp_path / "eq"
    assert run_command(["equilibrium", "--config", str(config), "--out", str(out)]) == 0
    doc = json.loads((out / "equilibrium.json").read_text())
    assert doc["profile"] == [20, 13]
    assert json.loads(capsys.readouterr().out)["profile"] == [20, 13]
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest["config_sha256"]) == 64 and "numpy" in manifest["versions"]
    rows = read_csv(out / "distribution.csv")
    assert len(rows) == 21 + 14
    assert b"\r\n" not in (out / "distribution.csv").read_bytes()


def test_sweep_rises_then_stops(config, tmp_path):
    out = tmp_path / "sw"
    assert run_command(["sweep", "--config", str(config), "--out", str(out), "--m", "1:0.5:9", "--jobs", "1"]) == 0
    rows = read_csv(out / "sweep.csv")
    welfare = [float(r["welfare"]) for r in rows]
    crashed = [r["crashed"] == "1" for r in rows]
    first = crashed.index(True)
    assert all(crashed[first:]) and not any(crashed[:first])
    assert all(a <= b + 1e-9 for a, b in zip(welfare[:first], welfare[1:first]))
    assert all(w == 0 for w in welfare[first:])


def test_crash(config, tmp_path):
    out = tmp_path / "cr"
    assert run_command(["crash", "--config", str(config), "--out", str(out), "--m", "1:0.25:10"]) == 0
    doc = json.loads((out / "crash.json").read_text())
    assert doc == {"last_nontrivial_m": "13/2", "first_trivial_m": "27/4"}


def test_crash_bad_bracket_is_numeric_error(config, tmp_path, capsys):
    code = run_command(["crash", "--config", str(config), "--out", str(tmp_path), "--m", "8:0.5:10"])
    assert code == 3
    assert json.loads(capsys.readouterr().err)["error"] == "BadBracket"


def test_simulate_is_reproducible(config, tmp_path):
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert run_command(["simulate", "--config", str(config), "--out", str(out), "--rounds", "1e5",
                            "--seed", "42"]) == 0
    for name in ("simulation.json", "distribution.csv", "utility.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    doc = json.loads((outs[0] / "simulation.json").read_text())
    assert doc["money_conserved"] and doc["seed"] == 42 and doc["rounds"] == 100000
    assert json.loads((outs[0] / "manifest.json").read_text())["seed"] == 42


def test_simulate_uses_config_block(config, tmp_path):
    out = tmp_path / "s"
    assert run_command(["simulate", "--config", str(config), "--out", str(out)]) == 0
    doc = json.loads((out / "simulation.json").read_text())
    assert doc["rounds"] == 50000 and doc["seed"] == 3 and doc["profile"] == [20, 13]


def test_infer_round_trip(config, tmp_path):
    eq = tmp_path / "eq"
    run_command(["equilibrium", "--config", str(config), "--out", str(eq)])
    out = tmp_path / "inf"
    assert run_command(["infer", "--dist", str(eq / "distribution.csv"), "--out", str(out)]) == 0
    doc = json.loads((out / "inference.json").read_text())
    assert [s["k"] for s in doc["support"]] == [13, 20]
    assert [b["k"] for b in doc["cost_bounds"]] == [13, 20]


@pytest.mark.parametrize("flags, stem_rows", [
    (["--altruist-fraction", "0.2", "--m", "2:2:6"], 3),
    (["--hoarder-fraction", "1/10"], 1),
    (["--sybil", "1", "--sybil-fraction", "1/5", "--m", "2:2:4"], 2),
])
def test_perturb(config, tmp_path, flags, stem_rows):
    out = tmp_path / "p"
    assert run_command(["perturb", "--config", str(config), "--out", str(out), "--jobs", "1", *flags]) == 0
    assert len(read_csv(out / "perturb.csv")) == stem_rows


def test_perturb_needs_one_choice(config, tmp_path):
    assert run_command(["perturb", "--config", str(config), "--out", str(tmp_path)]) == 2


def test_error_codes(tmp_path, capsys):
    assert run_command(["equilibrium", "--out", str(tmp_path)]) == 2
    assert run_command(["equilibrium", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 4
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run_command(["equilibrium", "--config", str(bad), "--out", str(tmp_path)]) == 2
    doc = two_type_game().to_json()
    doc["h"] = 7
    bad.write_text(json.dumps(doc))
    assert run_command(["equilibrium", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert run_command(["sweep", "--config", str(bad), "--out", str(tmp_path), "--m", "x"]) == 2
    assert run_command(["bogus"]) == 2
    err = capsys.readouterr().err
    assert "NonIntegralPopulation" in err
