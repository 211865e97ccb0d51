import json
import math
import subprocess
import sys

import numpy as np
import pytest

from embedded_eigen import cli
from embedded_eigen.model import make_energy_point, read_potential, write_potential, zero_potential

SMALL_H = 300_000


def _write_cfg(path, **kw):
    cfg = cli.RunConfig(**kw)
    cli.save_config(path, cfg)
    return cfg


@pytest.fixture(scope="module")
def constructed(tmp_path_factory):
    d = tmp_path_factory.mktemp("run")
    _write_cfg(d / "cfg.json", energies=[1.0, -1.0], angles=[math.pi / 3, math.pi / 5],
               horizon=SMALL_H, fullTraceWindow=[1000, 3000])
    assert cli.main(["construct", "--config", str(d / "cfg.json"), "--out", str(d / "out")]) == 0
    return d


def test_config_round_trip(tmp_path):
    cfg = _write_cfg(tmp_path / "c.json", energies=[0.5, 0.0], angles=[0.1, 0.2], mode="countable",
                     envelope={"name": "power", "alpha": 0.5}, maxPieceRatio=0.5,
                     tolerances={"maxDecaySlope": -2.0})
    back = cli.load_config(tmp_path / "c.json")
    assert back == cfg
    assert back.tolerances.maxDecaySlope == -2.0


def test_config_rejects_unknown_keys_and_versions(tmp_path):
    doc = cli.RunConfig(energies=[1.0], angles=[0.1]).to_dict()
    for bad in ({**doc, "colour": 1}, {**doc, "version": 99}):
        (tmp_path / "c.json").write_text(json.dumps(bad))
        with pytest.raises(Exception):
            cli.load_config(tmp_path / "c.json")


def test_construct_outputs(constructed):
    out = constructed / "out"
    for name in ("potential.json", "schedule.csv", "run.log", "config.json",
                 "traces/trace_0.csv", "traces/trace_1.csv"):
        assert (out / name).exists(), name
    V = read_potential(out / "potential.json")
    assert V.horizon == SMALL_H
    sched = np.loadtxt(out / "schedule.csv", delimiter=",", skiprows=1, ndmin=2)
    # E and -E form a single resonant class, so every step holds one piece
    assert np.all(sched[:, 1] == 1)
    tr = cli.read_trace(out / "traces" / "trace_0.csv", 0, make_energy_point(1.0))
    assert tr.is_dense(1000, 3000)


def test_construct_zero_energy(tmp_path):
    _write_cfg(tmp_path / "c.json", energies=[0.0], angles=[math.pi / 4], horizon=200_000)
    assert cli.main(["construct", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path)]) == 0
    assert cli.main(["verify", str(tmp_path / "potential.json")]) == 0


def test_duplicate_energy_error_record(tmp_path, capsys):
    _write_cfg(tmp_path / "c.json", energies=[1.0, 1.0], angles=[0.1, 0.2], horizon=10_000)
    assert cli.main(["construct", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path)]) == 1
    rec = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert rec["error"] == "DuplicateEnergy"


def test_verify_passes(constructed, capsys):
    out = constructed / "out"
    code = cli.main(["verify", str(out / "potential.json"), "--config", str(out / "config.json"),
                     "--out", str(out)])
    assert code == 0
    report = json.loads((out / "verify.json").read_text())
    assert report["passed"]
    assert "PASS replay_anchors" in capsys.readouterr().out


def test_verify_detects_corruption(constructed, tmp_path):
    doc = json.loads((constructed / "out" / "potential.json").read_text())
    doc["pieces"][3]["anchors"][0][1] += 1e-9
    (tmp_path / "bad.json").write_text(json.dumps(doc))
    assert cli.main(["verify", str(tmp_path / "bad.json")]) == 3


def test_verify_tolerance_failure(constructed, tmp_path):
    _write_cfg(tmp_path / "c.json", energies=[1.0, -1.0], angles=[math.pi / 3, math.pi / 5],
               tolerances={"maxDecaySlope": -1e6})
    pot = constructed / "out" / "potential.json"
    assert cli.main(["verify", str(pot), "--config", str(tmp_path / "c.json")]) == 3


def test_spectrum_zero_potential(tmp_path):
    write_potential(tmp_path / "z.json", zero_potential(1000))
    code = cli.main(["spectrum", str(tmp_path / "z.json"), "--truncation", "100", "--targets", "0.5",
                     "--all-eigenvalues", "--out", str(tmp_path)])
    assert code == 0
    doc = json.loads((tmp_path / "spectrum.json").read_text())
    exact = np.sort(2 * np.cos(np.pi * np.arange(1, 101) / 101))
    assert np.max(np.abs(np.array(doc["eigenvalues"]) - exact)) < 1e-12
    assert doc["firstSite"] == 1


def test_spectrum_out_of_horizon(tmp_path, capsys):
    write_potential(tmp_path / "z.json", zero_potential(1000))
    assert cli.main(["spectrum", str(tmp_path / "z.json"), "--truncation", "5000", "--targets", "0.5"]) == 1
    assert json.loads(capsys.readouterr().err.strip())["error"] == "OutOfHorizon"


def test_export(constructed, tmp_path):
    pot = constructed / "out" / "potential.json"
    assert cli.main(["export", str(pot), "--out", str(tmp_path), "--full-trace-window", "100..200"]) == 0
    data = np.loadtxt(tmp_path / "potential.csv", delimiter=",", skiprows=1)
    V = read_potential(pot)
    n = data[:, 0].astype(np.int64)
    assert set(range(100, 201)) <= set(n.tolist())
    assert np.array_equal(data[:, 1], V.values()[n])


def test_bad_window_argument():
    with pytest.raises(SystemExit):
        cli.main(["export", "x.json", "--full-trace-window", "9..3"])


def test_console_entry_point(tmp_path):
    write_potential(tmp_path / "z.json", zero_potential(50))
    r = subprocess.run([sys.executable, "-m", "embedded_eigen", "spectrum", str(tmp_path / "z.json"),
                        "--truncation", "10", "--targets", "1.0"], capture_output=True, text=True)
    assert r.returncode == 0 and "nearest=" in r.stdout
