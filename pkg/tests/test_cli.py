import json

import numpy as np
import pytest
from click.testing import CliRunner

from landau.cli import main
from landau.io import read_snapshot_csv, write_snapshot_csv


@pytest.fixture
def runner():
    return CliRunner()


def sim_config(tmp_path, **kw):
    cfg = {"n": 16, "dim": 3, "dt": 0.01, "t_end": 0.05, "seed": 9,
           "model": {"model": "maxwell", "dim": 3}, "snapshot_stride": 1}
    cfg.update(kw)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def test_simulate_happy_path(runner, tmp_path):
    cfg = sim_config(tmp_path)
    out = tmp_path / "out"
    result = runner.invoke(main, ["simulate", "--config", str(cfg), "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert (out / "snapshot.csv").exists()
    assert (out / "moments.csv").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 9
    assert {o["file"] for o in manifest["outputs"]} == {"snapshot.csv", "moments.csv"}
    snaps = read_snapshot_csv(out / "snapshot.csv")
    assert snaps[0][1].shape == (16, 3)
    assert len(snaps) == 6  # steps 0..5


def test_simulate_rejects_bad_dt(runner, tmp_path):
    cfg = sim_config(tmp_path, dt=-0.5)
    out = tmp_path / "out"
    result = runner.invoke(main, ["simulate", "--config", str(cfg), "--out", str(out)])
    assert result.exit_code == 1
    assert "dt" in result.output
    assert not (out / "manifest.json").exists()


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_simulate_blowup_exits_2(runner, tmp_path):
    # huge dt makes the linear drift update expansive: |1 - 2 dt| >> 1
    cfg = sim_config(tmp_path, n=64, dt=50.0, t_end=10000.0,
                     init={"kind": "gaussian", "cov": [100.0, 100.0, 100.0]})
    out = tmp_path / "out"
    result = runner.invoke(main, ["simulate", "--config", str(cfg), "--out", str(out)])
    assert result.exit_code == 2
    assert not (out / "manifest.json").exists()
    assert not (out / "snapshot.csv").exists()


def test_simulate_byte_identical_reruns(runner, tmp_path):
    cfg = sim_config(tmp_path)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert runner.invoke(main, ["simulate", "--config", str(cfg),
                                "--out", str(out1)]).exit_code == 0
    assert runner.invoke(main, ["simulate", "--config", str(cfg),
                                "--out", str(out2)]).exit_code == 0
    for name in ("snapshot.csv", "moments.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    m1 = json.loads((out1 / "manifest.json").read_text())
    m2 = json.loads((out2 / "manifest.json").read_text())
    assert m1["outputs"] == m2["outputs"]  # identical checksums


def test_simulate_seed_override(runner, tmp_path):
    cfg = sim_config(tmp_path)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    runner.invoke(main, ["simulate", "--config", str(cfg), "--out", str(out1)])
    runner.invoke(main, ["simulate", "--config", str(cfg), "--out", str(out2),
                         "--seed", "123"])
    assert (out1 / "snapshot.csv").read_bytes() != (out2 / "snapshot.csv").read_bytes()
    assert json.loads((out2 / "manifest.json").read_text())["seed"] == 123


def test_transport_identical_csvs(runner, tmp_path):
    pts = np.random.default_rng(0).normal(size=(10, 2))
    for name in ("mu.csv", "nu.csv"):
        np.savetxt(tmp_path / name, pts, delimiter=",")
    out = tmp_path / "out"
    result = runner.invoke(main, ["transport", "--mu", str(tmp_path / "mu.csv"),
                                  "--nu", str(tmp_path / "nu.csv"),
                                  "--out", str(out)])
    assert result.exit_code == 0, result.output
    report = json.loads((out / "transport_report.json").read_text())
    assert report["w2sq"] == pytest.approx(0.0, abs=1e-15)
    assert report["cyclically_monotone"] == "monotone"
    plan_lines = (out / "plan.csv").read_text().strip().splitlines()
    assert plan_lines[0] == "src,dst,mass"
    assert len(plan_lines) == 11


def test_transport_accepts_snapshot_csv(runner, tmp_path):
    rng = np.random.default_rng(1)
    snap = tmp_path / "snap.csv"
    write_snapshot_csv(snap, [(0.0, rng.normal(size=(6, 2))),
                              (0.5, rng.normal(size=(6, 2)))])
    plain = tmp_path / "plain.csv"
    np.savetxt(plain, rng.normal(size=(6, 2)), delimiter=",")
    out = tmp_path / "out"
    result = runner.invoke(main, ["transport", "--mu", str(snap),
                                  "--nu", str(plain), "--out", str(out)])
    assert result.exit_code == 0, result.output
    report = json.loads((out / "transport_report.json").read_text())
    assert report["w2sq"] > 0


def test_transport_bad_input_exits_1(runner, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("not,numbers\nat,all\n")
    ok = tmp_path / "ok.csv"
    np.savetxt(ok, np.zeros((2, 2)), delimiter=",")
    out = tmp_path / "out"
    result = runner.invoke(main, ["transport", "--mu", str(bad),
                                  "--nu", str(ok), "--out", str(out)])
    assert result.exit_code == 1
    assert not (out / "manifest.json").exists()


def test_diagnose_frozen_run(runner, tmp_path):
    x = np.random.default_rng(2).normal(size=(5, 3))
    snap = tmp_path / "snap.csv"
    write_snapshot_csv(snap, [(0.0, x), (0.1, x), (0.2, x), (0.3, x), (0.4, x)])
    out = tmp_path / "out"
    result = runner.invoke(main, ["diagnose", "--snapshot", str(snap),
                                  "--out", str(out)])
    assert result.exit_code == 0, result.output
    report = json.loads((out / "diagnose_report.json").read_text())
    assert report["mean_drift"] == 0.0
    assert report["energy_drift"] == 0.0
    # constant anisotropy: fit still defined, rate ~ 0
    if report["anisotropy_fit"] is not None:
        assert abs(report["anisotropy_fit"]["rate"]) < 1e-9


def test_rates_d1_gaussian(runner, tmp_path):
    cfg = tmp_path / "rates.json"
    cfg.write_text(json.dumps({
        "kind": "empirical_rate",
        "ns": [32, 64, 128, 256],
        "replicas": 20,
        "seed": 4,
        "target": {"kind": "gaussian", "dim": 1},
    }))
    out = tmp_path / "out"
    result = runner.invoke(main, ["rates", "--config", str(cfg), "--out", str(out)])
    assert result.exit_code == 0, result.output
    report = json.loads((out / "rate_report.json").read_text())
    assert report["passed_bound"] is True
    assert report["slope"] < -0.4
    lines = (out / "replicas.csv").read_text().strip().splitlines()
    assert lines[0] == "n,replica,w2sq"
    assert len(lines) == 1 + 4 * 20


def test_rates_rejects_bad_spec(runner, tmp_path):
    cfg = tmp_path / "rates.json"
    cfg.write_text(json.dumps({"kind": "empirical_rate", "ns": [8], "replicas": 20}))
    out = tmp_path / "out"
    result = runner.invoke(main, ["rates", "--config", str(cfg), "--out", str(out)])
    assert result.exit_code == 1
    assert not (out / "rate_report.json").exists()
