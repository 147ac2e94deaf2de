"""Command-line front end.

Subcommands: simulate, rates, transport, diagnose.  Exit codes are a stable
contract: 0 success, 1 config/input error, 2 integrator blowup.  Each command
emits its data files plus a manifest (written last, with checksums); partial
outputs are deleted on failure.
"""

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import io
from .coefficients import ConfigurationError
from .diagnostics import (
    MomentReport,
    anisotropy_norm,
    conservation_drift,
    fit_anisotropy_decay,
    moments,
)
from .experiments import (
    ExperimentSpec,
    empirical_rate,
    self_convergence,
    sigma_invariance,
)
from .particles import IntegratorBlowupError, config_from_dict, simulate
from .transport import EmpiricalMeasure, is_cyclically_monotone, w2_general


class _Emitter:
    """Tracks emitted files so failures can clean up partial output."""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.files = []

    def path(self, name):
        p = self.out_dir / name
        self.files.append(p)
        return p

    def cleanup(self):
        for p in self.files:
            p.unlink(missing_ok=True)


def _load_config(path, seed_override):
    with open(path) as fh:
        cfg = json.load(fh)
    if seed_override is not None:
        cfg["seed"] = int(seed_override)
    return cfg


def _fail(emitter, message, code):
    emitter.cleanup()
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
def main():
    """Landau particle simulation and Wasserstein-2 experiment tool."""


@main.command("simulate")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=None)
def simulate_cmd(config_path, out_dir, seed):
    """Run the particle system; emit snapshot CSV, moment CSV, manifest."""
    emitter = _Emitter(out_dir)
    try:
        cfg_map = _load_config(config_path, seed)
        cfg = config_from_dict(cfg_map)
    except (ConfigurationError, ValueError, KeyError, json.JSONDecodeError) as exc:
        _fail(emitter, str(exc), 1)
    manifest = io.RunManifest(cfg_map, cfg.seed)
    report = MomentReport.empty()
    snapshots = []
    try:
        simulate(cfg, observers=(report, lambda st: snapshots.append(
            (st.time, st.positions.copy()))))
    except IntegratorBlowupError as exc:
        _fail(emitter, str(exc), 2)
    snap_path = emitter.path("snapshot.csv")
    io.write_snapshot_csv(snap_path, snapshots)
    manifest.add(snap_path)
    mom_path = emitter.path("moments.csv")
    io.write_moment_csv(mom_path, report)
    manifest.add(mom_path)
    manifest.write(emitter.path("manifest.json"))
    sys.exit(0)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=None)
def rates(config_path, out_dir, seed):
    """Run a rate experiment (empirical_rate, self_convergence, sigma_invariance)."""
    emitter = _Emitter(out_dir)
    try:
        cfg = _load_config(config_path, seed)
        spec = ExperimentSpec(
            kind=cfg.get("kind", "empirical_rate"),
            ns=cfg.get("ns", [32, 64, 128, 256]),
            replicas=cfg.get("replicas", 100),
            seed=cfg.get("seed", 0),
            target=cfg.get("target", {"kind": "gaussian", "dim": 1}),
            sim=cfg.get("sim"),
            reference_size=cfg.get("reference_size", 0),
            time_integral=cfg.get("time_integral", False),
        )
        if spec.kind == "empirical_rate":
            report = empirical_rate(spec)
        elif spec.kind == "self_convergence":
            report = self_convergence(spec)
        elif spec.kind == "sigma_invariance":
            report = sigma_invariance(spec)
        else:
            raise ConfigurationError(f"unknown experiment kind {spec.kind!r}")
    except (ConfigurationError, ValueError, KeyError, json.JSONDecodeError) as exc:
        _fail(emitter, str(exc), 1)
    except IntegratorBlowupError as exc:
        _fail(emitter, str(exc), 2)
    manifest = io.RunManifest(cfg, spec.seed)
    rep_path = emitter.path("rate_report.json")
    if spec.kind == "sigma_invariance":
        payload = {
            "times": [float(t) for t in report.times],
            "max_energy_z": report.max_energy_z,
            "max_covariance_z": report.max_covariance_z,
            "terminal_w2sq": [float(v) for v in report.terminal_w2sq],
            "manifest": report.manifest,
        }
        with open(rep_path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    else:
        with open(rep_path, "w") as fh:
            json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        csv_path = emitter.path("replicas.csv")
        io.write_replica_csv(csv_path, report.ns, report.per_replica)
        manifest.add(csv_path)
    manifest.add(rep_path)
    manifest.write(emitter.path("manifest.json"))
    sys.exit(0)


def _read_measure(path):
    with open(path) as fh:
        header = fh.readline()
    if header.startswith("t,particle"):
        points = io.read_measure_csv(path)
    else:
        points = np.loadtxt(path, delimiter=",", ndmin=2)
    return EmpiricalMeasure(points)


@main.command()
@click.option("--mu", "mu_csv", required=True, type=click.Path(exists=True))
@click.option("--nu", "nu_csv", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
def transport(mu_csv, nu_csv, out_dir):
    """Exact W2 between two point-cloud CSVs, with optimality certificate."""
    emitter = _Emitter(out_dir)
    try:
        mu = _read_measure(mu_csv)
        nu = _read_measure(nu_csv)
        plan = w2_general(mu, nu)
        cert = is_cyclically_monotone(plan, mu, nu)
    except (ValueError, OSError) as exc:
        _fail(emitter, str(exc), 1)
    manifest = io.RunManifest({"mu": str(mu_csv), "nu": str(nu_csv)}, None)
    plan_path = emitter.path("plan.csv")
    io.write_plan_csv(plan_path, plan)
    manifest.add(plan_path)
    rep_path = emitter.path("transport_report.json")
    with open(rep_path, "w") as fh:
        json.dump({
            "w2sq": plan.cost,
            "w2": float(np.sqrt(plan.cost)),
            "support_size": len(plan.src),
            "solver": plan.meta.get("solver"),
            "cyclically_monotone": cert.status,
            "witness": cert.witness,
        }, fh, indent=2, sort_keys=True)
        fh.write("\n")
    manifest.add(rep_path)
    manifest.write(emitter.path("manifest.json"))
    sys.exit(0)


@main.command()
@click.option("--snapshot", "snapshot_csv", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
def diagnose(snapshot_csv, out_dir):
    """Moment trajectories, conservation drifts, and the anisotropy fit."""
    emitter = _Emitter(out_dir)
    try:
        snapshots = io.read_snapshot_csv(snapshot_csv)
        report = MomentReport.empty()
        for t, positions in snapshots:
            mean, energy, cov = moments(positions)
            report.times.append(t)
            report.mean.append(mean)
            report.energy.append(energy)
            report.covariance.append(cov)
            report.anisotropy.append(anisotropy_norm(cov))
        mean_drift, energy_drift = conservation_drift(report)
        try:
            fit = fit_anisotropy_decay(report)
            fit_payload = {
                "rate": fit.rate, "intercept": fit.intercept,
                "r_squared": fit.r_squared, "window": list(fit.window),
            }
        except ValueError:
            fit_payload = None
    except (ValueError, OSError) as exc:
        _fail(emitter, str(exc), 1)
    manifest = io.RunManifest({"snapshot": str(snapshot_csv)}, None)
    mom_path = emitter.path("moments.csv")
    io.write_moment_csv(mom_path, report)
    manifest.add(mom_path)
    rep_path = emitter.path("diagnose_report.json")
    with open(rep_path, "w") as fh:
        json.dump({
            "mean_drift": mean_drift,
            "energy_drift": energy_drift,
            "anisotropy_fit": fit_payload,
        }, fh, indent=2, sort_keys=True)
        fh.write("\n")
    manifest.add(rep_path)
    manifest.write(emitter.path("manifest.json"))
    sys.exit(0)


if __name__ == "__main__":
    main()
