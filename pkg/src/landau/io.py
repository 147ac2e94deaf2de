"""CSV/JSON artifact emission and run manifests.

All bulk arrays go to CSV with shortest-roundtrip float formatting, so
reruns with the same config and seed reproduce files byte for byte; the
manifest (written last) records checksums, timestamps, and the config echo.
"""

import csv
import hashlib
import json
import subprocess
import time
from pathlib import Path

import numpy as np

from . import __version__


def _fmt(value):
    return repr(float(value))


def write_snapshot_csv(path, snapshots):
    """snapshots: iterable of (t, positions) pairs."""
    snapshots = list(snapshots)
    d = snapshots[0][1].shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "particle"] + [f"x{j}" for j in range(d)])
        for t, positions in snapshots:
            for i, row in enumerate(positions):
                writer.writerow([_fmt(t), i] + [_fmt(v) for v in row])


def read_snapshot_csv(path):
    """Returns a list of (t, positions) pairs in file order."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        d = len(header) - 2
        groups = {}
        order = []
        for row in reader:
            t = float(row[0])
            if t not in groups:
                groups[t] = []
                order.append(t)
            groups[t].append([float(v) for v in row[2:]])
    return [(t, np.asarray(groups[t])) for t in order]


def write_moment_csv(path, report):
    d = len(report.mean[0])
    header = (
        ["t"]
        + [f"mean_{j}" for j in range(d)]
        + ["energy"]
        + [f"c_{a}{b}" for a in range(d) for b in range(d)]
        + ["aniso"]
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for s in range(len(report)):
            row = [_fmt(report.times[s])]
            row += [_fmt(v) for v in report.mean[s]]
            row.append(_fmt(report.energy[s]))
            row += [_fmt(v) for v in np.asarray(report.covariance[s]).ravel()]
            row.append(_fmt(report.anisotropy[s]))
            writer.writerow(row)


def write_plan_csv(path, plan):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["src", "dst", "mass"])
        for s, t, m in zip(plan.src, plan.dst, plan.mass):
            writer.writerow([int(s), int(t), _fmt(m)])


def write_replica_csv(path, ns, per_replica):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "replica", "w2sq"])
        for n, vals in zip(ns, per_replica):
            for r, v in enumerate(vals):
                writer.writerow([int(n), r, _fmt(v)])


def read_measure_csv(path):
    """Load the final snapshot of a snapshot CSV as a point cloud."""
    snapshots = read_snapshot_csv(path)
    return snapshots[-1][1]


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _git_describe():
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=5,
        )
        return out.stdout.strip() or None
    except Exception:
        return None


class RunManifest:
    """Collects run metadata; ``write`` must be the last file emission."""

    def __init__(self, config_echo, seed):
        self.data = {
            "config": config_echo,
            "seed": int(seed) if seed is not None else None,
            "version": __version__,
            "git": _git_describe(),
            "started": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        }
        self._t0 = time.monotonic()
        self.outputs = []

    def add(self, path):
        self.outputs.append(Path(path))

    def write(self, path, extra=None):
        self.data["finished"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
        self.data["wall_seconds"] = round(time.monotonic() - self._t0, 3)
        self.data["outputs"] = [
            {"file": p.name, "sha256": _sha256(p)} for p in self.outputs
        ]
        if extra:
            self.data.update(extra)
        with open(path, "w") as fh:
            json.dump(self.data, fh, indent=2, sort_keys=True)
            fh.write("\n")
