"""Moment functionals, conservation drifts, and relaxation-rate fits.

For the Maxwell model the second-moment dynamics of the limiting law close
into the linear ODE

    dC/dt = 2 tr(C) I - 2 d C

(Ito's formula applied to X X^T with a(v) = |v|^2 I - v v^T and
b(v) = -(d-1) v, for a centered law).  Its trace is constant (energy
conservation) and the traceless part decays at rate exactly 2d, which is the
target for the anisotropy fit.  ``relaxation_rate`` ships that derived
constant; the finite-difference validation lives in the test suite.
"""

from dataclasses import dataclass

import numpy as np


class FitDomainError(ValueError):
    """The requested fit window contains unusable (nonpositive) data."""


def relaxation_rate(d):
    """Decay rate of the covariance anisotropy ||C - (trC/d) I||_F: -2d."""
    return -2.0 * d


def moments(state):
    """Empirical mean, energy (mean |x|^2), and covariance of a state.

    The covariance divides by n (empirical-measure convention), not n-1.
    """
    x = state.positions if hasattr(state, "positions") else np.asarray(state)
    n = x.shape[0]
    mean = x.mean(axis=0)
    energy = float(np.mean(np.sum(x * x, axis=1)))
    centered = x - mean
    cov = centered.T @ centered / n
    return mean, energy, cov


def anisotropy_norm(cov):
    """Frobenius norm of the traceless part of a covariance matrix."""
    d = cov.shape[0]
    return float(np.linalg.norm(cov - (np.trace(cov) / d) * np.eye(d)))


@dataclass
class MomentReport:
    times: list
    mean: list        # d-vectors
    energy: list      # mean |x|^2 per snapshot
    covariance: list  # d x d matrices
    anisotropy: list  # ||C - (trC/d) I||_F

    def __len__(self):
        return len(self.times)

    @classmethod
    def empty(cls):
        return cls(times=[], mean=[], energy=[], covariance=[], anisotropy=[])

    def record(self, state):
        m, e, c = moments(state)
        self.times.append(float(state.time))
        self.mean.append(m)
        self.energy.append(e)
        self.covariance.append(c)
        self.anisotropy.append(anisotropy_norm(c))

    def __call__(self, state):
        # Usable directly as a simulate() observer.
        self.record(state)


@dataclass
class DecayFit:
    rate: float
    intercept: float
    r_squared: float
    window: tuple


def fit_anisotropy_decay(report, window=None):
    """Least-squares slope of log anisotropy vs t over the window (t_lo, t_hi)."""
    t = np.asarray(report.times)
    a = np.asarray(report.anisotropy)
    if window is None:
        window = (float(t[0]), float(t[-1]))
    t_lo, t_hi = window
    if not t_lo < t_hi:
        raise FitDomainError(f"window must satisfy t_lo < t_hi, got {window}")
    mask = (t >= t_lo - 1e-12) & (t <= t_hi + 1e-12)
    if mask.sum() < 5:
        raise FitDomainError(f"need >= 5 samples in window, got {int(mask.sum())}")
    if np.any(a[mask] <= 0):
        raise FitDomainError("anisotropy not strictly positive on the window")
    ts, ys = t[mask], np.log(a[mask])
    slope, intercept = np.polyfit(ts, ys, 1)
    resid = ys - (slope * ts + intercept)
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(rate=float(slope), intercept=float(intercept),
                    r_squared=r2, window=(float(t_lo), float(t_hi)))


def conservation_drift(report):
    """Max deviation of mean and (relative) energy from their initial values.

    Returns (mean_drift, energy_drift).  When energy(0) = 0 the energy drift
    is reported in absolute terms.
    """
    if len(report) == 0:
        raise ValueError("empty moment report")
    means = np.asarray(report.mean)
    energies = np.asarray(report.energy)
    mean_drift = float(np.max(np.linalg.norm(means - means[0], axis=1)))
    e0 = energies[0]
    dev = np.max(np.abs(energies - e0))
    energy_drift = float(dev / e0) if e0 > 0 else float(dev)
    return mean_drift, energy_drift


def average_reports(reports):
    """Average moment trajectories across replicas (shared snapshot times)."""
    times = reports[0].times
    for r in reports[1:]:
        if not np.allclose(r.times, times):
            raise ValueError("replica reports have mismatched snapshot times")
    mean = [np.mean([r.mean[s] for r in reports], axis=0) for s in range(len(times))]
    energy = [float(np.mean([r.energy[s] for r in reports])) for s in range(len(times))]
    cov = [np.mean([r.covariance[s] for r in reports], axis=0) for s in range(len(times))]
    return MomentReport(
        times=list(times), mean=mean, energy=energy, covariance=cov,
        anisotropy=[anisotropy_norm(c) for c in cov],
    )
