"""Euler-Maruyama simulation of the n-particle system.

Each particle i is driven by its own row of n Brownian motions:

    X_i <- X_i + (1/sqrt(n)) sum_k sigma(X_i - X_k) dB_ik
               + (dt/n)      sum_k b(X_i - X_k)

with dB_ik a d-vector of independent N(0, dt) deviates keyed by
(seed, step, i, k).  The k = i term is kept; it vanishes for the Maxwell
model since sigma(0) = 0 and b(0) = 0.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._kernels import KERNELS
from .coefficients import CoefficientModel, ConfigurationError, model_from_config
from .noise import NoiseStream

# Snapshot storage guard: total floats kept by a full-trajectory observer.
DEFAULT_MEMORY_BUDGET = 2 * 10**8


class IntegratorBlowupError(RuntimeError):
    """Non-finite state produced by the integrator."""

    def __init__(self, step_index, time):
        super().__init__(f"non-finite state at step {step_index} (t={time:.6g})")
        self.step_index = step_index
        self.time = time


class ObserverError(RuntimeError):
    """An observer callback raised; carries the failing step."""

    def __init__(self, step_index, cause):
        super().__init__(f"observer failed at step {step_index}: {cause!r}")
        self.step_index = step_index


@dataclass
class ParticleState:
    positions: np.ndarray  # (n, d)
    time: float = 0.0
    step_index: int = 0

    @property
    def n(self):
        return self.positions.shape[0]

    @property
    def dim(self):
        return self.positions.shape[1]


@dataclass
class SimConfig:
    n: int
    d: int
    dt: float
    t_end: float
    seed: int
    model: CoefficientModel
    init: dict = field(default_factory=lambda: {"kind": "gaussian"})
    snapshot_stride: int = 1
    threads: int = 0  # 0: LANDAU_THREADS env or serial
    memory_budget: int = DEFAULT_MEMORY_BUDGET

    def __post_init__(self):
        if self.n < 1:
            raise ConfigurationError(f"n must be >= 1, got {self.n}")
        if self.dt <= 0:
            raise ConfigurationError(f"dt must be > 0, got {self.dt}")
        if self.t_end < 0:
            raise ConfigurationError(f"t_end must be >= 0, got {self.t_end}")
        if self.t_end > 0 and self.dt > self.t_end:
            raise ConfigurationError(f"dt={self.dt} exceeds t_end={self.t_end}")
        if self.model.dim != self.d:
            raise ConfigurationError(
                f"model dimension {self.model.dim} != config dim {self.d}")
        if self.snapshot_stride < 1:
            raise ConfigurationError("snapshot_stride must be >= 1")
        n_snap = self.num_steps() // self.snapshot_stride + 2
        if self.n * self.d * n_snap > self.memory_budget:
            raise ConfigurationError(
                f"snapshot storage {self.n * self.d * n_snap} floats exceeds "
                f"budget {self.memory_budget}; raise snapshot_stride")

    def num_steps(self):
        if self.t_end == 0:
            return 0
        full = int(np.floor(self.t_end / self.dt + 1e-9))
        rem = self.t_end - full * self.dt
        return full + (1 if rem > 1e-9 * self.dt else 0)

    def step_sizes(self):
        """Per-step dt values (the last step may be partial)."""
        full = int(np.floor(self.t_end / self.dt + 1e-9))
        rem = self.t_end - full * self.dt
        sizes = [self.dt] * full
        if rem > 1e-9 * self.dt:
            sizes.append(rem)
        return sizes


def config_from_dict(cfg):
    """Build a SimConfig from the JSON config mapping."""
    model = model_from_config(cfg.get("model", {"model": "maxwell", "dim": cfg["dim"]}))
    return SimConfig(
        n=int(cfg["n"]),
        d=int(cfg["dim"]),
        dt=float(cfg["dt"]),
        t_end=float(cfg["t_end"]),
        seed=int(cfg["seed"]),
        model=model,
        init=cfg.get("init", {"kind": "gaussian"}),
        snapshot_stride=int(cfg.get("snapshot_stride", 1)),
        threads=int(cfg.get("threads", 0)),
    )


def sample_initial(init, n, d, seed):
    """n i.i.d. draws from the initial law.

    init: {"kind": "gaussian", "mean": [...], "cov": [[...]]} with mean
    defaulting to 0 and cov to I (a vector cov is read as a diagonal), or
    {"kind": "point_mass", "at": [...]}.
    """
    kind = init.get("kind", "gaussian")
    if kind == "point_mass":
        at = np.asarray(init.get("at", np.zeros(d)), dtype=np.float64)
        if at.shape != (d,):
            raise ConfigurationError(f"point_mass location has shape {at.shape}, want ({d},)")
        positions = np.tile(at, (n, 1))
    elif kind == "gaussian":
        mean = np.asarray(init.get("mean", np.zeros(d)), dtype=np.float64)
        cov = np.asarray(init.get("cov", np.eye(d)), dtype=np.float64)
        if cov.ndim == 1:
            cov = np.diag(cov)
        if mean.shape != (d,) or cov.shape != (d, d):
            raise ConfigurationError("gaussian init mean/cov shape mismatch")
        chol = np.linalg.cholesky(cov + 1e-15 * np.eye(d))
        rng = np.random.default_rng(np.random.SeedSequence(entropy=(int(seed), 0x1A17)))
        positions = mean + rng.standard_normal((n, d)) @ chol.T
    else:
        raise ConfigurationError(f"unknown initial law kind {kind!r}")
    return ParticleState(positions=positions, time=0.0, step_index=0)


def _resolve_threads(threads):
    if threads > 0:
        return threads
    env = os.environ.get("LANDAU_THREADS", "")
    if env.strip():
        return max(1, int(env))
    return 1


def _step_python(state, model, noise, dt):
    """Reference path for arbitrary (non-compiled) models; O(n^2) Python."""
    x = state.positions
    n, d = x.shape
    out = np.empty_like(x)
    root_dt_over_n = np.sqrt(dt) / np.sqrt(n)
    dt_over_n = dt / n
    for i in range(n):
        diff = np.zeros(d)
        dr = np.zeros(d)
        for k in range(n):
            v = x[i] - x[k]
            z = noise.normals(state.step_index, i, k, d)
            diff += model.sigma(v) @ z
            dr += model.drift(v)
        out[i] = x[i] + root_dt_over_n * diff + dt_over_n * dr
    return out


def step(state, cfg, noise, dt=None):
    """Advance the system by one Euler-Maruyama step of size dt (default cfg.dt)."""
    if dt is None:
        dt = cfg.dt
    kernel = KERNELS.get(cfg.model.kernel_id)
    if kernel is None or not noise.is_plain:
        out = _step_python(state, cfg.model, noise, dt)
    else:
        x = state.positions
        out = np.empty_like(x)
        threads = _resolve_threads(cfg.threads)
        n = x.shape[0]
        if threads <= 1 or n < 2 * threads:
            kernel(x, out, 0, n, dt, noise.key0, noise.key1, state.step_index)
        else:
            bounds = np.linspace(0, n, threads + 1).astype(int)
            with ThreadPoolExecutor(max_workers=threads) as pool:
                futures = [
                    pool.submit(kernel, x, out, bounds[t], bounds[t + 1],
                                dt, noise.key0, noise.key1, state.step_index)
                    for t in range(threads)
                ]
                for f in futures:
                    f.result()
    if not np.all(np.isfinite(out)):
        raise IntegratorBlowupError(state.step_index, state.time)
    return ParticleState(positions=out, time=state.time + dt,
                         step_index=state.step_index + 1)


def simulate(cfg, observers=(), noise=None, initial=None):
    """Run the system from t=0 to t_end, invoking observers at the snapshot stride.

    Observers are called at step 0, every ``snapshot_stride`` steps, and at
    the final step.  Returns the final ParticleState; total Gaussian draws
    are n^2 * d * num_steps.
    """
    if noise is None:
        noise = NoiseStream(cfg.seed)
    state = initial if initial is not None else sample_initial(cfg.init, cfg.n, cfg.d, cfg.seed)
    sizes = cfg.step_sizes()
    num_steps = len(sizes)

    def notify(st):
        for obs in observers:
            try:
                obs(st)
            except Exception as exc:
                raise ObserverError(st.step_index, exc) from exc

    notify(state)
    for m, h in enumerate(sizes):
        state = step(state, cfg, noise, dt=h)
        if state.step_index % cfg.snapshot_stride == 0 or state.step_index == num_steps:
            notify(state)
    return state
