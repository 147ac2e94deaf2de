"""Diffusion/drift coefficient pairs for the interacting particle system.

The Maxwell-molecule pair is

    a(v)     = |v|^2 I - v v^T          (symmetric PSD, v in its kernel)
    b(v)     = div of the rows of a  =  -(d - 1) v

together with two explicit square roots of a: the projection form
|v| (I - vhat vhat^T), defined in every dimension, and the cross-product
matrix in d = 3.  Only sigma sigma^T enters the law of the dynamics, so the
two variants are interchangeable in distribution.
"""

from dataclasses import dataclass, field

import numpy as np


class ConfigurationError(ValueError):
    """Invalid model kind, variant, or dimension combination."""


class ModelInvalidError(ValueError):
    """A probe vector violated the sigma sigma^T symmetry/PSD contract."""

    def __init__(self, message, probe=None):
        super().__init__(message)
        self.probe = probe


@dataclass
class CoefficientModel:
    """A validated (sigma, drift) pair with metadata.

    ``kernel_id`` names a compiled fast path for the simulator ("" means the
    generic Python path).  ``flags`` carries advisory notes such as the d=1
    Maxwell degeneracy.
    """

    dim: int
    sigma: callable
    drift: callable
    name: str
    kernel_id: str = ""
    lipschitz_bound: float | None = None
    flags: tuple = field(default_factory=tuple)


def maxwell_a(v):
    """Maxwell-molecule diffusion matrix |v|^2 I - v v^T."""
    v = np.asarray(v, dtype=np.float64)
    d = v.shape[0]
    return np.dot(v, v) * np.eye(d) - np.outer(v, v)


def maxwell_b(v):
    """Row divergence of maxwell_a, in closed form -(d-1) v."""
    v = np.asarray(v, dtype=np.float64)
    return -(v.shape[0] - 1) * v


def maxwell_sigma(v, variant="projection"):
    """A square root of maxwell_a.

    projection: |v| (I - vhat vhat^T), any d, 0 at v = 0 by continuity.
    cross3:     the matrix K with K h = v x h, d = 3 only.
    """
    v = np.asarray(v, dtype=np.float64)
    d = v.shape[0]
    if variant == "projection":
        r2 = np.dot(v, v)
        if r2 == 0.0:
            return np.zeros((d, d))
        r = np.sqrt(r2)
        return r * np.eye(d) - np.outer(v, v) / r
    if variant == "cross3":
        if d != 3:
            raise ConfigurationError(f"cross3 sigma requires d=3, got d={d}")
        return np.array([
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ])
    raise ConfigurationError(f"unknown sigma variant {variant!r}")


def _probe_vectors(d, count=32, seed=12345):
    rng = np.random.default_rng(seed)
    probes = [np.zeros(d), np.ones(d)]
    probes.extend(rng.normal(size=(count, d)))
    return probes


def _validate(model, probes):
    for v in probes:
        s = model.sigma(v)
        a = s @ s.T
        if not np.all(np.isfinite(a)):
            raise ModelInvalidError(f"sigma(v) not finite at v={v!r}", probe=v)
        if np.max(np.abs(a - a.T)) > 1e-10:
            raise ModelInvalidError(f"sigma sigma^T not symmetric at v={v!r}", probe=v)
        if np.min(np.linalg.eigvalsh(0.5 * (a + a.T))) < -1e-12:
            raise ModelInvalidError(f"sigma sigma^T not PSD at v={v!r}", probe=v)
        bv = np.asarray(model.drift(v), dtype=np.float64)
        if bv.shape != (model.dim,) or not np.all(np.isfinite(bv)):
            raise ModelInvalidError(f"drift(v) invalid at v={v!r}", probe=v)


def make_model(kind, d, params=None):
    """Build and validate a CoefficientModel.

    kind: "maxwell" (params: sigma_variant = "projection" | "cross3"),
          "isotropic_ou" (sigma = I, b(v) = -v), or
          "custom" (params: sigma, drift callables, optional name).
    """
    params = dict(params or {})
    if d < 1:
        raise ConfigurationError(f"dimension must be >= 1, got {d}")

    if kind == "maxwell":
        variant = params.pop("sigma_variant", "projection")
        if variant == "cross3" and d != 3:
            raise ConfigurationError("cross3 sigma variant requires d=3")
        if variant not in ("projection", "cross3"):
            raise ConfigurationError(f"unknown sigma variant {variant!r}")
        flags = ()
        if d == 1:
            # a(v) = 0 identically in d=1: accepted, but nothing moves.
            flags = ("degenerate: zero dynamics",)
        model = CoefficientModel(
            dim=d,
            sigma=lambda v, _var=variant: maxwell_sigma(v, _var),
            drift=maxwell_b,
            name=f"maxwell-{variant}",
            kernel_id=f"maxwell_{variant}",
            lipschitz_bound=3.0,
            flags=flags,
        )
    elif kind == "isotropic_ou":
        model = CoefficientModel(
            dim=d,
            sigma=lambda v: np.eye(d),
            drift=lambda v: -np.asarray(v, dtype=np.float64),
            name="isotropic_ou",
            kernel_id="isotropic_ou",
            lipschitz_bound=1.0,
        )
    elif kind == "custom":
        try:
            sigma = params.pop("sigma")
            drift = params.pop("drift")
        except KeyError as exc:
            raise ConfigurationError("custom model needs sigma and drift callables") from exc
        model = CoefficientModel(
            dim=d, sigma=sigma, drift=drift,
            name=params.pop("name", "custom"), kernel_id="",
        )
    else:
        raise ConfigurationError(f"unknown model kind {kind!r}")

    if params:
        raise ConfigurationError(f"unused model params: {sorted(params)}")
    _validate(model, _probe_vectors(d))
    return model


def model_from_config(cfg):
    """Build a model from the JSON config mapping."""
    kind = cfg.get("model", "maxwell")
    d = int(cfg["dim"])
    params = {}
    if kind == "maxwell" and "sigma_variant" in cfg:
        params["sigma_variant"] = cfg["sigma_variant"]
    return make_model(kind, d, params)
