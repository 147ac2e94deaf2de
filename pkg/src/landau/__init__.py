"""Landau-type interacting particle simulation and exact Wasserstein-2 tools."""

__version__ = "0.1.0"

from .coefficients import (  # noqa: F401
    CoefficientModel,
    ConfigurationError,
    ModelInvalidError,
    make_model,
    maxwell_a,
    maxwell_b,
    maxwell_sigma,
)
from .diagnostics import (  # noqa: F401
    DecayFit,
    MomentReport,
    conservation_drift,
    fit_anisotropy_decay,
    moments,
    relaxation_rate,
)
from .experiments import (  # noqa: F401
    ExperimentSpec,
    RateReport,
    empirical_rate,
    fit_loglog_slope,
    self_convergence,
    sigma_invariance,
)
from .noise import NoiseStream  # noqa: F401
from .particles import (  # noqa: F401
    IntegratorBlowupError,
    ParticleState,
    SimConfig,
    sample_initial,
    simulate,
    step,
)
from .transport import (  # noqa: F401
    EmpiricalMeasure,
    TransportPlan,
    brenier_map_1d,
    is_cyclically_monotone,
    w2_1d_exact,
    w2_assignment,
    w2_general,
)
