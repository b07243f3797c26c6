"""Numerical laboratory for the first gap eigenvalue of Dirac-Coulomb operators
generated by finite positive charge distributions."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    DiracLabError,
    GapBottomError,
    IntegrationError,
    MeasureError,
    NoBoundStateError,
    ScaleError,
    SingularPointError,
    SolverError,
)
from .measures import (  # noqa: E402
    ChargeDistribution,
    GaussianCharge,
    PointCharge,
    SignedChargeDistribution,
    UniformBall,
    load_measure,
    nu_max,
    potential,
    radial_potential,
    scale_mass,
    total_mass,
    translate,
)
