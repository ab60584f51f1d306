"""Basket and spread call pricing under multivariate KoBoL factor models.

The density of the log-returns is periodized on a cube, expanded in a
truncated Fourier series over an anisotropic frequency ball, and integrated
against the closed-form payoff transform.  Each stage reports a certified
error contribution.
"""

from .errors import (
    AccuracyError,
    CalibrationError,
    DomainError,
    FeasibilityError,
    GeometryError,
    KobolError,
    ParameterError,
    PoleError,
    ResourceError,
    UnsupportedRegimeError,
)
from .kobol import (
    AnalyticTube,
    FactorModel,
    KobolParams,
    analytic_tube,
    calibrate_drift,
    char_fn,
    modulus_envelope,
    psi,
    tau,
)
from .lattice import eval_density, lattice_density, majorant_MT, select_period
from .payoff import DampingVector, find_damping, log_gamma, payoff_transform
from .pricer import (
    ErrorBudget,
    MarketSpec,
    PriceQuote,
    PricingControl,
    convergence_study,
    error_budget,
    price_basket_call,
)
from .sparse import IndexSet, build_ball, cardinality_estimate, enumerate_indices, radius_for_budget

__version__ = "0.1.0"
