"""Exception hierarchy.

Each pipeline stage raises a distinct subclass so callers (and the CLI exit
codes) can tell parse problems from infeasible models, resource limits and
numerical failures.
"""


class KobolError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ParameterError(KobolError, ValueError):
    """Invalid parameter value (parse/validation level)."""

    exit_code = 1


class DomainError(KobolError, ValueError):
    """Argument outside the analytic strip/tube or the evaluation cube."""

    exit_code = 2


class UnsupportedRegimeError(ParameterError):
    """Exponent order nu not supported by the requested operation."""


class CalibrationError(KobolError):
    """Martingale drift cannot be solved for (strip too narrow)."""

    exit_code = 2


class FeasibilityError(KobolError):
    """No admissible damping vector inside the analytic tube."""

    exit_code = 2


class GeometryError(KobolError):
    """Periodization cube does not cover the log-moneyness shift."""

    exit_code = 2


class PoleError(KobolError, ValueError):
    """Gamma function evaluated at a pole."""

    exit_code = 2


class ResourceError(KobolError):
    """Requested index set would exceed the cardinality cap."""

    exit_code = 3


class AccuracyError(KobolError):
    """Quadrature or summation failed to reach its tolerance."""

    exit_code = 4
