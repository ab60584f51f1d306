"""Basket/spread call payoff in Fourier space.

The damped payoff ``S(y) e^{<y, eps>}`` with ``S(y) = (e^{y_1} - sum_{j>=2} e^{y_j} - 1)_+``
has the transform

    FS(u) = Gamma(i(u_1 + sum_m u_m) - 1) prod_{m>=2} Gamma(-i u_m) / Gamma(i u_1 + 1),

for ``Im u = eps`` admissible, i.e. ``eps_m > 0`` (m >= 2) and
``eps_1 < -1 - sum_m eps_m``.  Everything is computed in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, FeasibilityError, ParameterError, PoleError
from .kobol import AnalyticTube

__all__ = [
    "log_gamma",
    "DampingVector",
    "payoff_transform",
    "find_damping",
    "payoff_l1_constant",
    "LANCZOS_COEFFS",
]

# Lanczos approximation, g = 7, nine terms
LANCZOS_G = 7.0
LANCZOS_COEFFS = np.array(
    [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ]
)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_LOG_PI = math.log(math.pi)


def _lanczos(z: np.ndarray) -> np.ndarray:
    # log Gamma(z) for Re z >= 0.5
    zm = z - 1.0
    c = LANCZOS_COEFFS
    acc = np.full(zm.shape, c[0], dtype=complex)
    for k in range(1, c.size):
        acc = acc + c[k] / (zm + k)
    t = zm + LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (zm + 0.5) * np.log(t) - t + np.log(acc)


def _log_sin_pi(z: np.ndarray) -> np.ndarray:
    # log sin(pi z) without overflow for large |Im z|
    out = np.empty(z.shape, dtype=complex)
    up = z.imag >= 0
    zu = np.where(up, z, np.conj(z))
    # sin(pi z) = (i/2) e^{-i pi z} (1 - e^{2 i pi z}), |e^{2 i pi z}| <= 1 for Im z >= 0
    val = -1j * np.pi * zu + np.log(0.5j) + np.log1p(-np.exp(2j * np.pi * zu))
    out[up] = val[up]
    out[~up] = np.conj(val[~up])
    return out


def log_gamma(z):
    """Complex ``log Gamma(z)``; raises :class:`PoleError` at nonpositive integers.

    Lanczos for ``Re z >= 0.5``, reflection otherwise.  Imaginary parts may
    differ from the continuous branch by multiples of ``2 pi`` in the
    reflected half plane; ``exp(log_gamma(z))`` is unaffected.
    """
    arr = np.asarray(z, dtype=complex)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    near = np.abs(arr - np.round(arr.real)) <= 1e-12
    if np.any(near & (np.round(arr.real) <= 0)):
        bad = arr[near & (np.round(arr.real) <= 0)][0]
        raise PoleError(f"Gamma has a pole at z={bad}")
    out = np.empty(arr.shape, dtype=complex)
    right = arr.real >= 0.5
    if np.any(right):
        out[right] = _lanczos(arr[right])
    if np.any(~right):
        zl = arr[~right]
        out[~right] = _LOG_PI - _log_sin_pi(zl) - _lanczos(1.0 - zl)
    return complex(out[0]) if scalar else out


def _admissible(eps: np.ndarray) -> str | None:
    n = eps.size
    if n > 1 and np.any(eps[1:] <= 0.0):
        return "eps_m > 0 for the short legs m >= 2"
    if not eps[0] < -1.0 - float(np.sum(eps[1:])):
        return "eps_1 < -1 - sum_{m>=2} eps_m"
    return None


@dataclass(frozen=True)
class DampingVector:
    """Contour shift ``eps``; admissibility is checked on construction."""

    eps: tuple[float, ...]

    def __post_init__(self) -> None:
        e = tuple(float(x) for x in self.eps)
        if not e or not all(math.isfinite(x) for x in e):
            raise ParameterError("damping vector must be a nonempty finite real list")
        object.__setattr__(self, "eps", e)
        why = _admissible(np.asarray(e))
        if why:
            raise DomainError(f"damping {e} violates {why}")

    @property
    def n(self) -> int:
        return len(self.eps)

    def array(self) -> np.ndarray:
        return np.asarray(self.eps, dtype=float)

    def in_tube(self, tube: AnalyticTube) -> bool:
        return tube.contains(self.array(), strict=True)

    def check_tube(self, tube: AnalyticTube) -> None:
        if not self.in_tube(tube):
            raise FeasibilityError(
                f"damping {self.eps} is not strictly inside the tube ({tube.a_minus:.6g}, {tube.a_plus:.6g})"
            )


def payoff_transform(u) -> np.ndarray | complex:
    """Closed-form ``FS(u)``; ``u`` has trailing dimension ``n``."""
    arr = np.asarray(u, dtype=complex)
    scalar = arr.ndim == 1
    arr = np.atleast_2d(arr)
    eps = arr.imag
    n = arr.shape[-1]
    if n > 1 and np.any(eps[..., 1:] <= 0.0):
        raise DomainError("payoff_transform: need Im u_m > 0 for m >= 2")
    if np.any(eps[..., 0] >= -1.0 - eps[..., 1:].sum(axis=-1)):
        raise DomainError("payoff_transform: need Im u_1 < -1 - sum_{m>=2} Im u_m")
    total = arr.sum(axis=-1)
    logv = log_gamma(1j * total - 1.0) - log_gamma(1j * arr[..., 0] + 1.0)
    for m in range(1, n):
        logv = logv + log_gamma(-1j * arr[..., m])
    out = np.exp(logv)
    return complex(out[0]) if scalar else out


def payoff_l1_constant(eps: DampingVector) -> float:
    """``L_eps``, the L1 norm of the damped payoff, equal to ``FS(i eps)``."""
    e = eps.array()
    logv = log_gamma(-1.0 - e.sum()) - log_gamma(1.0 - e[0])
    for m in range(1, e.size):
        logv += log_gamma(e[m])
    return float(math.exp(logv.real))


def find_damping(tube: AnalyticTube, n: int, short_eps: float = 0.25, rule: str = "default") -> DampingVector:
    """Admissible damping strictly inside the tube.

    ``rule="default"``: short legs get ``min(short_eps, a_plus/4)`` and the
    long leg sits midway between ``a_minus`` and ``-1 - sum eps_m``.

    ``rule="balanced"``: the short-leg damping ``t``, the long-leg payoff decay
    ``-1 - sum eps`` and the distance ``eps_1 - a_minus`` are made equal,
    ``t = (-1 - a_minus)/(n + 1)`` (capped at ``a_plus/2``).  These three rates
    govern the periodization tails, so equalizing them minimizes the period
    needed for a given accuracy.  For n = 1 both rules coincide.
    """
    if n < 1:
        raise ParameterError("n must be >= 1")
    if tube.a_minus >= -1.0:
        raise FeasibilityError(
            f"tube lower edge a_minus={tube.a_minus:.6g} >= -1: the long-leg damping needs "
            "eps_1 < -1 inside the analyticity strip (lambda_minus too shallow)"
        )
    if rule == "default":
        short = min(short_eps, tube.a_plus / 4.0)
    elif rule == "balanced":
        short = min((-1.0 - tube.a_minus) / (n + 1), tube.a_plus / 2.0)
    else:
        raise ParameterError(f"unknown damping rule {rule!r}")
    limit = -1.0 - short * (n - 1)
    if tube.a_minus >= limit:
        raise FeasibilityError(
            f"tube lower edge a_minus={tube.a_minus:.6g} leaves no room below -1 - sum eps_m = {limit:.6g}"
        )
    eps = DampingVector((0.5 * (tube.a_minus + limit),) + (short,) * (n - 1))
    eps.check_tube(tube)
    return eps
