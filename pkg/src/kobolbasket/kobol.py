"""KoBoL characteristic exponents and the multivariate factor model.

Conventions
-----------
A KoBoL exponent ``psi`` satisfies ``E[exp(i xi X_T)] = exp(-T psi(xi))``.
It is analytic in the strip ``lambda_minus < Im xi < lambda_plus``.

The factor model for ``n`` log-returns is::

    Phi(v, T) = prod_s exp(-T psi_s(v_s)) * prod_m exp(-T phi_m(sum_k a[k, m] v_k))

with idiosyncratic exponents ``psi_s``, common-factor exponents ``phi_m`` and a
nonnegative loading matrix ``a`` (rows = assets, columns = factors).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import CalibrationError, DomainError, ParameterError, UnsupportedRegimeError

__all__ = [
    "KobolParams",
    "FactorModel",
    "AnalyticTube",
    "Envelope",
    "psi",
    "tau",
    "char_fn",
    "calibrate_drift",
    "analytic_tube",
    "decay_rate",
    "asymptotic_offset",
    "modulus_envelope",
]


def _is_power_regime(nu: float) -> bool:
    return 0.0 < nu < 1.0 or 1.0 < nu < 2.0


@dataclass(frozen=True)
class KobolParams:
    """One-dimensional KoBoL exponent parameters.

    ``c_plus`` weights the positive jumps (tempered by ``-lambda_minus``),
    ``c_minus`` the negative ones (tempered by ``lambda_plus``).  Zero
    intensities are accepted so that pure-drift exponents can be expressed.
    """

    nu: float
    c_plus: float
    c_minus: float
    lambda_plus: float
    lambda_minus: float
    mu: float = 0.0

    def __post_init__(self) -> None:
        for name in ("nu", "c_plus", "c_minus", "lambda_plus", "lambda_minus", "mu"):
            val = getattr(self, name)
            if not isinstance(val, (int, float)) or not math.isfinite(val):
                raise ParameterError(f"{name} must be a finite real, got {val!r}")
            object.__setattr__(self, name, float(val))
        if not 0.0 <= self.nu < 2.0:
            raise ParameterError(f"nu must lie in [0, 2), got {self.nu}")
        if self.c_plus < 0.0 or self.c_minus < 0.0:
            raise ParameterError("c_plus and c_minus must be nonnegative")
        if not self.lambda_minus < 0.0 < self.lambda_plus:
            raise ParameterError(
                f"need lambda_minus < 0 < lambda_plus, got ({self.lambda_minus}, {self.lambda_plus})"
            )

    @property
    def strip(self) -> tuple[float, float]:
        return self.lambda_minus, self.lambda_plus

    def with_mu(self, mu: float) -> "KobolParams":
        return replace(self, mu=float(mu))


def _log1p(w: np.ndarray) -> np.ndarray:
    # complex log(1 + w), accurate for small |w|
    x, y = np.real(w), np.imag(w)
    return 0.5 * np.log1p(x * (2.0 + x) + y * y) + 1j * np.arctan2(y, 1.0 + x)


def _expm1(z: np.ndarray) -> np.ndarray:
    # complex exp(z) - 1, accurate for small |z|
    x, y = np.real(z), np.imag(z)
    s = np.sin(0.5 * y)
    return np.expm1(x) * np.cos(y) - 2.0 * s * s + 1j * np.exp(x) * np.sin(y)


def _jump_part(p: KobolParams, xi: np.ndarray) -> np.ndarray:
    """psi without the drift term; principal branches throughout."""
    a0 = -p.lambda_minus
    b0 = p.lambda_plus
    # log(a0 - i xi) = log a0 + la etc.; the differences vanish exactly at xi = 0
    la = _log1p(-1j * xi / a0)
    lb = _log1p(1j * xi / b0)
    nu = p.nu
    if nu == 0.0:
        return p.c_plus * la + p.c_minus * lb
    if nu == 1.0:
        a = a0 - 1j * xi
        b = b0 + 1j * xi
        return p.c_plus * (1j * xi * math.log(a0) - a * la) + p.c_minus * (-1j * xi * math.log(b0) - b * lb)
    g = math.gamma(-nu)
    return -g * (p.c_plus * a0**nu * _expm1(nu * la) + p.c_minus * b0**nu * _expm1(nu * lb))


def _check_strip(xi: np.ndarray, lo: float, hi: float, what: str) -> None:
    im = xi.imag
    if im.size and not (lo < im.min() and im.max() < hi):
        bad = im[(im <= lo) | (im >= hi)]
        raise DomainError(f"{what}: Im(xi)={bad.flat[0]:.6g} outside the strip ({lo:.6g}, {hi:.6g})")


def psi(params: KobolParams, xi) -> np.ndarray | complex:
    """KoBoL characteristic exponent ``psi(xi)``.

    Accepts scalars or arrays; ``Im(xi)`` must lie strictly inside
    ``(lambda_minus, lambda_plus)``.
    """
    arr = np.asarray(xi, dtype=complex)
    _check_strip(arr, params.lambda_minus, params.lambda_plus, "psi")
    out = -1j * params.mu * arr + _jump_part(params, arr)
    if np.ndim(xi) == 0:
        return complex(out)
    return out


def _loadings_tuple(a) -> tuple[tuple[float, ...], ...]:
    arr = np.asarray(a, dtype=float)
    return tuple(tuple(float(x) for x in row) for row in arr)


@dataclass(frozen=True)
class FactorModel:
    """``n`` assets driven by idiosyncratic and loaded common KoBoL factors."""

    idio: tuple[KobolParams, ...]
    common: tuple[KobolParams, ...]
    loadings: tuple[tuple[float, ...], ...]
    strip_shrink: float = 0.9
    _A: np.ndarray = field(init=False, repr=False, compare=False)
    _active: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "idio", tuple(self.idio))
        object.__setattr__(self, "common", tuple(self.common))
        object.__setattr__(self, "loadings", _loadings_tuple(self.loadings))
        n = len(self.idio)
        if n < 1:
            raise ParameterError("model needs at least one asset")
        if len(self.common) != n:
            raise ParameterError(f"expected {n} common factors, got {len(self.common)}")
        A = np.asarray(self.loadings, dtype=float)
        if A.shape != (n, n):
            raise ParameterError(f"loadings must be {n}x{n}, got shape {A.shape}")
        if not np.all(np.isfinite(A)) or np.any(A < 0.0):
            raise ParameterError("loadings must be finite and nonnegative")
        if not 0.0 < self.strip_shrink < 1.0:
            raise ParameterError("strip_shrink must lie in (0, 1)")
        A.setflags(write=False)
        object.__setattr__(self, "_A", A)
        object.__setattr__(self, "_active", tuple(m for m in range(n) if np.any(A[:, m] != 0.0)))

    @classmethod
    def independent(cls, idio: Sequence[KobolParams], strip_shrink: float = 0.9) -> "FactorModel":
        """Model with zero loadings; common factors are inert placeholders."""
        n = len(idio)
        return cls(tuple(idio), tuple(idio), np.zeros((n, n)), strip_shrink)

    @property
    def n(self) -> int:
        return len(self.idio)

    @property
    def A(self) -> np.ndarray:
        return self._A

    def active_factors(self) -> list[int]:
        """Indices of common factors with a nonzero loading column."""
        return list(self._active)


@dataclass(frozen=True)
class AnalyticTube:
    """Cube tube ``{Im v_s in [a_minus, a_plus]}`` inside the analytic domain."""

    a_minus: float
    a_plus: float

    def __post_init__(self) -> None:
        if not self.a_minus < 0.0 < self.a_plus:
            raise ParameterError("tube requires a_minus < 0 < a_plus")

    @property
    def symmetric(self) -> float:
        return min(self.a_plus, -self.a_minus)

    def contains(self, y, strict: bool = True) -> bool:
        y = np.asarray(y, dtype=float)
        if strict:
            return bool(np.all((y > self.a_minus) & (y < self.a_plus)))
        return bool(np.all((y >= self.a_minus) & (y <= self.a_plus)))


def tau(model: FactorModel, v, T: float) -> np.ndarray | complex:
    """Characteristic exponent ``tau(v, T) = log Phi(v, T)``.

    ``v`` has trailing dimension ``n``; leading dimensions broadcast.
    """
    arr = np.asarray(v, dtype=complex)
    scalar = arr.ndim == 1
    if arr.shape[-1] != model.n:
        raise ParameterError(f"v must have trailing dimension {model.n}")
    acc = np.zeros(arr.shape[:-1], dtype=complex)
    for s, p in enumerate(model.idio):
        acc = acc + psi(p, arr[..., s])
    active = model.active_factors()
    if active:
        combo = arr @ model.A
        for m in active:
            acc = acc + psi(model.common[m], combo[..., m])
    out = -float(T) * acc
    return complex(out) if scalar else out


def char_fn(model: FactorModel, v, T: float) -> np.ndarray | complex:
    """Joint characteristic function ``Phi(v, T) = exp(tau(v, T))``."""
    t = tau(model, v, T)
    return complex(np.exp(t)) if np.ndim(t) == 0 else np.exp(t)


def calibrate_drift(model: FactorModel, r: float) -> FactorModel:
    """Replace each idiosyncratic drift so that ``E[exp(U_s,T)] = exp(rT)``.

    The condition ``psi_s(-i) + sum_m phi_m(-i a[s, m]) = -r`` is affine in
    ``mu_s`` (slope -1), so the solution is explicit.
    """
    A = model.A
    active = model.active_factors()
    new_idio = []
    for s, p in enumerate(model.idio):
        if not p.lambda_minus < -1.0:
            raise CalibrationError(
                f"asset {s}: lambda_minus={p.lambda_minus} must be < -1 for E[exp(U)] to be finite"
            )
        total = float(np.real(_jump_part(p, np.asarray(-1j))))
        for m in active:
            q = model.common[m]
            if not -A[s, m] > q.lambda_minus:
                raise CalibrationError(
                    f"asset {s}: loading {A[s, m]} on factor {m} exceeds -lambda_minus={-q.lambda_minus}"
                )
            total += float(np.real(psi(q, -1j * A[s, m])))
        new_idio.append(p.with_mu(float(r) + total))
    return replace(model, idio=tuple(new_idio))


def analytic_tube(model: FactorModel) -> AnalyticTube:
    """Common cube tube from shrunken strips.

    ``a_plus = min(kappa_s+, kappa'_m+ * min(1, 1/S_m))`` and the mirrored max
    for ``a_minus``, where ``S_m`` is the column sum of loadings.  Factors with
    an all-zero loading column impose no constraint.
    """
    k = model.strip_shrink
    a_plus = min(k * p.lambda_plus for p in model.idio)
    a_minus = max(k * p.lambda_minus for p in model.idio)
    col = model.A.sum(axis=0)
    for m in model.active_factors():
        f = min(1.0, 1.0 / col[m])
        q = model.common[m]
        a_plus = min(a_plus, k * q.lambda_plus * f)
        a_minus = max(a_minus, k * q.lambda_minus * f)
    return AnalyticTube(a_minus, a_plus)


def decay_rate(params: KobolParams) -> float:
    """``d = -Gamma(-nu) cos(nu pi/2) (c_plus + c_minus)``; positive on (0,1)u(1,2)."""
    if not _is_power_regime(params.nu):
        raise UnsupportedRegimeError(
            f"decay rate needs nu in (0,1)u(1,2), got {params.nu}; use rectangular truncation"
        )
    nu = params.nu
    return -math.gamma(-nu) * math.cos(nu * math.pi / 2.0) * (params.c_plus + params.c_minus)


def asymptotic_offset(params: KobolParams) -> float:
    """Constant ``C0 >= 0`` with ``Re psi(v + iy) >= d|v|^nu - C0 + mu*y``.

    For nu in (0,1) this is ``|Gamma(-nu)| (c_plus (-lambda_-)^nu + c_minus lambda_+^nu)``
    and the inequality holds for every real ``v`` (from
    ``Re (alpha + iv)^nu >= |v|^nu cos(nu pi/2)`` when ``alpha > 0``).  For nu in
    (1,2) the constant term of the expansion is favourable and 0 is returned;
    the inequality then holds only asymptotically.
    """
    if not _is_power_regime(params.nu):
        raise UnsupportedRegimeError(f"no power-law envelope for nu={params.nu}")
    nu = params.nu
    c0 = -math.gamma(-nu) * (params.c_plus * (-params.lambda_minus) ** nu + params.c_minus * params.lambda_plus**nu)
    return max(0.0, c0)


@dataclass(frozen=True)
class Envelope:
    """``|Phi(v + iy, T)| <= exp(log_const - sum_s rate_s |v_s|^nu_s)`` for real v."""

    log_const: float
    rates: tuple[float, ...]
    nus: tuple[float, ...]
    certified: bool = field(default=True)


def modulus_envelope(model: FactorModel, T: float, shift=None) -> Envelope:
    """Stretched-exponential majorant of ``|Phi|`` along ``R^n + i*shift``.

    Idiosyncratic factors contribute ``exp(-T(mu_s y_s - C0_s)) exp(-T d_s |v_s|^nu_s)``;
    each active common factor is bounded by its value at the purely imaginary
    point, ``exp(-T phi_m(i eta_m))`` with ``eta = A^T y``.
    """
    n = model.n
    y = np.zeros(n) if shift is None else np.asarray(shift, dtype=float).reshape(n)
    log_const = 0.0
    rates = []
    certified = True
    for s, p in enumerate(model.idio):
        d = decay_rate(p)
        if p.nu > 1.0:
            certified = False
        # exact value of the y-dependent drift contribution; jump offset bounded by C0
        log_const += T * (-p.mu * y[s] + asymptotic_offset(p))
        rates.append(T * d)
    if model.active_factors():
        eta = y @ model.A
        for m in model.active_factors():
            log_const += float(np.real(-T * psi(model.common[m], 1j * eta[m])))
    return Envelope(log_const, tuple(rates), tuple(p.nu for p in model.idio), certified)
