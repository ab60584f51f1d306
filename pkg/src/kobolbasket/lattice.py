"""Lattice (Poisson-summation) approximation of the damped density.

The P-periodization of a density ``q`` has Fourier coefficients
``Phi(-2 pi m / P + i eps) / P^n``; truncating them to an index set gives the
approximant.  Its error splits into aliasing (periodization) and coefficient
truncation, both bounded here.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._quad import QuadCtrl, box_tail_bound, cutoff_widths, integrate, integrate_1d_adaptive
from .errors import DomainError, ParameterError
from .kobol import AnalyticTube, FactorModel, analytic_tube, char_fn, modulus_envelope
from .sparse import IndexSet, build_ball, coefficient_tail_bound, enumerate_indices

__all__ = [
    "AliasBudget",
    "DensityApproximant",
    "majorant_MT",
    "sign_majorant",
    "cosh_series_bound",
    "cosh_series_direct",
    "select_period",
    "aliasing_sup_bound",
    "certify_period",
    "build_density_approximant",
    "eval_density",
    "density_error_bound",
    "lattice_density",
    "density_table",
]


@dataclass(frozen=True)
class AliasBudget:
    M_T: float
    eps_alias: float
    P: int
    a: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if not (self.M_T > 0 and self.eps_alias > 0):
            raise ParameterError("M_T and eps_alias must be positive")
        if int(self.P) != self.P or self.P < 1:
            raise ParameterError(f"period must be a positive integer, got {self.P}")


def _envelope_integral(model, T, shifts, ctrl: QuadCtrl, combine):
    """Quadrature of ``combine([Phi(v + i y) for y in shifts])`` over R^n.

    Returns ``(value, extra)`` where ``extra`` adds the doubling error and the
    envelope mass outside the box; ``combine`` must not exceed the largest
    modulus among its arguments.
    """
    n = model.n
    envs = [modulus_envelope(model, T, y) for y in shifts]
    G = max(e.log_const for e in envs)
    rates, nus = envs[0].rates, envs[0].nus
    widths = cutoff_widths(rates, nus, max(G, 0.0) + math.log(1.0 / ctrl.domain_cutoff_tol))
    shifts = [np.asarray(y, dtype=float) for y in shifts]

    def f(v):
        vals = [char_fn(model, v + 1j * y, T) for y in shifts]
        return combine(vals)

    if n == 1:
        val, err = integrate_1d_adaptive(
            f, widths[0], nus[0], ctrl.rel_tol, ctrl.abs_tol, ctrl.max_subdivisions
        )
    else:
        val, err, _ = integrate(f, widths, nus, rel_tol=ctrl.rel_tol, abs_tol=ctrl.abs_tol)
    tail = box_tail_bound(G, rates, nus, widths)
    scale = (2.0 * math.pi) ** (-n)
    return scale * float(np.real(val)), scale * (err + tail)


def majorant_MT(
    model: FactorModel,
    tube: AnalyticTube,
    T: float,
    quad_ctrl: QuadCtrl | None = None,
    shift=None,
    a=None,
) -> float:
    """Upper estimate of ``(1/2)(2 pi)^-n int |Phi(v + i y + i a) + Phi(v + i y - i a)| dv``.

    Defaults: ``y = 0`` and ``a_s = min(a_plus, -a_minus)``.  The quadrature
    error estimate and the analytic tail of the discarded domain are added.
    For n >= 2 the modulus of the sum is replaced by the mean of the moduli,
    a smooth integrand that dominates it (the sum has kinks along its zero set).
    """
    ctrl = quad_ctrl or QuadCtrl()
    n = model.n
    y = np.zeros(n) if shift is None else np.asarray(shift, dtype=float)
    av = np.full(n, tube.symmetric) if a is None else np.broadcast_to(np.asarray(a, dtype=float), (n,))
    if n == 1:
        combine = lambda vals: 0.5 * np.abs(vals[0] + vals[1])  # noqa: E731
    else:
        combine = lambda vals: 0.5 * (np.abs(vals[0]) + np.abs(vals[1]))  # noqa: E731
    val, extra = _envelope_integral(model, T, [y + av, y - av], ctrl, combine)
    return val + extra


def sign_majorant(
    model: FactorModel, T: float, a, shift=None, quad_ctrl: QuadCtrl | None = None
) -> float:
    """``max_sigma (2 pi)^-n int |Phi(v + i shift - i sigma a)| dv`` over sign vectors.

    With it ``e^{-<shift, x>} p(x) <= M * exp(-sum_s a_s |x_s|)`` for all x.
    """
    ctrl = quad_ctrl or QuadCtrl()
    n = model.n
    y = np.zeros(n) if shift is None else np.asarray(shift, dtype=float)
    a = np.broadcast_to(np.asarray(a, dtype=float), (n,))
    best = 0.0
    for bits in range(2**n):
        sigma = np.array([1.0 if (bits >> s) & 1 else -1.0 for s in range(n)])
        val, extra = _envelope_integral(model, T, [y - sigma * a], ctrl, lambda vals: np.abs(vals[0]))
        best = max(best, val + extra)
    return best


def cosh_series_bound(P: int, a) -> float:
    """Upper bound of ``sum_{m != 0} prod_s sech((2P-1)/2 m_s a_s)``.

    Uses ``sech x <= 2 e^{-|x|}`` and a geometric series per coordinate.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    q = np.exp(-(2.0 * P - 1.0) * a / 2.0)
    return float(np.prod(1.0 + 4.0 * q / (1.0 - q)) - 1.0)


def cosh_series_direct(P: int, a, terms: int | None = None) -> float:
    """Direct summation of the same series (factorized per coordinate)."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    c = (2.0 * P - 1.0) / 2.0
    out = 1.0
    for s in range(a.size):
        K = terms or int(math.ceil(60.0 / (c * a[s]))) + 2
        m = np.arange(1, K + 1)
        e = np.exp(-c * m * a[s])
        out *= 1.0 + 2.0 * math.fsum(2.0 * e / (1.0 + e * e))
    return out - 1.0


def select_period(M_T: float, a, eps_alias: float) -> int:
    """Smallest integer ``P >= 1`` with ``M_T * cosh_series_bound(P, a) <= eps_alias``."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if not eps_alias > 0:
        raise ParameterError("eps_alias must be positive")
    if np.any(a <= 0):
        raise ParameterError("all a_s must be positive")
    target = eps_alias / M_T

    def ok(P):
        return cosh_series_bound(P, a) <= target

    hi = 1
    while not ok(hi):
        hi *= 2
    lo = hi // 2
    # smallest passing P in (lo, hi]
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def aliasing_sup_bound(M_star: float, P: int, a) -> float:
    """``sup_{x in cube} sum_{k != 0} q(x + P k)`` given ``q(x) <= M* exp(-sum a_s|x_s|)``."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    h = P / 2.0
    g = 2.0 * np.exp(a * h - a * P) / (1.0 - np.exp(-a * P))
    return float(M_star * (np.prod(1.0 + g) - 1.0))


def certify_period(M_star: float, a, eps_alias: float, P0: int) -> int:
    """Smallest ``P >= P0`` whose aliasing sup bound is within ``eps_alias``."""
    P = int(P0)
    while aliasing_sup_bound(M_star, P, a) > eps_alias:
        P += 1
    return P


@dataclass(frozen=True)
class DensityApproximant:
    P: int
    n: int
    T: float
    indices: IndexSet
    coefficients: np.ndarray
    eps_alias: float | None = None
    truncation: float | None = None

    def coefficient(self, m) -> complex:
        m = np.asarray(m, dtype=np.int64)
        hit = np.all(self.indices.indices == m, axis=1)
        if not np.any(hit):
            raise KeyError(tuple(m))
        return complex(self.coefficients[np.argmax(hit)])


def _box_indices(half: int, n: int) -> IndexSet:
    axes = [np.arange(-half, half + 1)] * n
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    return IndexSet(grid)


def build_density_approximant(
    model: FactorModel, T: float, P: int, freq_set: IndexSet | int
) -> DensityApproximant:
    """Tabulate ``Phi(-2 pi m / P) / P^n`` on an index set (or the box of given half width)."""
    if int(P) != P or P < 1:
        raise ParameterError(f"P must be a positive integer, got {P}")
    n = model.n
    idx = _box_indices(int(freq_set), n) if isinstance(freq_set, (int, np.integer)) else freq_set
    if idx.n != n:
        raise ParameterError(f"index set dimension {idx.n} does not match model n={n}")
    if not idx.is_symmetric():
        raise ParameterError("frequency set must be closed under negation and sorted")
    freq = -2.0 * math.pi / P * idx.indices.astype(float)
    c = char_fn(model, freq, T) / float(P) ** n
    # c(-m) is the reversed array for a sorted, negation-closed set
    c = 0.5 * (c + np.conj(c[::-1]))
    zero = np.all(idx.indices == 0, axis=1)
    c[zero] = 1.0 / float(P) ** n
    return DensityApproximant(int(P), n, float(T), idx, c)


def eval_density(approx: DensityApproximant, x, return_imag: bool = False):
    """Evaluate the trigonometric sum at ``x`` inside ``[-P/2, P/2]^n``."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[-1] != approx.n:
        raise ParameterError(f"x must have {approx.n} coordinates")
    h = approx.P / 2.0
    if np.any(np.abs(x) > h):
        raise DomainError(f"x outside the periodization cube [-{h}, {h}]^{approx.n}")
    k = 2.0 * math.pi / approx.P * approx.indices.indices.astype(float)
    re = np.empty(x.shape[0])
    im = np.empty(x.shape[0])
    for i, xi in enumerate(x):
        terms = approx.coefficients * np.exp(1j * (k @ xi))
        re[i] = math.fsum(terms.real)
        im[i] = math.fsum(terms.imag)
    if single:
        re, im = float(re[0]), float(im[0])
    return (re, im) if return_imag else re


def density_error_bound(budget: AliasBudget, p_norm: float) -> float:
    """``eps_alias * P^(n/p)`` on the unit-normalised cube."""
    if not p_norm >= 1.0:
        raise ParameterError("p_norm must be >= 1")
    n = max(1, len(budget.a))
    if math.isinf(p_norm):
        return budget.eps_alias
    return budget.eps_alias * budget.P ** (n / p_norm)


def lattice_density(
    model: FactorModel,
    T: float,
    eps_alias: float,
    R: float,
    quad_ctrl: QuadCtrl | None = None,
    cap: float = 1e8,
) -> tuple[DensityApproximant, AliasBudget]:
    """Full density pipeline: tube, majorants, period, ball, coefficients.

    The period starts at :func:`select_period` and is raised until the
    certified aliasing bound is within ``eps_alias``.
    """
    tube = analytic_tube(model)
    a = np.full(model.n, tube.symmetric)
    M_T = majorant_MT(model, tube, T, quad_ctrl)
    P = select_period(M_T, a, eps_alias)
    M_star = sign_majorant(model, T, a, quad_ctrl=quad_ctrl)
    P = certify_period(M_star, a, eps_alias, P)
    ball = build_ball(model, T, R, P)
    idx = enumerate_indices(ball, cap)
    approx = build_density_approximant(model, T, P, idx)
    trunc = coefficient_tail_bound(model, T, ball)
    approx = DensityApproximant(approx.P, approx.n, approx.T, idx, approx.coefficients, eps_alias, trunc)
    return approx, AliasBudget(M_T, eps_alias, P, tuple(a))


def density_table(approx: DensityApproximant, points: Sequence[Sequence[float]]) -> str:
    """CSV text with columns ``x_1..x_n, density, imag_residual``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    re, im = eval_density(approx, pts, return_imag=True)
    buf = io.StringIO()
    head = [f"x_{s + 1}" for s in range(approx.n)] + ["density", "imag_residual"]
    buf.write(",".join(head) + "\n")
    for row, r, i in zip(pts, np.atleast_1d(re), np.atleast_1d(im)):
        buf.write(",".join(f"{v:.12g}" for v in (*row, r, i)) + "\n")
    return buf.getvalue()
