"""Reference values by direct quadrature.

Nothing here touches the lattice sums, the index sets or the Lanczos
log-Gamma: integrals are done with scipy's adaptive Gauss-Kronrod (QUADPACK)
or a Gauss-Legendre inner rule, and Gamma values come from
``scipy.special.loggamma``.  Agreement with the lattice pricer is therefore
an independent check.
"""

from __future__ import annotations

import cmath
import math
from typing import Sequence

import numpy as np
from scipy.integrate import quad
from scipy.special import loggamma, roots_legendre

from ._quad import QuadCtrl, box_tail_bound, cutoff_widths
from .errors import AccuracyError, DomainError, ParameterError
from .kobol import FactorModel, calibrate_drift, char_fn, modulus_envelope

__all__ = [
    "QuadCtrl",
    "density_quadrature",
    "price_quadrature_1d",
    "price_quadrature_nd",
    "payoff_transform_quadrature",
    "fs_reference",
]


def _quad_checked(f, lo, hi, ctrl: QuadCtrl, what: str, **kw) -> tuple[float, float]:
    val, err, info, *msg = quad(
        f, lo, hi, epsabs=ctrl.abs_tol, epsrel=ctrl.rel_tol, limit=ctrl.max_subdivisions, full_output=1, **kw
    )
    if err > 100 * max(ctrl.abs_tol, ctrl.rel_tol * abs(val)):
        raise AccuracyError(f"{what}: quadrature error estimate {err:.3g} for value {val:.6g}")
    return val, err


def _half_width(model, T, shift, ctrl) -> list[float]:
    env = modulus_envelope(model, T, shift)
    return cutoff_widths(env.rates, env.nus, max(env.log_const, 0.0) + math.log(1.0 / ctrl.domain_cutoff_tol))


def _power(nu: float) -> float:
    return max(1.0, 1.0 / nu)


def fs_reference(u) -> complex:
    """Payoff transform from scipy's loggamma (independent of the library Gamma)."""
    u = np.asarray(u, dtype=complex)
    total = 1j * u.sum() - 1.0
    logv = loggamma(total) - loggamma(1j * u[0] + 1.0)
    for m in range(1, u.size):
        logv += loggamma(-1j * u[m])
    return complex(np.exp(logv))


def density_quadrature(
    model: FactorModel, T: float, x: Sequence[float], a=None, ctrl: QuadCtrl | None = None
) -> float:
    """``p(x) = (2 pi)^-n e^{<a,x>} int e^{-i<v,x>} Phi(v + i a) dv`` for ``n <= 2``.

    ``a`` (default 0) moves the contour inside the analyticity tube; the value
    does not depend on it.
    """
    ctrl = ctrl or QuadCtrl()
    n = model.n
    if n > 2:
        raise ParameterError("density_quadrature supports n <= 2")
    x = np.asarray(x, dtype=float).reshape(n)
    a = np.zeros(n) if a is None else np.asarray(a, dtype=float).reshape(n)
    L = _half_width(model, T, a, ctrl)
    nus = [p.nu for p in model.idio]
    if n == 1:
        p = _power(nus[0])

        def g(t):
            v = t**p
            z = char_fn(model, np.array([v + 1j * a[0]]), T)
            return (cmath.exp(-1j * v * x[0]) * z).real * p * t ** (p - 1.0)

        # Hermitian on the shifted line: integral over R is twice the real half-line part
        val, _ = _quad_checked(g, 0.0, L[0] ** (1.0 / p), ctrl, "density_quadrature")
        return float(2.0 * val * math.exp(a[0] * x[0]) / (2.0 * math.pi))
    inner = _InnerRule(nus[1], L[1], ctrl)

    def outer(t):
        p0 = _power(nus[0])
        v0 = t**p0

        def h(v1):
            pts = np.stack([np.full_like(v1, v0), v1], axis=-1) + 1j * a
            return np.exp(-1j * (v0 * x[0] + v1 * x[1])) * char_fn(model, pts, T)

        return inner(h).real * p0 * t ** (p0 - 1.0)

    val, _ = _quad_checked(outer, 0.0, L[0] ** (1.0 / _power(nus[0])), ctrl, "density_quadrature")
    return float(2.0 * val * math.exp(float(a @ x)) / (2.0 * math.pi) ** 2)


class _InnerRule:
    """Composite Gauss-Legendre over ``[-L, L]`` with the power substitution.

    Every call compares the rule against one panel doubling and keeps
    refining until they agree; the panel count only grows, so later outer
    nodes start from the finest grid seen so far.
    """

    def __init__(self, nu: float, L: float, ctrl: QuadCtrl, order: int = 24, max_panels: int = 4096):
        self.p = _power(nu)
        self.tmax = L ** (1.0 / self.p)
        self.ctrl = ctrl
        self.x, self.w = roots_legendre(order)
        self.panels = 4
        self.max_panels = max_panels
        self._cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def _nodes(self, panels: int):
        if panels not in self._cache:
            edges = np.linspace(0.0, self.tmax, panels + 1)
            mid = 0.5 * (edges[1:] + edges[:-1])
            half = 0.5 * (edges[1:] - edges[:-1])
            t = (mid[:, None] + half[:, None] * self.x).ravel()
            w = (half[:, None] * self.w).ravel() * self.p * t ** (self.p - 1.0)
            v = t**self.p
            self._cache[panels] = (np.concatenate([-v[::-1], v]), np.concatenate([w[::-1], w]))
        return self._cache[panels]

    def _eval(self, h, panels):
        v, w = self._nodes(panels)
        return np.sum(h(v) * w)

    def __call__(self, h):
        prev = self._eval(h, self.panels)
        while True:
            cur = self._eval(h, 2 * self.panels)
            if abs(cur - prev) <= self.ctrl.rel_tol * abs(cur) + self.ctrl.abs_tol:
                return cur
            if 2 * self.panels >= self.max_panels:
                raise AccuracyError("inner Gauss-Legendre rule did not converge")
            self.panels *= 2
            prev = cur


def _damping_prefactor(market, eps, r, T) -> tuple[float, np.ndarray]:
    spot = np.asarray(market.spot, dtype=float)
    b = np.log(spot / market.strike)
    return market.strike * math.exp(-r * T - float(np.dot(b, eps))), b


def price_quadrature_1d(model: FactorModel, market, eps1: float, ctrl: QuadCtrl | None = None, return_error=False):
    """``K e^{-rT - b eps} (2 pi)^-1 int Phi(x + i eps) FS(x + i eps) e^{i x b} dx`` for one asset."""
    ctrl = ctrl or QuadCtrl(rel_tol=1e-12, abs_tol=1e-15, max_subdivisions=2000, domain_cutoff_tol=1e-18)
    if model.n != 1:
        raise ParameterError("price_quadrature_1d needs a one-asset model")
    if not eps1 < -1.0:
        raise DomainError(f"eps1 must be < -1, got {eps1}")
    model = calibrate_drift(model, market.rate)
    T = market.maturity
    pref, b = _damping_prefactor(market, np.array([eps1]), market.rate, T)
    L = _half_width(model, T, [eps1], ctrl)[0]
    nu = model.idio[0].nu
    p = _power(nu)

    def g(t):
        x = t**p
        u = x + 1j * eps1
        z = char_fn(model, np.array([u]), T)
        fs = 1.0 / ((1j * u) * (1j * u - 1.0))
        return (z * fs * cmath.exp(1j * x * b[0])).real * p * t ** (p - 1.0)

    val, err = _quad_checked(g, 0.0, L ** (1.0 / p), ctrl, "price_quadrature_1d")
    scale = pref / math.pi
    env = modulus_envelope(model, T, [eps1])
    lmax = 1.0 / (eps1 * (1.0 + eps1))
    tail = lmax * box_tail_bound(env.log_const, env.rates, env.nus, [L])
    price = scale * val
    return (price, scale * err + pref * tail / (2 * math.pi)) if return_error else price


def price_quadrature_nd(model: FactorModel, market, eps, ctrl: QuadCtrl | None = None, return_error=False):
    """Basket call by nested quadrature for ``n = 2`` (adaptive outer, Gauss-Legendre inner)."""
    ctrl = ctrl or QuadCtrl(rel_tol=1e-10, abs_tol=1e-14, domain_cutoff_tol=1e-16)
    n = model.n
    if n != 2:
        raise ParameterError("price_quadrature_nd supports n = 2")
    eps = np.asarray(eps, dtype=float).reshape(n)
    if not (eps[1] > 0 and eps[0] < -1.0 - eps[1]):
        raise DomainError(f"damping {tuple(eps)} is not admissible")
    model = calibrate_drift(model, market.rate)
    T = market.maturity
    pref, b = _damping_prefactor(market, eps, market.rate, T)
    L = _half_width(model, T, eps, ctrl)
    nus = [q.nu for q in model.idio]
    inner = _InnerRule(nus[1], L[1], ctrl)
    p0 = _power(nus[0])
    # vectorised reference transform
    e0, e1 = eps

    def fs_vec(u0, u1):
        return np.exp(loggamma(1j * (u0 + u1) - 1.0) + loggamma(-1j * u1) - loggamma(1j * u0 + 1.0))

    def outer(t):
        x0 = t**p0

        def h(x1):
            u0 = np.full_like(x1, x0) + 1j * e0
            u1 = x1 + 1j * e1
            z = char_fn(model, np.stack([u0, u1], axis=-1), T)
            return z * fs_vec(u0, u1) * np.exp(1j * (x0 * b[0] + x1 * b[1]))

        return inner(h).real * p0 * t ** (p0 - 1.0)

    val, err = _quad_checked(outer, 0.0, L[0] ** (1.0 / p0), ctrl, "price_quadrature_nd")
    scale = 2.0 * pref / (2.0 * math.pi) ** 2
    env = modulus_envelope(model, T, eps)
    lmax = abs(fs_reference(1j * eps))
    tail = lmax * box_tail_bound(env.log_const, env.rates, env.nus, L)
    price = scale * val
    return (price, scale * err + pref * tail / (2 * math.pi) ** 2) if return_error else price


def payoff_transform_quadrature(u, ctrl: QuadCtrl | None = None) -> complex:
    """``int S(y) e^{-i<u, y>} dy`` by direct (nested) quadrature, ``n <= 2``."""
    ctrl = ctrl or QuadCtrl(rel_tol=1e-11, abs_tol=1e-12, max_subdivisions=400, domain_cutoff_tol=1e-16)
    u = np.asarray(u, dtype=complex).ravel()
    n = u.size
    eps = u.imag
    x = u.real
    if n > 2:
        raise ParameterError("payoff_transform_quadrature supports n <= 2")
    if n == 2 and not eps[1] > 0:
        raise DomainError("need Im u_2 > 0")
    if not eps[0] < -1.0 - eps[1:].sum():
        raise DomainError("need Im u_1 < -1 - sum Im u_m")
    cut = math.log(1.0 / ctrl.domain_cutoff_tol) + 5.0
    rate1 = -1.0 - eps.sum()  # decay of the damped payoff in y_1
    Y1 = cut / rate1
    if n == 1:

        def part(y, k):
            z = (math.exp(y) - 1.0) * cmath.exp((eps[0] - 1j * x[0]) * y)
            return z.real if k == 0 else z.imag

        re = _quad_checked(lambda y: part(y, 0), 0.0, Y1, ctrl, "payoff quadrature", )[0]
        im = _quad_checked(lambda y: part(y, 1), 0.0, Y1, ctrl, "payoff quadrature")[0]
        return complex(re, im)
    Y2 = cut / eps[1]

    def inner(y1, k):
        top = math.log(math.expm1(y1))
        lo = min(-Y2, top - 1.0)
        ea = math.exp(y1) - 1.0

        def f(y2):
            z = (ea - math.exp(y2)) * cmath.exp((eps[0] - 1j * x[0]) * y1 + (eps[1] - 1j * x[1]) * y2)
            return z.real if k == 0 else z.imag

        return quad(f, lo, top, epsabs=ctrl.abs_tol * 1e-2, epsrel=ctrl.rel_tol, limit=ctrl.max_subdivisions)[0]

    re = _quad_checked(lambda y: inner(y, 0), 0.0, Y1, ctrl, "payoff quadrature")[0]
    im = _quad_checked(lambda y: inner(y, 1), 0.0, Y1, ctrl, "payoff quadrature")[0]
    return complex(re, im)
