"""Tensor-product composite Gauss-Legendre quadrature over R^n.

Integrands decaying like ``exp(-sum_s r_s |v_s|^nu_s)`` are integrated on a
truncated box after the substitution ``v = sign(t) |t|^p`` (``p >= 1``), which
flattens the cusp at the origin for ``nu < 1``.  The panel count doubles
until successive estimates agree; the discarded tail is bounded separately by
incomplete Gamma integrals of the envelope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.special import gamma as _gamma
from scipy.special import gammaincc

from .errors import AccuracyError, ParameterError

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
_MAX_POINTS = 6_000_000
_CHUNK = 400_000


def envelope_full(rate: float, nu: float) -> float:
    """``int_R exp(-rate |v|^nu) dv``."""
    return 2.0 * _gamma(1.0 + 1.0 / nu) * rate ** (-1.0 / nu)


def envelope_tail(rate: float, nu: float, L: float) -> float:
    """``int_{|v|>L} exp(-rate |v|^nu) dv``."""
    return math.exp(log_envelope_tail(rate, nu, L))


def log_envelope_tail(rate: float, nu: float, L: float) -> float:
    a, x = 1.0 / nu, rate * L**nu
    q = float(gammaincc(a, x))
    if q > 1e-280:
        return math.log(envelope_full(rate, nu) * q)
    # Gamma(a, x) <= x^(a-1) e^-x / (1 - (a-1)/x) for x > a - 1, and <= x^(a-1) e^-x for a <= 1
    corr = 1.0 if a <= 1.0 else 1.0 / (1.0 - (a - 1.0) / x)
    return math.log(2.0 / nu * corr) - a * math.log(rate) + (a - 1.0) * math.log(x) - x


def box_tail_bound(log_const: float, rates: Sequence[float], nus: Sequence[float], L: Sequence[float]) -> float:
    """Envelope mass ``G * int_{R^n minus box} prod_s exp(-r_s|v_s|^nu_s)``."""
    log_full = [math.log(envelope_full(r, nu)) for r, nu in zip(rates, nus)]
    total = sum(log_full)
    logs = [log_envelope_tail(r, nu, l) + total - lf for r, nu, l, lf in zip(rates, nus, L, log_full)]
    top = max(logs)
    s = top + math.log(sum(math.exp(t - top) for t in logs)) + log_const
    return math.exp(s) if s < 700.0 else math.inf


def cutoff_widths(rates: Sequence[float], nus: Sequence[float], log_level: float) -> list[float]:
    """Half widths where ``r_s |v_s|^nu_s`` reaches ``log_level``."""
    return [(max(log_level, 1.0) / r) ** (1.0 / nu) for r, nu in zip(rates, nus)]


def _rule(half_width: float, p: float, panels: int) -> tuple[np.ndarray, np.ndarray]:
    # nodes on t in [0, half_width^(1/p)], mirrored; v = t^p
    tmax = half_width ** (1.0 / p)
    edges = np.linspace(0.0, tmax, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    t = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    v = t**p
    jac = p * t ** (p - 1.0)
    nodes = np.concatenate([-v[::-1], v])
    weights = np.concatenate([(w * jac)[::-1], w * jac])
    return nodes, weights


def _tensor_sum(f: Callable[[np.ndarray], np.ndarray], rules: list[tuple[np.ndarray, np.ndarray]]):
    n = len(rules)
    if n == 1:
        x, w = rules[0]
        return np.sum(f(x[:, None]) * w)
    lead_x, lead_w = rules[0]
    rest = rules[1:]
    grids = np.meshgrid(*[r[0] for r in rest], indexing="ij")
    wgrid = np.ones_like(grids[0])
    for g, r in zip(range(len(rest)), rest):
        shape = [1] * len(rest)
        shape[g] = -1
        wgrid = wgrid * r[1].reshape(shape)
    tail_pts = np.stack([g.ravel() for g in grids], axis=-1)
    tail_w = wgrid.ravel()
    rows = max(1, _CHUNK // tail_pts.shape[0])
    acc = 0.0
    for start in range(0, lead_x.size, rows):
        xs = lead_x[start : start + rows]
        ws = lead_w[start : start + rows]
        pts = np.concatenate(
            [np.repeat(xs, tail_pts.shape[0])[:, None], np.tile(tail_pts, (xs.size, 1))], axis=1
        )
        wt = np.repeat(ws, tail_pts.shape[0]) * np.tile(tail_w, xs.size)
        acc = acc + np.sum(f(pts) * wt)
    return acc


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    half_widths: Sequence[float],
    nus: Sequence[float],
    rel_tol: float = 1e-10,
    abs_tol: float = 0.0,
    min_panels: int = 2,
    max_panels: int = 512,
) -> tuple[complex | float, float, int]:
    """Integrate ``f`` over the box ``prod [-L_s, L_s]`` with panel doubling.

    ``f`` receives points of shape ``(N, n)``.  Returns ``(value, error, points)``.
    """
    n = len(half_widths)
    powers = [max(1.0, 1.0 / nu) for nu in nus]
    panels = min_panels
    prev = None
    while True:
        npts = (2 * 16 * panels) ** n
        if npts > _MAX_POINTS:
            raise AccuracyError(
                f"quadrature did not reach rel_tol={rel_tol:g} within {_MAX_POINTS} points (n={n})"
            )
        rules = [_rule(L, p, panels) for L, p in zip(half_widths, powers)]
        cur = _tensor_sum(f, rules)
        if prev is not None:
            err = abs(cur - prev)
            if err <= rel_tol * abs(cur) + abs_tol:
                return cur, err, npts
        if panels >= max_panels:
            raise AccuracyError(f"quadrature did not converge: last change {abs(cur - prev):.3g}")
        prev = cur
        panels *= 2


def integrate_1d_adaptive(
    f: Callable[[np.ndarray], np.ndarray],
    half_width: float,
    nu: float,
    rel_tol: float = 1e-10,
    abs_tol: float = 1e-14,
    limit: int = 500,
) -> tuple[float, float]:
    """Adaptive Gauss-Kronrod on ``[-L, L]`` for real integrands with kinks.

    Same ``v = sign(t)|t|^p`` substitution as :func:`integrate`.
    """
    p = max(1.0, 1.0 / nu)
    tmax = half_width ** (1.0 / p)
    total = 0.0
    err = 0.0
    for sign in (1.0, -1.0):

        def g(t, sign=sign):
            return float(np.real(f(np.array([[sign * t**p]]))[0])) * p * t ** (p - 1.0)

        val, e, *rest = quad(g, 0.0, tmax, epsabs=abs_tol, epsrel=rel_tol, limit=limit, full_output=1)
        if len(rest) > 1 and rest[0].get("last", 0) >= limit:
            raise AccuracyError(f"adaptive quadrature hit {limit} subdivisions (estimate {e:.3g})")
        total += val
        err += e
    if err > max(rel_tol * abs(total), abs_tol) * 10:
        raise AccuracyError(f"adaptive quadrature error estimate {err:.3g} above tolerance")
    return total, err


@dataclass(frozen=True)
class QuadCtrl:
    """Tolerances shared by the majorant quadrature and the oracles."""

    abs_tol: float = 1e-13
    rel_tol: float = 1e-10
    max_subdivisions: int = 500
    domain_cutoff_tol: float = 1e-16

    def __post_init__(self) -> None:
        if not (self.abs_tol > 0 and self.rel_tol > 0 and self.domain_cutoff_tol > 0):
            raise ParameterError("quadrature tolerances must be positive")
        if self.domain_cutoff_tol > self.rel_tol / 10:
            raise ParameterError("domain_cutoff_tol must not exceed rel_tol/10")
        if self.max_subdivisions < 1:
            raise ParameterError("max_subdivisions must be >= 1")
