"""Basket/spread call pricing by lattice summation, with a certified error budget.

With ``b = ln(S_0/K)`` and a damping vector ``eps`` the price is approximated by

    V ~ K e^{-rT - <b, eps>} P^-n sum_{m in S} Phi(u_m) FS(u_m) e^{2 pi i <m, b>/P},
    u_m = 2 pi m / P + i eps,

where ``S`` is the anisotropic index set.  Every budget entry is in price units.
"""

from __future__ import annotations

import math
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._quad import QuadCtrl
from .errors import AccuracyError, GeometryError, ParameterError
from .kobol import AnalyticTube, FactorModel, analytic_tube, calibrate_drift, char_fn, modulus_envelope
from .lattice import aliasing_sup_bound, certify_period, majorant_MT, select_period, sign_majorant
from .payoff import DampingVector, find_damping, payoff_l1_constant, payoff_transform
from .sparse import (
    DEFAULT_CAP,
    IndexSet,
    build_ball,
    coefficient_tail_bound,
    enumerate_indices,
    radius_for_budget,
    truncation_error_bound,
)

__all__ = [
    "MarketSpec",
    "PricingControl",
    "ErrorBudget",
    "Diagnostics",
    "PriceQuote",
    "AccuracyWarning",
    "log_moneyness",
    "price_basket_call",
    "error_budget",
    "tail_integral",
    "convergence_study",
]

_CHUNK = 1 << 16
# majorants only steer P; they need not be tight
_MAJORANT_CTRL = QuadCtrl(abs_tol=1e-12, rel_tol=1e-8, max_subdivisions=500, domain_cutoff_tol=1e-14)


class AccuracyWarning(UserWarning):
    pass


@dataclass(frozen=True)
class MarketSpec:
    spot: tuple[float, ...]
    strike: float
    rate: float
    maturity: float

    def __post_init__(self) -> None:
        spot = tuple(float(s) for s in np.atleast_1d(self.spot))
        object.__setattr__(self, "spot", spot)
        for name in ("strike", "rate", "maturity"):
            val = float(getattr(self, name))
            if not math.isfinite(val):
                raise ParameterError(f"{name} must be finite")
            object.__setattr__(self, name, val)
        if not spot or any(not (s > 0 and math.isfinite(s)) for s in spot):
            raise ParameterError("spots must be positive")
        if not self.strike > 0:
            raise ParameterError("strike must be positive")
        if not self.maturity > 0:
            raise ParameterError("maturity must be positive")

    @property
    def n(self) -> int:
        return len(self.spot)

    def scaled(self, lam: float) -> "MarketSpec":
        return MarketSpec(tuple(lam * s for s in self.spot), lam * self.strike, self.rate, self.maturity)


@dataclass(frozen=True)
class PricingControl:
    """Accuracy settings; give at most one of ``M`` (term budget) and ``R``."""

    eps_alias: float = 1e-8
    M: float | None = None
    R: float | None = None
    damping: tuple[float, ...] | None = None
    cap: float = DEFAULT_CAP
    threads: int | None = None
    P: int | None = None  # lower bound on the period; certification may raise it
    damping_rule: str = "balanced"

    def __post_init__(self) -> None:
        if self.M is not None and self.R is not None:
            raise ParameterError("give either M or R, not both")
        if not self.eps_alias > 0:
            raise ParameterError("eps_alias must be positive")
        if self.M is not None and not self.M > 0:
            raise ParameterError("M must be positive")
        if self.R is not None and not self.R > 1:
            raise ParameterError("R must exceed 1")

    def radius(self, model: FactorModel, T: float) -> float:
        if self.R is not None:
            return float(self.R)
        if self.M is not None:
            return radius_for_budget(self.M, model, T)
        return math.exp(10.0)


@dataclass(frozen=True)
class ErrorBudget:
    alias: float
    truncation: float
    tail: float
    total: float
    L_eps: float
    scale: float
    coef_l1: float  # P^-n sum_S |Phi(u_m)|
    alias_density: float  # sup-norm aliasing bound of the damped density
    trunc_density: float  # certified coefficient tail
    truncation_asymptotic: float  # face-value M-term formula, informational


@dataclass(frozen=True)
class Diagnostics:
    P: int
    R: float
    M: int
    eps: tuple[float, ...]
    runtime: float
    M_T: float
    M_star: float
    tube: tuple[float, float]


@dataclass(frozen=True)
class PriceQuote:
    value: float
    raw_complex_residual: float
    budget: ErrorBudget
    diagnostics: Diagnostics
    nonneg: bool = field(default=True)


def log_moneyness(market: MarketSpec) -> np.ndarray:
    """``b_j = ln(S_0j / K)``."""
    return np.log(np.asarray(market.spot, dtype=float) / market.strike)


def _damping_aperture(tube: AnalyticTube, eps: np.ndarray) -> np.ndarray:
    # largest symmetric excursion around eps that stays inside the tube
    return np.minimum(tube.a_plus - eps, eps - tube.a_minus)


def tail_integral(eps: Sequence[float], h: float) -> float:
    """Bound of ``int_{R^n minus [-h, h]^n} S(y) e^{<eps, y>} dy``.

    Uses ``S(y) <= (e^{y_1} - 1)_+ prod_{j>=2} 1[y_j < y_1]`` and a union
    bound over the coordinates leaving the cube.
    """
    e = np.asarray(eps, dtype=float)
    if not h > 0:
        raise GeometryError("cube half width must be positive")
    short = e[1:]
    E = float(e.sum())
    prod_short = float(np.prod(short)) if short.size else 1.0
    I1 = math.exp((1.0 + E) * h) / ((-(1.0 + E)) * prod_short)
    total = I1
    for j in range(short.size):
        Ej = E - short[j]
        Ij = (1.0 / (-1.0 - Ej) - 1.0 / (-Ej)) / prod_short
        total += I1 + math.exp(-short[j] * h) * Ij
    return total


def _terms(model, T, idx: np.ndarray, P: int, eps: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    fs = 2.0 * math.pi / P
    mf = idx.astype(float)
    u = fs * mf + 1j * eps
    phi = char_fn(model, u, T)
    vals = phi * payoff_transform(u) * np.exp(1j * fs * (mf @ b))
    return vals, np.abs(phi)


def _summed(model, T, idx: np.ndarray, P, eps, b, threads: int | None):
    chunks = [idx[i : i + _CHUNK] for i in range(0, idx.shape[0], _CHUNK)]
    workers = max(1, threads or os.cpu_count() or 1)
    if workers == 1 or len(chunks) == 1:
        parts = [_terms(model, T, c, P, eps, b) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(lambda c: _terms(model, T, c, P, eps, b), chunks))
    vals = np.concatenate([p[0] for p in parts])
    mods = np.concatenate([p[1] for p in parts])
    # exactly rounded sums: independent of chunking and thread count
    return math.fsum(vals.real), math.fsum(vals.imag), math.fsum(mods)


def error_budget(
    model: FactorModel,
    market: MarketSpec,
    P: int,
    R: float,
    eps: DampingVector,
    eps_alias: float,
    index_set: IndexSet | None = None,
    coef_l1: float | None = None,
    M_star: float | None = None,
    cap: float = DEFAULT_CAP,
) -> ErrorBudget:
    """Certified bound of ``|V - V_hat|`` split into aliasing, truncation and tail.

    ``total = scale * (L_eps * (alias + truncation) + (2 M(P,R) + truncation) * W_out)``
    with ``scale = K e^{-rT - <b, eps>}``; reported ``alias``/``truncation``
    are ``scale * L_eps`` times the density-level bounds and ``tail`` is the last
    product in price units.
    """
    m = calibrate_drift(model, market.rate)
    T = market.maturity
    tube = analytic_tube(m)
    e = eps.array()
    b = log_moneyness(market)
    h = P / 2.0 - float(np.max(np.abs(b)))
    if not h > 0:
        raise GeometryError(f"log-moneyness |b|_inf={np.max(np.abs(b)):.6g} not inside the cube of half width {P / 2}")
    aper = _damping_aperture(tube, e)
    if M_star is None:
        M_star = sign_majorant(m, T, aper, shift=e, quad_ctrl=_MAJORANT_CTRL)
    alias_density = max(eps_alias, aliasing_sup_bound(M_star, P, aper))
    env = modulus_envelope(m, T, e)
    ball = build_ball(m, T, R, P, log_offset=max(0.0, env.log_const))
    trunc_density = coefficient_tail_bound(m, T, ball, shift=e)
    if coef_l1 is None:
        idx = index_set if index_set is not None else enumerate_indices(ball, cap)
        fs = 2.0 * math.pi / P
        phi = char_fn(m, fs * idx.indices.astype(float) + 1j * e, T)
        coef_l1 = math.fsum(np.abs(phi)) / P**m.n
    L = payoff_l1_constant(eps)
    scale = market.strike * math.exp(-market.rate * T - float(b @ e))
    W = tail_integral(e, h)
    alias = scale * L * alias_density
    trunc = scale * L * trunc_density
    tail = scale * (2.0 * coef_l1 + trunc_density) * W
    try:
        M_nominal = float(len(index_set)) if index_set is not None else ball.predicted_count()
        asym = scale * L * truncation_error_bound(max(M_nominal, 1.0), math.inf, m, T, P)
    except (ParameterError, OverflowError):
        asym = math.nan
    return ErrorBudget(
        alias=alias,
        truncation=trunc,
        tail=tail,
        total=alias + trunc + tail,
        L_eps=L,
        scale=scale,
        coef_l1=coef_l1,
        alias_density=alias_density,
        trunc_density=trunc_density,
        truncation_asymptotic=asym,
    )


def price_basket_call(
    model: FactorModel, market: MarketSpec, ctrl: PricingControl | None = None
) -> PriceQuote:
    """Price ``(S_1 - S_2 - ... - S_n - K)_+`` at maturity.

    Stages: drift calibration, tube, damping, majorant and period, cube
    coverage (double P until ``|b|_inf < P/4``), aliasing certification,
    index set, summation, budget.
    """
    t0 = time.perf_counter()
    ctrl = ctrl or PricingControl()
    if market.n != model.n:
        raise ParameterError(f"market has {market.n} spots, model has {model.n} assets")
    T = market.maturity
    # the tube does not depend on the drift, so damping feasibility is checked first
    tube = analytic_tube(model)
    if ctrl.damping is not None:
        eps = DampingVector(tuple(ctrl.damping))
        if eps.n != model.n:
            raise ParameterError(f"damping has {eps.n} entries, model has {model.n} assets")
        eps.check_tube(tube)
    else:
        eps = find_damping(tube, model.n, rule=ctrl.damping_rule)
    m = calibrate_drift(model, market.rate)
    e = eps.array()
    b = log_moneyness(market)
    aper = _damping_aperture(tube, e)
    M_T = majorant_MT(m, tube, T, _MAJORANT_CTRL, shift=e, a=aper)
    P = select_period(M_T, aper, ctrl.eps_alias)
    if ctrl.P is not None:
        P = max(P, int(ctrl.P))
    while not float(np.max(np.abs(b))) < P / 4.0:
        P *= 2
    M_star = sign_majorant(m, T, aper, shift=e, quad_ctrl=_MAJORANT_CTRL)
    P = certify_period(M_star, aper, ctrl.eps_alias, P)
    R = ctrl.radius(m, T)
    env = modulus_envelope(m, T, e)
    ball = build_ball(m, T, R, P, log_offset=max(0.0, env.log_const))
    idx = enumerate_indices(ball, ctrl.cap)
    re, im, l1 = _summed(m, T, idx.indices, P, e, b, ctrl.threads)
    scale = market.strike * math.exp(-market.rate * T - float(b @ e))
    norm = scale / float(P) ** m.n
    value = norm * re
    resid = norm * im
    if abs(resid) > 1e-8 * (abs(value) + market.strike):
        warnings.warn(f"imaginary residual {resid:.3g} of the pricing sum is large", AccuracyWarning, stacklevel=2)
    budget = error_budget(
        m, market, P, R, eps, ctrl.eps_alias, index_set=idx, coef_l1=l1 / float(P) ** m.n, M_star=M_star
    )
    diag = Diagnostics(
        P=int(P),
        R=float(R),
        M=len(idx),
        eps=eps.eps,
        runtime=time.perf_counter() - t0,
        M_T=float(M_T),
        M_star=float(M_star),
        tube=(tube.a_minus, tube.a_plus),
    )
    return PriceQuote(float(value), float(resid), budget, diag, nonneg=bool(value >= 0.0))


def convergence_study(
    model: FactorModel,
    market: MarketSpec,
    M_list: Sequence[float],
    oracle_value: float | None = None,
    ctrl: PricingControl | None = None,
) -> list[tuple[float, float, float, float]]:
    """Rows ``(M, V_hat_M, |V_hat_M - oracle|, budget_total)`` for each term budget."""
    base = ctrl or PricingControl()
    if oracle_value is None:
        from .oracle import price_quadrature_1d, price_quadrature_nd

        m = calibrate_drift(model, market.rate)
        e = (
            DampingVector(tuple(base.damping))
            if base.damping is not None
            else find_damping(analytic_tube(m), m.n, rule=base.damping_rule)
        )
        if model.n == 1:
            oracle_value = price_quadrature_1d(model, market, e.eps[0])
        elif model.n == 2:
            oracle_value = price_quadrature_nd(model, market, e.eps)
        else:
            raise AccuracyError("no oracle available for n > 2; pass oracle_value")
    rows = []
    for M in M_list:
        c = PricingControl(
            eps_alias=base.eps_alias,
            M=float(M),
            damping=base.damping,
            cap=base.cap,
            threads=base.threads,
            P=base.P,
            damping_rule=base.damping_rule,
        )
        q = price_basket_call(model, market, c)
        rows.append((float(M), q.value, abs(q.value - oracle_value), q.budget.total))
    return rows
