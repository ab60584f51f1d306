"""Anisotropic frequency balls and their lattice points.

The retained frequencies of the pricing sum are the integers ``m`` with

    sum_s |w_s * freq_scale * m_s|^nu_s <= 1,   w_s = (d_s T / L)^(1/nu_s),

where ``L = ln R`` (plus, by default, the log of the envelope constant so the
ball really contains ``{|Phi| >= 1/R}``).  Equivalently
``sum_s c_s |m_s|^nu_s <= L`` with ``c_s = T d_s freq_scale^nu_s``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import gammaincc, gammaln

from .errors import ParameterError, ResourceError, UnsupportedRegimeError
from .kobol import FactorModel, char_fn, decay_rate, modulus_envelope

__all__ = [
    "DEFAULT_CAP",
    "AnisoBall",
    "IndexSet",
    "build_ball",
    "enumerate_indices",
    "brute_force_indices",
    "volume_aniso_unit_ball",
    "kappa_n",
    "radius_for_budget",
    "cardinality_estimate",
    "truncation_error_bound",
    "outside_mass",
    "log_outside_mass",
    "coefficient_tail_bound",
    "threshold_index_set",
]

DEFAULT_CAP = 10**8
_BOUNDARY_SLACK = 1e-12


@dataclass(frozen=True)
class AnisoBall:
    """``{x : sum_s |w_s x_s|^nu_s <= 1}`` sampled at ``x = freq_scale * m``."""

    nu: tuple[float, ...]
    weights: tuple[float, ...]
    R: float
    freq_scale: float
    log_level: float  # L = ln R + offset
    P: int | None = None

    @property
    def n(self) -> int:
        return len(self.nu)

    def _coef(self) -> np.ndarray:
        return np.asarray(self.weights) * self.freq_scale

    def gauge(self, m) -> np.ndarray:
        """``sum_s |w_s fs m_s|^nu_s`` summed in coordinate order."""
        m = np.asarray(m, dtype=float)
        c = self._coef()
        acc = np.zeros(m.shape[:-1])
        for s in range(self.n):
            acc = acc + np.abs(c[s] * m[..., s]) ** self.nu[s]
        return acc

    def contains(self, m) -> np.ndarray | bool:
        out = self.gauge(m) <= 1.0
        return bool(out) if np.ndim(out) == 0 else out

    def contains_physical(self, x) -> np.ndarray | bool:
        """Membership of a physical frequency ``x`` (not an index)."""
        x = np.asarray(x, dtype=float)
        acc = np.zeros(x.shape[:-1])
        for s in range(self.n):
            acc = acc + np.abs(self.weights[s] * x[..., s]) ** self.nu[s]
        out = acc <= 1.0
        return bool(out) if np.ndim(out) == 0 else out

    def predicted_count(self) -> float:
        """Volume of the ball measured in index units."""
        inv = [1.0 / v for v in self.nu]
        return volume_aniso_unit_ball(inv) * math.prod(1.0 / c for c in self._coef())


@dataclass(frozen=True)
class IndexSet:
    """Lexicographically sorted, negation-closed integer vectors."""

    indices: np.ndarray
    P: int | None = None
    R: float | None = None
    freq_scale: float | None = None
    ball: AnisoBall | None = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(np.asarray(self.indices, dtype=np.int64))
        if arr.ndim != 2:
            raise ParameterError("indices must be a 2-d array (M, n)")
        arr.setflags(write=False)
        object.__setattr__(self, "indices", arr)

    def __len__(self) -> int:
        return self.indices.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, IndexSet):
            return NotImplemented
        return (
            np.array_equal(self.indices, other.indices)
            and self.P == other.P
            and self.R == other.R
            and self.freq_scale == other.freq_scale
        )

    @property
    def n(self) -> int:
        return self.indices.shape[1]

    def is_symmetric(self) -> bool:
        neg = -self.indices[::-1]
        return bool(np.array_equal(neg, self.indices))

    def contains_zero(self) -> bool:
        return bool(np.any(np.all(self.indices == 0, axis=1)))

    def save(self, path: str | Path) -> None:
        head = f"# n={self.n} P={self.P!r} R={self.R!r} freq_scale={self.freq_scale!r}\n"
        with open(path, "w", encoding="ascii") as fh:
            fh.write(head)
            np.savetxt(fh, self.indices, fmt="%d", delimiter=",")

    @classmethod
    def load(cls, path: str | Path) -> "IndexSet":
        with open(path, encoding="ascii") as fh:
            head = fh.readline()
            if not head.startswith("#"):
                raise ParameterError(f"{path}: missing index-set header")
            meta = dict(tok.split("=", 1) for tok in head[1:].split())
            n = int(meta["n"])
            data = np.loadtxt(fh, dtype=np.int64, delimiter=",", ndmin=2)
        if data.size == 0:
            data = np.zeros((0, n), dtype=np.int64)
        if data.shape[1] != n:
            raise ParameterError(f"{path}: header says n={n}, rows have {data.shape[1]} columns")

        def num(key, kind):
            v = meta.get(key, "None")
            return None if v == "None" else kind(v)

        return cls(data, P=num("P", int), R=num("R", float), freq_scale=num("freq_scale", float))


def _power_nus(model: FactorModel) -> list[float]:
    nus = [p.nu for p in model.idio]
    for nu in nus:
        if not (0.0 < nu < 1.0 or 1.0 < nu < 2.0):
            raise UnsupportedRegimeError(
                f"anisotropic ball needs every nu_s in (0,1)u(1,2), got {nu}; use the rectangular fallback"
            )
    return nus


def build_ball(
    model: FactorModel,
    T: float,
    R: float,
    P: int,
    log_offset: float | None = None,
    freq_scale: float | None = None,
) -> AnisoBall:
    """Ball at level ``1/R``.

    ``log_offset`` defaults to the log of the modulus-envelope constant on the
    real axis, which makes ``{|Phi(fs*m)| >= 1/R}`` a subset of the ball; pass
    ``0.0`` for the bare ``d_s T / ln R`` weights.
    """
    if not R > 1.0:
        raise ParameterError(f"R must exceed 1, got {R}")
    if int(P) != P or P < 1:
        raise ParameterError(f"P must be a positive integer, got {P}")
    nus = _power_nus(model)
    if log_offset is None:
        log_offset = max(0.0, modulus_envelope(model, T).log_const)
    level = math.log(R) + float(log_offset)
    if not level > 0.0:
        raise ParameterError("ball level ln R + offset must be positive")
    weights = tuple((decay_rate(p) * T / level) ** (1.0 / nu) for p, nu in zip(model.idio, nus))
    fs = 2.0 * math.pi / P if freq_scale is None else float(freq_scale)
    return AnisoBall(tuple(nus), weights, float(R), fs, level, int(P))


def enumerate_indices(ball: AnisoBall, cap: float = DEFAULT_CAP) -> IndexSet:
    """All integer ``m`` in the ball, in lexicographic order.

    Coordinate slabs are generated level by level; the axis extents carry one
    index of slack and membership is decided by the same partial sums as
    :meth:`AnisoBall.gauge`, so the result equals a brute-force scan.
    """
    est = ball.predicted_count()
    if est > cap:
        raise ResourceError(f"estimated index count {est:.3g} exceeds cap {cap:.3g}")
    c = ball._coef()
    prefix = np.zeros((1, 0), dtype=np.int64)
    partial = np.zeros(1)
    for s in range(ball.n):
        room = np.clip(1.0 - partial, 0.0, None)
        ext = np.floor(room ** (1.0 / ball.nu[s]) / c[s]).astype(np.int64) + 1
        counts = 2 * ext + 1
        total = int(counts.sum())
        if total > 4 * cap + 64:
            raise ResourceError(f"index enumeration would visit {total} candidates (cap {cap:.3g})")
        owner = np.repeat(np.arange(counts.size), counts)
        starts = np.repeat(np.cumsum(counts) - counts, counts)
        m = np.arange(total, dtype=np.int64) - starts - np.repeat(ext, counts)
        new_partial = partial[owner] + np.abs(c[s] * m.astype(float)) ** ball.nu[s]
        keep = new_partial <= 1.0
        prefix = np.concatenate([prefix[owner[keep]], m[keep, None]], axis=1)
        partial = new_partial[keep]
    return IndexSet(prefix, P=ball.P, R=ball.R, freq_scale=ball.freq_scale, ball=ball)


def brute_force_indices(ball: AnisoBall, half_box: Sequence[int]) -> np.ndarray:
    """Box scan over ``prod [-h_s, h_s]``; used to cross-check enumeration."""
    axes = [np.arange(-h, h + 1) for h in half_box]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(half_box))
    return grid[ball.contains(grid)]


def volume_aniso_unit_ball(nu: Sequence[float]) -> float:
    """``2^n prod Gamma(1+nu_s) / Gamma(1+sum nu_s)``.

    This is the volume of ``{sum_s |x_s|^(1/nu_s) <= 1}``; the ball with
    exponents ``nu_s`` therefore has volume ``volume_aniso_unit_ball(1/nu)``.
    """
    nu = np.asarray(nu, dtype=float)
    if nu.size == 0 or np.any(nu <= 0.0):
        raise ParameterError("all nu_s must be positive")
    return float(np.exp(nu.size * math.log(2.0) + np.sum(gammaln(1.0 + nu)) - gammaln(1.0 + nu.sum())))


def kappa_n(model: FactorModel, T: float) -> float:
    """Cardinality constant: the ball count is about ``kappa_n (ln R)^(sum 1/nu_s)``."""
    nus = _power_nus(model)
    inv = [1.0 / v for v in nus]
    scale = math.prod((decay_rate(p) * T) ** (-1.0 / nu) for p, nu in zip(model.idio, nus))
    return volume_aniso_unit_ball(inv) * scale


def _sigma(model: FactorModel) -> float:
    return sum(1.0 / v for v in _power_nus(model))


def cardinality_estimate(model: FactorModel, T: float, R: float) -> float:
    """Nominal term count ``kappa_n (ln R)^(sum 1/nu_s)``."""
    if not R > 1.0:
        raise ParameterError("R must exceed 1")
    return kappa_n(model, T) * math.log(R) ** _sigma(model)


def radius_for_budget(M: float, model: FactorModel, T: float) -> float:
    """Inverse of :func:`cardinality_estimate`."""
    k = kappa_n(model, T)
    if not M > 1e-12 * k:
        raise ParameterError(f"term budget M={M} too small (kappa_n={k:.6g})")
    return math.exp((M / k) ** (1.0 / _sigma(model)))


def truncation_error_bound(
    M: float,
    p_norm: float,
    model: FactorModel,
    T: float,
    P: int,
    kappa: float | None = None,
) -> float:
    """Asymptotic M-term bound ``eta_n exp(-(M/kappa)^(1/S)) M^((1-S)^-1 / p')``, ``S = sum 1/nu``.

    Diagnostic only: the exponent on ``M`` is taken at face value.  The
    certified truncation term used by the pricer is :func:`coefficient_tail_bound`.
    """
    if not (p_norm >= 2.0):
        raise ParameterError(f"p_norm must lie in [2, inf], got {p_norm}")
    if not M > 0:
        raise ParameterError("M must be positive")
    n = model.n
    S = _sigma(model)
    k = kappa_n(model, T) if kappa is None else float(kappa)
    pc = 1.0 if math.isinf(p_norm) else p_norm / (p_norm - 1.0)
    e_n = P ** (-n / pc) * (k * S / pc) ** (1.0 / pc)
    eta = e_n * k ** ((S - 1.0) / pc)
    return eta * math.exp(-((M / k) ** (1.0 / S))) * M ** ((1.0 / (1.0 - S)) / pc)


def _log_upper_gamma(a: float, x: np.ndarray) -> np.ndarray:
    # log Gamma(a, x), switching to the bound x^(a-1) e^-x / (1 - (a-1)/x) once gammaincc underflows
    x = np.asarray(x, dtype=float)
    q = gammaincc(a, x)
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = math.lgamma(a) + np.log(np.maximum(q, 1e-300))
        corr = np.where(a <= 1.0, 1.0, 1.0 / (1.0 - (a - 1.0) / np.maximum(x, a)))
        asym = (a - 1.0) * np.log(x) - x + np.log(corr)
    return np.where(q > 1e-280, direct, asym)


def _tail_1d(c: float, nu: float, K: np.ndarray, L=0.0, explicit: int = 32) -> np.ndarray:
    """Upper bound of ``e^L sum_{m > K} exp(-c m^nu)`` for integer arrays ``K >= -1``."""
    K = np.asarray(K, dtype=float)
    L = np.broadcast_to(np.asarray(L, dtype=float), K.shape)
    j = np.arange(1, explicit + 1, dtype=float)
    terms = np.exp(L[..., None] - c * (K[..., None] + j) ** nu).sum(axis=-1)
    start = K + explicit
    a = 1.0 / nu
    integral = np.exp(L + math.log(a) - a * math.log(c) + _log_upper_gamma(a, c * start**nu))
    return terms + integral


def _full_1d(c: float, nu: float) -> float:
    # upper bound of sum over all integers
    return float(1.0 + 2.0 * _tail_1d(c, nu, np.array([0.0]))[0])


def _inside_extent(c: float, nu: float, L: np.ndarray) -> np.ndarray:
    # largest K >= 0 with c K^nu <= L (1 - slack); -1 when even 0 fails
    Lp = L * (1.0 - _BOUNDARY_SLACK)
    K = np.floor(np.where(Lp > 0, Lp / c, 0.0) ** (1.0 / nu)).astype(np.int64)
    K = np.where(c * K.astype(float) ** nu > Lp, K - 1, K)
    K = np.where(c * (K + 1).astype(float) ** nu <= Lp, K + 1, K)
    return np.where(Lp >= 0, K, -1)


def _outside(cs: Sequence[float], nus: Sequence[float], L: np.ndarray) -> np.ndarray:
    # scaled by e^L so that deep levels neither underflow nor lose the bound
    c, nu = cs[0], nus[0]
    K = _inside_extent(c, nu, L)
    # all m_0 with |m_0| > K contribute the full mass of the remaining coordinates
    out_tail = 2.0 * _tail_1d(c, nu, np.maximum(K, 0), L)
    out_tail = np.where(K < 0, out_tail + np.exp(np.minimum(L, 0.0)), out_tail)
    if len(cs) == 1:
        return out_tail
    rest_full = math.prod(_full_1d(cc, vv) for cc, vv in zip(cs[1:], nus[1:]))
    total = out_tail * rest_full
    Kc = np.maximum(K, -1)
    counts = 2 * Kc + 1
    counts = np.where(K < 0, 0, counts)
    if counts.sum() == 0:
        return total
    owner = np.repeat(np.arange(L.size), counts)
    starts = np.repeat(np.cumsum(counts) - counts, counts)
    m = np.arange(int(counts.sum())) - starts - np.repeat(Kc, counts)
    cost = c * np.abs(m).astype(float) ** nu
    Lsub = np.maximum(L[owner] - cost, 0.0)
    sub = _outside(cs[1:], nus[1:], Lsub) * np.exp(L[owner] - cost - Lsub)
    return total + np.bincount(owner, weights=sub, minlength=L.size)


def log_outside_mass(cs: Sequence[float], nus: Sequence[float], L: float) -> float:
    """Log of :func:`outside_mass`, finite even where the mass underflows."""
    L = max(float(L), 0.0)
    return math.log(float(_outside(list(cs), list(nus), np.array([L]))[0])) - L


def outside_mass(cs: Sequence[float], nus: Sequence[float], L: float) -> float:
    """Upper bound of ``sum_{m : sum c_s|m_s|^nu_s > L} exp(-sum c_s |m_s|^nu_s)``.

    Boundary points within a relative ``1e-12`` of the level are counted as
    outside, so the result stays an upper bound despite rounding.
    """
    return math.exp(log_outside_mass(cs, nus, L))


def coefficient_tail_bound(
    model: FactorModel, T: float, ball: AnisoBall, shift=None
) -> float:
    """Certified ``P^-n sum_{m not in ball} |Phi(fs m + i shift)|``.

    Uses the modulus envelope at the contour ``shift`` and the lattice mass of
    the stretched exponential outside the ball.
    """
    env = modulus_envelope(model, T, shift)
    fs = ball.freq_scale
    cs = [r * fs**nu for r, nu in zip(env.rates, env.nus)]
    P = ball.P if ball.P is not None else 2.0 * math.pi / fs
    log_b = env.log_const + log_outside_mass(cs, env.nus, ball.log_level) - model.n * math.log(P)
    return math.exp(log_b) if log_b < 700.0 else math.inf


def _threshold_filter(model, T, fs, rho, cand: np.ndarray) -> np.ndarray:
    vals = np.abs(char_fn(model, fs * cand.astype(float), T))
    return cand[vals >= rho]


def threshold_index_set(
    model: FactorModel,
    T: float,
    P: int,
    rho: float,
    cap: float = DEFAULT_CAP,
    freq_scale: float | None = None,
) -> IndexSet:
    """``{m : |Phi(fs m)| >= rho}``.

    For nu in (0,1) the candidates come from the envelope ball at level
    ``ln(1/rho)``, which provably contains the set.  Otherwise a box is grown
    by doubling until no retained point touches its boundary.
    """
    if not 0.0 < rho < 1.0:
        raise ParameterError("rho must lie in (0, 1)")
    fs = 2.0 * math.pi / P if freq_scale is None else float(freq_scale)
    R = 1.0 / rho
    n = model.n
    if all(0.0 < p.nu < 1.0 for p in model.idio):
        ball = build_ball(model, T, R, P, freq_scale=fs)
        cand = enumerate_indices(ball, cap).indices
        kept = _threshold_filter(model, T, fs, rho, cand)
        return IndexSet(kept, P=P, R=R, freq_scale=fs)
    h = 4
    while True:
        if (2 * h + 1) ** n > cap:
            raise ResourceError(f"threshold box of half width {h} exceeds cap {cap:.3g}")
        axes = [np.arange(-h, h + 1)] * n
        cand = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
        kept = _threshold_filter(model, T, fs, rho, cand)
        if kept.size == 0 or np.max(np.abs(kept)) < h:
            return IndexSet(kept, P=P, R=R, freq_scale=fs)
        h *= 2
