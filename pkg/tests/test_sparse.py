import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kobolbasket import FactorModel, KobolParams, IndexSet, build_ball, cardinality_estimate, char_fn
from kobolbasket import enumerate_indices, radius_for_budget
from kobolbasket.errors import ParameterError, ResourceError
from kobolbasket.sparse import (
    brute_force_indices,
    coefficient_tail_bound,
    kappa_n,
    log_outside_mass,
    outside_mass,
    threshold_index_set,
    volume_aniso_unit_ball,
)

E10 = math.exp(10.0)


def test_volume_known_cases():
    # {|x|^2 + |y|^2 <= 1} written with exponents 1/nu = 2
    assert volume_aniso_unit_ball([0.5, 0.5]) == pytest.approx(math.pi, rel=1e-14)
    assert volume_aniso_unit_ball([1.0, 1.0]) == pytest.approx(2.0)
    assert volume_aniso_unit_ball([0.5]) == pytest.approx(2.0)


def test_kappa_and_radius_round_trip(model1, model2):
    for m in (model1, model2):
        M = cardinality_estimate(m, 0.5, E10)
        assert radius_for_budget(M, m, 0.5) == pytest.approx(E10, rel=1e-12)
        assert M == pytest.approx(kappa_n(m, 0.5) * 10.0 ** (2 * m.n), rel=1e-14)
    with pytest.raises(ParameterError):
        cardinality_estimate(model1, 0.5, 1.0)


def test_pinned_ball_count(model1):
    ball = build_ball(model1, 0.5, E10, 12)
    idx = enumerate_indices(ball)
    assert len(idx) == 209
    assert idx.is_symmetric() and idx.contains_zero()


def test_ball_contains_threshold_set(model1):
    ball = build_ball(model1, 0.5, E10, 12)
    idx = enumerate_indices(ball)
    thr = threshold_index_set(model1, 0.5, 12, 1.0 / E10)
    assert len(thr) == 185
    have = {tuple(r) for r in idx.indices}
    assert all(tuple(r) in have for r in thr.indices)


def test_threshold_set_box_path():
    # nu > 1 goes through the growing box
    m = FactorModel.independent([KobolParams(1.5, 0.5, 0.5, 6.0, -6.0)])
    thr = threshold_index_set(m, 1.0, 8, 1e-6)
    fs = 2 * math.pi / 8
    h = int(np.max(np.abs(thr.indices))) + 3
    grid = np.arange(-h, h + 1)[:, None]
    vals = np.abs(char_fn(m, fs * grid, 1.0))
    assert len(thr) == int(np.sum(vals >= 1e-6))


@pytest.mark.parametrize("n, R, P", [(1, math.exp(8), 9), (2, math.exp(5), 7), (3, math.exp(3), 5)])
def test_enumeration_equals_brute_force(n, R, P):
    ps = [KobolParams(0.4 + 0.2 * s, 1.0, 0.7, 6.0, -5.0) for s in range(n)]
    m = FactorModel.independent(ps)
    ball = build_ball(m, 0.7, R, P)
    idx = enumerate_indices(ball)
    h = [int(1.0 / c) + 2 for c in ball._coef()]
    assert np.array_equal(brute_force_indices(ball, h), idx.indices)
    assert np.array_equal(enumerate_indices(ball).indices, idx.indices)


def test_enumeration_lexicographic(model2):
    idx = enumerate_indices(build_ball(model2, 0.5, math.exp(4), 9))
    rows = [tuple(r) for r in idx.indices]
    assert rows == sorted(rows)


def test_predicted_count_ratio_large_R(model2):
    ball = build_ball(model2, 0.5, math.exp(20.0), 13)
    idx = enumerate_indices(ball)
    assert 0.5 <= len(idx) / ball.predicted_count() <= 2.0


def test_cap(model2):
    ball = build_ball(model2, 0.5, E10, 13)
    with pytest.raises(ResourceError):
        enumerate_indices(ball, cap=100)


def test_build_ball_validation(model1):
    with pytest.raises(ParameterError):
        build_ball(model1, 0.5, 1.0, 12)
    with pytest.raises(ParameterError):
        build_ball(model1, 0.5, E10, 0)


def test_literal_ball_weights(model1):
    ball = build_ball(model1, 0.5, E10, 12, log_offset=0.0)
    d = 2.0 * math.sqrt(math.pi) * math.cos(math.pi / 4) * 2.0
    assert ball.weights[0] == pytest.approx((d * 0.5 / 10.0) ** 2)
    assert ball.contains_physical([1.0 / ball.weights[0] * 0.999])
    assert not ball.contains_physical([1.0 / ball.weights[0] * 1.001])


def test_index_set_save_load(tmp_path, model2):
    idx = enumerate_indices(build_ball(model2, 0.5, math.exp(3), 9))
    path = tmp_path / "idx.csv"
    idx.save(path)
    back = IndexSet.load(path)
    assert back == idx
    assert not back.indices.flags.writeable


def test_index_set_load_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("1,2\n")
    with pytest.raises(ParameterError):
        IndexSet.load(p)
    p.write_text("# n=3 P=4 R=None freq_scale=None\n1,2\n")
    with pytest.raises(ParameterError):
        IndexSet.load(p)


def _brute_outside(cs, nus, L, h):
    grids = np.meshgrid(*[np.arange(-h, h + 1)] * len(cs), indexing="ij")
    cost = sum(c * np.abs(g).astype(float) ** v for c, g, v in zip(cs, grids, nus))
    return float(np.exp(-cost)[cost > L].sum())


@pytest.mark.parametrize(
    "cs, nus, L, h",
    [((2.0,), (0.7,), 8.0, 200000), ((0.7, 1.3), (0.5, 0.8), 5.0, 3000), ((0.9, 1.1, 2.0), (0.6, 0.9, 1.2), 4.0, 150)],
)
def test_outside_mass_bounds_lattice_sum(cs, nus, L, h):
    exact = _brute_outside(cs, nus, L, h)
    got = outside_mass(cs, nus, L)
    assert exact <= got <= exact * 1.1


def test_outside_mass_deep_level_is_finite():
    v = log_outside_mass((9.6,), (0.95,), 1200.0)
    assert math.isfinite(v) and -1300 < v < -1190


def test_coefficient_tail_bound_dominates(model1):
    ball = build_ball(model1, 0.5, E10, 12)
    idx = enumerate_indices(ball)
    have = {int(r[0]) for r in idx.indices}
    fs = ball.freq_scale
    m = np.arange(-20000, 20001)
    out = np.array([k not in have for k in m])
    actual = np.sum(np.abs(char_fn(model1, fs * m[out][:, None], 0.5))) / 12
    bound = coefficient_tail_bound(model1, 0.5, ball)
    assert actual <= bound
    assert bound == pytest.approx(9.16421089389e-05, rel=1e-6)


@settings(max_examples=40, deadline=None)
@given(
    st.integers(1, 3),
    st.floats(0.3, 1.8).filter(lambda x: abs(x - 1.0) > 0.05),
    st.floats(0.2, 2.0),
    st.integers(2, 9),
    st.floats(0.5, 3.0),
)
def test_index_set_properties(n, nu, T, P, lnR):
    m = FactorModel.independent([KobolParams(nu, 1.0, 1.0, 5.0, -5.0)] * n)
    ball = build_ball(m, T, math.exp(lnR), P, log_offset=0.5)
    if ball.predicted_count() > 1e5:
        return
    idx = enumerate_indices(ball)
    assert idx.is_symmetric() and idx.contains_zero()
    assert np.all(ball.contains(idx.indices))
    h = [int(1.0 / c) + 2 for c in ball._coef()]
    if math.prod(2 * x + 1 for x in h) <= 2_000_000:
        assert np.array_equal(brute_force_indices(ball, h), idx.indices)
