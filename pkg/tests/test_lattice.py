import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from kobolbasket import FactorModel, KobolParams, analytic_tube, calibrate_drift, char_fn
from kobolbasket import build_ball, enumerate_indices, eval_density, lattice_density, majorant_MT, select_period
from kobolbasket.errors import DomainError, ParameterError
from kobolbasket.lattice import (
    AliasBudget,
    aliasing_sup_bound,
    build_density_approximant,
    certify_period,
    cosh_series_bound,
    cosh_series_direct,
    density_error_bound,
    density_table,
    sign_majorant,
)
from kobolbasket.oracle import density_quadrature

E10 = math.exp(10.0)


@pytest.fixture(scope="module")
def density1():
    m = calibrate_drift(FactorModel.independent([KobolParams(0.5, 1, 1, 8, -4)]), 0.03)
    approx, budget = lattice_density(m, 0.5, 1e-8, E10)
    return m, approx, budget


def _majorant_reference(model, T, a):
    # (1/2)(2 pi)^-1 int |Phi(v+ia) + Phi(v-ia)| dv, even in v
    def f(v):
        return 0.5 * abs(char_fn(model, [v + 1j * a], T) + char_fn(model, [v - 1j * a], T))

    total = 0.0
    edges = [0, 1, 4, 16, 64, 256, 1024, 4096]
    for lo, hi in zip(edges[:-1], edges[1:]):
        total += quad(f, lo, hi, limit=400, epsabs=1e-14, epsrel=1e-11)[0]
    return 2.0 * total / (2.0 * math.pi)


def test_majorant_example():
    m = FactorModel.independent([KobolParams(0.5, 1.0, 1.0, 5.0, -5.0)])
    got = majorant_MT(m, analytic_tube(m), 1.0, a=4.0)
    assert got == pytest.approx(1.800388721, rel=1e-6)
    assert got == pytest.approx(_majorant_reference(m, 1.0, 4.0), rel=1e-6)


def test_majorant_parameter_sweep():
    for c in (0.5, 1.0, 2.0):
        m = FactorModel.independent([KobolParams(0.5, c, c, 5.0, -5.0)])
        got = majorant_MT(m, analytic_tube(m), 1.0, a=2.0)
        assert got == pytest.approx(_majorant_reference(m, 1.0, 2.0), rel=1e-6)


def test_majorant_dominates_density(density1):
    m, approx, budget = density1
    tube = analytic_tube(m)
    MT = majorant_MT(m, tube, 0.5)
    a = tube.symmetric
    rng = np.random.default_rng(11)
    for x in rng.uniform(-4, 4, 100):
        p = density_quadrature(m, 0.5, [x])
        assert p <= MT / math.cosh(a * x) * (1 + 1e-9) + 1e-14


def test_sign_majorant_dominates_density(density1):
    m, _, _ = density1
    Ms = sign_majorant(m, 0.5, [2.0], shift=[-1.5])
    for x in np.linspace(-4, 4, 17):
        p = density_quadrature(m, 0.5, [x])
        assert math.exp(1.5 * x) * p <= Ms * math.exp(-2.0 * abs(x)) * (1 + 1e-9)


def test_cosh_bound_dominates_direct():
    for P in (1, 2, 5, 20):
        for a in ([0.3], [2.0], [1.0, 0.5], [0.7, 1.1, 3.0]):
            assert cosh_series_direct(P, a) <= cosh_series_bound(P, a)


def test_select_period_example():
    P = select_period(1.0, [2.0], 1e-8)
    assert cosh_series_direct(P, [2.0]) <= 1e-8
    assert cosh_series_bound(P - 1, [2.0]) > 1e-8


def test_select_period_edge_cases():
    assert select_period(1.0, [2.0], 1e3) == 1
    with pytest.raises(ParameterError):
        select_period(1.0, [0.0], 1e-8)
    with pytest.raises(ParameterError):
        select_period(1.0, [1.0], 0.0)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(0.2, 5.0), min_size=1, max_size=3),
    st.floats(0.1, 100.0),
    st.floats(1e-14, 1e-2),
    st.floats(1.0, 10.0),
)
def test_select_period_monotone(a, MT, eps, factor):
    P = select_period(MT, a, eps)
    assert MT * cosh_series_direct(P, a) <= eps
    assert select_period(MT, a, eps * factor) <= P
    assert select_period(MT, [x * factor for x in a], eps) <= P


def test_certify_period():
    P = certify_period(2.0, [3.0], 1e-8, 3)
    assert aliasing_sup_bound(2.0, P, [3.0]) <= 1e-8
    assert aliasing_sup_bound(2.0, P - 1, [3.0]) > 1e-8
    assert certify_period(2.0, [3.0], 1e-8, P + 4) == P + 4


def test_density_error_bound_examples():
    assert density_error_bound(AliasBudget(1.0, 1e-6, 10, (1.0, 1.0)), math.inf) == 1e-6
    assert density_error_bound(AliasBudget(1.0, 1e-6, 10, (1.0, 1.0)), 2.0) == pytest.approx(1e-5)
    assert density_error_bound(AliasBudget(1.0, 1e-6, 10, (1.0, 1.0)), 1.0) == pytest.approx(1e-4)
    with pytest.raises(ParameterError):
        density_error_bound(AliasBudget(1.0, 1e-6, 10, (1.0,)), 0.5)


def test_density_pinned_values(density1):
    m, approx, budget = density1
    assert budget.P == 12 and len(approx.indices) == 209
    allowed = budget.eps_alias + approx.truncation
    for x in (-0.5, 0.0, 0.3):
        assert abs(eval_density(approx, [x]) - density_quadrature(m, 0.5, [x])) <= allowed


def test_density_mass_and_reality(density1):
    _, approx, _ = density1
    h = approx.P / 2
    val = quad(lambda x: eval_density(approx, [x]), -h, h, limit=400, epsabs=1e-13)[0]
    assert val == pytest.approx(1.0, abs=1e-12)
    _, im = eval_density(approx, np.linspace(-5, 5, 11)[:, None], return_imag=True)
    assert np.max(np.abs(im)) < 1e-10


def test_density_periodicity_and_domain(density1):
    _, approx, _ = density1
    h = approx.P / 2
    assert eval_density(approx, [-h]) == pytest.approx(eval_density(approx, [h]), abs=1e-14)
    with pytest.raises(DomainError):
        eval_density(approx, [h + 0.01])
    with pytest.raises(ParameterError):
        eval_density(approx, [0.0, 0.0])


def test_density_two_assets():
    p = KobolParams(0.5, 1, 1, 8, -4)
    m = calibrate_drift(FactorModel.independent([p, p]), 0.03)
    approx, budget = lattice_density(m, 0.5, 1e-6, math.exp(6.0))
    x = np.array([0.1, -0.2])
    ref = density_quadrature(m, 0.5, x)
    assert abs(eval_density(approx, x) - ref) <= budget.eps_alias + approx.truncation
    # independent assets: the joint density factorizes
    m1 = FactorModel.independent([calibrate_drift(FactorModel.independent([p]), 0.03).idio[0]])
    prod = density_quadrature(m1, 0.5, [0.1]) * density_quadrature(m1, 0.5, [-0.2])
    assert ref == pytest.approx(prod, rel=1e-8)


def test_approximant_box_and_symmetry(model1):
    approx = build_density_approximant(model1, 0.5, 10, 5)
    assert len(approx.indices) == 11
    assert approx.coefficient([0]) == 0.1
    assert approx.coefficient([3]) == np.conj(approx.coefficient([-3]))
    with pytest.raises(KeyError):
        approx.coefficient([6])
    with pytest.raises(ParameterError):
        build_density_approximant(model1, 0.5, 2.5, 5)


def test_approximant_rejects_asymmetric_set(model1):
    from kobolbasket import IndexSet

    with pytest.raises(ParameterError):
        build_density_approximant(model1, 0.5, 10, IndexSet(np.array([[0], [1]])))


def test_density_table_format(density1):
    _, approx, _ = density1
    text = density_table(approx, [[0.0], [0.5]])
    lines = text.strip().split("\n")
    assert lines[0] == "x_1,density,imag_residual"
    assert len(lines) == 3
    x, d, im = lines[1].split(",")
    assert float(d) == pytest.approx(eval_density(approx, [0.0]), rel=1e-11)


def test_enumerated_set_feeds_approximant(model2):
    ball = build_ball(model2, 0.5, math.exp(4), 9)
    approx = build_density_approximant(model2, 0.5, 9, enumerate_indices(ball))
    assert eval_density(approx, [0.0, 0.0]) > 0
