import math

import numpy as np
import pytest

from conftest import (ALPHA_MAX_A, ALPHA_MIN_A, GOLDEN, LOG3, alpha_a, beta_a, beta_star_a,
                      make_system)
from mfzeta.errors import DegenerateTarget
from mfzeta.graph import admissible_words, word_array
from mfzeta.ldp import boltzmann_empirical
from mfzeta.multifractal import (BetaFunction, beta, boltzmann_constant, fixed_target_root, legendre,
                                 mf_pressure, qualifying, r_monotonicity, restricted_log_sum,
                                 restricted_sum, restricted_zeta_radius, sandwich, sandwich_radius,
                                 shrinking_target_root, spectrum_curve)
from mfzeta.birkhoff import pressure_over_target
from mfzeta.potentials import (Potential, RatioMap, birkhoff_bounds, builtin_lambda, builtin_phi,
                               log_diameter)
from mfzeta.targets import TargetSet
from mfzeta.thermo import bowen_root, perron_of, pressure_exact, pressure_finite, zeta_radius

DIM_A = math.log(2) / LOG3


@pytest.fixture(scope="module")
def U_a(sys_a):
    return RatioMap.local_dimension(sys_a)


@pytest.fixture(scope="module")
def b_a(sys_a):
    return BetaFunction(sys_a)


# β and Legendre

def test_beta_examples(sys_a):
    assert beta(sys_a, 0) == pytest.approx(DIM_A, abs=1e-12)
    assert abs(beta(sys_a, 1)) < 1e-12
    assert beta(sys_a, 2) == pytest.approx(math.log(0.68) / LOG3, abs=1e-12)
    assert beta(sys_a, 2) == pytest.approx(-0.35105, abs=1e-5)


@pytest.mark.parametrize("q", [-3, -1.5, -0.2, 0.4, 2.5, 6])
def test_beta_closed_form(b_a, q):
    assert b_a(q) == pytest.approx(beta_a(q), abs=1e-11)
    assert b_a.alpha(q) == pytest.approx(alpha_a(q), abs=1e-11)


def test_beta_one_zero_sys_b(sys_b):
    assert abs(beta(sys_b, 1)) < 1e-12


def test_beta_convex_decreasing(b_a):
    qs = np.linspace(-4, 4, 33)
    v = np.array([b_a(q) for q in qs])
    assert np.all(np.diff(v) < 0) and np.all(np.diff(v, 2) >= -1e-9)


def test_alpha_range(b_a):
    lo, hi = b_a.alpha_range()
    assert lo == pytest.approx(ALPHA_MIN_A, abs=1e-14)
    assert hi == pytest.approx(ALPHA_MAX_A, abs=1e-14)


def test_legendre_tangency(b_a):
    a1 = b_a.alpha(1.0)
    assert legendre(b_a, a1).value == pytest.approx(a1, abs=1e-9)
    a0 = b_a.alpha(0.0)
    assert legendre(b_a, a0).value == pytest.approx(DIM_A, abs=1e-9)
    assert legendre(b_a, 0.1).empty
    assert legendre(b_a, 0.1).value == -math.inf


@pytest.mark.parametrize("a", [0.25, 0.5, 0.8, 1.2, 1.4])
def test_legendre_closed_form(b_a, a):
    assert legendre(b_a, a).value == pytest.approx(beta_star_a(a), abs=1e-8)


def test_spectrum_curve_at_alpha_q(sys_a, b_a):
    qs = [-2, -1, 0, 1, 2]
    curve = spectrum_curve(sys_a, [b_a.alpha(q) for q in qs], b_a)
    for q, v in zip(qs, curve.values):
        assert v == pytest.approx(b_a.tangent_value(q), abs=1e-7)
    assert curve.is_concave()


def test_spectrum_curve_uniform_degenerate():
    s = make_system([("e1", "a", "a", 1 / 3, 0.5), ("e2", "a", "a", 1 / 3, 0.5)])
    curve = spectrum_curve(s, [0.5, DIM_A, 0.7])
    assert list(curve.empty) == [True, False, True]
    assert curve.values[1] == pytest.approx(DIM_A, abs=1e-12)


def test_spectrum_curve_sys_b_max(sys_b):
    b = BetaFunction(sys_b)
    lo, hi = b.alpha_range()
    curve = spectrum_curve(sys_b, np.linspace(lo + 1e-3, hi - 1e-3, 17), b)
    top = max(curve.values.max(), legendre(b, b.alpha(0.0)).value)
    assert top == pytest.approx(bowen_root(sys_b, builtin_lambda(sys_b)), abs=1e-9)
    assert curve.is_concave()
    assert np.all(curve.values <= bowen_root(sys_b, builtin_lambda(sys_b)) + 1e-12)


def test_spectrum_csv(sys_a):
    text = spectrum_curve(sys_a, [0.1, 0.5]).to_csv()
    lines = text.splitlines()
    assert lines[0] == "alpha,value,width,empty"
    assert lines[1].startswith("0.1,-inf,") and lines[1].endswith(",1")


# restricted sums

def test_restricted_sum_whole(sys_b):
    phi = Potential(sys_b, 1, [0.2, -0.4, 0.1])
    U = RatioMap.local_dimension(sys_b)
    for n in (1, 5, 9):
        assert restricted_sum(sys_b, phi, TargetSet.everything(), U, n) == pytest.approx(
            math.exp(pressure_finite(sys_b, phi, n).value * n), rel=1e-12)


def test_restricted_singleton_alpha_max(sys_a, U_a):
    mask = qualifying(U_a, TargetSet.singleton(ALPHA_MAX_A), word_array(sys_a, 5))
    assert mask.sum() == 1 and mask[0]


def test_restricted_sum_narrow_empty(sys_a, U_a):
    C = TargetSet.interval(0.205, 0.21)
    assert restricted_sum(sys_a, builtin_phi(sys_a), C, U_a, 3) == 0.0
    assert restricted_log_sum(sys_a, builtin_phi(sys_a), C, U_a, 3) == -math.inf


def test_restricted_sum_M_source(sys_b):
    # indicator of e2 as a mean: e2 and e3 both complete to the e2 e3 cycle
    f = Potential.edge_indicator(sys_b, ["e2"])
    U = RatioMap.mean(f)
    C = TargetSet.interval(0.5, 0.5)
    w = word_array(sys_b, 1)
    assert list(qualifying(U, C, w, "M")) == [False, True, True]
    assert list(qualifying(U, C, w, "L")) == [False, False, False]


def test_mf_pressure_whole(sys_b):
    phi = builtin_phi(sys_b)
    mp = mf_pressure(sys_b, phi, TargetSet.everything(), None, [4, 8, 16])
    assert abs(mp.values[-1] - pressure_exact(sys_b, phi).value) < 0.1
    assert not mp.empty


def test_mf_pressure_ball(sys_a, U_a, b_a):
    t = beta_star_a(b_a.alpha(2.0))
    phi = builtin_lambda(sys_a) * t
    C = TargetSet.ball(b_a.alpha(2.0), 0.05)
    ladder = list(range(6, 17, 2))
    mp = mf_pressure(sys_a, phi, C, U_a, ladder)
    ref = pressure_over_target(sys_a, phi, U_a, C)
    # near α_min only one e1-count fits the ball at these n, so the sequence
    # sits below the limit; it must never exceed it by more than the
    # log(n+1)/n count of occupation types
    assert np.isfinite(mp.values[-1])
    for n, v in zip(ladder, mp.values):
        assert v <= ref + math.log(n + 1) / n


def test_mf_pressure_empty(sys_a, U_a):
    mp = mf_pressure(sys_a, builtin_phi(sys_a), TargetSet.interval(3, 4), U_a, [2, 4])
    assert mp.empty and all(v == -math.inf for v in mp.values)


def test_mf_pressure_ladder(sys_a, U_a):
    with pytest.raises(ValueError):
        mf_pressure(sys_a, builtin_phi(sys_a), TargetSet.everything(), U_a, [4, 2])


def test_r_monotone(sys_a, U_a):
    vals, ok = r_monotonicity(sys_a, builtin_phi(sys_a), TargetSet.singleton(0.8), U_a, 10,
                              [0.0, 0.01, 0.05, 0.2])
    assert ok and vals[0] <= vals[-1]


def test_diameter_and_derivative_constraints_agree(sys_b):
    # unit vertex diameters: log diam K_i is the Birkhoff sum of Λ, so the
    # two constraints select the same words
    phi = builtin_phi(sys_b)
    U = RatioMap.local_dimension(sys_b)
    for n in range(8, 13):
        words = word_array(sys_b, n)
        num, _ = birkhoff_bounds(phi, words)
        by_diam = num / log_diameter(sys_b, words)
        for C in (TargetSet.interval(0.2, 0.4), TargetSet.interval(0.31, 0.52)):
            lo, hi = C.bounds()
            mask_diam = (by_diam >= lo[0]) & (by_diam <= hi[0])
            assert np.array_equal(mask_diam, qualifying(U, C, words))


# Bowen roots on targets

def test_shrinking_alpha_one(sys_a, U_a, b_a):
    a1 = b_a.alpha(1.0)
    res = shrinking_target_root(sys_a, U_a, a1, [0.02], [16])
    assert abs(res.value - a1) < 0.05
    assert res.reference == pytest.approx(a1, abs=1e-7)


def test_shrinking_alpha_zero(sys_a, U_a, b_a):
    res = shrinking_target_root(sys_a, U_a, b_a.alpha(0.0), [0.05, 0.02], [12, 16])
    assert abs(res.value - DIM_A) < 0.05
    assert len(res.rows) == 4


def test_shrinking_outside(sys_a, U_a):
    res = shrinking_target_root(sys_a, U_a, 2.0, [0.1, 0.02], [8])
    assert res.empty and res.value == -math.inf
    assert all(r.empty for r in res.rows)


def test_fixed_full_box(sys_a, U_a):
    res = fixed_target_root(sys_a, U_a, TargetSet.interval(ALPHA_MIN_A, ALPHA_MAX_A), [12])
    assert res.value == pytest.approx(DIM_A, abs=1e-9)


def test_fixed_box_near_alpha_one(sys_a, U_a, b_a):
    a1 = b_a.alpha(1.0)
    C = TargetSet.interval(a1 - 0.1, a1 + 0.1)
    grid = np.linspace(a1 - 0.1, a1 + 0.1, 2001)
    best = max(beta_star_a(a) for a in grid)
    res = fixed_target_root(sys_a, U_a, C, [16])
    assert abs(res.value - best) < 0.05
    assert res.reference == pytest.approx(best, abs=1e-6)


def test_fixed_degenerate(sys_a, U_a):
    with pytest.raises(DegenerateTarget):
        fixed_target_root(sys_a, U_a, TargetSet.singleton(2.0), [8])
    with pytest.raises(DegenerateTarget):
        fixed_target_root(sys_a, U_a, TargetSet.singleton(0.8), [8])


def test_restricted_zeta_whole(sys_b):
    phi = Potential(sys_b, 1, [0.1, -0.2, 0.3])
    a = restricted_zeta_radius(sys_b, phi, TargetSet.everything(), None, 16)
    b = zeta_radius(sys_b, phi, 16)
    assert a.radius == pytest.approx(b.radius, rel=1e-12)


def test_restricted_zeta_at_shrinking_root(sys_a, U_a, b_a):
    a = b_a.alpha(0.5)
    C = TargetSet.ball(a, 0.05)
    root = shrinking_target_root(sys_a, U_a, C, [0.0], [16])
    assert not root.empty
    # at the raw root the n = 16 root-test term vanishes by construction
    z = restricted_zeta_radius(sys_a, builtin_lambda(sys_a) * root.enclosure.lo, C, U_a, 16)
    assert abs(z.raw[15]) < 1e-10
    assert abs(math.log(z.radius)) < 0.1


def test_restricted_zeta_empty(sys_a, U_a):
    z = restricted_zeta_radius(sys_a, builtin_phi(sys_a), TargetSet.interval(5, 6), U_a, 8)
    assert z.radius == math.inf


# sandwich and Boltzmann bounds

@pytest.mark.parametrize("name", ["sys_a", "sys_b"])
def test_sandwich_exact(name, request):
    s = request.getfixturevalue(name)
    U = RatioMap.local_dimension(s)
    phi = builtin_phi(s)
    lo, hi = RatioMap.local_dimension(s).on_cycles([(0,)])
    for C in (TargetSet.interval(0.3, 0.6), TargetSet.interval(0.8, 1.0), TargetSet.singleton(0.5)):
        for n in range(2, 13):
            assert sandwich(s, phi, C, U, n).holds


def test_sandwich_radius_bounds_completion_shift(sys_b):
    U = RatioMap.local_dimension(sys_b)
    for n in (3, 7, 11):
        r = sandwich_radius(U, n)
        words = word_array(sys_b, n)
        lo, _ = U.enclosures(words)
        m = np.empty(len(words))
        from mfzeta.graph import completion_groups
        for rows, cycles in completion_groups(sys_b, words):
            m[rows], _ = U.on_cycles(cycles)
        assert np.max(np.abs(m - lo)) <= r + 1e-12


def test_boltzmann_equality_sys_a(sys_a, U_a):
    phi = builtin_lambda(sys_a) * 0.4 + builtin_phi(sys_a) * 0.3
    assert boltzmann_constant(sys_a, phi) == pytest.approx(1.0)
    lam = perron_of(sys_a).lam
    for C in (TargetSet.interval(0.5, 1.0), TargetSet.everything()):
        for n in (3, 8, 12):
            be = boltzmann_empirical(sys_a, phi, U_a, C, n)
            z = restricted_sum(sys_a, phi, C, U_a, n, "M")
            assert n * math.log(lam) + be.log_QI == pytest.approx(math.log(z), abs=1e-9)


def test_boltzmann_bounds_sys_b(sys_b):
    U = RatioMap.local_dimension(sys_b)
    phi = Potential(sys_b, 1, [0.3, -0.5, 0.2])
    c = boltzmann_constant(sys_b, phi)
    lam = perron_of(sys_b).lam
    C = TargetSet.interval(0.2, 0.5)
    for n in range(3, 13):
        be = boltzmann_empirical(sys_b, phi, U, C, n)
        z = restricted_sum(sys_b, phi, C, U, n, "M")
        mid = n * math.log(lam) + be.log_QI
        assert mid - math.log(c) - 1e-12 <= math.log(z) <= mid + math.log(c) + 1e-12
