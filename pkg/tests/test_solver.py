import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import make_graph, random_connected_graph
from pdlab.certify import truncation
from pdlab.energy import energy
from pdlab.fixtures import capacity_path, lattice_box, path
from pdlab.graph import Ball, ball_mask
from pdlab.solver import (BoundaryProblem, HypothesisError, capacity, capacity_minimizer,
                          check_superharmonic, condenser_potential, log_caccioppoli_check, p_harmonic)

PS = [1.2, 1.5, 2.0, 3.0, 5.0]


def ends(n):
    fixed = np.zeros(n + 1, bool)
    fixed[[0, n]] = True
    vals = np.zeros(n + 1)
    vals[n] = 1.0
    return fixed, vals


@pytest.mark.parametrize("p", PS)
def test_path_linear_interpolation(p):
    n = 10
    fixed, vals = ends(n)
    res = p_harmonic(path(n), BoundaryProblem(fixed, vals, p))
    np.testing.assert_allclose(res.u, np.arange(n + 1) / n, atol=1e-6)


def test_constant_boundary_data(rng):
    g = random_connected_graph(rng, 12)
    fixed = rng.random(12) < 0.3
    fixed[0] = True
    res = p_harmonic(g, BoundaryProblem(fixed, np.full(12, 0.7), 1.7))
    np.testing.assert_allclose(res.u, 0.7, atol=1e-9)
    assert res.energy < 1e-12


def test_no_free_vertices_returns_constraints(path3):
    vals = np.array([0.0, 3.0, 1.0])
    res = p_harmonic(path3, BoundaryProblem(np.ones(3, bool), vals, 2.0))
    assert np.array_equal(res.u, vals) and res.iterations == 0


def test_cycle4_oracle(cycle4):
    fixed = np.array([True, False, True, False])
    res = p_harmonic(cycle4, BoundaryProblem(fixed, np.array([0.0, 0, 1, 0]), 2.0))
    np.testing.assert_allclose(res.u[[1, 3]], 0.5, atol=1e-12)


def test_boundary_problem_validation():
    with pytest.raises(ValueError):
        BoundaryProblem(np.zeros(3, bool), np.zeros(3), 2.0)
    with pytest.raises(ValueError, match="exponent out of range"):
        BoundaryProblem(np.ones(3, bool), np.zeros(3), 1.0)


@given(st.integers(0, 10_000), st.sampled_from(PS))
def test_maximum_principle_and_optimality(seed, p):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng, 10)
    fixed = rng.random(10) < 0.4
    fixed[[0, 9]] = True
    vals = rng.uniform(-2, 2, 10)
    res = p_harmonic(g, BoundaryProblem(fixed, vals, p))
    lo, hi = vals[fixed].min(), vals[fixed].max()
    assert np.all(res.u >= lo - 1e-12) and np.all(res.u <= hi + 1e-12)
    np.testing.assert_array_equal(res.u[fixed], vals[fixed])
    # no admissible perturbation lowers the energy by more than roundoff
    for _ in range(5):
        v = res.u.copy()
        v[~fixed] += 1e-3 * rng.standard_normal((~fixed).sum())
        assert energy(g, v, p) >= res.energy - 1e-9 * max(res.energy, 1)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_uniqueness_and_warm_restart(p, rng):
    g = random_connected_graph(rng, 15)
    fixed = np.zeros(15, bool)
    fixed[[0, 7, 14]] = True
    vals = np.array([0.0] * 7 + [1.0] + [0.0] * 6 + [-0.5])
    prob = BoundaryProblem(fixed, vals, p)
    a = p_harmonic(g, prob)
    b = p_harmonic(g, prob, init=rng.uniform(-0.5, 1.0, 15))
    assert np.max(np.abs(a.u - b.u)) < 1e-6
    again = p_harmonic(g, prob, init=a.u)
    assert again.iterations <= 2


@pytest.mark.parametrize("p", PS)
@pytest.mark.parametrize("n", [1, 2, 5, 9])
def test_capacity_path_oracle(p, n):
    g = capacity_path(n)
    B = Ball(0, 1.0)
    assert list(np.flatnonzero(ball_mask(g, B))) == [0]
    assert list(np.flatnonzero(~ball_mask(g, B.inflate(2.0)))) == [n]
    assert capacity(g, B, p) == pytest.approx(n ** (1 - p), rel=1e-8)


def test_series_conductance_oracle():
    # p = 2, two edges of conductances 2 and 3: capacity 1/(1/2 + 1/3)
    g = make_graph([(0, 1), (1, 2)], w=np.array([2.0, 3.0]))
    one, zero = np.array([1, 0, 0], bool), np.array([0, 0, 1], bool)
    assert condenser_potential(g, one, zero, 2.0).energy == pytest.approx(1.2, rel=1e-12)
    assert capacity(path(2), Ball(0, 1.0), 2.0) == pytest.approx(0.5)


def test_capacity_degenerate_when_2b_covers():
    cut = capacity_minimizer(path(3), Ball(1, 2.0), 2.0)
    assert cut.degenerate and cut.energy == 0 and np.all(cut.values == 1)


def test_condenser_sets_must_be_disjoint(path3):
    with pytest.raises(ValueError):
        condenser_potential(path3, [1, 1, 0], [0, 1, 1], 2.0)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_capacity_monotone_in_annulus(p):
    g = lattice_box(2, 7)
    one = ball_mask(g, Ball(24, 1.5))
    zero_small = ~ball_mask(g, Ball(24, 3.5))
    zero_big = ~ball_mask(g, Ball(24, 2.5))  # larger zero-set: smaller annulus
    c1 = condenser_potential(g, one, zero_small, p).energy
    c2 = condenser_potential(g, one, zero_big, p).energy
    assert c1 <= c2 * (1 + 1e-9)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_cutoff_invariants_and_superharmonicity(p):
    g = lattice_box(2, 9)
    B = Ball(40, 2.0)
    cut = capacity_minimizer(g, B, p)
    inB, in2B = ball_mask(g, B), ball_mask(g, B.inflate(2.0))
    assert np.all(cut.values[inB] == 1) and np.all(cut.values[~in2B] == 0)
    assert cut.values.min() >= 0 and cut.values.max() <= 1
    rep = check_superharmonic(g, cut.values, in2B, p, trials=100, rng=1)
    assert rep.worst_slack >= -1e-8
    rep = check_superharmonic(g, 1 - cut.values, ~inB, p, trials=100, rng=2)
    assert rep.worst_slack >= -1e-8


def test_superharmonic_detects_violation():
    # a strict local max is not superharmonic: pushing it up raises the energy,
    # but a local min pushed up lowers it
    g = path(4)
    u = np.array([1.0, 1.0, 0.0, 1.0, 1.0])
    omega = np.zeros(5, bool)
    omega[2] = True
    assert check_superharmonic(g, u, omega, 2.0, trials=50, rng=0).worst_slack < 0


def test_superharmonic_zero_perturbation_is_equality(path3):
    rep = check_superharmonic(path3, np.array([0.0, 0.3, 1.0]), np.zeros(3, bool), 2.0)
    assert rep.worst_slack == 0


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_log_caccioppoli_with_truncation(p):
    g = lattice_box(2, 9)
    B = Ball(40, 2.0)
    cut = capacity_minimizer(g, B, p)
    omega = ball_mask(g, B.inflate(2.0))
    rng = np.random.default_rng(7)
    for _ in range(10):
        f = np.where(omega, rng.standard_normal(g.n), 0.0)
        lam = float(rng.uniform(0.2, 1.0))
        h = truncation(f, lam)
        A = np.abs(f) > 2 * lam
        res = log_caccioppoli_check(g, cut.values, h, A, omega, p)
        assert res.holds, (res.lhs, res.rhs)


def test_log_caccioppoli_trivial_cases(path3):
    u = np.array([0.0, 0.5, 1.0])
    omega = np.array([True, True, False])
    empty = np.zeros(3, bool)
    assert log_caccioppoli_check(path3, u, np.zeros(3), empty, omega, 2.0).lhs == 0
    h = np.array([1.0, 1.0, 0.0])
    res = log_caccioppoli_check(path3, np.ones(3), h, np.array([True, False, False]), omega, 2.0)
    assert res.lhs == 0 <= res.rhs


def test_log_caccioppoli_hypotheses(path3):
    omega = np.array([True, True, False])
    A = np.array([True, False, False])
    with pytest.raises(HypothesisError, match="u must"):
        log_caccioppoli_check(path3, np.array([0, 2.0, 0]), np.array([1.0, 0, 0]), A, omega, 2.0)
    with pytest.raises(HypothesisError, match="off omega"):
        log_caccioppoli_check(path3, np.zeros(3), np.array([1.0, 0, 1.0]), A, omega, 2.0)
    with pytest.raises(HypothesisError, match="on A"):
        log_caccioppoli_check(path3, np.zeros(3), np.zeros(3), A, omega, 2.0)
