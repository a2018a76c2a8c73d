import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import make_graph, random_connected_graph
from pdlab.certify import poincare_problem
from pdlab.fixtures import path
from pdlab.graph import Ball
from pdlab.ratio import (BRUTE, EXACT, ITERATIVE, AbsTerm, RatioProblem, brute_force, degenerate_witness,
                         energy_term, exact_eigen, iterative, osc_term, solve)
from pdlab.scale import power_scale

GRID = tuple(np.arange(-2, 3) / 2)


def numeric_grad(term, f, p, h=1e-6):
    out = np.zeros_like(f)
    for i in range(f.size):
        e = np.zeros_like(f)
        e[i] = h
        out[i] = (term.value_grad(f + e, p)[0] - term.value_grad(f - e, p)[0]) / (2 * h)
    return out


@given(st.integers(0, 10_000), st.sampled_from([1.5, 2.0, 3.0]))
def test_term_gradients(seed, p):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng, 8)
    mask = rng.random(8) < 0.5
    mask[0] = True
    f = rng.standard_normal(8)
    for term in (energy_term(g, mask), osc_term(g, rng.random(8), mask), AbsTerm(rng.random(8))):
        np.testing.assert_allclose(term.value_grad(f, p)[1], numeric_grad(term, f, p), rtol=1e-5, atol=1e-6)


def test_quadratic_forms_match_values(rng):
    g = random_connected_graph(rng, 9)
    mask = rng.random(9) < 0.6
    mask[0] = True
    f = rng.standard_normal(9)
    for term in (energy_term(g, mask), osc_term(g, rng.random(9), mask), AbsTerm(rng.random(9))):
        assert f @ term.quad(9) @ f == pytest.approx(term.value_grad(f, 2.0)[0], rel=1e-12)


def test_energy_term_is_gamma_of_set(rng):
    from pdlab.energy import gamma
    g = random_connected_graph(rng, 10)
    mask = rng.random(10) < 0.5
    f = rng.standard_normal(10)
    assert energy_term(g, mask).value_grad(f, 1.7)[0] == pytest.approx(gamma(g, f, 1.7)[mask].sum())


def test_two_vertex_eigen_oracle():
    # mu = 1, B = both vertices, Lambda = 1, Psi = r^2:
    # N = (a - b)^2 / (2 Psi), D = (a - b)^2, ratio = 1 / (2 * 1.5^2)
    g = make_graph([(0, 1)])
    prob = poincare_problem(g, Ball(0, 1.5), 1.0, power_scale(2.0))
    res = exact_eigen(prob)
    assert res.method == EXACT
    assert res.value == pytest.approx(2 / 9, rel=1e-14)
    assert prob.ratio(res.witness, 2.0) == pytest.approx(2 / 9, rel=1e-12)


def subinstance():
    g = path(7)
    return g, poincare_problem(g, Ball(3, 1.5), 5 / 3, power_scale(2.0))


def test_brute_force_vs_exact_p2():
    g, prob = subinstance()
    assert prob.support().size == 7
    exact = exact_eigen(prob).value
    brute = brute_force(prob, 2.0, GRID, max_vars=7).value
    assert brute <= exact * (1 + 1e-12)
    assert brute >= 0.9 * exact


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_brute_force_vs_iterative(p):
    g, prob = subinstance()
    it = solve(prob, p, restarts=16, seed=1)
    brute = brute_force(prob, p, GRID, max_vars=7)
    assert brute.method == BRUTE and it.method == ITERATIVE
    # the grid sees a subset of the functions the ascent sees
    assert brute.value <= it.value * (1 + 1e-9)
    assert it.value >= 0.9 * brute.value
    assert prob.ratio(it.witness, p) == pytest.approx(it.value, rel=1e-12)


def test_iterative_matches_eigen_at_p2(rng):
    g = random_connected_graph(rng, 12)
    prob = poincare_problem(g, Ball(0, 2.0), 2.0, power_scale(2.0))
    a = exact_eigen(prob).value
    b = iterative(prob, 2.0, restarts=8, seed=3).value
    assert b == pytest.approx(a, rel=1e-6)


def test_iterative_deterministic_by_seed(rng):
    g = random_connected_graph(rng, 10)
    prob = poincare_problem(g, Ball(0, 2.0), 2.0, power_scale(2.0))
    a = iterative(prob, 1.5, restarts=4, seed=9)
    b = iterative(prob, 1.5, restarts=4, seed=9)
    assert a.value == b.value and a.restarts == b.restarts == 4


def test_degenerate_denominator_gives_infinity():
    # numerator lives on vertex 2 but the denominator only sees edge (0, 1)
    g = make_graph([(0, 1), (1, 2)])
    prob = RatioProblem(3, [AbsTerm(np.array([0, 0, 1.0]))], [energy_term(g, [True, False, False])], False)
    assert degenerate_witness(prob, 2.0) is not None
    for res in (exact_eigen(prob), iterative(prob, 1.5, restarts=2), brute_force(prob, 2.0)):
        assert res.value == np.inf and res.degenerate
        N, D = prob.evaluate(res.witness, 2.0)
        assert N > 0 and D <= 1e-12


def test_solve_method_checks(rng):
    _, prob = subinstance()
    with pytest.raises(ValueError):
        solve(prob, 1.5, EXACT)
    with pytest.raises(ValueError):
        solve(prob, 2.0, "nope")
    with pytest.raises(ValueError):
        brute_force(prob, 2.0)


def test_ratio_of_constant_is_zero():
    _, prob = subinstance()
    assert prob.ratio(np.ones(8), 2.0) == 0.0
