import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_connected_graph
from pdlab.blending import (blend_energy_report, blend_operator, blending_nu, c_delta, classify_ball,
                            discrete_convolution, pi_membership_check, whitney_blend)
from pdlab.certify import poincare_constant
from pdlab.energy import gamma
from pdlab.fixtures import gasket, lattice_box, path
from pdlab.graph import Ball, average, ball_mask
from pdlab.scale import default_scale, power_scale

PSI = power_scale(2.0)


def center(g):
    d = g.distances
    c = int(np.argmin(d.max(axis=1)))
    return c, float(d[c].max())


def test_f_equals_g():
    g = lattice_box(2, 8)
    f = np.random.default_rng(0).standard_normal(g.n)
    res = whitney_blend(g, f, f, Ball(27, 2.5), 0.5, 2.0)
    np.testing.assert_array_equal(res.h, f)
    rep = blend_energy_report(g, res, PSI)
    assert rep.oscillation == 0
    assert rep.lhs == pytest.approx(rep.energy_f)


def test_empty_annulus():
    g = path(8)
    f, h0 = np.arange(9.0), np.full(9, -1.0)
    res = whitney_blend(g, f, h0, Ball(4, 2.0), 0.5, 2.0)
    assert not res.omega.any()
    inner = np.abs(np.arange(9) - 4) <= 2
    np.testing.assert_array_equal(res.h, h0 + (f - h0) * inner)
    assert res.boundary_exact()


def test_degenerate_when_outer_covers():
    g = path(4)
    f = np.arange(5.0)
    res = whitney_blend(g, f, np.zeros(5), Ball(2, 3.0), 0.5, 2.0)
    assert res.degenerate and np.array_equal(res.h, f)
    np.testing.assert_array_equal(blend_operator(g, res), np.eye(5))


def test_constant_on_path9():
    g = path(8)
    c = 2.5
    res = whitney_blend(g, np.full(9, c), np.zeros(9), Ball(4, 2.5), 0.5, 2.0)
    assert list(np.flatnonzero(res.omega)) == [1, 7]
    assert np.all(res.h[res.inner] == c)
    assert np.all(res.h[~res.outer] == 0)
    assert np.all((res.h[res.omega] >= 0) & (res.h[res.omega] <= c))
    near_sum = res.partition.phi[res.near].sum(axis=0)
    np.testing.assert_allclose(res.h[res.omega], c * near_sum[res.omega], rtol=1e-15)


def test_eta_range():
    with pytest.raises(ValueError):
        whitney_blend(path(4), np.zeros(5), np.zeros(5), Ball(2, 1.0), 1.0, 2.0)


@given(st.integers(0, 10_000), st.sampled_from([1.5, 2.0, 3.0]), st.floats(0.2, 0.8))
def test_boundary_exact_and_linear(seed, p, eta):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng, 16)
    f, h0 = rng.standard_normal(16) * 5, rng.standard_normal(16)
    ball = Ball(int(rng.integers(16)), float(rng.uniform(0.5, 3.0)))
    res = whitney_blend(g, f, h0, ball, eta, p)
    assert res.boundary_exact()
    assert np.all(np.isfinite(res.h))
    H = blend_operator(g, res)
    np.testing.assert_allclose(h0 + H @ (f - h0), res.h, atol=1e-12)


@pytest.mark.parametrize("p", [1.5, 2.0])
def test_bump_on_lattice16(p):
    g = lattice_box(2, 16)
    c, R = center(g)
    dist = g.distances[c]
    f = np.clip(1.5 - dist / 4, 0, 1)  # indicator-smoothed bump
    res = whitney_blend(g, f, np.zeros(g.n), Ball(c, R / 3), 0.5, p)
    rep = blend_energy_report(g, res, PSI)
    assert res.boundary_exact() and rep.finite
    assert 0 < rep.c_wb < np.inf
    assert rep.lp_ratio <= rep.lp_bound


def test_convolution_examples():
    g = path(4)
    const = discrete_convolution(g, np.full(5, 3.0), 0, 2.0)
    np.testing.assert_allclose(const.values, 3.0, rtol=1e-15)
    h = g.distances[0].copy()
    coarse = discrete_convolution(g, h, -4, 2.0)
    assert len(coarse.balls) == 1
    np.testing.assert_allclose(coarse.values, h.mean())
    mid = discrete_convolution(g, h, -1, 2.0)  # balls of radius 2 around the 2-net {0, 2, 4}
    avgs = {b.center: average(g, h, ball_mask(g, b)) for b in mid.balls}
    assert avgs == {0: 0.5, 2: 2.0, 4: 3.5}
    part_phi = np.array(mid.balls)
    assert part_phi.size == 3
    fine = discrete_convolution(g, h, 3, 2.0)
    assert fine.below_edge_scale and np.array_equal(fine.values, h)


def test_convolution_error_decreases():
    g = lattice_box(2, 12)
    h = np.random.default_rng(3).standard_normal(g.n).cumsum() / 10
    errs = [discrete_convolution(g, h, k, 2.0).lp_distance for k in (-3, -2, -1)]
    assert errs[-1] <= errs[0]


def test_membership_constant_function():
    g = path(6)
    rep = pi_membership_check(g, np.ones(7), np.zeros(7), 8.0, 2.0, 2.0, PSI)
    assert rep.hypothesis_constant == 0 and rep.conclusion_constant == 0 and rep.passed


def test_membership_self_consistency():
    g = path(10)
    f = np.sin(np.arange(11.0))
    lam, delta = 2.0, 2.0
    from pdlab.blending import sweep_balls
    c_pi = max(poincare_constant(g, b, 2.0, lam, PSI).value for b in sweep_balls(g, delta))
    nu = c_pi * gamma(g, f, 2.0)
    rep = pi_membership_check(g, f, nu, lam, delta, 2.0, PSI)
    assert rep.hypothesis_constant <= 1 + 1e-9
    assert not rep.vacuous


def test_membership_rejects_negative_nu(path3):
    with pytest.raises(ValueError):
        pi_membership_check(path3, np.zeros(3), -np.ones(3), 8.0, 1.0, 2.0, PSI)


def test_c_delta():
    c = c_delta(0.5, 8.0)
    assert (12 + 6 * 8 ** 3) * c == pytest.approx(0.25)


def test_nu_on_gasket3_and_case_census():
    seen = set()
    for g, fam in ((gasket(3), "gasket"), (gasket(4), "gasket"), (lattice_box(2, 16), "lattice_box")):
        c, R = center(g)
        for frac in (0.3, 0.45):
            ball = Ball(c, R * frac)
            f = np.random.default_rng(0).standard_normal(g.n)
            res = whitney_blend(g, f, np.zeros(g.n), ball, 0.5, 2.0)
            scale = default_scale(fam)
            nu = blending_nu(g, res, scale)
            assert np.all(nu >= 0)
            rep = pi_membership_check(g, res.reduced, nu, 8.0, c_delta(0.5, 8.0) * ball.radius, 2.0,
                                      scale, blend=res)
            assert rep.passed and rep.reduction_ok
            seen |= set(rep.cases) | set(rep.coverage)
    assert {"A", "B.1", "B.2"} <= seen


def test_classify_inside_ball():
    g = lattice_box(2, 16)
    c, R = center(g)
    res = whitney_blend(g, np.ones(g.n), np.zeros(g.n), Ball(c, R / 3), 0.5, 2.0)
    assert classify_ball(g, res, Ball(c, 0.5))[0] == "A"
