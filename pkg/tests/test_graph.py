import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import make_graph, random_connected_graph
from pdlab.fixtures import path, star
from pdlab.graph import (Ball, GraphError, WeightedGraph, average_comparison, ball_members,
                         build_net, closed_ball_mask, doubling_constant, is_maximal_net,
                         load_graph, metric_closure, midpoint_radius, realized_radii, save_graph)


# metric ---------------------------------------------------------------------

def test_path_distance(path3):
    assert metric_closure(path3)[0, 2] == 2


def test_single_vertex_distance():
    g = WeightedGraph(np.ones(1), np.zeros((0, 2)), [], [])
    assert metric_closure(g)[0, 0] == 0
    assert g.diameter == 0


def test_cycle_opposite_distance(cycle4):
    d = metric_closure(cycle4)
    assert d[0, 2] == 2 and d[1, 3] == 2


def test_disconnected_metric_undefined():
    g = make_graph([(0, 1), (2, 3)])
    with pytest.raises(GraphError, match="metric undefined"):
        metric_closure(g)


def test_invalid_graph_data():
    with pytest.raises(GraphError):
        make_graph([(0, 1)], w=np.array([0.0]))
    with pytest.raises(GraphError):
        make_graph([(0, 0)], n=1)
    with pytest.raises(GraphError):
        WeightedGraph(np.ones(2), [(0, 5)], [1.0], [1.0])


@given(st.integers(0, 10_000), st.integers(2, 14))
def test_metric_axioms_exact(seed, n):
    # integer lengths make the shortest-path sums exact in floating point
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng, n)
    g = WeightedGraph(g.mu, g.edges, g.w, rng.integers(1, 5, g.m).astype(float))
    d = g.distances
    assert np.array_equal(d, d.T)
    assert np.all(np.diag(d) == 0) and np.all(d[~np.eye(n, dtype=bool)] > 0)
    # triangle inequality with zero tolerance
    assert np.all(d[:, None, :] <= d[:, :, None] + d[None, :, :])


def test_triangle_inequality_rational_lengths(rng):
    g = random_connected_graph(rng, 10)
    g = WeightedGraph(g.mu, g.edges, g.w, rng.integers(1, 7, g.m) / 4.0)
    d = [[Fraction(x) for x in row] for row in g.distances]
    for x in range(10):
        for y in range(10):
            for z in range(10):
                assert d[x][z] <= d[x][y] + d[y][z]


# balls ----------------------------------------------------------------------

def test_ball_members_examples(path3):
    assert list(ball_members(path3, Ball(1, 1.0))) == [1]
    assert list(ball_members(path3, Ball(1, 1.5))) == [0, 1, 2]
    assert list(ball_members(path3, Ball(0, 10.0))) == [0, 1, 2]
    assert list(np.flatnonzero(closed_ball_mask(path3, Ball(1, 1.0)))) == [0, 1, 2]


def test_ball_radius_positive():
    with pytest.raises(ValueError):
        Ball(0, 0.0)


@given(st.integers(0, 10_000), st.floats(0.01, 5), st.floats(0.0, 5))
def test_ball_monotone(seed, r, dr):
    g = random_connected_graph(np.random.default_rng(seed), 12)
    x = seed % 12
    small = ball_members(g, Ball(x, r))
    big = ball_members(g, Ball(x, r + dr))
    assert set(small) <= set(big) and x in small


def test_realized_radii_are_midpoints(path3):
    assert list(realized_radii(path3, 0)) == [0.5, 1.5, 2.5]
    assert midpoint_radius(path3, 0, 1.0) == 0.5
    assert midpoint_radius(path3, 0, 1.2) == 1.5


# doubling -------------------------------------------------------------------

def test_doubling_single_vertex():
    g = WeightedGraph(np.ones(1), np.zeros((0, 2)), [], [])
    assert doubling_constant(g, [(0, 1.0)]).constant == 1


def test_doubling_path9():
    g = make_graph([(i, i + 1) for i in range(8)])
    # open balls: B(4, 1.5) has 3 vertices, B(4, 3) has 5 (distance 3 is excluded)
    assert doubling_constant(g, [(4, 1.5)]).constant == pytest.approx(5 / 3)
    # counting the doubled ball closed gives 7/3
    closed = closed_ball_mask(g, Ball(4, 3.0)).sum()
    assert closed / ball_members(g, Ball(4, 1.5)).size == pytest.approx(7 / 3)
    # a tie-free radius gives the same open count either way
    assert doubling_constant(g, [(4, 1.6)]).constant == pytest.approx(7 / 3)


def test_doubling_star_grows():
    vals = [doubling_constant(star(k), [(0, 0.75)]).constant for k in (4, 16, 64)]
    assert vals == sorted(vals) and vals[-1] > vals[0] * 10


def test_doubling_needs_samples(path3):
    with pytest.raises(ValueError):
        doubling_constant(path3, [])


# nets -----------------------------------------------------------------------

def test_net_examples():
    g = path(5)
    assert build_net(g, range(6), 100.0).points == (0,)
    assert build_net(g, range(5), 2.0).points == (0, 2, 4)
    assert build_net(g, [3], 1.0).points == (3,)
    with pytest.raises(ValueError):
        build_net(g, [], 1.0)


@given(st.integers(0, 10_000), st.floats(0.1, 4.0))
def test_net_maximal_and_deterministic(seed, eps):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng, 15)
    host = np.flatnonzero(rng.random(15) < 0.6)
    if host.size == 0:
        host = np.array([0])
    a = build_net(g, host, eps)
    assert a == build_net(g, host, eps)
    assert is_maximal_net(g, a)


# average comparison ---------------------------------------------------------

@given(st.integers(0, 10_000), st.sampled_from([1.5, 2.0, 3.0]))
def test_average_comparison(seed, p):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng, 14)
    f = rng.standard_normal(14)
    x = int(rng.integers(14))
    r = float(rng.uniform(0.5, 3.0))
    L = 3.0
    big = ball_members(g, Ball(x, L * r))
    y = int(rng.choice(big))
    s = r / L + float(rng.uniform(0, r))
    if not set(ball_members(g, Ball(y, s))) <= set(big):
        return
    res = average_comparison(g, f, Ball(x, r), Ball(y, s), L, p)
    assert res.holds


def test_average_comparison_preconditions(path3):
    with pytest.raises(ValueError):
        average_comparison(path3, np.zeros(3), Ball(0, 0.5), Ball(2, 0.5), 1.0, 2.0)
    with pytest.raises(ValueError):
        average_comparison(path3, np.zeros(3), Ball(1, 1.5), Ball(1, 0.1), 2.0, 2.0)


# io -------------------------------------------------------------------------

def test_json_roundtrip(tmp_path, rng):
    g = random_connected_graph(rng, 9)
    save_graph(g, tmp_path / "g.json")
    h = load_graph(tmp_path / "g.json")
    assert np.array_equal(g.mu, h.mu) and np.array_equal(g.edges, h.edges)
    assert np.array_equal(g.w, h.w) and np.array_equal(g.length, h.length)
    assert h.to_json() == g.to_json()


def test_loader_validates(tmp_path):
    bad = {"vertices": [{"id": 0, "mu": 1}, {"id": 1, "mu": -1}], "edges": [{"u": 0, "v": 1, "w": 1, "len": 1}]}
    (tmp_path / "a.json").write_text(json.dumps(bad))
    with pytest.raises(GraphError):
        load_graph(tmp_path / "a.json")
    disc = {"vertices": [{"id": i, "mu": 1} for i in range(3)], "edges": [{"u": 0, "v": 1, "w": 1, "len": 1}]}
    (tmp_path / "b.json").write_text(json.dumps(disc))
    with pytest.raises(GraphError, match="metric undefined"):
        load_graph(tmp_path / "b.json")
    (tmp_path / "c.json").write_text(json.dumps({"vertices": []}))
    with pytest.raises(GraphError):
        load_graph(tmp_path / "c.json")
