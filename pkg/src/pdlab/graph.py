"""Finite weighted graphs viewed as metric measure spaces.

Vertices carry a measure ``mu``; edges carry a conductance ``w`` (used by the
energy) and a length ``len`` (used by the shortest-path metric).  Balls are
open: ``B(x, r) = {y : d(x, y) < r}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path


class GraphError(ValueError):
    """Raised for malformed or disconnected graphs."""


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    mu: np.ndarray
    edges: np.ndarray  # (m, 2) int, u < v
    w: np.ndarray
    length: np.ndarray
    coords: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).reshape(-1)
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        w = np.asarray(self.w, dtype=float).reshape(-1)
        length = np.asarray(self.length, dtype=float).reshape(-1)
        if mu.size < 1:
            raise GraphError("graph needs at least one vertex")
        if w.size != edges.shape[0] or length.size != edges.shape[0]:
            raise GraphError("edge attribute arrays must match the edge list")
        if np.any(mu <= 0) or np.any(w <= 0) or np.any(length <= 0):
            raise GraphError("mu, w and len must be strictly positive")
        if edges.size and (edges.min() < 0 or edges.max() >= mu.size):
            raise GraphError("edge endpoint out of range")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise GraphError("self loops are not allowed")
        edges = np.sort(edges, axis=1)
        for arr in (mu, edges, w, length):
            arr.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "length", length)
        if self.coords is not None:
            c = np.asarray(self.coords, dtype=float)
            c.setflags(write=False)
            object.__setattr__(self, "coords", c)

    @property
    def n(self) -> int:
        return int(self.mu.size)

    @property
    def m(self) -> int:
        return int(self.edges.shape[0])

    @cached_property
    def adjacency(self) -> csr_matrix:
        """Symmetric conductance matrix."""
        u, v = self.edges[:, 0], self.edges[:, 1]
        data = np.concatenate([self.w, self.w])
        return csr_matrix((data, (np.concatenate([u, v]), np.concatenate([v, u]))),
                          shape=(self.n, self.n))

    @cached_property
    def incidence(self) -> csr_matrix:
        """Signed edge-vertex incidence, row e gives f(u_e) - f(v_e)."""
        rows = np.repeat(np.arange(self.m), 2)
        cols = self.edges.reshape(-1)
        data = np.tile([1.0, -1.0], self.m)
        return csr_matrix((data, (rows, cols)), shape=(self.m, self.n))

    @cached_property
    def neighbors(self) -> list[np.ndarray]:
        a = self.adjacency
        return [a.indices[a.indptr[i]:a.indptr[i + 1]].copy() for i in range(self.n)]

    @cached_property
    def distances(self) -> np.ndarray:
        return metric_closure(self)

    @cached_property
    def diameter(self) -> float:
        return float(self.distances.max())

    def with_conductance(self, w) -> "WeightedGraph":
        return WeightedGraph(self.mu, self.edges, w, self.length, self.coords, self.name)

    # serialization -------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "vertices": [{"id": i, "mu": float(x)} for i, x in enumerate(self.mu)],
            "edges": [
                {"u": int(u), "v": int(v), "w": float(w), "len": float(l)}
                for (u, v), w, l in zip(self.edges, self.w, self.length)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict, name: str = "") -> "WeightedGraph":
        try:
            verts = sorted(data["vertices"], key=lambda r: int(r["id"]))
            ids = [int(r["id"]) for r in verts]
            if ids != list(range(len(ids))):
                raise GraphError("vertex ids must be 0..n-1")
            mu = [float(r["mu"]) for r in verts]
            edges = [(int(e["u"]), int(e["v"])) for e in data["edges"]]
            w = [float(e["w"]) for e in data["edges"]]
            length = [float(e["len"]) for e in data["edges"]]
        except (KeyError, TypeError) as exc:
            raise GraphError(f"malformed graph JSON: {exc}") from exc
        g = cls(np.array(mu), np.array(edges, dtype=np.int64).reshape(-1, 2),
                np.array(w), np.array(length), name=name)
        check_connected(g)
        return g


def load_graph(path) -> WeightedGraph:
    path = Path(path)
    return WeightedGraph.from_dict(json.loads(path.read_text()), name=path.stem)


def save_graph(graph: WeightedGraph, path) -> None:
    Path(path).write_text(graph.to_json())


def check_connected(graph: WeightedGraph) -> None:
    if graph.n == 1:
        return
    ncomp, _ = connected_components(graph.adjacency, directed=False)
    if ncomp != 1:
        raise GraphError("metric undefined: graph is disconnected")


def metric_closure(graph: WeightedGraph) -> np.ndarray:
    """All-pairs shortest-path distances under the edge lengths."""
    check_connected(graph)
    if graph.n == 1:
        return np.zeros((1, 1))
    u, v = graph.edges[:, 0], graph.edges[:, 1]
    lengths = csr_matrix(
        (np.concatenate([graph.length, graph.length]),
         (np.concatenate([u, v]), np.concatenate([v, u]))),
        shape=(graph.n, graph.n),
    )
    d = shortest_path(lengths, method="D", directed=False)
    d = np.minimum(d, d.T)
    d.setflags(write=False)
    return d


@dataclass(frozen=True)
class Ball:
    center: int
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")

    def inflate(self, c: float) -> "Ball":
        return Ball(self.center, c * self.radius)


def ball_members(graph: WeightedGraph, ball: Ball) -> np.ndarray:
    """Vertex ids y with d(center, y) < radius, sorted."""
    return np.flatnonzero(graph.distances[ball.center] < ball.radius)


def ball_mask(graph: WeightedGraph, ball: Ball) -> np.ndarray:
    return graph.distances[ball.center] < ball.radius


def closed_ball_mask(graph: WeightedGraph, ball: Ball) -> np.ndarray:
    return graph.distances[ball.center] <= ball.radius


def measure(graph: WeightedGraph, mask) -> float:
    return float(graph.mu[np.asarray(mask)].sum())


def average(graph: WeightedGraph, f, mask) -> float:
    """mu-average of f over a vertex set given as boolean mask or index array."""
    f = np.asarray(f, dtype=float)
    mu = graph.mu[mask]
    return float(np.dot(mu, f[mask]) / mu.sum())


def dist_to_set(graph: WeightedGraph, mask) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return np.full(graph.n, np.inf)
    return graph.distances[:, mask].min(axis=1)


def set_distance(graph: WeightedGraph, a_mask, b_mask) -> float:
    a_mask = np.asarray(a_mask, dtype=bool)
    b_mask = np.asarray(b_mask, dtype=bool)
    if not a_mask.any() or not b_mask.any():
        return np.inf
    return float(graph.distances[np.ix_(a_mask, b_mask)].min())


def closed_neighborhood(graph: WeightedGraph, mask) -> np.ndarray:
    """Boolean mask of the set together with all its graph neighbours."""
    mask = np.asarray(mask, dtype=bool)
    out = mask.copy()
    u, v = graph.edges[:, 0], graph.edges[:, 1]
    out[v[mask[u]]] = True
    out[u[mask[v]]] = True
    return out


def realized_radii(graph: WeightedGraph, center: int, cap: float | None = None) -> np.ndarray:
    """Midpoints between consecutive realized distances from ``center``.

    The largest value is the first distance beyond the farthest vertex, so the
    final ball contains everything.  Radii above ``cap`` are dropped.
    """
    d = np.unique(graph.distances[center])
    mids = 0.5 * (d[:-1] + d[1:])
    top = d[-1] + (mids[-1] - d[-2] if mids.size else 1.0)
    radii = np.append(mids, top)
    if cap is not None:
        radii = radii[radii <= cap]
    return radii


def midpoint_radius(graph: WeightedGraph, center: int, r: float) -> float:
    """Move r to the midpoint of the distance gap it falls in, keeping B(center, r)."""
    d = np.unique(graph.distances[center])
    below = d[d < r]
    above = d[d >= r]
    if above.size == 0:
        return float(r)
    return float(0.5 * (below[-1] + above[0]))


@dataclass
class DoublingReport:
    constant: float
    interior_constant: float
    saturated_constant: float
    worst: tuple[int, float] | None
    ratios: list[tuple[int, float, float, bool]] = field(default_factory=list)


def doubling_constant(graph: WeightedGraph, radius_samples) -> DoublingReport:
    """Empirical max of mu(B(x,2r)) / mu(B(x,r)) over (center, radius) samples.

    Samples whose doubled ball already covers X are "saturated" and are
    reported separately as well as in the overall maximum.
    """
    samples = list(radius_samples)
    if not samples:
        raise ValueError("need at least one (center, radius) sample")
    ratios = []
    best, worst = 0.0, None
    interior, saturated = 0.0, 0.0
    total = graph.mu.sum()
    for x, r in samples:
        small = measure(graph, graph.distances[x] < r)
        big = measure(graph, graph.distances[x] < 2 * r)
        ratio = big / small
        sat = bool(big >= total)
        ratios.append((int(x), float(r), ratio, sat))
        if sat:
            saturated = max(saturated, ratio)
        else:
            interior = max(interior, ratio)
        if ratio > best:
            best, worst = ratio, (int(x), float(r))
    return DoublingReport(best, interior, saturated, worst, ratios)


def default_radius_samples(graph: WeightedGraph, centers=None):
    if centers is None:
        centers = range(graph.n)
    cap = 2 * graph.diameter if graph.n > 1 else 1.0
    for x in centers:
        for r in realized_radii(graph, x, cap):
            yield int(x), float(r)


@dataclass(frozen=True)
class Net:
    eps: float
    points: tuple[int, ...]
    host: tuple[int, ...]


def build_net(graph: WeightedGraph, host, eps: float) -> Net:
    """Greedy eps-net of ``host`` scanning vertex ids in ascending order."""
    host = np.unique(np.asarray(host, dtype=np.int64))
    if host.size == 0:
        raise ValueError("host set must be nonempty")
    d = graph.distances
    points: list[int] = []
    for x in host:
        if all(d[x, q] >= eps for q in points):
            points.append(int(x))
    return Net(float(eps), tuple(points), tuple(int(h) for h in host))


def is_maximal_net(graph: WeightedGraph, net: Net) -> bool:
    d = graph.distances
    pts = np.array(net.points)
    if pts.size > 1:
        sub = d[np.ix_(pts, pts)]
        if np.any(sub[~np.eye(pts.size, dtype=bool)] < net.eps):
            return False
    for h in net.host:
        if h not in net.points and np.all(d[h, pts] >= net.eps):
            return False
    return True


@dataclass
class AverageComparison:
    lhs: float
    middle: float
    rhs: float
    c_l: float

    @property
    def holds(self) -> bool:
        tol = 1e-12 * max(1.0, abs(self.rhs))
        return self.lhs <= self.middle + tol and self.middle <= self.rhs + tol


def average_comparison(graph: WeightedGraph, f, ball: Ball, sub: Ball, L: float, p: float) -> AverageComparison:
    """Compare averages on nested balls: |f_B' - f_B|^p against LB-oscillations.

    Requires members(sub) inside members(L*ball) and rad(sub) >= rad(ball)/L.
    The constant C_L is mu(LB) / min(mu(B'), mu(B)) for this instance; the
    min keeps the second comparison valid when B' is larger than B.
    """
    big = ball_mask(graph, ball.inflate(L))
    small = ball_mask(graph, sub)
    if np.any(small & ~big):
        raise ValueError("sub-ball must lie inside the inflated ball")
    if sub.radius < ball.radius / L:
        raise ValueError("sub-ball radius must be at least rad(B)/L")
    f = np.asarray(f, dtype=float)
    fb = average(graph, f, ball_mask(graph, ball))
    fsub = average(graph, f, small)
    flb = average(graph, f, big)
    c_l = measure(graph, big) / min(measure(graph, small), measure(graph, ball_mask(graph, ball)))
    lhs = abs(fsub - fb) ** p
    middle = c_l * average(graph, np.abs(f - fb) ** p, big)
    rhs = 2 ** p * c_l ** 2 * average(graph, np.abs(f - flb) ** p, big)
    return AverageComparison(lhs, middle, rhs, c_l)
