"""Graph families used as fixtures: paths, cycles, lattice boxes, pre-fractals.

All generators are deterministic and normalize mu to total mass 1 (uniform
per vertex).  Pre-fractal edge lengths shrink with the level so the
diameter stays fixed; conductances follow the family's renormalization.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np

from .graph import WeightedGraph, check_connected

MAX_LEVEL = {"gasket": 7, "carpet": 4}
GASKET_RENORMALIZATION = 5.0 / 3.0


class FixtureError(ValueError):
    pass


@dataclass(frozen=True)
class FamilySpec:
    family: str
    size: int  # number of edges (path), vertices (cycle), side (lattice), level (fractals)
    dim: int = 2  # lattice dimension
    multiplier: float | None = None  # per-level conductance factor for fractals
    params: dict = field(default_factory=dict, hash=False)

    @property
    def label(self) -> str:
        if self.family == "lattice_box":
            return f"lattice_box-{self.dim}-{self.size}"
        return f"{self.family}-{self.size}"


def _build(n, edges, w=None, length=None, coords=None, name=""):
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    m = edges.shape[0]
    g = WeightedGraph(np.full(n, 1.0 / n), edges,
                      np.ones(m) if w is None else np.broadcast_to(w, (m,)).copy(),
                      np.ones(m) if length is None else np.broadcast_to(length, (m,)).copy(),
                      coords, name)
    check_connected(g)
    return g


def path(n: int) -> WeightedGraph:
    """n unit edges on n + 1 vertices."""
    if n < 1:
        raise FixtureError("path needs at least one edge")
    return _build(n + 1, [(i, i + 1) for i in range(n)],
                  coords=np.arange(n + 1, dtype=float)[:, None], name=f"path-{n}")


def capacity_path(n: int) -> WeightedGraph:
    """Path of n unit-conductance edges whose metric makes B(v0, 1) = {v0}
    and B(v0, 2) = all but v_n, so the cutoff of B(v0, 1) is the endpoint
    condenser potential (capacity n^(1-p)).
    """
    if n < 1:
        raise FixtureError("path needs at least one edge")
    if n == 1:
        return _build(2, [(0, 1)], length=2.0, coords=np.arange(2.0)[:, None], name="capacity_path-1")
    length = np.full(n, 1.0 / (2 * n))
    length[0] = length[-1] = 1.0
    return _build(n + 1, [(i, i + 1) for i in range(n)], length=length,
                  coords=np.arange(n + 1, dtype=float)[:, None], name=f"capacity_path-{n}")


def cycle(n: int) -> WeightedGraph:
    if n < 3:
        raise FixtureError("cycle needs at least three vertices")
    t = 2 * np.pi * np.arange(n) / n
    return _build(n, [(i, (i + 1) % n) for i in range(n)],
                  coords=np.c_[np.cos(t), np.sin(t)], name=f"cycle-{n}")


def lattice_box(dim: int, side: int) -> WeightedGraph:
    """Grid {0..side-1}^dim with unit nearest-neighbour edges."""
    if dim < 1 or side < 1:
        raise FixtureError("lattice box needs dim >= 1 and side >= 1")
    pts = list(itertools.product(range(side), repeat=dim))
    index = {p: i for i, p in enumerate(pts)}
    edges = []
    for p, i in index.items():
        for k in range(dim):
            q = p[:k] + (p[k] + 1,) + p[k + 1:]
            if q in index:
                edges.append((i, index[q]))
    if not edges:
        raise FixtureError("lattice box with one vertex has no edges")
    return _build(len(pts), edges, coords=np.array(pts, dtype=float), name=f"lattice_box-{dim}-{side}")


def _gasket_cells(level: int):
    """Integer triangle-lattice corners (i, j) of the level-`level` cells."""
    cells = [((0, 0), (1, 0), (0, 1))]
    for k in range(level):
        s = 2 ** k
        nxt = []
        for shift in ((0, 0), (s, 0), (0, s)):
            for tri in cells:
                nxt.append(tuple((a + shift[0], b + shift[1]) for a, b in tri))
        cells = nxt
    return cells


def gasket(level: int, multiplier: float | None = None) -> WeightedGraph:
    """Sierpinski gasket pre-fractal: 3^level triangles of side 2^-level.

    Conductances are ``multiplier ** level`` (default 5/3, the p = 2
    resistance renormalization).
    """
    if not 0 <= level <= MAX_LEVEL["gasket"]:
        raise FixtureError(f"gasket level must be in 0..{MAX_LEVEL['gasket']}")
    cells = _gasket_cells(level)
    pts = sorted({v for tri in cells for v in tri}, key=lambda v: (v[1], v[0]))
    index = {p: i for i, p in enumerate(pts)}
    edges = sorted({tuple(sorted((index[a], index[b])))
                    for tri in cells for a, b in itertools.combinations(tri, 2)})
    scale = 2.0 ** (-level)
    xy = np.array([(i + 0.5 * j, j * np.sqrt(3) / 2) for i, j in pts]) * scale
    mult = GASKET_RENORMALIZATION if multiplier is None else multiplier
    return _build(len(pts), edges, w=mult ** level, length=scale, coords=xy, name=f"gasket-{level}")


def carpet(level: int, multiplier: float | None = None) -> WeightedGraph:
    """Sierpinski carpet pre-fractal: corners and sides of the kept 3^-level cells.

    The p = 2 renormalization of the carpet is not known in closed form; the
    default multiplier 1 is a placeholder and emits a warning.
    """
    if not 0 <= level <= MAX_LEVEL["carpet"]:
        raise FixtureError(f"carpet level must be in 0..{MAX_LEVEL['carpet']}")
    if multiplier is None:
        warnings.warn("carpet conductance renormalization unknown; using multiplier 1", stacklevel=2)
        multiplier = 1.0
    side = 3 ** level
    kept = []
    for a in range(side):
        for b in range(side):
            x, y, hole = a, b, False
            while x or y:
                if x % 3 == 1 and y % 3 == 1:
                    hole = True
                    break
                x //= 3
                y //= 3
            if not hole:
                kept.append((a, b))
    segs = set()
    for a, b in kept:
        corners = [(a, b), (a + 1, b), (a + 1, b + 1), (a, b + 1)]
        for k in range(4):
            segs.add(tuple(sorted((corners[k], corners[(k + 1) % 4]))))
    pts = sorted({v for s in segs for v in s}, key=lambda v: (v[1], v[0]))
    index = {p: i for i, p in enumerate(pts)}
    edges = sorted(tuple(sorted((index[a], index[b]))) for a, b in segs)
    scale = 3.0 ** (-level)
    return _build(len(pts), edges, w=multiplier ** level, length=scale,
                  coords=np.array(pts, dtype=float) * scale, name=f"carpet-{level}")


def dumbbell(k: int, bridge: int = 1) -> WeightedGraph:
    """Two complete graphs K_k joined by a path of ``bridge`` edges."""
    if k < 2 or bridge < 1:
        raise FixtureError("dumbbell needs k >= 2 and bridge >= 1")
    edges = [(i, j) for i, j in itertools.combinations(range(k), 2)]
    edges += [(k + i, k + j) for i, j in itertools.combinations(range(k), 2)]
    chain = [k - 1] + [2 * k + t for t in range(bridge - 1)] + [k]
    edges += list(zip(chain[:-1], chain[1:]))
    return _build(2 * k + bridge - 1, edges, name=f"dumbbell-{k}-{bridge}")


def star(k: int) -> WeightedGraph:
    """K_{1,k}: a non-doubling family as k grows."""
    return _build(k + 1, [(0, i) for i in range(1, k + 1)], name=f"star-{k}")


FAMILIES = ("path", "cycle", "lattice_box", "gasket", "carpet", "dumbbell")


def generate(spec: FamilySpec) -> WeightedGraph:
    fam = spec.family
    if fam == "path":
        return path(spec.size)
    if fam == "cycle":
        return cycle(spec.size)
    if fam == "lattice_box":
        return lattice_box(spec.dim, spec.size)
    if fam == "gasket":
        return gasket(spec.size, spec.multiplier)
    if fam == "carpet":
        return carpet(spec.size, spec.multiplier)
    if fam == "dumbbell":
        return dumbbell(spec.size, int(spec.params.get("bridge", 1)))
    raise FixtureError(f"unknown family {fam!r}; expected one of {', '.join(FAMILIES)}")


def coarsening_map(fine: WeightedGraph, coarse: WeightedGraph) -> np.ndarray:
    """Vertex map fine -> coarse sending each vertex to the nearest coarse one.

    Uses the generator coordinates; ties go to the lower coarse id.  Coarse
    vertices that reappear in the fine graph map onto themselves.
    """
    if fine.coords is None or coarse.coords is None:
        raise FixtureError("coarsening needs generator coordinates")
    d = np.linalg.norm(fine.coords[:, None, :] - coarse.coords[None, :, :], axis=2)
    return np.argmin(np.round(d, 12), axis=1)
