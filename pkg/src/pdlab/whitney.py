"""Whitney covers of vertex sets.

For Omega with nonempty complement and Lambda >= 8 the cover is built scale by
scale: Omega_i = {x in Omega : 2^(i-1) <= d(x, X \\ Omega) <= 2^i} gets a greedy
2^(i-3) Lambda^-3 net, and each net point n contributes B(n, 2^i Lambda^-3).

Certificates checked on every cover:
  (1) Lambda^3 rad/2 <= d(x_B, X \\ Omega) <= Lambda^3 rad,
  (2) overlap of the Lambda^2-inflated balls (recorded as C_D),
  (3) the balls cover Omega.
(1) is checked in exact rational arithmetic on the floating point inputs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .graph import Ball, WeightedGraph, ball_mask, build_net, dist_to_set

MIN_LAMBDA = 8.0


class CoverError(ValueError):
    pass


@dataclass
class WhitneyCover:
    omega: np.ndarray
    lam: float
    balls: list[Ball]
    scale_index: list[int]
    masks: np.ndarray  # (len(balls), n) member masks
    dist_to_complement: np.ndarray
    property1: bool = True
    property3: bool = True
    overlap: int = 0  # C_D for the Lambda^2 inflations
    violations: list[str] = field(default_factory=list)

    @property
    def certified(self) -> bool:
        return self.property1 and self.property3 and not self.violations

    def __len__(self):
        return len(self.balls)

    def to_list(self) -> list[dict]:
        return [{"center": b.center, "radius": b.radius, "scale_index": i}
                for b, i in zip(self.balls, self.scale_index)]

    def to_json(self) -> str:
        return json.dumps(self.to_list(), indent=1)

    def summary(self) -> dict:
        return {
            "lambda": self.lam,
            "balls": len(self.balls),
            "scales": sorted(set(self.scale_index)),
            "property1": self.property1,
            "property3": self.property3,
            "C_D": self.overlap,
            "singletons": int(sum(m.sum() == 1 for m in self.masks)),
        }


def dyadic_range(d_omega: np.ndarray) -> range:
    lo = math.floor(math.log2(d_omega.min()))
    hi = math.ceil(math.log2(d_omega.max()))
    return range(lo, hi + 1)


def whitney_cover(graph: WeightedGraph, omega, lam: float = MIN_LAMBDA) -> WhitneyCover:
    omega = np.asarray(omega, dtype=bool)
    if lam < MIN_LAMBDA:
        raise CoverError(f"Lambda must be >= {MIN_LAMBDA:g}, got {lam}")
    if omega.all():
        raise CoverError("complement empty: Omega = X has no Whitney cover")
    dcomp = dist_to_set(graph, ~omega)
    if not omega.any():
        return WhitneyCover(omega, lam, [], [], np.zeros((0, graph.n), bool), dcomp)

    d_om = dcomp[omega]
    lam3 = lam ** 3
    balls, scales = [], []
    for i in dyadic_range(d_om):
        lo, hi = math.ldexp(1.0, i - 1), math.ldexp(1.0, i)
        layer = np.flatnonzero(omega & (dcomp >= lo) & (dcomp <= hi))
        if layer.size == 0:
            continue
        net = build_net(graph, layer, math.ldexp(1.0, i - 3) / lam3)
        r = math.ldexp(1.0, i) / lam3
        for c in net.points:
            balls.append(Ball(c, r))
            scales.append(i)
    masks = np.array([ball_mask(graph, b) for b in balls])
    cover = WhitneyCover(omega, lam, balls, scales, masks, dcomp)
    certify_cover(graph, cover)
    return cover


def certify_cover(graph: WeightedGraph, cover: WhitneyCover) -> WhitneyCover:
    # the radius 2^i / Lambda^3 is generally not a float; certify with the
    # exact rational radius and check the float radius selects the same members
    lam3 = Fraction(cover.lam) ** 3
    bad, drift = [], []
    for b, i, m in zip(cover.balls, cover.scale_index, cover.masks):
        d = Fraction(float(cover.dist_to_complement[b.center]))
        r = Fraction(2) ** i / lam3
        if not (lam3 * r / 2 <= d <= lam3 * r):
            bad.append(b)
        row = graph.distances[b.center]
        near = np.flatnonzero(np.abs(row - b.radius) <= 1e-9 * max(b.radius, 1.0))
        if any((Fraction(float(row[v])) < r) != bool(m[v]) for v in near):
            drift.append(b)
    cover.property1 = not bad
    if bad:
        cover.violations.append(f"property (1) fails for {len(bad)} balls, e.g. {bad[0]}")
    if drift:
        cover.violations.append(f"float radius changes the member set of {len(drift)} balls, e.g. {drift[0]}")
    covered = cover.masks.any(axis=0) if len(cover) else np.zeros(graph.n, bool)
    cover.property3 = bool(np.all(covered[cover.omega]))
    if not cover.property3:
        cover.violations.append(f"property (3): {int((cover.omega & ~covered).sum())} vertices uncovered")
    cover.overlap = inflated_overlap(graph, cover.balls, cover.lam ** 2)
    return cover


def inflated_overlap(graph: WeightedGraph, balls, factor: float) -> int:
    if not balls:
        return 0
    counts = np.zeros(graph.n, dtype=int)
    for b in balls:
        counts += ball_mask(graph, b.inflate(factor))
    return int(counts.max())


def local_finiteness(graph: WeightedGraph, balls) -> int:
    """Largest number of balls B' meeting 2B, over B (the C_N of the collection)."""
    if not balls:
        return 0
    masks = np.array([ball_mask(graph, b) for b in balls])
    doubled = np.array([ball_mask(graph, b.inflate(2.0)) for b in balls])
    hits = (doubled.astype(np.int64) @ masks.T.astype(np.int64)) > 0
    return int(hits.sum(axis=1).max())


@dataclass
class NeighborReport:
    pairs_checked: int
    violations: list[tuple]
    scale_gap_violations: list[tuple]
    max_radius_ratio: float
    max_scale_gap: int

    @property
    def passed(self) -> bool:
        return not self.violations and not self.scale_gap_violations


def neighbor_geometry_check(graph: WeightedGraph, cover: WhitneyCover) -> NeighborReport:
    """Check B in 16B', B' in 16B and radius ratio <= 3 for close pairs.

    Close means d(B, B') <= 2 rad(B') with d the distance between member
    sets.  Also checks that intersecting balls have scale indices within 2.
    """
    viol, gaps = [], []
    k = len(cover)
    if k == 0:
        return NeighborReport(0, [], [], 0.0, 0)
    masks = cover.masks
    radii = np.array([b.radius for b in cover.balls])
    scales = np.array(cover.scale_index)
    big = np.array([ball_mask(graph, b.inflate(16.0)) for b in cover.balls])
    # distance from every ball to every vertex, then between member sets
    to_vertex = np.array([graph.distances[m].min(axis=0) for m in masks])
    dist = np.array([to_vertex[:, m].min(axis=1) for m in masks]).T
    meets = (masks.astype(np.int64) @ masks.T.astype(np.int64)) > 0
    np.fill_diagonal(meets, False)
    gap = np.abs(scales[:, None] - scales[None, :])
    max_gap = int(gap[meets].max()) if meets.any() else 0
    for a, b in zip(*np.nonzero(meets & (gap > 2))):
        gaps.append((int(a), int(b), int(gap[a, b])))
    # leaks[a, b]: some member of B_a lies outside 16 B_b
    leaks = (masks.astype(np.int64) @ (~big).T.astype(np.int64)) > 0
    close = dist <= 2 * radii[None, :]
    np.fill_diagonal(close, False)
    ratio = 1.0
    for a, b in zip(*np.nonzero(close)):
        ratio = max(ratio, radii[a] / radii[b])
        problems = []
        if leaks[a, b]:
            problems.append("B not in 16B'")
        if leaks[b, a]:
            problems.append("B' not in 16B")
        if radii[a] > 3 * radii[b] or radii[b] > 3 * radii[a]:
            problems.append("radius ratio > 3")
        if problems:
            viol.append((int(a), int(b), problems))
    return NeighborReport(int(close.sum()), viol, gaps, float(ratio), max_gap)
