"""Sobolev partitions of unity subordinate to a ball collection.

Built by the inductive rule phi_n = min(psi_n, 1 - sum_{i<n} phi_i) from
cutoffs psi_n (1 on B_n, 0 off 2B_n).  The audit follows the energy argument:
per ball the space splits into E = {phi = psi}, F_< and F_= according to
whether the previous prefix sum is below 1 or equal to it.

Vertex measures do not localize exactly on graphs (a vertex shares its edges
with neighbours outside the set), so the set-wise identities are checked on
interiors, where they are exact, and the edge-scale remainder is reported.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .energy import energy, gamma, interior
from .graph import Ball, WeightedGraph, ball_mask, measure
from .scale import ScaleFunction
from .solver import CutoffFunction, capacity_minimizer

SUM_TOL = 1e-12


class PartitionError(ValueError):
    pass


@dataclass
class SobolevPartition:
    balls: list[Ball]  # in construction order
    order: list[int]  # position in the input list for each constructed ball
    phi: np.ndarray  # (k, n)
    psi: np.ndarray  # (k, n)
    p: float
    c_b: np.ndarray
    c_cap: np.ndarray
    c_n: int
    ordering: str
    sum_error: float = 0.0
    prefix_ok: bool = True
    support_ok: bool = True
    implication_ok: bool = True
    notes: list[str] = field(default_factory=list)

    @property
    def certified(self) -> bool:
        return self.sum_error <= SUM_TOL and self.prefix_ok and self.support_ok and self.implication_ok

    def total(self) -> np.ndarray:
        return self.phi.sum(axis=0)

    def summary(self) -> dict:
        return {
            "balls": len(self.balls),
            "ordering": self.ordering,
            "C_N": self.c_n,
            "max_C_B": float(self.c_b.max()) if self.c_b.size else 0.0,
            "max_C_cap": float(self.c_cap.max()) if self.c_cap.size else 0.0,
            "sum_error": self.sum_error,
            "prefix_ok": self.prefix_ok,
            "support_ok": self.support_ok,
            "implication_ok": self.implication_ok,
        }


def order_balls(balls, ordering: str = "radius") -> list[int]:
    idx = list(range(len(balls)))
    if ordering == "radius":
        return sorted(idx, key=lambda k: (-balls[k].radius, balls[k].center))
    if ordering == "given":
        return idx
    if ordering == "center":
        return sorted(idx, key=lambda k: (balls[k].center, -balls[k].radius))
    raise ValueError(f"unknown ordering {ordering!r}")


def _cutoff_values(c) -> np.ndarray:
    return np.asarray(c.values if isinstance(c, CutoffFunction) else c, dtype=float)


def check_cutoff(graph: WeightedGraph, ball: Ball, psi: np.ndarray, label) -> None:
    inside = ball_mask(graph, ball)
    outside = ~ball_mask(graph, ball.inflate(2.0))
    if np.any(psi < 0) or np.any(psi > 1):
        raise PartitionError(f"cutoff for ball {label} {ball} leaves [0, 1]")
    if np.any(psi[inside] != 1.0):
        raise PartitionError(f"cutoff for ball {label} {ball} is not 1 on the ball")
    if np.any(psi[outside] != 0.0):
        raise PartitionError(f"cutoff for ball {label} {ball} is not 0 off the doubled ball")


def sobolev_partition(graph: WeightedGraph, balls, scale: ScaleFunction, p: float,
                      ordering: str = "radius", cutoffs=None, cache=None) -> SobolevPartition:
    """Exact inductive partition of unity for ``balls``.

    ``cutoffs`` may be given per input ball; otherwise capacity minimizers
    are computed (and memoized in ``cache`` if one is passed).
    """
    from .whitney import local_finiteness

    balls = list(balls)
    order = order_balls(balls, ordering)
    n = graph.n
    k = len(balls)
    phi = np.zeros((k, n))
    psi = np.zeros((k, n))
    c_b = np.zeros(k)
    c_cap = np.zeros(k)
    prefix = np.zeros(n)
    prefix_ok = True
    for pos, j in enumerate(order):
        ball = balls[j]
        if cutoffs is not None:
            ps = _cutoff_values(cutoffs[j])
        elif cache is not None and ball in cache:
            ps = cache[ball]
        else:
            ps = capacity_minimizer(graph, ball, p).values
            if cache is not None:
                cache[ball] = ps
        check_cutoff(graph, ball, ps, j)
        psi[pos] = ps
        phi[pos] = np.minimum(ps, 1.0 - prefix)
        prefix = prefix + phi[pos]
        if prefix.min() < -SUM_TOL or prefix.max() > 1.0 + SUM_TOL:
            prefix_ok = False
        w = scale.of_ball(ball) / measure(graph, ball_mask(graph, ball))
        c_b[pos] = energy(graph, phi[pos], p) * w
        c_cap[pos] = energy(graph, ps, p) * w

    part = SobolevPartition([balls[j] for j in order], order, phi, psi, p, c_b, c_cap,
                            local_finiteness(graph, balls), ordering)
    part.prefix_ok = prefix_ok
    _certify(graph, part)
    return part


def _certify(graph: WeightedGraph, part: SobolevPartition) -> None:
    if not part.balls:
        return
    union = np.zeros(graph.n, bool)
    for pos, ball in enumerate(part.balls):
        union |= ball_mask(graph, ball)
        if np.any(part.phi[pos][~ball_mask(graph, ball.inflate(2.0))] != 0.0):
            part.support_ok = False
            part.notes.append(f"phi for {ball} nonzero off 2B")
    total = part.total()
    part.sum_error = float(np.abs(total[union] - 1.0).max()) if union.any() else 0.0
    if total.min() < -SUM_TOL or total.max() > 1 + SUM_TOL:
        part.prefix_ok = False
    # where a prefix sum is below 1, every earlier phi equals its psi
    prefix = np.zeros(graph.n)
    for pos in range(len(part.balls)):
        prefix = prefix + part.phi[pos]
        below = prefix < 1.0 - SUM_TOL
        if np.any(part.phi[: pos + 1][:, below] != part.psi[: pos + 1][:, below]):
            part.implication_ok = False
            part.notes.append(f"phi != psi below a prefix sum < 1 at step {pos}")
            break


# --------------------------------------------------------------------------

@dataclass
class BallAudit:
    ball: Ball
    c_b: float
    c_cap: float
    total: float  # Gamma<phi>(X)
    mass_e: float
    mass_f_less: float
    mass_f_eq: float
    f_eq_interior: float  # Gamma<phi>(int F_=), zero by locality
    e_interior_gap: float  # Gamma<phi>(int E) - Gamma<psi>(int E), zero
    e_excess: float  # Gamma<phi>(E) - Gamma<psi>(E), edge-scale remainder
    j_n: list[int]
    f_less_interior: float
    j_bound: float  # sum_{j in J_n} Gamma<psi_j>(X)^(1/p), to the p-th power

    @property
    def holds(self) -> bool:
        tol = 1e-10 * max(1.0, self.total)
        return (self.f_eq_interior <= tol and abs(self.e_interior_gap) <= tol
                and self.f_less_interior <= self.j_bound + tol)


@dataclass
class PartitionAudit:
    balls: list[BallAudit]
    c_n: int
    max_j: int  # largest |J_n|

    @property
    def holds(self) -> bool:
        return all(b.holds for b in self.balls)

    def bound_ratio(self, p: float) -> float:
        """max C_B / (max C_cap (1 + C_N^p))."""
        caps = max((b.c_cap for b in self.balls), default=0.0)
        cb = max((b.c_b for b in self.balls), default=0.0)
        if cb == 0.0:
            return 0.0
        return cb / (caps * (1 + self.c_n ** p)) if caps > 0 else np.inf


def partition_energy_audit(graph: WeightedGraph, part: SobolevPartition) -> PartitionAudit:
    p = part.p
    k = len(part.balls)
    doubled = np.array([ball_mask(graph, b.inflate(2.0)) for b in part.balls]) if k else np.zeros((0, graph.n), bool)
    psi_energy = np.array([energy(graph, part.psi[j], p) for j in range(k)])
    audits = []
    prev = np.zeros(graph.n)
    max_j = 0
    for n_, ball in enumerate(part.balls):
        phi, psi = part.phi[n_], part.psi[n_]
        g_phi, g_psi = gamma(graph, phi, p), gamma(graph, psi, p)
        E = phi == psi
        F = ~E
        f_less = F & (prev < 1.0)
        f_eq = F & (prev >= 1.0)
        # J_n: earlier balls whose doubled ball meets 2B_n (those are the
        # only psi_j that can be nonzero near F_<)
        j_n = [j for j in range(n_) if np.any(doubled[j] & doubled[n_])]
        max_j = max(max_j, len(j_n))
        j_bound = sum(psi_energy[j] ** (1 / p) for j in j_n) ** p
        int_e = interior(graph, E)
        audits.append(BallAudit(
            ball, float(part.c_b[n_]), float(part.c_cap[n_]), float(g_phi.sum()),
            float(g_phi[E].sum()), float(g_phi[f_less].sum()), float(g_phi[f_eq].sum()),
            float(g_phi[interior(graph, f_eq)].sum()),
            float(g_phi[int_e].sum() - g_psi[int_e].sum()),
            float(g_phi[E].sum() - g_psi[E].sum()),
            j_n, float(g_phi[interior(graph, f_less)].sum()), float(j_bound),
        ))
        prev = prev + phi
    return PartitionAudit(audits, part.c_n, max_j)
