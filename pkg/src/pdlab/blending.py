"""Whitney blending and the Poincare-type membership check.

``whitney_blend`` glues f (kept on the closed ball B0) to g (kept off
(1+eta)B0) through a Whitney cover of the annulus and its partition of unity:
after the reduction f~ = f - g, near balls (centre within eta/2 rad(B0) of B0)
carry the average f~_B and far balls carry 0.

Boundary agreement is exact: h is written as f on closure(B0) and as g off
(1+eta)B0 directly, never as (f - g) + g.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .energy import gamma
from .graph import (Ball, WeightedGraph, average, ball_mask, build_net, closed_ball_mask,
                    dist_to_set, measure, realized_radii)
from .partition import SobolevPartition, sobolev_partition
from .scale import ScaleFunction, power_scale
from .whitney import MIN_LAMBDA, WhitneyCover, whitney_cover


@dataclass
class BlendResult:
    h: np.ndarray
    f: np.ndarray
    g: np.ndarray
    ball: Ball
    eta: float
    p: float
    lam: float
    omega: np.ndarray
    inner: np.ndarray  # closure(B0)
    outer: np.ndarray  # (1+eta)B0
    cover: WhitneyCover | None
    partition: SobolevPartition | None
    coeff: np.ndarray  # c_B in partition order
    near: np.ndarray  # membership of each partition ball in the near family
    degenerate: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def reduced(self) -> np.ndarray:
        """h - g, the blend of f - g against 0."""
        return self.h - self.g

    def boundary_exact(self) -> bool:
        if self.degenerate:
            return bool(np.array_equal(self.h, self.f))
        return bool(np.array_equal(self.h[self.inner], self.f[self.inner])
                    and np.array_equal(self.h[~self.outer], self.g[~self.outer]))


def whitney_blend(graph: WeightedGraph, f, g, ball: Ball, eta: float, p: float,
                  lam: float = MIN_LAMBDA, scale: ScaleFunction | None = None,
                  ordering: str = "radius", cache=None) -> BlendResult:
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    scale = scale or power_scale(2.0)
    outer = ball_mask(graph, ball.inflate(1 + eta))
    inner = closed_ball_mask(graph, ball)
    if outer.all():
        # nothing lies off (1+eta)B0, so h = f already satisfies both constraints
        return BlendResult(f.copy(), f, g, ball, eta, p, lam, np.zeros(graph.n, bool), inner, outer,
                           None, None, np.zeros(0), np.zeros(0, bool), True,
                           ["X \\ (1+eta)B0 is empty; h = f"])
    ft = f - g
    omega = outer & ~inner
    h = g.copy()
    h[inner] = f[inner]
    if not omega.any():
        return BlendResult(h, f, g, ball, eta, p, lam, omega, inner, outer, None, None,
                           np.zeros(0), np.zeros(0, bool), False, ["annulus is empty"])

    cover = whitney_cover(graph, omega, lam)
    part = sobolev_partition(graph, cover.balls, scale, p, ordering, cache=cache)
    b0 = ball_mask(graph, ball)
    d_b0 = dist_to_set(graph, b0)
    near = np.array([d_b0[b.center] <= 0.5 * eta * ball.radius for b in part.balls])
    coeff = np.array([average(graph, ft, ball_mask(graph, b)) if nr else 0.0
                      for b, nr in zip(part.balls, near)])
    h[omega] = g[omega] + (coeff @ part.phi)[omega]
    return BlendResult(h, f, g, ball, eta, p, lam, omega, inner, outer, cover, part, coeff, near)


def blend_operator(graph: WeightedGraph, res: BlendResult) -> np.ndarray:
    """Matrix H with h = g + H (f - g) for the geometry of ``res``.

    The cover, partition and near family do not depend on f or g, so the
    blend is linear in the reduced input.
    """
    n = graph.n
    if res.degenerate:
        return np.eye(n)
    H = np.diag(res.inner.astype(float))
    if res.partition is None:
        return H
    for b, phi, nr in zip(res.partition.balls, res.partition.phi, res.near):
        if not nr:
            continue
        m = ball_mask(graph, b)
        avg = np.where(m, graph.mu, 0.0) / measure(graph, m)
        H[res.omega] += np.outer(phi[res.omega], avg)
    return H


# --------------------------------------------------------------------------

@dataclass
class BlendEnergyReport:
    lhs: float  # Gamma<h>(2B0)
    oscillation: float  # mu(B0)/Psi(B0) * avg_{(1+eta)B0} |f-g|^p
    energy_f: float
    energy_g: float
    c_wb: float
    lp_ratio: float  # int |h-g|^p / int_{(1+eta)B0} |f-g|^p
    lp_bound: float  # 1 + max mu(2B)/mu(B) * member overlap

    @property
    def rhs(self) -> float:
        return self.oscillation + self.energy_f + self.energy_g

    @property
    def finite(self) -> bool:
        return bool(np.isfinite(self.c_wb))

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "oscillation": self.oscillation,
                "energy_f": self.energy_f, "energy_g": self.energy_g, "C_WB": self.c_wb,
                "lp_ratio": self.lp_ratio, "lp_bound": self.lp_bound}


def _ratio(num: float, den: float, atol: float = 1e-14) -> float:
    if den > 0:
        return num / den
    return 0.0 if num <= atol else np.inf


def blend_energy_report(graph: WeightedGraph, res: BlendResult, scale: ScaleFunction) -> BlendEnergyReport:
    p = res.p
    two = ball_mask(graph, res.ball.inflate(2.0))
    lhs = float(gamma(graph, res.h, p)[two].sum())
    ft = res.f - res.g
    osc = (measure(graph, ball_mask(graph, res.ball)) / scale.of_ball(res.ball)
           * average(graph, np.abs(ft) ** p, res.outer))
    ef = float(gamma(graph, res.f, p)[two].sum())
    eg = float(gamma(graph, res.g, p)[two].sum())
    c_wb = _ratio(lhs, osc + ef + eg)

    ht = res.reduced
    mu = graph.mu
    lp_num = float(np.dot(mu, np.abs(ht) ** p))
    lp_den = float(np.dot(mu[res.outer], np.abs(ft[res.outer]) ** p))
    bound = 1.0
    if res.partition is not None and len(res.partition.balls):
        masks = np.array([ball_mask(graph, b) for b in res.partition.balls])
        dbl = max(measure(graph, ball_mask(graph, b.inflate(2.0))) / measure(graph, m)
                  for b, m in zip(res.partition.balls, masks))
        bound = 1.0 + dbl * int(masks.sum(axis=0).max())
    return BlendEnergyReport(lhs, float(osc), ef, eg, float(c_wb), _ratio(lp_num, lp_den), bound)


# --------------------------------------------------------------------------

@dataclass
class Convolution:
    values: np.ndarray
    k: int
    eps: float
    balls: list[Ball]
    lp_distance: float
    below_edge_scale: bool


def discrete_convolution(graph: WeightedGraph, h, k: int, p: float,
                         scale: ScaleFunction | None = None, cache=None) -> Convolution:
    """h_k = sum_B h_B phi_B over the balls B(n, 2^-k), n in a 2^-k net of X."""
    h = np.asarray(h, dtype=float)
    eps = 2.0 ** (-k)
    positive = graph.length.min() if graph.m else np.inf
    if eps < positive:
        return Convolution(h.copy(), k, eps, [], 0.0, True)
    net = build_net(graph, np.arange(graph.n), eps)
    balls = [Ball(c, eps) for c in net.points]
    part = sobolev_partition(graph, balls, scale or power_scale(2.0), p, cache=cache)
    avgs = np.array([average(graph, h, ball_mask(graph, b)) for b in part.balls])
    hk = avgs @ part.phi
    dist = float(np.dot(graph.mu, np.abs(hk - h) ** p) ** (1 / p))
    return Convolution(hk, k, eps, part.balls, dist, False)


# --------------------------------------------------------------------------

def c_delta(eta: float, lam: float) -> float:
    """Largest C with (12 + 6 Lambda^3) C <= eta / 2."""
    return eta / (2 * (12 + 6 * lam ** 3))


def blending_nu(graph: WeightedGraph, res: BlendResult, scale: ScaleFunction) -> np.ndarray:
    """Vertex measure nu bounding the oscillations of the reduced blend.

    sum_B Psi(B)/mu(B) Gamma<f~>(2 Lambda^2 B) Gamma<psi_B>  +  Gamma<f~>
      + avg_{(1+eta)B0} |f~|^p * sum_{rad(B) >= eta rad(B0) / (12 Lambda^3)} Gamma<psi_B>
    """
    p = res.p
    ft = res.f - res.g
    g_f = gamma(graph, ft, p)
    nu = g_f.copy()
    if res.partition is None:
        return nu
    lam = res.lam
    big = res.eta * res.ball.radius / (12 * lam ** 3)
    osc = average(graph, np.abs(ft) ** p, res.outer)
    for b, psi in zip(res.partition.balls, res.partition.psi):
        g_psi = gamma(graph, psi, p)
        weight = scale.of_ball(b) / measure(graph, ball_mask(graph, b))
        nu += weight * g_f[ball_mask(graph, b.inflate(2 * lam ** 2))].sum() * g_psi
        if b.radius >= big:
            nu += osc * g_psi
    return nu


@dataclass
class MembershipReport:
    hypothesis_constant: float  # max avg_B|h-h_B|^p / (Psi(B)/mu(B) nu(Lambda B))
    conclusion_constant: float  # max Gamma<h>(A) / nu(A_delta) over sampled closed sets
    balls_swept: int
    vacuous: bool  # every swept ball was a single vertex
    worst_ball: Ball | None
    cases: dict = field(default_factory=dict)
    coverage: dict = field(default_factory=dict)
    reduction_ok: bool = True  # avg|h-h_B|^p <= 2^(p+1) avg|h-m_B|^p on every ball

    @property
    def passed(self) -> bool:
        return (np.isfinite(self.hypothesis_constant) and np.isfinite(self.conclusion_constant)
                and self.reduction_ok)

    def to_dict(self) -> dict:
        return {"hypothesis_constant": self.hypothesis_constant,
                "conclusion_constant": self.conclusion_constant,
                "balls_swept": self.balls_swept, "vacuous": self.vacuous,
                "worst_ball": None if self.worst_ball is None else
                [self.worst_ball.center, self.worst_ball.radius],
                "cases": self.cases, "coverage": self.coverage,
                "reduction_ok": self.reduction_ok, "passed": self.passed}


def sweep_balls(graph: WeightedGraph, max_radius: float):
    for x in range(graph.n):
        radii = realized_radii(graph, x)
        small = radii[radii <= max_radius]
        if small.size == 0:
            # the smallest realized radius isolates x; shrink it below max_radius
            small = np.array([max_radius])
        for r in small:
            yield Ball(x, float(r))


def classify_ball(graph: WeightedGraph, res: BlendResult, ball: Ball, mask=None) -> tuple[str, int | None]:
    """Case of the oscillation argument for ``ball`` against a blend.

    A      ball inside B0 or inside X \\ (1+eta)B0
    B-empty  meets the annulus but no near Whitney ball
    B.1    meets a near ball B_* with rad(B_*) <= rad(B)
    B.2    meets a near ball B_* with rad(B_*) > rad(B)
    sphere   none of the above (meets only the sphere d = rad(B0) and B0)
    B_* is the first near ball in partition order meeting ``ball``.
    """
    m = ball_mask(graph, ball) if mask is None else mask
    b0 = ball_mask(graph, res.ball)
    if np.all(b0[m]) or not np.any(res.outer[m]):
        return "A", None
    if not np.any(res.omega[m]):
        return "sphere", None
    if res.partition is None:
        return "B-empty", None
    for j, (b, nr) in enumerate(zip(res.partition.balls, res.near)):
        if nr and np.any(ball_mask(graph, b)[m]):
            return ("B.1" if b.radius <= ball.radius else "B.2"), j
    return "B-empty", None


def pi_membership_check(graph: WeightedGraph, h, nu, lam: float, delta: float, p: float,
                        scale: ScaleFunction, blend: BlendResult | None = None,
                        closed_sets=None) -> MembershipReport:
    """Sweep balls with rad <= delta against the oscillation hypothesis.

    With ``blend`` given (and h its reduced blend) each ball is also sorted
    into the cases of the oscillation argument, the m_B shortcut is checked,
    and a coverage census over all radii up to rad(B0) is recorded.
    """
    h = np.asarray(h, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if np.any(nu < 0):
        raise ValueError("nu must be a nonnegative measure")
    worst, worst_ball, swept, multi = 0.0, None, 0, False
    cases: dict[str, int] = {}
    reduction_ok = True
    for ball in sweep_balls(graph, delta):
        m = ball_mask(graph, ball)
        swept += 1
        multi |= bool(m.sum() > 1)
        hb = average(graph, h, m)
        lhs = average(graph, np.abs(h - hb) ** p, m)
        rhs = scale.of_ball(ball) / measure(graph, m) * nu[ball_mask(graph, ball.inflate(lam))].sum()
        r = _ratio(lhs, rhs)
        if r > worst:
            worst, worst_ball = r, ball
        if blend is not None:
            case, j = classify_ball(graph, blend, ball, m)
            cases[case] = cases.get(case, 0) + 1
            mb = _m_ball(graph, blend, ball, m, case, h)
            if lhs > 2 ** (p + 1) * average(graph, np.abs(h - mb) ** p, m) * (1 + 1e-12) + 1e-300:
                reduction_ok = False

    coverage: dict[str, int] = {}
    if blend is not None:
        for ball in sweep_balls(graph, blend.ball.radius):
            case, _ = classify_ball(graph, blend, ball)
            coverage[case] = coverage.get(case, 0) + 1

    # conclusion on closed sets: Gamma<h>(A) <= C nu(A_delta)
    g_h = gamma(graph, h, p)
    if closed_sets is None:
        closed_sets = [np.ones(graph.n, bool)] + [
            closed_ball_mask(graph, Ball(x, r)) for x in range(0, graph.n, max(1, graph.n // 16))
            for r in realized_radii(graph, x)[::4]]
    concl = 0.0
    reach = 4 * delta * lam
    for A in closed_sets:
        A = np.asarray(A, dtype=bool)
        if not A.any():
            continue
        grown = dist_to_set(graph, A) <= reach
        concl = max(concl, _ratio(float(g_h[A].sum()), float(nu[grown].sum())))
    return MembershipReport(float(worst), float(concl), swept, not multi, worst_ball,
                            cases, coverage, reduction_ok)


def _m_ball(graph, blend: BlendResult, ball: Ball, mask, case: str, h) -> float:
    ft = blend.f - blend.g
    if case == "A":
        return average(graph, ft, mask) if np.all(ball_mask(graph, blend.ball)[mask]) else 0.0
    if case == "B-empty":
        return 0.0
    if case == "B.1":
        return average(graph, ft, mask)
    return average(graph, h, mask)
