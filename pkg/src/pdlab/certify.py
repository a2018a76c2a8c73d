"""Best constants for the ball inequalities and the constructive pipeline.

Constants certified per ball B (Lambda = the PI inflation):

  C_cap   Gamma<psi_B>(X) Psi(B) / mu(B)
  C_PI    sup  Psi(B)^-1 int_B |f - f_B|^p dmu          / Gamma<f>(Lambda B)
  C_CS    sup  int_2B |f - f_B|^p dGamma<psi_B>         / Gamma<f>(Lambda B)
  C_cl    sup  int_2B |f|^p dGamma<psi_B>  /  (Gamma<f>(Lambda B) + Psi(B)^-1 int_2B |f|^p dmu)

For p = 2 the suprema are generalized eigenvalues (exact).  Otherwise the
returned values come from a multi-restart ascent and are lower bounds.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import ratio
from .blending import blend_energy_report, blend_operator, whitney_blend
from .energy import check_exponent, edge_differences, energy, gamma
from .graph import (Ball, WeightedGraph, average, ball_mask, build_net, closed_neighborhood,
                    default_radius_samples, doubling_constant, measure, midpoint_radius)
from .ratio import AbsTerm, RatioProblem, RatioResult, energy_term, osc_term
from .scale import ScaleFunction, power_scale
from .solver import (CutoffFunction, DEFAULT_TOL, HypothesisError, capacity_minimizer,
                     condenser_potential, log_caccioppoli_check)

SCHEMA = "pdirichlet-report/1"
DEFAULT_LAMBDA_PI = 8.0


def _scale(scale):
    return scale if scale is not None else power_scale(2.0)


def _ball_starts(graph: WeightedGraph, ball: Ball):
    d = graph.distances[ball.center]
    return [d, np.minimum(d, ball.radius), (d < ball.radius).astype(float)]


# --------------------------------------------------------------------------
# capacity

@dataclass
class CapacityResult:
    value: float
    capacity: float
    cutoff: CutoffFunction
    degenerate: bool

    def to_dict(self) -> dict:
        return {"value": self.value, "capacity": self.capacity, "degenerate": self.degenerate,
                "solver_residual": self.cutoff.residual, "solver_iterations": self.cutoff.iterations}


def capacity_constant(graph: WeightedGraph, ball: Ball, p: float, scale: ScaleFunction | None = None,
                      cutoff: CutoffFunction | None = None, tol: float = DEFAULT_TOL) -> CapacityResult:
    scale = _scale(scale)
    cut = cutoff if cutoff is not None else capacity_minimizer(graph, ball, p, tol)
    cap = energy(graph, cut.values, p)
    value = cap * scale.of_ball(ball) / measure(graph, ball_mask(graph, ball))
    return CapacityResult(float(value), float(cap), cut, bool(cut.degenerate))


# --------------------------------------------------------------------------
# ratio problems

def poincare_problem(graph: WeightedGraph, ball: Ball, lam: float, scale: ScaleFunction) -> RatioProblem:
    b = ball_mask(graph, ball)
    rho = np.where(b, graph.mu, 0.0) / scale.of_ball(ball)
    return RatioProblem(graph.n, [osc_term(graph, rho, b)],
                        [energy_term(graph, ball_mask(graph, ball.inflate(lam)))], True)


def oscillation_2b_problem(graph: WeightedGraph, ball: Ball, lam: float, scale: ScaleFunction) -> RatioProblem:
    """Psi(B)^-1 int_2B |f - f_B|^p dmu against Gamma<f>(Lambda B)."""
    two = ball_mask(graph, ball.inflate(2.0))
    rho = np.where(two, graph.mu, 0.0) / scale.of_ball(ball)
    return RatioProblem(graph.n, [osc_term(graph, rho, ball_mask(graph, ball))],
                        [energy_term(graph, ball_mask(graph, ball.inflate(lam)))], True)


def _cutoff_weight(graph, ball, p, cutoff):
    two = ball_mask(graph, ball.inflate(2.0))
    return np.where(two, gamma(graph, cutoff.values, p), 0.0)


def cs_problem(graph: WeightedGraph, ball: Ball, p: float, lam: float, cutoff: CutoffFunction) -> RatioProblem:
    rho = _cutoff_weight(graph, ball, p, cutoff)
    return RatioProblem(graph.n, [osc_term(graph, rho, ball_mask(graph, ball))],
                        [energy_term(graph, ball_mask(graph, ball.inflate(lam)))], True)


def cs_classical_problem(graph: WeightedGraph, ball: Ball, p: float, lam: float,
                         cutoff: CutoffFunction, scale: ScaleFunction) -> RatioProblem:
    rho = _cutoff_weight(graph, ball, p, cutoff)
    two = ball_mask(graph, ball.inflate(2.0))
    mass = np.where(two, graph.mu, 0.0) / scale.of_ball(ball)
    return RatioProblem(graph.n, [AbsTerm(rho)],
                        [energy_term(graph, ball_mask(graph, ball.inflate(lam))), AbsTerm(mass)], False)


def poincare_constant(graph: WeightedGraph, ball: Ball, p: float, lam: float = DEFAULT_LAMBDA_PI,
                      scale: ScaleFunction | None = None, method: str = "auto",
                      restarts: int = 32, seed: int = 0) -> RatioResult:
    check_exponent(p)
    scale = _scale(scale)
    if ball_mask(graph, ball).sum() == 1:
        return RatioResult(0.0, ratio.TRIVIAL, np.zeros(graph.n), seed=seed,
                           notes=["single-vertex ball: the oscillation vanishes"])
    return ratio.solve(poincare_problem(graph, ball, lam, scale), p, method, restarts, seed,
                       _ball_starts(graph, ball))


def cs_constant(graph: WeightedGraph, ball: Ball, p: float, lam: float = DEFAULT_LAMBDA_PI,
                cutoff: CutoffFunction | None = None, method: str = "auto",
                restarts: int = 32, seed: int = 0) -> RatioResult:
    check_exponent(p)
    cut = cutoff if cutoff is not None else capacity_minimizer(graph, ball, p)
    if not np.any(_cutoff_weight(graph, ball, p, cut) > 0):
        return RatioResult(0.0, ratio.TRIVIAL, np.zeros(graph.n), seed=seed, degenerate=True,
                           notes=["cutoff has no energy on 2B"])
    return ratio.solve(cs_problem(graph, ball, p, lam, cut), p, method, restarts, seed,
                       _ball_starts(graph, ball))


def cs_classical_constant(graph: WeightedGraph, ball: Ball, p: float, lam: float = DEFAULT_LAMBDA_PI,
                          scale: ScaleFunction | None = None, cutoff: CutoffFunction | None = None,
                          method: str = "auto", restarts: int = 32, seed: int = 0) -> RatioResult:
    check_exponent(p)
    scale = _scale(scale)
    cut = cutoff if cutoff is not None else capacity_minimizer(graph, ball, p)
    if not np.any(_cutoff_weight(graph, ball, p, cut) > 0):
        return RatioResult(0.0, ratio.TRIVIAL, np.zeros(graph.n), seed=seed, degenerate=True,
                           notes=["cutoff has no energy on 2B"])
    return ratio.solve(cs_classical_problem(graph, ball, p, lam, cut, scale), p, method, restarts,
                       seed, _ball_starts(graph, ball))


def cs_ratio(graph: WeightedGraph, ball: Ball, f, p: float, lam: float, cutoff: CutoffFunction) -> float:
    """The CS ratio of a single function (0 for f constant on the inflated ball)."""
    return cs_problem(graph, ball, p, lam, cutoff).ratio(np.asarray(f, dtype=float), p)


# --------------------------------------------------------------------------
# equivalence of the two cutoff Sobolev forms

@dataclass
class EquivalenceReport:
    ball: Ball
    p: float
    lam: float
    c_cs: float
    c_classical: float
    c_pi_2b: float  # sup Psi(B)^-1 int_2B |f - f_B|^p dmu / Gamma<f>(Lambda B)
    c_cap_2b: float  # Gamma<psi_B>(2B) Psi(B) / mu(B)
    implied_cs: float  # C_cl (1 + C_PI,2B)
    implied_classical: float  # 2^(p-1) max(C_CS, C_cap,2B)
    exact: bool  # every supremum computed exactly

    @property
    def slack_cs(self) -> float:
        return self.implied_cs - self.c_cs

    @property
    def slack_classical(self) -> float:
        return self.implied_classical - self.c_classical

    @property
    def passed(self) -> bool:
        tol = 1e-9
        return (self.c_cs <= self.implied_cs * (1 + tol) + 1e-300
                and self.c_classical <= self.implied_classical * (1 + tol) + 1e-300)

    def to_dict(self) -> dict:
        return {"ball": [self.ball.center, self.ball.radius], "p": self.p, "lambda": self.lam,
                "C_CS": self.c_cs, "C_CS_classical": self.c_classical, "C_PI_2B": self.c_pi_2b,
                "C_cap_2B": self.c_cap_2b, "implied_CS": self.implied_cs,
                "implied_classical": self.implied_classical, "exact": self.exact,
                "passed": self.passed}


def cs_equivalence_check(graph: WeightedGraph, ball: Ball, p: float, lam: float = DEFAULT_LAMBDA_PI,
                         scale: ScaleFunction | None = None, cutoff: CutoffFunction | None = None,
                         method: str = "auto", restarts: int = 32, seed: int = 0) -> EquivalenceReport:
    """Measure both cutoff Sobolev constants and the two implied bounds.

    Classical + Poincare gives  C_CS <= C_cl (1 + C_PI,2B): apply the classical
    inequality to f - f_B.  CS + capacity gives  C_cl <= 2^(p-1) max(C_CS, C_cap,2B):
    split |f|^p <= 2^(p-1)(|f - f_B|^p + |f_B|^p) and bound |f_B|^p by the
    mean of |f|^p over B.
    """
    scale = _scale(scale)
    cut = cutoff if cutoff is not None else capacity_minimizer(graph, ball, p)
    cs = cs_constant(graph, ball, p, lam, cut, method, restarts, seed)
    cl = cs_classical_constant(graph, ball, p, lam, scale, cut, method, restarts, seed)
    if ball_mask(graph, ball.inflate(2.0)).sum() == 1:
        pi2 = RatioResult(0.0, ratio.TRIVIAL)
    else:
        pi2 = ratio.solve(oscillation_2b_problem(graph, ball, lam, scale), p, method, restarts, seed,
                          _ball_starts(graph, ball))
    wt = _cutoff_weight(graph, ball, p, cut)
    cap2 = float(wt.sum()) * scale.of_ball(ball) / measure(graph, ball_mask(graph, ball))
    exact = all(r.method in (ratio.EXACT, ratio.TRIVIAL) for r in (cs, cl, pi2))
    return EquivalenceReport(ball, p, lam, cs.value, cl.value, pi2.value, cap2,
                             cl.value * (1 + pi2.value), 2 ** (p - 1) * max(cs.value, cap2), exact)


# --------------------------------------------------------------------------
# Maz'ya truncation

@dataclass
class MazyaLevel:
    lam: float
    lhs: float  # u-energy on edges inside A_2lam
    middle: float  # g_lam energy on edges touching Omega
    rhs: float  # lam^-p * |g|-energy on edges where g_lam changes
    vacuous: bool

    @property
    def slack(self) -> float:
        return min(self.middle - self.lhs, self.rhs - self.middle)

    @property
    def holds(self) -> bool:
        return self.slack >= -1e-9 * max(1.0, self.rhs)


@dataclass
class MazyaAudit:
    levels: list[MazyaLevel]
    summed: float  # int |g|^p dGamma<u>
    summed_edge: float  # sum_e w |Du|^p min(|g|)^p over edges
    energy_g: float
    p: float

    @property
    def bound(self) -> float:
        return 2 ** (self.p + 1) * self.energy_g

    @property
    def summed_slack(self) -> float:
        return self.bound - self.summed

    @property
    def ratio(self) -> float:
        return self.summed / self.energy_g if self.energy_g > 0 else 0.0

    @property
    def passed(self) -> bool:
        return (all(lv.holds for lv in self.levels)
                and self.summed_slack >= -1e-9 * max(1.0, self.bound))

    def to_dict(self) -> dict:
        return {"levels": [[lv.lam, lv.lhs, lv.middle, lv.rhs] for lv in self.levels],
                "summed": self.summed, "summed_edge": self.summed_edge,
                "bound": self.bound, "passed": self.passed}


def truncation(g: np.ndarray, lam: float) -> np.ndarray:
    """g_lam = max(min(|g|, 2 lam) - lam, 0) / lam."""
    return np.maximum(np.minimum(np.abs(g), 2 * lam) - lam, 0.0) / lam


def dyadic_levels(g: np.ndarray) -> list[float]:
    a = np.abs(g)
    pos = a[a > 0]
    if pos.size == 0:
        return []
    lo = math.floor(math.log2(pos.min())) - 1
    hi = math.ceil(math.log2(pos.max()))
    return [math.ldexp(1.0, i) for i in range(lo, hi + 1)]


def mazya_truncation_audit(graph: WeightedGraph, u, g, omega, p: float, atol: float = 1e-12) -> MazyaAudit:
    """Per-level log-Caccioppoli bounds for the truncations of g, and their sum.

    Level lam:  E_u(edges in A_2lam) <= E_{g_lam}(edges at Omega)
                                     <= lam^-p E_|g|(edges where g_lam varies).
    Summed:     int |g|^p dGamma<u> <= 2^(p+1) E(g).
    """
    check_exponent(p)
    u = np.asarray(u, dtype=float)
    g = np.asarray(g, dtype=float)
    omega = np.asarray(omega, dtype=bool)
    if np.any(np.abs(g[~omega]) > atol):
        raise HypothesisError("hypothesis failed: g must vanish off omega")
    a = np.abs(g)
    da = np.abs(edge_differences(graph, a))
    touch = omega[graph.edges[:, 0]] | omega[graph.edges[:, 1]]
    levels = []
    for lam in dyadic_levels(g):
        gl = truncation(g, lam)
        A = a > 2 * lam
        res = log_caccioppoli_check(graph, u, gl, A & omega, omega, p, atol)
        varies = touch & (np.abs(edge_differences(graph, gl)) > 0)
        rhs = float(np.dot(graph.w[varies], da[varies] ** p)) / lam ** p
        levels.append(MazyaLevel(lam, res.lhs, res.rhs, rhs, not A.any()))
    gu = gamma(graph, u, p)
    summed = float(np.dot(a ** p, gu))
    m = np.minimum(a[graph.edges[:, 0]], a[graph.edges[:, 1]])
    du = np.abs(edge_differences(graph, u))
    summed_edge = float(np.dot(graph.w, du ** p * m ** p))
    return MazyaAudit(levels, summed, summed_edge, energy(graph, g, p), p)


# --------------------------------------------------------------------------
# the constructive cutoff Sobolev pipeline

class PipelineError(RuntimeError):
    pass


@dataclass
class LinearEnergyTerm:
    """E(L f) = sum_e w |D L f|^p for a fixed linear map L."""

    D: np.ndarray  # (m, n) incidence times L
    w: np.ndarray

    def value_grad(self, f, p):
        d = self.D @ f
        v, dv = ratio._pow(d, p)
        return float(np.dot(self.w, v)), self.D.T @ (self.w * dv)

    def quad(self, n):
        return self.D.T @ (self.w[:, None] * self.D)

    def support(self):
        return np.flatnonzero(np.any(self.D != 0, axis=0))


@dataclass
class PipelineGeometry:
    ball: Ball
    p: float
    lam: float
    eta: float
    cutoff: CutoffFunction  # psi_B
    big_cutoff: CutoffFunction  # psi_{2 Lambda B}
    local_ball: Ball  # localization ball for h1
    F: np.ndarray  # f -> f' = f - f_2B psi_{2 Lambda B}
    L1: np.ndarray  # f -> localized h1
    L2: np.ndarray  # f -> h2


@dataclass
class PipelineConstants:
    geometry: PipelineGeometry
    rho1: RatioResult  # sup E(h1) / Gamma<f>(Lambda B)
    rho2: RatioResult  # sup E(h2) / Gamma<f>(Lambda B)
    c_cap: float
    c_pi_2b: RatioResult  # C_PI of 2B with inflation Lambda / 2
    psi_ratio: float  # Psi(2B) / Psi(B)
    kappa: float  # Maz'ya summed constant 2^(p+1)

    @property
    def value(self) -> float:
        p = self.geometry.p
        return 2 ** (p - 1) * (self.kappa * (self.rho1.value + self.rho2.value)
                               + self.c_cap * self.c_pi_2b.value * self.psi_ratio)

    @property
    def exact(self) -> bool:
        return all(r.method in (ratio.EXACT, ratio.TRIVIAL) for r in (self.rho1, self.rho2, self.c_pi_2b))

    def to_dict(self) -> dict:
        return {"C_pipeline": self.value, "rho1": self.rho1.value, "rho2": self.rho2.value,
                "C_cap": self.c_cap, "C_PI_2B": self.c_pi_2b.value, "Psi_ratio": self.psi_ratio,
                "kappa": self.kappa, "exact": self.exact}


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except PipelineError:
        raise
    except Exception as exc:  # re-raised with the stage named
        raise PipelineError(f"stage {name!r} failed: {exc}") from exc


def pipeline_geometry(graph: WeightedGraph, ball: Ball, p: float, lam: float = DEFAULT_LAMBDA_PI,
                      eta: float = 0.5, lam_whitney: float = 8.0,
                      scale: ScaleFunction | None = None, cache=None) -> PipelineGeometry:
    """Cutoffs, blends and the linear maps f -> h1, f -> h2 for one ball.

    h1 is 0 on B and f' off (1+eta)B, then blended to 0 beyond a ball holding
    the closed neighbourhood of 2B (only h1 near 2B is ever weighed).
    h2 is f' on (1+eta)B and 0 off 2B.
    """
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    n = graph.n
    two = ball_mask(graph, ball.inflate(2.0))
    if two.all():
        raise PipelineError("stage 'geometry' failed: 2B covers X (degenerate branch)")
    cut = _stage("cutoff", capacity_minimizer, graph, ball, p)
    big = _stage("cutoff", capacity_minimizer, graph, ball.inflate(2 * lam), p)
    avg2 = np.where(two, graph.mu, 0.0) / measure(graph, two)
    F = np.eye(n) - np.outer(big.values, avg2)

    zero = np.zeros(n)
    b1 = _stage("blend h1", whitney_blend, graph, zero, zero, ball, eta, p, lam_whitney, scale, cache=cache)
    H1 = blend_operator(graph, b1)  # h1 = f' + H1 (0 - f')
    reach = float(graph.distances[ball.center][closed_neighborhood(graph, two)].max())
    local = Ball(ball.center, reach)
    bl = _stage("localize h1", whitney_blend, graph, zero, zero, local, 0.5, p, lam_whitney, scale, cache=cache)
    HL = blend_operator(graph, bl)  # h1_loc = 0 + HL (h1 - 0)
    L1 = HL @ (np.eye(n) - H1) @ F

    eta2 = 2.0 / (1 + eta) - 1.0
    b2 = _stage("blend h2", whitney_blend, graph, zero, zero, ball.inflate(1 + eta), eta2, p,
                lam_whitney, scale, cache=cache)
    L2 = blend_operator(graph, b2) @ F
    return PipelineGeometry(ball, p, lam, eta, cut, big, local, F, L1, L2)


def _energy_ratio(graph, L, den_mask, p, method, restarts, seed, starts):
    rows = np.repeat(np.arange(graph.m), 2)
    inc = np.zeros((graph.m, graph.n))
    inc[rows, graph.edges.ravel()] = np.tile([1.0, -1.0], graph.m)
    num = LinearEnergyTerm(inc @ L, graph.w.copy())
    prob = RatioProblem(graph.n, [num], [energy_term(graph, den_mask)], True)
    return ratio.solve(prob, p, method, restarts, seed, starts)


def pipeline_constants(graph: WeightedGraph, ball: Ball, p: float, lam: float = DEFAULT_LAMBDA_PI,
                       eta: float = 0.5, scale: ScaleFunction | None = None, lam_whitney: float = 8.0,
                       method: str = "auto", restarts: int = 32, seed: int = 0,
                       cache=None) -> PipelineConstants:
    """f-independent constant C with LHS <= C Gamma<f>(Lambda B) along the pipeline.

    C = 2^(p-1) [ kappa (rho1 + rho2) + C_cap C_PI(2B, Lambda/2) Psi(2B)/Psi(B) ]
    with rho_i = sup_f E(h_i) / Gamma<f>(Lambda B) and kappa = 2^(p+1).
    """
    scale = _scale(scale)
    geo = pipeline_geometry(graph, ball, p, lam, eta, lam_whitney, scale, cache)
    den = ball_mask(graph, ball.inflate(lam))
    starts = _ball_starts(graph, ball)
    rho1 = _stage("rho1", _energy_ratio, graph, geo.L1, den, p, method, restarts, seed, starts)
    rho2 = _stage("rho2", _energy_ratio, graph, geo.L2, den, p, method, restarts, seed, starts)
    cap = capacity_constant(graph, ball, p, scale, geo.cutoff).value
    pi2 = _stage("poincare 2B", poincare_constant, graph, ball.inflate(2.0), p, lam / 2, scale,
                 method, restarts, seed)
    return PipelineConstants(geo, rho1, rho2, cap, pi2,
                             scale.of_ball(ball.inflate(2.0)) / scale.of_ball(ball), 2 ** (p + 1))


@dataclass
class PipelineRun:
    lhs: float  # int_2B |f - f_B|^p dGamma<psi_B>
    energy: float  # Gamma<f>(Lambda B)
    constant: float  # the f-independent pipeline constant
    t1: float  # int_2B |f'|^p dGamma<psi_B>
    t2: float  # |f_B - f_2B|^p Gamma<psi_B>(2B)
    e_h1: float
    e_h2: float
    mazya1: MazyaAudit
    mazya2: MazyaAudit
    pointwise_ok: bool
    chain: dict = field(default_factory=dict)  # link name -> (lhs, rhs)

    @property
    def ratio(self) -> float:
        if self.energy > 0:
            return self.lhs / self.energy
        return 0.0 if self.lhs <= 1e-300 else np.inf

    @property
    def holds(self) -> bool:
        return self.lhs <= self.constant * self.energy * (1 + 1e-9) + 1e-300

    @property
    def chain_ok(self) -> bool:
        return all(a <= b * (1 + 1e-9) + 1e-12 * max(1.0, abs(b)) for a, b in self.chain.values())

    @property
    def passed(self) -> bool:
        return self.holds and self.chain_ok and self.pointwise_ok

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "energy": self.energy, "constant": self.constant,
                "ratio": self.ratio, "holds": self.holds, "pointwise_ok": self.pointwise_ok,
                "chain": {k: list(v) for k, v in self.chain.items()}, "chain_ok": self.chain_ok}


def constructive_cs_pipeline(graph: WeightedGraph, ball: Ball, f, p: float, eta: float = 0.5,
                             lam: float = DEFAULT_LAMBDA_PI, scale: ScaleFunction | None = None,
                             constants: PipelineConstants | None = None, **kw) -> PipelineRun:
    """Run the cutoff Sobolev proof on one function f.

    Stages: f' = f - f_2B psi_{2 Lambda B}; h1 and h2 by Whitney blending;
    Maz'ya audits for (1 - psi_B, h1, X \\ B) and (psi_B, h2, 2B); the chain
    LHS <= 2^(p-1)(T1 + T2), T1 <= V1 + V2, V_i <= kappa E(h_i),
    E(h_i) <= rho_i Gamma<f>(Lambda B), T2 <= C_cap C_PI Psi-ratio Gamma<f>(Lambda B).
    """
    f = np.asarray(f, dtype=float)
    const = constants or pipeline_constants(graph, ball, p, lam, eta, scale, **kw)
    geo = const.geometry
    psi = geo.cutoff.values
    b = ball_mask(graph, ball)
    two = ball_mask(graph, ball.inflate(2.0))
    g_psi = gamma(graph, psi, p)
    den = float(gamma(graph, f, p)[ball_mask(graph, ball.inflate(lam))].sum())

    fb, f2b = average(graph, f, b), average(graph, f, two)
    fp = geo.F @ f
    h1 = geo.L1 @ f
    h2 = geo.L2 @ f
    lhs = float(np.dot(np.abs(f - fb)[two] ** p, g_psi[two]))
    t1 = float(np.dot(np.abs(fp)[two] ** p, g_psi[two]))
    t2 = abs(fb - f2b) ** p * float(g_psi[two].sum())
    tol = 1e-12 * max(1.0, float(np.abs(fp).max()) ** p)
    pointwise = bool(np.all(np.abs(fp[two]) ** p <= np.abs(h1[two]) ** p + np.abs(h2[two]) ** p + tol))

    h1[b] = 0.0  # exact by construction; guards against roundoff in the operator product
    h2[~two] = 0.0
    m1 = _stage("mazya h1", mazya_truncation_audit, graph, 1.0 - psi, h1, ~b, p)
    m2 = _stage("mazya h2", mazya_truncation_audit, graph, psi, h2, two, p)
    e1, e2 = energy(graph, h1, p), energy(graph, h2, p)
    c_t2 = const.c_cap * const.c_pi_2b.value * const.psi_ratio
    chain = {
        "split": (lhs, 2 ** (p - 1) * (t1 + t2)),
        "pointwise": (t1, m1.summed + m2.summed),
        "mazya h1": (m1.summed, const.kappa * e1),
        "mazya h2": (m2.summed, const.kappa * e2),
        "blend h1": (e1, const.rho1.value * den),
        "blend h2": (e2, const.rho2.value * den),
        "capacity-poincare": (t2, c_t2 * den),
    }
    return PipelineRun(lhs, den, const.value, t1, t2, e1, e2, m1, m2, pointwise, chain)


# --------------------------------------------------------------------------
# balled capacity

@dataclass
class BallCapacity:
    x: int
    y: int
    A: float
    r: float
    energy: float
    value: float  # E_p * Psi(x, r) / mu(B(x, r))
    potential: CutoffFunction


def ball_capacity_lower(graph: WeightedGraph, x: int, y: int, A: float, p: float,
                        scale: ScaleFunction | None = None) -> BallCapacity:
    """Condenser energy between B(x, r/A) and B(y, r/A), r = d(x, y)."""
    scale = _scale(scale)
    if x == y:
        raise ValueError("x and y must differ")
    if A < 3:
        raise ValueError("A must be at least 3")
    r = float(graph.distances[x, y])
    bx, by = ball_mask(graph, Ball(x, r / A)), ball_mask(graph, Ball(y, r / A))
    if np.any(bx & by):
        raise ValueError("the two small balls intersect")
    pot = condenser_potential(graph, bx, by, p)
    value = pot.energy * scale(x, r) / measure(graph, ball_mask(graph, Ball(x, r)))
    return BallCapacity(x, y, A, r, pot.energy, float(value), pot)


# --------------------------------------------------------------------------
# reports

@dataclass
class BallRecord:
    ball: Ball
    saturated: bool  # Lambda B covers X
    c_cap: float
    c_pi: float
    c_cs: float
    c_cs_classical: float
    c_wb: float | None
    methods: dict
    certificates: dict

    @property
    def key(self):
        return (self.ball.center, self.ball.radius)

    def to_dict(self) -> dict:
        return {"center": self.ball.center, "radius": self.ball.radius, "saturated": self.saturated,
                "C_cap": self.c_cap, "C_PI": self.c_pi, "C_CS": self.c_cs,
                "C_CS_classical": self.c_cs_classical, "C_WB": self.c_wb,
                "methods": self.methods, "certificates": self.certificates}


@dataclass
class CertReport:
    graph: str
    n: int
    p: float
    beta: dict
    lambda_pi: float
    lambda_whitney: float
    eta: float
    tolerances: dict
    seeds: dict
    records: list[BallRecord]
    c_d: float
    warnings: list[str] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def summary(self) -> dict:
        out = {"C_D": self.c_d, "balls": len(self.records),
               "saturated_balls": sum(r.saturated for r in self.records)}
        names = {"c_cap": "C_cap", "c_pi": "C_PI", "c_cs": "C_CS",
                 "c_cs_classical": "C_CS_classical", "c_wb": "C_WB"}
        for name, public in names.items():
            for label, recs in (("", [r for r in self.records if not r.saturated]),
                                ("saturated_", [r for r in self.records if r.saturated])):
                vals = [getattr(r, name) for r in recs if getattr(r, name) is not None]
                key = label + public
                out["max_" + key] = float(max(vals)) if vals else None
                out["min_" + key] = float(min(vals)) if vals else None
        return out

    def to_dict(self) -> dict:
        return {"schema": SCHEMA, "graph": self.graph, "n": self.n, "p": self.p, "beta": self.beta,
                "lambda_pi": self.lambda_pi, "lambda_whitney": self.lambda_whitney, "eta": self.eta,
                "tolerances": self.tolerances, "seeds": self.seeds, "meta": self.meta,
                "warnings": self.warnings, "summary": self.summary(),
                "balls": [r.to_dict() for r in self.records]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, default=float)


CSV_FIELDS = ["graph", "p", "center", "radius", "saturated", "C_cap", "C_PI", "C_CS",
              "C_CS_classical", "C_WB", "method_PI", "method_CS"]


def csv_rows(report: CertReport):
    for r in report.records:
        yield {"graph": report.graph, "p": report.p, "center": r.ball.center, "radius": r.ball.radius,
               "saturated": r.saturated, "C_cap": r.c_cap, "C_PI": r.c_pi, "C_CS": r.c_cs,
               "C_CS_classical": r.c_cs_classical, "C_WB": r.c_wb,
               "method_PI": r.methods.get("C_PI"), "method_CS": r.methods.get("C_CS")}


def to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS)
    w.writeheader()
    for rep in reports:
        for row in csv_rows(rep):
            w.writerow(row)
    return buf.getvalue()


def report_from_dict(data: dict) -> CertReport:
    if data.get("schema") != SCHEMA:
        raise ValueError(f"unsupported report schema {data.get('schema')!r}")
    recs = [BallRecord(Ball(int(b["center"]), float(b["radius"])), bool(b["saturated"]), b["C_cap"],
                       b["C_PI"], b["C_CS"], b["C_CS_classical"], b["C_WB"], b["methods"],
                       b["certificates"]) for b in data["balls"]]
    return CertReport(data["graph"], data["n"], data["p"], data["beta"], data["lambda_pi"],
                      data["lambda_whitney"], data["eta"], data["tolerances"], data["seeds"], recs,
                      data["summary"]["C_D"], data.get("warnings", []), data.get("meta", {}))


def auto_balls(graph: WeightedGraph) -> list[Ball]:
    """Centres on a diam/8 net, radii diam/16, diam/8, diam/4 moved to distance midpoints."""
    diam = graph.diameter
    if diam == 0:
        return [Ball(0, 1.0)]
    net = build_net(graph, np.arange(graph.n), diam / 8)
    out = []
    for c in net.points:
        seen = set()
        for r in (diam / 16, diam / 8, diam / 4):
            rr = midpoint_radius(graph, int(c), r)
            if rr > 0 and rr not in seen:
                seen.add(rr)
                out.append(Ball(int(c), rr))
    return out


def thread_count(default: int | None = None) -> int:
    env = os.environ.get("PDLAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"PDLAB_THREADS must be an integer, got {env!r}") from None
    return default or min(8, os.cpu_count() or 1)


def certify_ball(graph: WeightedGraph, ball: Ball, p: float, scale: ScaleFunction,
                 lambda_pi: float = DEFAULT_LAMBDA_PI, lambda_whitney: float = 8.0,
                 eta: float = 0.5, method: str = "auto", restarts: int = 32, seed: int = 0,
                 blend: bool = True) -> BallRecord:
    if ball.radius > 2 * graph.diameter and graph.n > 1:
        raise ValueError(f"ball radius {ball.radius} exceeds 2 diam(X)")
    cut = capacity_minimizer(graph, ball, p)
    cap = capacity_constant(graph, ball, p, scale, cut)
    pi = poincare_constant(graph, ball, p, lambda_pi, scale, method, restarts, seed)
    cs = cs_constant(graph, ball, p, lambda_pi, cut, method, restarts, seed)
    cl = cs_classical_constant(graph, ball, p, lambda_pi, scale, cut, method, restarts, seed)
    c_wb = None
    wb_cert = None
    if blend:
        rng = np.random.default_rng([seed, ball.center])
        f, g = rng.standard_normal(graph.n), rng.standard_normal(graph.n)
        res = whitney_blend(graph, f, g, ball, eta, p, lambda_whitney, scale)
        rep = blend_energy_report(graph, res, scale)
        c_wb = rep.c_wb
        wb_cert = {"boundary_exact": res.boundary_exact(), "degenerate": res.degenerate,
                   **rep.to_dict()}
    sat = bool(ball_mask(graph, ball.inflate(lambda_pi)).all())
    return BallRecord(ball, sat, cap.value, pi.value, cs.value, cl.value, c_wb,
                      {"C_PI": pi.method, "C_CS": cs.method, "C_CS_classical": cl.method},
                      {"cutoff": cap.to_dict(), "C_PI": pi.to_dict(), "C_CS": cs.to_dict(),
                       "C_CS_classical": cl.to_dict(), "C_WB": wb_cert})


def certify_graph(graph: WeightedGraph, p: float, scale: ScaleFunction | None = None,
                  balls="auto", lambda_pi: float = DEFAULT_LAMBDA_PI, lambda_whitney: float = 8.0,
                  eta: float = 0.5, method: str = "auto", restarts: int = 32, seed: int = 0,
                  threads: int | None = None, blend: bool = True) -> CertReport:
    check_exponent(p)
    scale = _scale(scale)
    balls = auto_balls(graph) if balls == "auto" else list(balls)
    workers = thread_count(threads)

    def job(b):
        return certify_ball(graph, b, p, scale, lambda_pi, lambda_whitney, eta, method, restarts, seed, blend)

    if workers > 1 and len(balls) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            records = list(ex.map(job, balls))
    else:
        records = [job(b) for b in balls]
    records.sort(key=lambda r: r.key)
    warnings = []
    if p != 2:
        warnings.append("p != 2: C_PI, C_CS and C_CS_classical are lower bounds from iterative ascent")
    dbl = doubling_constant(graph, default_radius_samples(graph))
    return CertReport(graph.name or "graph", graph.n, p, scale.to_dict(), lambda_pi, lambda_whitney,
                      eta, {"solver_tol": DEFAULT_TOL, "ratio_gtol": 1e-12},
                      {"seed": seed, "restarts": restarts}, records, float(dbl.constant), warnings)
