"""p-harmonic energy minimization with Dirichlet constraints.

The solver runs damped Newton steps on the edge-difference energy
``sum_e w_e phi(Df_e)``.  For p < 2 the kernel ``|t|^p`` is replaced by
``(t^2 + eps^2)^(p/2)`` and eps is driven down a continuation schedule; the
last stage uses eps = 1e-12, whose energy differs from the exact one by at
most ``sum_e w_e eps^p``.  For p >= 2 the exact kernel is used.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .energy import check_exponent, energy, gamma, inner_energy, outer_energy
from .graph import Ball, WeightedGraph, ball_mask, closed_neighborhood

DEFAULT_TOL = 1e-10
DEFAULT_EPS_SCHEDULE = (1e-2, 1e-4, 1e-6, 1e-8, 1e-10, 1e-12)
MAX_ITER = 100_000
STEP_TOL = 1e-9  # Newton-step polish for p > 2, relative to the data range


class SolverError(RuntimeError):
    """Newton iteration did not reach the requested residual."""

    def __init__(self, message, best, residual, history=None):
        super().__init__(message)
        self.best = best
        self.residual = residual
        self.history = history or []


@dataclass
class BoundaryProblem:
    fixed: np.ndarray  # bool mask of constrained vertices
    values: np.ndarray  # prescribed values (read on fixed vertices only)
    p: float
    tol: float = DEFAULT_TOL
    eps_schedule: tuple = DEFAULT_EPS_SCHEDULE

    def __post_init__(self):
        self.fixed = np.asarray(self.fixed, dtype=bool)
        self.values = np.asarray(self.values, dtype=float)
        check_exponent(self.p)
        if not self.fixed.any():
            raise ValueError("constrained set must be nonempty")
        if self.values.shape != self.fixed.shape:
            raise ValueError("values must be given per vertex")


@dataclass
class SolveResult:
    u: np.ndarray
    energy: float
    residual: float
    iterations: int
    eps: float
    history: list = field(default_factory=list)
    floor: float = 0.0  # gradient resolution limit at the returned iterate


def _kernel(t, p, eps):
    """phi, phi', phi'' of the (smoothed) |t|^p kernel."""
    if eps == 0.0:
        a = np.abs(t)
        phi = a ** p
        d1 = p * np.sign(t) * a ** (p - 1)
        # only used for p >= 2, where the exact kernel is C^2
        d2 = p * (p - 1) * a ** (p - 2)
        return phi, d1, d2
    s = t * t + eps * eps
    phi = s ** (p / 2) - eps ** p
    d1 = p * t * s ** (p / 2 - 1)
    d2 = p * s ** (p / 2 - 2) * ((p - 1) * t * t + eps * eps)
    return phi, d1, d2


def _kernel_delta(t, tn, p, eps):
    """phi(tn) - phi(t) per edge without cancellation against phi(t)."""
    s = t * t + eps * eps
    ds = (tn - t) * (tn + t)
    out = np.empty_like(t)
    pos = s > 0
    with np.errstate(divide="ignore"):  # log1p(-1) = -inf maps to expm1 = -1
        out[pos] = s[pos] ** (p / 2) * np.expm1((p / 2) * np.log1p(ds[pos] / s[pos]))
    out[~pos] = np.abs(tn[~pos]) ** p
    return out


def _harmonic_init(graph: WeightedGraph, free: np.ndarray, u: np.ndarray) -> np.ndarray:
    # p = 2 solve with conductance w / len, cheap and inside the admissible hull
    wl = graph.w / graph.length
    D = graph.incidence
    L = (D.T @ sp.diags(wl) @ D).tocsr()
    fidx = np.flatnonzero(free)
    cidx = np.flatnonzero(~free)
    A = L[fidx][:, fidx]
    b = -L[fidx][:, cidx] @ u[cidx]
    out = u.copy()
    out[fidx] = spsolve(A.tocsc(), b) if fidx.size > 1 else b / A.toarray().ravel()
    return out


def p_harmonic(graph: WeightedGraph, problem: BoundaryProblem, init=None,
               max_iter: int = MAX_ITER) -> SolveResult:
    """Minimize E_p over functions matching the constraints of ``problem``.

    Returns the minimizer clipped to the range of the boundary data (a
    contraction, so the energy does not increase).  Raises SolverError with
    the best iterate when the residual target is not met.
    """
    p = problem.p
    fixed = problem.fixed
    free = ~fixed
    u = np.where(fixed, problem.values, 0.0)
    lo, hi = float(problem.values[fixed].min()), float(problem.values[fixed].max())
    if not free.any():
        return SolveResult(u, energy(graph, u, p), 0.0, 0, 0.0)

    fidx = np.flatnonzero(free)
    D = graph.incidence.tocsc()
    DF = D[:, fidx].tocsr()
    DFt = DF.T.tocsr()
    absDFt = abs(DFt)
    offset = D[:, np.flatnonzero(fixed)] @ u[fixed]
    w = graph.w

    full = list(problem.eps_schedule) if p < 2 else [0.0]
    if init is not None:
        # clipping into the data range can only lower the energy
        x = np.clip(np.asarray(init, dtype=float)[fidx], lo, hi)
        schedule = full[-1:]
    else:
        x = _harmonic_init(graph, free, u)[fidx]
        schedule = full

    def residual(xv, eps):
        t = DF @ xv + offset
        _, d1, _ = _kernel(t, p, eps)
        g = DFt @ (w * d1)
        scale = float((absDFt @ (w * np.abs(d1))).max())
        if scale == 0.0:
            return 0.0, g
        return float(np.abs(g).max() / scale), g

    ulp = float(np.spacing(max(abs(lo), abs(hi), 1e-300)))

    def floor_of(xv, eps):
        # a one-ulp move of x shifts the gradient by at most sum_e w_e max|phi''|
        # times ulp; max|phi''| is attained at t = 0 for the smoothed kernel
        t = DF @ xv + offset
        d1, d2 = _kernel(t, p, eps)[1:]
        if p < 2:
            d2 = np.full_like(t, p * eps ** (p - 2) if eps > 0 else np.inf)
        scale = float((absDFt @ (w * np.abs(d1))).max())
        if scale == 0.0:
            return 0.0
        return 4.0 * ulp * float((absDFt @ (w * d2)).max()) / scale

    iters = 0
    history = []
    polish = p > 2
    span = max(hi - lo, 1e-300)

    def run(x, schedule):
        nonlocal iters
        res = np.inf
        for k, eps in enumerate(schedule):
            last = k == len(schedule) - 1
            target = problem.tol if last else max(problem.tol, 1e-8)
            level = max(float(np.dot(w, np.abs(DF @ x + offset) ** p)), 1e-300)
            gains = []
            while True:
                res, g = residual(x, eps)
                met = res <= target
                if met and not (polish and last):
                    break
                # stagnation: 20 steps whose total energy gain is lost in roundoff
                if len(gains) >= 20 and -sum(gains[-20:]) <= 1e-15 * level:
                    break
                if iters >= max_iter:
                    best = u.copy()
                    best[fidx] = x
                    raise SolverError(f"p_harmonic did not converge: residual {res:.3e}",
                                      best, res, history)
                t0 = DF @ x + offset
                d2 = _kernel(t0, p, eps)[2]
                d2 = np.where(np.isfinite(d2), d2, 0.0)
                H = (DFt @ sp.diags(w * d2) @ DF).tocsc()
                diag = H.diagonal()
                ridge = 1e-14 * max(float(diag.max()), 1.0)
                H = H + sp.diags(np.full(fidx.size, ridge) + 1e-12 * diag)
                step = spsolve(H, -g) if fidx.size > 1 else -g / H.toarray().ravel()
                if met and float(np.abs(step).max()) <= STEP_TOL * span:
                    # for p > 2 a small residual only pins x to about res^(1/(p-1));
                    # the Newton step is the finer distance estimate
                    break
                slope = float(np.dot(g, step))
                if not slope < 0:
                    step, slope = -g, -float(np.dot(g, g))
                dt = DF @ step
                a = 1.0
                accepted = False
                while a > 1e-14:
                    # energy change summed edgewise so tiny decreases stay resolvable
                    df = float(np.dot(w, _kernel_delta(t0, t0 + a * dt, p, eps)))
                    if df <= 1e-4 * a * slope:
                        accepted = True
                        break
                    a *= 0.5
                xn = x + a * step
                gains.append(df if accepted else 0.0)
                iters += 1
                history.append((eps, res, a))
                if not accepted or np.array_equal(xn, x):
                    break
                x = xn
        res, _ = residual(x, schedule[-1])
        return x, res, floor_of(x, schedule[-1])

    x, res, floor = run(x, schedule)
    if res > max(problem.tol, floor) and len(schedule) < len(full):
        # the warm start was too far off for the last stage alone
        x, res, floor = run(x, full)
    if res > max(problem.tol, floor):
        best = u.copy()
        best[fidx] = x
        raise SolverError(f"p_harmonic stalled at residual {res:.3e}", best, res, history)
    schedule = full
    out = u.copy()
    out[fidx] = np.clip(x, lo, hi)
    return SolveResult(out, energy(graph, out, p), res, iters, schedule[-1], history, floor)


def _final_eps(p, schedule):
    if p < 2:
        return float(schedule[-1])
    return 0.0


# --------------------------------------------------------------------------
# capacity minimizers

@dataclass
class CutoffFunction:
    values: np.ndarray
    ball: Ball | None
    energy: float
    residual: float
    iterations: int = 0
    degenerate: bool = False
    one_set: np.ndarray | None = None
    zero_set: np.ndarray | None = None


def condenser_potential(graph: WeightedGraph, one_mask, zero_mask, p: float,
                        tol: float = DEFAULT_TOL, ball: Ball | None = None) -> CutoffFunction:
    """Energy minimizer that is 1 on ``one_mask`` and 0 on ``zero_mask``."""
    one_mask = np.asarray(one_mask, dtype=bool)
    zero_mask = np.asarray(zero_mask, dtype=bool)
    if np.any(one_mask & zero_mask):
        raise ValueError("one-set and zero-set intersect")
    if not zero_mask.any():
        ones = np.ones(graph.n)
        return CutoffFunction(ones, ball, 0.0, 0.0, 0, True, one_mask, zero_mask)
    if not one_mask.any():
        zeros = np.zeros(graph.n)
        return CutoffFunction(zeros, ball, 0.0, 0.0, 0, True, one_mask, zero_mask)
    fixed = one_mask | zero_mask
    values = one_mask.astype(float)
    res = p_harmonic(graph, BoundaryProblem(fixed, values, p, tol))
    psi = np.clip(res.u, 0.0, 1.0)
    return CutoffFunction(psi, ball, energy(graph, psi, p), res.residual, res.iterations,
                          False, one_mask, zero_mask)


def capacity_minimizer(graph: WeightedGraph, ball: Ball, p: float, tol: float = DEFAULT_TOL) -> CutoffFunction:
    """Cutoff psi_B: 1 on B, 0 off 2B, p-harmonic in between, values in [0, 1]."""
    return condenser_potential(graph, ball_mask(graph, ball), ~ball_mask(graph, ball.inflate(2.0)),
                               p, tol, ball)


def capacity(graph: WeightedGraph, ball: Ball, p: float) -> float:
    return capacity_minimizer(graph, ball, p).energy


# --------------------------------------------------------------------------
# superharmonicity and the log-Caccioppoli bound

@dataclass
class SuperharmonicReport:
    worst_slack: float
    worst_relative: float
    trials: int


def check_superharmonic(graph: WeightedGraph, u, omega, p: float, trials: int = 100,
                        rng=None) -> SuperharmonicReport:
    """Sample psi >= 0 vanishing off omega and compare energies near spt(psi).

    Energies are measured on the closed graph neighbourhood of spt(psi), the
    smallest vertex set that sees every edge changed by the perturbation.
    """
    u = np.asarray(u, dtype=float)
    omega = np.asarray(omega, dtype=bool)
    rng = np.random.default_rng(rng)
    total = max(energy(graph, u, p), 1e-300)
    worst, worst_rel = np.inf, np.inf
    idx = np.flatnonzero(omega)
    if idx.size == 0:
        return SuperharmonicReport(0.0, 0.0, 0)
    for k in range(trials):
        psi = np.zeros(graph.n)
        if k == 0:
            support = idx[:0]
        else:
            frac = rng.uniform(0.05, 1.0)
            support = idx[rng.random(idx.size) < frac]
        scale = 10.0 ** rng.uniform(-4, 0)
        psi[support] = scale * rng.random(support.size)
        s = closed_neighborhood(graph, psi > 0)
        before = gamma(graph, u, p)[s].sum()
        after = gamma(graph, u + psi, p)[s].sum()
        worst = min(worst, float(after - before))
        worst_rel = min(worst_rel, float((after - before) / total))
    return SuperharmonicReport(worst, worst_rel, trials)


class HypothesisError(ValueError):
    pass


@dataclass
class LogCaccioppoliResult:
    lhs: float
    rhs: float
    lhs_vertex: float
    rhs_vertex: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def holds(self) -> bool:
        return self.slack >= -1e-9 * max(1.0, self.rhs)


def log_caccioppoli_check(graph: WeightedGraph, u, h, A, omega, p: float,
                          atol: float = 1e-12) -> LogCaccioppoliResult:
    """Energy of u on A against energy of h on omega.

    Compared quantities are edge based: edges inside A for u, edges touching
    omega for h.  This is the form that survives on graphs, where a vertex set
    does not own the half-edges leaving it.  The vertex-measure values are
    returned alongside for reference.
    """
    u = np.asarray(u, dtype=float)
    h = np.asarray(h, dtype=float)
    A = np.asarray(A, dtype=bool)
    omega = np.asarray(omega, dtype=bool)
    if np.any(u < -atol) or np.any(u > 1 + atol):
        raise HypothesisError("hypothesis failed: u must take values in [0, 1]")
    if np.any(h[~omega] > atol):
        raise HypothesisError("hypothesis failed: h must be <= 0 off omega")
    if np.any(h[A] < 1 - atol):
        raise HypothesisError("hypothesis failed: h must be >= 1 on A")
    if np.any(A & ~omega):
        raise HypothesisError("hypothesis failed: A must lie inside omega")
    gu, gh = gamma(graph, u, p), gamma(graph, h, p)
    return LogCaccioppoliResult(
        inner_energy(graph, u, p, A), outer_energy(graph, h, p, omega),
        float(gu[A].sum()), float(gh[omega].sum()),
    )
