"""Suprema of ratios of p-homogeneous vertex forms.

Every certified constant here is sup_f N(f) / D(f) with N and D sums of three
kinds of term:

* ``EnergyTerm``  sum_e c_e w_e |Df_e|^p   (Gamma<f>(S) has c_e = (1_S(u) + 1_S(v)) / 2),
* ``OscTerm``     sum_x rho_x |f(x) - f_M|^p, f_M a weighted average,
* ``AbsTerm``     sum_x rho_x |f(x)|^p.

For p = 2 each term is a quadratic form and the supremum is the top
generalized eigenvalue.  For other p a multi-restart L-BFGS ascent on
log N - log D returns a lower bound.  A grid brute force is provided as a
ground truth for tiny instances.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize
from scipy.sparse.csgraph import connected_components
import scipy.sparse as sp

from .graph import WeightedGraph

EXACT = "exact-eigen"
ITERATIVE = "iterative-lower-bound"
BRUTE = "brute-force"
TRIVIAL = "trivial"


def _pow(t, p):
    a = np.abs(t)
    return a ** p, p * np.sign(t) * a ** (p - 1)


@dataclass
class EnergyTerm:
    edges: np.ndarray
    cw: np.ndarray  # c_e * w_e

    def value_grad(self, f, p):
        d = f[self.edges[:, 0]] - f[self.edges[:, 1]]
        v, dv = _pow(d, p)
        flux = self.cw * dv
        g = np.zeros_like(f)
        np.add.at(g, self.edges[:, 0], flux)
        np.subtract.at(g, self.edges[:, 1], flux)
        return float(np.dot(self.cw, v)), g

    def quad(self, n):
        m = self.edges.shape[0]
        rows = np.repeat(np.arange(m), 2)
        D = sp.csr_matrix((np.tile([1.0, -1.0], m), (rows, self.edges.ravel())), shape=(m, n))
        return (D.T @ sp.diags(self.cw) @ D).toarray()

    def support(self):
        return np.unique(self.edges)


@dataclass
class OscTerm:
    rho: np.ndarray  # weights on T (zero elsewhere)
    avg: np.ndarray  # averaging weights on M, summing to 1

    def value_grad(self, f, p):
        e = f - float(np.dot(self.avg, f))
        v, dv = _pow(e, p)
        local = self.rho * dv
        return float(np.dot(self.rho, v)), local - self.avg * local.sum()

    def quad(self, n):
        P = np.eye(n) - np.outer(np.ones(n), self.avg)
        return P.T @ (self.rho[:, None] * P)

    def support(self):
        return np.flatnonzero((self.rho != 0) | (self.avg != 0))


@dataclass
class AbsTerm:
    rho: np.ndarray

    def value_grad(self, f, p):
        v, dv = _pow(f, p)
        return float(np.dot(self.rho, v)), self.rho * dv

    def quad(self, n):
        return np.diag(self.rho)

    def support(self):
        return np.flatnonzero(self.rho)


def energy_term(graph: WeightedGraph, mask) -> EnergyTerm:
    mask = np.asarray(mask, dtype=bool)
    c = 0.5 * (mask[graph.edges[:, 0]].astype(float) + mask[graph.edges[:, 1]])
    keep = c > 0
    return EnergyTerm(graph.edges[keep], (c * graph.w)[keep])


def osc_term(graph: WeightedGraph, rho, avg_mask) -> OscTerm:
    avg_mask = np.asarray(avg_mask, dtype=bool)
    a = np.where(avg_mask, graph.mu, 0.0)
    return OscTerm(np.asarray(rho, dtype=float), a / a.sum())


@dataclass
class RatioProblem:
    """sup N/D over functions on ``n`` vertices (only ``support`` matters)."""

    n: int
    num: list
    den: list
    shift_invariant: bool

    def support(self) -> np.ndarray:
        parts = [t.support() for t in self.num + self.den]
        return np.unique(np.concatenate(parts)) if parts else np.zeros(0, int)

    def evaluate(self, f, p):
        N = sum(t.value_grad(f, p)[0] for t in self.num)
        D = sum(t.value_grad(f, p)[0] for t in self.den)
        return N, D

    def ratio(self, f, p) -> float:
        N, D = self.evaluate(f, p)
        if D > 0:
            return N / D
        return 0.0 if N <= 0 else np.inf


@dataclass
class RatioResult:
    value: float
    method: str
    witness: np.ndarray | None = None
    restarts: int = 0
    seed: int | None = None
    converged: bool = True
    degenerate: bool = False
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"value": self.value, "method": self.method, "restarts": self.restarts,
                "seed": self.seed, "converged": self.converged, "degenerate": self.degenerate}


def _components(problem: RatioProblem, var: np.ndarray):
    """Connected components of the energy-term edges over ``var``."""
    pos = {int(v): i for i, v in enumerate(var)}
    rows, cols = [], []
    for t in problem.den:
        if isinstance(t, EnergyTerm):
            for a, b in t.edges:
                rows.append(pos[int(a)])
                cols.append(pos[int(b)])
    A = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(var.size, var.size))
    return connected_components(A, directed=False)


def degenerate_witness(problem: RatioProblem, p: float):
    """f with D(f) = 0 < N(f) if one exists among component indicators."""
    var = problem.support()
    ncomp, labels = _components(problem, var)
    if ncomp <= 1 and problem.shift_invariant:
        return None
    for c in range(ncomp):
        f = np.zeros(problem.n)
        f[var[labels == c]] = 1.0
        N, D = problem.evaluate(f, p)
        if D <= 1e-300 and N > 0:
            return f
    return None


def exact_eigen(problem: RatioProblem) -> RatioResult:
    """Top generalized eigenvalue of the p = 2 quadratic forms."""
    var = problem.support()
    n = problem.n
    A = sum(t.quad(n) for t in problem.num)[np.ix_(var, var)]
    K = sum(t.quad(n) for t in problem.den)[np.ix_(var, var)]
    keep = np.arange(var.size)
    if problem.shift_invariant:
        keep = keep[1:]  # pin the first vertex to 0
    if keep.size == 0:
        return RatioResult(0.0, TRIVIAL, np.zeros(n))
    A, K = A[np.ix_(keep, keep)], K[np.ix_(keep, keep)]
    A = 0.5 * (A + A.T)
    K = 0.5 * (K + K.T)
    kev, kvec = np.linalg.eigh(K)
    tol = 1e-12 * max(abs(kev).max(), 1e-300)
    if kev[0] <= tol:
        # singular denominator: any kernel direction with positive numerator is a witness
        ker = kvec[:, kev <= tol]
        an = ker.T @ A @ ker
        val, vec = np.linalg.eigh(0.5 * (an + an.T))
        if val[-1] > 1e-12 * max(abs(A).max(), 1e-300):
            f = np.zeros(n)
            f[var[keep]] = ker @ vec[:, -1]
            return RatioResult(np.inf, EXACT, f, degenerate=True,
                               notes=["denominator degenerate on the inflated ball"])
        # restrict to the range of K
        rng_ = kvec[:, kev > tol]
        A = rng_.T @ A @ rng_
        K = np.diag(kev[kev > tol])
        val, vec = sla.eigh(A, K)
        z = rng_ @ vec[:, -1]
    else:
        val, vec = sla.eigh(A, K)
        z = vec[:, -1]
    f = np.zeros(n)
    f[var[keep]] = z
    return RatioResult(float(max(val[-1], 0.0)), EXACT, f)


def _starts(problem: RatioProblem, var, rng, restarts, extra):
    for s in extra:
        s = np.asarray(s, dtype=float)[var]
        if np.ptp(s) > 0 or not problem.shift_invariant:
            yield s
    for _ in range(restarts):
        yield rng.standard_normal(var.size)


def iterative(problem: RatioProblem, p: float, restarts: int = 32, seed: int = 0,
              starts=(), maxiter: int = 20000) -> RatioResult:
    """Best ratio over L-BFGS ascents from random and structured starts."""
    var = problem.support()
    n = problem.n
    rng = np.random.default_rng(seed)
    witness = degenerate_witness(problem, p)
    if witness is not None:
        return RatioResult(np.inf, ITERATIVE, witness, 0, seed, degenerate=True,
                           notes=["denominator vanishes on a component indicator"])

    def fun(z):
        f = np.zeros(n)
        f[var] = z
        N, gN, D, gD = 0.0, np.zeros(n), 0.0, np.zeros(n)
        for t in problem.num:
            v, g = t.value_grad(f, p)
            N += v
            gN += g
        for t in problem.den:
            v, g = t.value_grad(f, p)
            D += v
            gD += g
        if N <= 0 or D <= 0:
            return 1e300, np.zeros(var.size)
        return float(np.log(D) - np.log(N)), (gD / D - gN / N)[var]

    best, best_f, used, ok = 0.0, None, 0, True
    for z0 in _starts(problem, var, rng, restarts, starts):
        used += 1
        if fun(z0)[0] >= 1e300:
            continue
        res = minimize(fun, z0, jac=True, method="L-BFGS-B",
                       options={"maxiter": maxiter, "ftol": 1e-15, "gtol": 1e-12, "maxcor": 30})
        f = np.zeros(n)
        f[var] = res.x
        r = problem.ratio(f, p)
        if r > best:
            best, best_f, ok = r, f, bool(res.success) or res.status == 2
    return RatioResult(float(best), ITERATIVE, best_f, used, seed, ok)


def brute_force(problem: RatioProblem, p: float, grid=(-1.0, -0.5, 0.0, 0.5, 1.0),
                max_vars: int = 6) -> RatioResult:
    var = problem.support()
    if var.size > max_vars:
        raise ValueError(f"brute force limited to {max_vars} vertices, got {var.size}")
    best, best_f = 0.0, None
    f = np.zeros(problem.n)
    for vals in itertools.product(grid, repeat=var.size):
        f[var] = vals
        N, D = problem.evaluate(f, p)
        if D <= 0:
            if N > 0:
                return RatioResult(np.inf, BRUTE, f.copy(), degenerate=True)
            continue
        if N / D > best:
            best, best_f = N / D, f.copy()
    return RatioResult(float(best), BRUTE, best_f)


def solve(problem: RatioProblem, p: float, method: str = "auto", restarts: int = 32,
          seed: int = 0, starts=()) -> RatioResult:
    if method == "auto":
        method = EXACT if p == 2 else ITERATIVE
    if method == EXACT:
        if p != 2:
            raise ValueError("the eigen route is exact only for p = 2")
        return exact_eigen(problem)
    if method == ITERATIVE:
        extra = list(starts)
        if p != 2:
            # the p = 2 maximizer is a good structured start
            eig = exact_eigen(problem)
            if eig.witness is not None and np.isfinite(eig.value):
                extra.insert(0, eig.witness)
        return iterative(problem, p, restarts, seed, extra)
    if method == BRUTE:
        return brute_force(problem, p)
    raise ValueError(f"unknown method {method!r}")
