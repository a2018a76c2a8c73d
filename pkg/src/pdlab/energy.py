"""Discrete p-energy and its energy measure.

Each edge carries ``w_e |f(u) - f(v)|^p``; the energy measure hands half of it
to each endpoint, so ``Gamma<f>(X) = E_p(f)``.  Two edge-based companions of
the vertex measure are used by the locality-sensitive lemmas:

* ``inner_energy(A)`` counts edges with both endpoints in A,
* ``outer_energy(A)`` counts edges with at least one endpoint in A,

and ``inner <= Gamma(A) <= outer`` for every vertex set A.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import WeightedGraph


def check_exponent(p: float) -> None:
    if not p > 1:
        raise ValueError(f"exponent out of range: p={p} (need p > 1)")


def edge_differences(graph: WeightedGraph, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    return f[graph.edges[:, 0]] - f[graph.edges[:, 1]]


def edge_energies(graph: WeightedGraph, f, p: float) -> np.ndarray:
    check_exponent(p)
    return graph.w * np.abs(edge_differences(graph, f)) ** p


def _spread(graph: WeightedGraph, per_edge: np.ndarray) -> np.ndarray:
    half = 0.5 * per_edge
    out = np.bincount(graph.edges[:, 0], weights=half, minlength=graph.n)
    out += np.bincount(graph.edges[:, 1], weights=half, minlength=graph.n)
    return out


@dataclass
class EnergyMeasure:
    mass: np.ndarray
    p: float

    @property
    def total(self) -> float:
        return float(self.mass.sum())

    def of(self, mask) -> float:
        return float(self.mass[np.asarray(mask)].sum())

    def to_dict(self) -> dict[str, float]:
        return {str(i): float(x) for i, x in enumerate(self.mass) if x != 0.0}


def energy_measure(graph: WeightedGraph, f, p: float) -> EnergyMeasure:
    return EnergyMeasure(_spread(graph, edge_energies(graph, f, p)), p)


def gamma(graph: WeightedGraph, f, p: float) -> np.ndarray:
    """Per-vertex energy mass as a plain array."""
    return _spread(graph, edge_energies(graph, f, p))


def energy(graph: WeightedGraph, f, p: float) -> float:
    return float(edge_energies(graph, f, p).sum())


def gamma_of(graph: WeightedGraph, f, p: float, mask) -> float:
    return float(gamma(graph, f, p)[np.asarray(mask)].sum())


def inner_energy(graph: WeightedGraph, f, p: float, mask) -> float:
    mask = np.asarray(mask, dtype=bool)
    inside = mask[graph.edges[:, 0]] & mask[graph.edges[:, 1]]
    return float(edge_energies(graph, f, p)[inside].sum())


def outer_energy(graph: WeightedGraph, f, p: float, mask) -> float:
    mask = np.asarray(mask, dtype=bool)
    touch = mask[graph.edges[:, 0]] | mask[graph.edges[:, 1]]
    return float(edge_energies(graph, f, p)[touch].sum())


def interior(graph: WeightedGraph, mask) -> np.ndarray:
    """Vertices of the set all of whose neighbours are in the set."""
    mask = np.asarray(mask, dtype=bool)
    out = mask.copy()
    u, v = graph.edges[:, 0], graph.edges[:, 1]
    out[u[~mask[v]]] = False
    out[v[~mask[u]]] = False
    return out


# --------------------------------------------------------------------------
# axiom checks

def random_lipschitz_map(rng: np.random.Generator, lo: float, hi: float, pieces: int = 6):
    """Random piecewise-linear map R -> R with Lipschitz constant <= 1."""
    knots = np.sort(rng.uniform(lo, hi, size=pieces - 1))
    slopes = rng.uniform(-1.0, 1.0, size=pieces)
    offset = rng.normal()

    def g(t):
        t = np.asarray(t, dtype=float)
        out = offset + slopes[0] * (t - knots[0])
        for k, s in zip(knots, np.diff(slopes)):
            out = out + s * np.maximum(t - k, 0.0)
        return out

    return g


@dataclass
class AxiomResult:
    name: str
    worst_slack: float
    checks: int

    @property
    def passed(self) -> bool:
        return self.worst_slack >= -1e-9


@dataclass
class AxiomsReport:
    p: float
    results: dict[str, AxiomResult] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results.values())

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "passed": self.passed,
            "axioms": {k: {"worst_slack": r.worst_slack, "checks": r.checks, "passed": r.passed}
                       for k, r in self.results.items()},
        }


def _rel(lhs, rhs):
    """Relative slack (rhs - lhs) / max(|lhs|, |rhs|, 1e-300)."""
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    scale = np.maximum(np.maximum(np.abs(lhs), np.abs(rhs)), 1e-300)
    return (rhs - lhs) / scale


def _test_functions(graph: WeightedGraph, rng: np.random.Generator):
    n = graph.n
    yield rng.standard_normal(n)
    yield (rng.random(n) < 0.5).astype(float)
    yield graph.distances[int(rng.integers(n))].copy()
    yield rng.standard_normal(n) * rng.exponential(size=n)


def axioms_report(graph: WeightedGraph, p: float, trials: int, rng=None) -> AxiomsReport:
    """Randomized check of the energy-measure axioms on ``graph``.

    Covers the triangle inequality on random vertex sets, homogeneity,
    contraction under 1-Lipschitz maps (vertexwise), and interior locality.
    Failures show up as negative worst slack, never as exceptions.
    """
    check_exponent(p)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(rng)
    n = graph.n
    worst = {k: np.inf for k in ("triangle", "homogeneity", "contraction", "locality", "continuity")}
    counts = dict.fromkeys(worst, 0)

    def record(key, slack):
        slack = np.atleast_1d(slack)
        worst[key] = min(worst[key], float(slack.min()))
        counts[key] += slack.size

    for _ in range(trials):
        funcs = list(_test_functions(graph, rng))
        f = funcs[int(rng.integers(len(funcs)))]
        g = funcs[int(rng.integers(len(funcs)))] * rng.normal()
        gf, gg, gfg = gamma(graph, f, p), gamma(graph, g, p), gamma(graph, f + g, p)
        # per vertex and on random sets
        record("triangle", _rel(gfg ** (1 / p), gf ** (1 / p) + gg ** (1 / p)))
        for _ in range(4):
            a = rng.random(n) < rng.uniform(0.1, 0.9)
            if not a.any():
                continue
            record("triangle", _rel(gfg[a].sum() ** (1 / p), gf[a].sum() ** (1 / p) + gg[a].sum() ** (1 / p)))

        lam = rng.normal() * rng.choice([0.1, 1.0, 10.0])
        scaled = gamma(graph, lam * f, p)
        # two-sided equality check expressed as the worse of both slacks
        record("homogeneity", np.minimum(_rel(scaled, abs(lam) ** p * gf), _rel(abs(lam) ** p * gf, scaled)))

        lip = random_lipschitz_map(rng, float(f.min()) - 1, float(f.max()) + 1)
        record("contraction", _rel(gamma(graph, lip(f), p), gf))

        # interior locality: f constant on A and on the neighbours of A
        seed = int(rng.integers(n))
        a = graph.distances[seed] < rng.uniform(0.5, 2.0) * graph.length.min() * (1 + rng.integers(3))
        nb = a.copy()
        nb[graph.edges[:, 1][a[graph.edges[:, 0]]]] = True
        nb[graph.edges[:, 0][a[graph.edges[:, 1]]]] = True
        h = f.copy()
        h[nb] = rng.normal()
        mass = gamma(graph, h, p)[a].sum()
        record("locality", -mass / max(gamma(graph, h, p).sum(), 1e-300))

        eps = 1e-7
        pert = f + eps * rng.standard_normal(n)
        e0, e1 = gf.sum(), gamma(graph, pert, p).sum()
        # |E(f+eps z) - E(f)| should be O(eps); slack is 1e-3 - relative change
        record("continuity", 1e-3 - abs(e1 - e0) / max(e0, 1.0))

    report = AxiomsReport(p)
    for k in worst:
        report.results[k] = AxiomResult(k, worst[k], counts[k])
    return report
