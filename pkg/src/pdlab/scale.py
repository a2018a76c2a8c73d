"""Regular scale functions Psi(x, r).

A scale function is regular with exponents beta_-, beta_+ and constant C_Psi
when, for all x, y and 0 < s <= r <= 2 diam(X) with R = d(x, y),

    C^-1 ((s v R)/r)^b+ (s/(r v R))^b-  <=  Psi(x,r)/Psi(y,s)  <=  C (r/(r v R))^b- ((r v R)/s)^b+

``check_regularity`` evaluates both sides on samples and reports the worst
violation on a log scale (<= 0 means the declared constants are valid).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .graph import Ball, WeightedGraph, realized_radii

LOG5_LOG2 = math.log(5) / math.log(2)

# default exponents per fixture family; conventions, not derived values
DEFAULT_BETA = {
    "path": 2.0,
    "cycle": 2.0,
    "lattice_box": 2.0,
    "dumbbell": 2.0,
    "gasket": LOG5_LOG2,
    "carpet": 2.0,
}


@dataclass
class ScaleFunction:
    evaluator: Callable[[int, float], float]
    beta_minus: float
    beta_plus: float
    c_psi: float = 1.0
    label: str = ""

    def __call__(self, x: int, r: float) -> float:
        if r == 0:
            return 0.0
        val = float(self.evaluator(int(x), float(r)))
        if not val > 0:
            raise ValueError(f"scale function must be positive, got Psi({x}, {r}) = {val}")
        return val

    def of_ball(self, ball: Ball) -> float:
        return self(ball.center, ball.radius)

    def to_dict(self) -> dict:
        return {"label": self.label, "beta_minus": self.beta_minus,
                "beta_plus": self.beta_plus, "c_psi": self.c_psi}


def power_scale(beta: float) -> ScaleFunction:
    if not beta > 0:
        raise ValueError("beta must be positive")
    return ScaleFunction(lambda x, r: r ** beta, beta, beta, 1.0, f"r^{beta:g}")


class TabulatedScale:
    """Psi(x, r) from a table of radii and values, log-log interpolated.

    The table may be global ({"r": [...], "psi": [...]}) or per vertex
    ({"per_vertex": {"3": {"r": [...], "psi": [...]}}, "default": {...}}).
    Beyond the table ends the nearest segment is extended as a power law.
    """

    def __init__(self, table: dict):
        self.default = self._curve(table.get("default", table))
        self.per_vertex = {int(k): self._curve(v) for k, v in table.get("per_vertex", {}).items()}

    @staticmethod
    def _curve(spec):
        if spec is None or "r" not in spec:
            return None
        r = np.asarray(spec["r"], dtype=float)
        v = np.asarray(spec["psi"], dtype=float)
        if r.size < 2 or r.shape != v.shape:
            raise ValueError("tabulated scale needs matching r and psi arrays of length >= 2")
        if np.any(r <= 0) or np.any(v <= 0) or np.any(np.diff(r) <= 0):
            raise ValueError("tabulated radii must increase and values be positive")
        return np.log(r), np.log(v)

    def __call__(self, x: int, r: float) -> float:
        curve = self.per_vertex.get(x, self.default)
        if curve is None:
            raise ValueError(f"no scale table for vertex {x}")
        lr, lv = curve
        t = math.log(r)
        k = int(np.clip(np.searchsorted(lr, t) - 1, 0, lr.size - 2))
        slope = (lv[k + 1] - lv[k]) / (lr[k + 1] - lr[k])
        return float(math.exp(lv[k] + slope * (t - lr[k])))


def load_scale(path, beta_minus: float | None = None, beta_plus: float | None = None,
               c_psi: float = 1.0) -> ScaleFunction:
    with open(path) as fh:
        table = json.load(fh)
    tab = TabulatedScale(table)
    bm = beta_minus if beta_minus is not None else table.get("beta_minus", 1.0)
    bp = beta_plus if beta_plus is not None else table.get("beta_plus", bm)
    return ScaleFunction(tab, float(bm), float(bp), float(table.get("c_psi", c_psi)), str(path))


def default_scale(family: str, beta: float | None = None) -> ScaleFunction:
    return power_scale(beta if beta is not None else DEFAULT_BETA.get(family, 2.0))


# --------------------------------------------------------------------------

def regularity_bounds(psi: ScaleFunction, r: float, s: float, R: float):
    """Lower and upper bound factors (without C_Psi) for Psi(x,r)/Psi(y,s)."""
    bm, bp = psi.beta_minus, psi.beta_plus
    lower = (max(s, R) / r) ** bp * (s / max(r, R)) ** bm
    upper = (r / max(r, R)) ** bm * (max(r, R) / s) ** bp
    return lower, upper


@dataclass
class RegularityReport:
    worst_violation: float  # max over samples of log excess; <= 0 passes
    minimal_c_psi: float  # smallest C making every sample pass
    samples: int
    worst_sample: tuple | None

    @property
    def passed(self) -> bool:
        return self.worst_violation <= 1e-12


def regularity_samples(graph: WeightedGraph, rng=None, count: int = 2000):
    """Random (x, r, y, s) with 0 < s <= r <= 2 diam, radii on the midpoint grid."""
    rng = np.random.default_rng(rng)
    cap = 2 * graph.diameter if graph.n > 1 else 1.0
    grids = {}
    for _ in range(count):
        x, y = (int(v) for v in rng.integers(graph.n, size=2))
        g = grids.get(x)
        if g is None:
            g = grids[x] = realized_radii(graph, x, cap)
        a, b = sorted(rng.choice(g, size=2))
        yield x, float(b), y, float(a)


def check_regularity(psi: ScaleFunction, graph: WeightedGraph, samples) -> RegularityReport:
    """Worst log-violation of the two-sided regularity bound over samples.

    Returns both the violation under the declared C_Psi and the smallest C
    that would make every sample pass.
    """
    worst, need, witness, count = -np.inf, 1.0, None, 0
    logc = math.log(psi.c_psi)
    cap = 2 * graph.diameter if graph.n > 1 else math.inf
    for x, r, y, s in samples:
        if not (0 < s <= r <= cap * (1 + 1e-12)):
            raise ValueError(f"sample radii must satisfy 0 < s <= r <= 2 diam: got r={r}, s={s}")
        R = float(graph.distances[x, y])
        ratio = math.log(psi(x, r)) - math.log(psi(y, s))
        lo, hi = regularity_bounds(psi, r, s, R)
        # excess needed from C on each side
        excess = max(math.log(lo) - ratio, ratio - math.log(hi))
        need = max(need, math.exp(excess))
        v = excess - logc
        count += 1
        if v > worst:
            worst, witness = v, (x, r, y, s)
    return RegularityReport(float(worst), float(need), count, witness)


def is_monotone_in_r(psi: ScaleFunction, x: int, radii) -> bool:
    vals = [psi(x, r) for r in sorted(radii)]
    return all(b >= a for a, b in zip(vals, vals[1:]))
