import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pdlab.graph import WeightedGraph

settings.register_profile("pdlab", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("pdlab")


def make_graph(edges, n=None, w=None, length=None, mu=None, name=""):
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    n = n if n is not None else int(edges.max()) + 1
    m = edges.shape[0]
    return WeightedGraph(np.ones(n) if mu is None else mu, edges,
                         np.ones(m) if w is None else w,
                         np.ones(m) if length is None else length, name=name)


def random_connected_graph(rng, n, extra=None, weights=True):
    """Random spanning tree plus extra edges, positive random weights."""
    edges = set()
    for v in range(1, n):
        edges.add((int(rng.integers(v)), v))
    extra = rng.integers(0, n) if extra is None else extra
    for _ in range(int(extra)):
        a, b = (int(x) for x in rng.integers(n, size=2))
        if a != b:
            edges.add((min(a, b), max(a, b)))
    edges = np.array(sorted(edges), dtype=np.int64).reshape(-1, 2)
    m = len(edges)
    if weights:
        return WeightedGraph(rng.uniform(0.2, 2.0, n), edges, rng.uniform(0.1, 3.0, m),
                             rng.uniform(0.5, 2.0, m))
    return make_graph(edges, n)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def path3():
    return make_graph([(0, 1), (1, 2)])


@pytest.fixture
def cycle4():
    return make_graph([(0, 1), (1, 2), (2, 3), (0, 3)])


# acceptance lines, repeated in the terminal summary so they survive output capture
ACCEPTANCE: dict[int, str] = {}


def record_acceptance(number: int, ok: bool, title: str, detail: str) -> str:
    line = f"acceptance {number:2d}: {'PASS' if ok else 'FAIL'}  {title} ({detail})"
    ACCEPTANCE[number] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
