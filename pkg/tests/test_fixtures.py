import warnings

import numpy as np
import pytest

from pdlab.fixtures import (FAMILIES, FamilySpec, FixtureError, capacity_path, carpet, coarsening_map, cycle,
                            dumbbell, gasket, generate, lattice_box, path, star)
from pdlab.graph import check_connected


def test_counts():
    g = path(1)
    assert (g.n, g.m) == (2, 1)
    g = gasket(1)
    assert (g.n, g.m) == (6, 9)
    g = lattice_box(2, 3)
    assert (g.n, g.m) == (9, 12)
    assert (gasket(0).n, gasket(4).n, gasket(5).n) == (3, 123, 366)
    assert cycle(5).m == 5 and star(4).m == 4
    assert dumbbell(3, 2).n == 7 and dumbbell(3, 2).m == 3 + 3 + 2


def test_carpet_and_warning():
    with pytest.warns(UserWarning, match="multiplier 1"):
        g = carpet(1)
    assert g.n == 16 and g.m == 24
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        carpet(2, multiplier=1.25)


@pytest.mark.parametrize("spec", [FamilySpec("path", 5), FamilySpec("cycle", 7), FamilySpec("lattice_box", 4, 3),
                                  FamilySpec("gasket", 3), FamilySpec("carpet", 1, multiplier=1.0),
                                  FamilySpec("dumbbell", 4, params={"bridge": 3})])
def test_generate_deterministic_and_normalized(spec):
    a, b = generate(spec), generate(spec)
    assert a.to_json() == b.to_json()
    assert a.mu.sum() == pytest.approx(1.0)
    check_connected(a)


def test_budget_errors():
    for bad in (lambda: gasket(8), lambda: carpet(5), lambda: path(0), lambda: cycle(2),
                lambda: lattice_box(2, 1), lambda: dumbbell(1), lambda: generate(FamilySpec("torus", 3))):
        with pytest.raises(FixtureError):
            bad()
    assert "gasket" in FAMILIES


def test_gasket_geometry():
    diams = [gasket(k).diameter for k in range(1, 5)]
    np.testing.assert_allclose(diams, diams[0])
    g = gasket(3)
    assert np.allclose(g.w, (5 / 3) ** 3) and np.allclose(g.length, 1 / 8)
    assert np.allclose(gasket(2, multiplier=2.0).w, 4.0)


def test_carpet_diameter_constant():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert carpet(1).diameter == pytest.approx(carpet(2).diameter)


def test_coarsening_map():
    fine, coarse = gasket(3), gasket(2)
    m = coarsening_map(fine, coarse)
    assert m.shape == (fine.n,) and set(m) == set(range(coarse.n))
    # coarse vertices reappear and map onto themselves
    d = np.linalg.norm(fine.coords[:, None] - coarse.coords[None], axis=2)
    same = np.argwhere(d < 1e-12)
    assert all(m[i] == j for i, j in same)
    with pytest.raises(FixtureError):
        coarsening_map(dumbbell(3), dumbbell(3))


def test_capacity_path_metric():
    for n in (1, 2, 7):
        g = capacity_path(n)
        d = g.distances[0]
        assert list(np.flatnonzero(d < 1)) == [0]
        assert list(np.flatnonzero(d >= 2)) == [n]
        assert np.all(g.w == 1)


def test_label():
    assert FamilySpec("lattice_box", 5, 3).label == "lattice_box-3-5"
    assert FamilySpec("gasket", 2).label == "gasket-2"
