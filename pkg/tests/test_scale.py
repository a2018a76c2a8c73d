import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pdlab.fixtures import path
from pdlab.scale import (LOG5_LOG2, ScaleFunction, check_regularity, default_scale, is_monotone_in_r,
                         load_scale, power_scale, regularity_samples)


def test_power_law_same_center():
    g = path(10)
    psi = power_scale(2.0)
    samples = [(3, r, 3, s) for r in (1.5, 4.5, 9.5) for s in (0.5, 1.5) if s <= r]
    rep = check_regularity(psi, g, samples)
    assert rep.passed and rep.minimal_c_psi == pytest.approx(1.0)


@given(st.floats(0.3, 4.0), st.integers(0, 1000))
def test_power_law_any_centers(beta, seed):
    g = path(12)
    rep = check_regularity(power_scale(beta), g, regularity_samples(g, seed, 300))
    assert rep.passed


def test_inhomogeneous_scale_minimal_constant():
    g = path(8)
    x0 = 0
    psi = ScaleFunction(lambda x, r: r ** 2 * (1 + g.distances[x, x0]), 2.0, 2.0, 1.0)
    samples = list(regularity_samples(g, 0, 3000))
    rep = check_regularity(psi, g, samples)
    assert not rep.passed and rep.minimal_c_psi > 1
    # the reported minimal constant is exactly the one that makes every sample pass
    psi.c_psi = rep.minimal_c_psi * (1 + 1e-9)
    assert check_regularity(psi, g, samples).passed
    psi.c_psi = rep.minimal_c_psi * 0.99
    assert not check_regularity(psi, g, samples).passed
    # grid-search oracle over the same samples
    need = 1.0
    for x, r, y, s in samples:
        R = g.distances[x, y]
        ratio = psi(x, r) / psi(y, s)
        lo = (max(s, R) / r) ** 2 * (s / max(r, R)) ** 2
        hi = (r / max(r, R)) ** 2 * (max(r, R) / s) ** 2
        need = max(need, lo / ratio, ratio / hi)
    assert rep.minimal_c_psi == pytest.approx(need, rel=1e-9)


def test_sample_range_validated():
    with pytest.raises(ValueError):
        check_regularity(power_scale(2), path(3), [(0, 1.0, 1, 2.0)])


def test_nonpositive_value_is_error():
    psi = ScaleFunction(lambda x, r: -1.0, 1, 1)
    with pytest.raises(ValueError, match="positive"):
        psi(0, 1.0)
    with pytest.raises(ValueError):
        power_scale(0)


def test_monotone_in_r():
    assert is_monotone_in_r(power_scale(1.3), 0, [0.1, 3, 0.5, 2])


def test_defaults():
    assert default_scale("lattice_box").beta_minus == 2
    assert default_scale("gasket").beta_minus == pytest.approx(math.log(5) / math.log(2))
    assert default_scale("gasket", 2.5).beta_minus == 2.5
    assert LOG5_LOG2 == pytest.approx(2.321928)


def test_tabulated_scale(tmp_path):
    (tmp_path / "psi.json").write_text(json.dumps(
        {"r": [1, 2, 4], "psi": [1, 4, 16], "beta_minus": 2, "per_vertex": {"1": {"r": [1, 10], "psi": [1, 1000]}}}))
    psi = load_scale(tmp_path / "psi.json")
    assert psi(0, 3.0) == pytest.approx(9.0)
    assert psi(0, 8.0) == pytest.approx(64.0)  # power-law extension
    assert psi(1, 5.0) == pytest.approx(125.0)
    assert psi.beta_plus == 2
    assert check_regularity(psi, path(4), [(0, 3.0, 0, 1.0)]).passed
    (tmp_path / "bad.json").write_text(json.dumps({"r": [2, 1], "psi": [1, 2]}))
    with pytest.raises(ValueError):
        load_scale(tmp_path / "bad.json")
    assert np.isfinite(psi(0, 0.1))
