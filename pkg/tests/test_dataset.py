"""Noise model and grid I/O."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phaseident.dataset import (Grid2D, NoiseSpec, add_noise, load_grid,
                                noise_sigma, save_grid)


def _grid(values):
    values = np.asarray(values, dtype=float)
    nx, nt = values.shape
    return Grid2D(0.0, 1.0, 1.0, nx, nt, values)


def test_sigma_two_values():
    # values {0, 2}: midrange 1, RMS deviation 1, so sigma = alpha/100.
    g = _grid([[0.0, 2.0], [2.0, 0.0]])
    assert noise_sigma(g, 10.0) == pytest.approx(0.1, rel=1e-14)


def test_sigma_constant_field_is_zero():
    g = _grid(np.full((4, 5), 3.7))
    assert noise_sigma(g, 25.0) == 0.0
    out = add_noise(g, NoiseSpec(25.0, 3))
    np.testing.assert_array_equal(out.values, g.values)


def test_zero_level_is_identity():
    g = _grid(np.arange(12.0).reshape(3, 4))
    out = add_noise(g, NoiseSpec(0.0, 0))
    np.testing.assert_array_equal(out.values, g.values)


def test_noise_deterministic_under_seed():
    g = _grid(np.arange(12.0).reshape(3, 4))
    a = add_noise(g, NoiseSpec(5.0, 7))
    b = add_noise(g, NoiseSpec(5.0, 7))
    np.testing.assert_array_equal(a.values, b.values)
    c = add_noise(g, NoiseSpec(5.0, 8))
    assert not np.array_equal(a.values, c.values)


def test_noise_sample_std_matches_sigma(rng):
    values = rng.normal(size=(200, 200))
    g = _grid(values)
    sigma = noise_sigma(g, 10.0)
    out = add_noise(g, NoiseSpec(10.0, 0))
    sample = (out.values - g.values).ravel()
    assert np.std(sample) == pytest.approx(sigma, rel=0.02)
    assert np.mean(sample) == pytest.approx(0.0, abs=3 * sigma / 200)


@given(level=st.floats(0.1, 50.0), scale=st.floats(0.1, 100.0))
@settings(max_examples=30, deadline=None)
def test_sigma_scales_linearly(level, scale):
    base = np.arange(20.0).reshape(4, 5)
    g1 = _grid(base)
    g2 = _grid(scale * base)
    s1 = noise_sigma(g1, level)
    s2 = noise_sigma(g2, level)
    assert s2 == pytest.approx(scale * s1, rel=1e-9)


def test_grid_roundtrip(tmp_path, rng):
    g = Grid2D(-1.0, 2.0, 0.5, 6, 4, rng.normal(size=(6, 4)))
    path = tmp_path / "grid.npz"
    save_grid(g, path)
    back = load_grid(path)
    assert back.x_min == g.x_min and back.x_max == g.x_max
    assert back.t_max == g.t_max and back.nx == g.nx and back.nt == g.nt
    np.testing.assert_array_equal(back.values, g.values)
