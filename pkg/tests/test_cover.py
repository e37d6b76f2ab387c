"""Patch covers, r_beta, the adaptive initial cover, and convexification."""

import numpy as np
import pytest
from dataclasses import replace
from hypothesis import given, settings
from hypothesis import strategies as st

from phaseident.cover import (build_cover, build_initial_cover, convexify,
                              r_beta, rasterize_patches)
from phaseident.dataset import Grid2D
from conftest import manufactured_grid


def scored_cover(n_p=9, nx=101, nt=101, cee_fn=None):
    grid = manufactured_grid(nx=nx, nt=nt)
    cover = build_cover(grid, n_p)
    cee_fn = cee_fn or (lambda p: 1.0)
    patches = tuple(replace(p, cee=float(cee_fn(p))) for p in cover.patches)
    return replace(cover, patches=patches)


def test_cover_geometry():
    grid = manufactured_grid(nx=101, nt=101)
    cover = build_cover(grid, 9)
    assert len(cover.patches) == 81
    # Half-overlapping rectangles tile the domain.
    union = rasterize_patches(cover, list(cover.patches))
    assert union.all()
    for p in cover.patches:
        assert p.x_hi - p.x_lo == pytest.approx(2 * cover.half_width)
        assert p.t_hi - p.t_lo == pytest.approx(2 * cover.half_height)


def test_r_beta_boundary_band_is_large():
    # High CEE concentrated on one time level: temporal variance ~ 0,
    # spatial variance large.
    cover = scored_cover(cee_fn=lambda p: 100.0 if p.j == 5 else 1.0)
    assert r_beta(cover) > 5.0


def test_r_beta_spatial_column_is_small():
    cover = scored_cover(cee_fn=lambda p: 100.0 if p.i == 5 else 1.0)
    assert r_beta(cover) < 0.5


def test_r_beta_validates_beta():
    cover = scored_cover()
    with pytest.raises(ValueError):
        r_beta(cover, beta=0.0)
    with pytest.raises(ValueError):
        r_beta(cover, beta=150.0)


def test_initial_cover_selects_high_band():
    cover = scored_cover(cee_fn=lambda p: 100.0 if p.j == 5 else 1.0)
    region = build_initial_cover(cover, noisy=False)
    # The selected region is the rasterized j = 5 patch row.
    js = np.nonzero(region.any(axis=0))[0]
    t = np.linspace(0.0, 1.0, 101)
    band = [p for p in cover.patches if p.j == 5]
    t_lo = min(p.t_lo for p in band)
    t_hi = max(p.t_hi for p in band)
    assert t[js.min()] >= t_lo - 1e-9
    assert t[js.max()] <= t_hi + 1e-9


def test_initial_cover_rejects_corner_barrier():
    # A diagonal chain touching the left and bottom edges has a
    # two-component complement but does not separate early from late
    # times; the loop must keep growing until a time-separating band forms.
    def cee(p):
        if p.i + p.j == 6:
            return 100.0 + p.i
        if p.j == 7:
            return 50.0 - abs(p.i - 5)
        return 1.0
    cover = scored_cover(cee_fn=cee)
    region = build_initial_cover(cover, noisy=False)
    labels_first = region[:, 0]
    assert not labels_first.any()          # t = 0 row stays uncovered
    cols = region.any(axis=1)
    assert cols.all()                      # covers every spatial column


def test_initial_cover_monotone_in_alpha():
    from phaseident.cover import _top_percent
    rng = np.random.default_rng(3)
    cover = scored_cover(cee_fn=lambda p: rng.uniform(1, 10))
    pool = list(cover.patches)
    prev = set()
    for alpha in (5, 10, 20, 40, 80, 100):
        sel = {(p.i, p.j) for p in _top_percent(pool, alpha)}
        assert prev <= sel
        prev = sel


def test_convexify_contains_input_and_contiguous():
    rng = np.random.default_rng(5)
    grid = manufactured_grid(nx=60, nt=70)
    region = np.zeros((60, 70), dtype=bool)
    region[10:30, 30:40] = True
    region[35:50, 33:44] = True
    band = convexify(region, grid, 3)
    assert band.mask[region].all()
    for j in range(60):
        idx = np.flatnonzero(band.mask[j])
        if idx.size:
            assert np.array_equal(idx, np.arange(idx[0], idx[-1] + 1))
        # Band is at least min_band wide in time everywhere.
        assert band.gamma_hi[j] - band.gamma_lo[j] > 0


def test_convexify_band_brackets_region():
    grid = manufactured_grid(nx=40, nt=50)
    region = np.zeros((40, 50), dtype=bool)
    region[5:35, 20:25] = True
    band = convexify(region, grid, 2)
    t = np.linspace(0.0, grid.t_max, grid.nt)
    assert np.all(band.gamma_lo <= t[20])
    assert np.all(band.gamma_hi >= t[24])
    # Complement splits into an early part and a late part.
    assert np.all(band.gamma_lo > 0)
    assert np.all(band.gamma_hi < grid.t_max)


def test_convexify_empty_raises():
    grid = manufactured_grid(nx=40, nt=50)
    with pytest.raises(ValueError):
        convexify(np.zeros((40, 50), dtype=bool), grid, 2)


@given(seed=st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_convexify_contains_input_random(seed):
    rng = np.random.default_rng(seed)
    grid = manufactured_grid(nx=30, nt=30)
    region = rng.random((30, 30)) < 0.08
    region[12:15, 14:16] = True     # keep it non-empty
    band = convexify(region, grid, 2)
    assert band.mask[region].all()
