"""ENO differentiation, smoothing, and the derivative stack."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phaseident.dataset import Grid2D
from phaseident.numdiff import (DenoiseSpec, build_derivative_stack,
                                eno5_derivative_field, forward_time_diff,
                                sdd_denoise)
from conftest import manufactured_grid

MARGINS = {1: 2, 2: 4, 3: 6}


def test_eno_exact_on_polynomials():
    # Differentiating the 5-point interpolant is exact for degree <= 4.
    # A single ENO pass only needs the 2-point stencil margin per side.
    x = np.linspace(0.0, 1.0, 41)
    dx = x[1] - x[0]
    coeffs = np.array([0.3, -1.2, 0.5, 2.0, -0.7])
    u = np.polyval(coeffs, x)
    for order in (1, 2, 3):
        d = eno5_derivative_field(u, dx, order)
        truth = np.polyval(np.polyder(coeffs, order), x)
        assert np.all(np.isnan(d[:2])) and np.all(np.isnan(d[-2:]))
        np.testing.assert_allclose(d[2:-2], truth[2:-2], rtol=1e-8,
                                   atol=1e-8 * np.max(np.abs(truth)))


@given(c=st.floats(0.1, 10.0))
@settings(max_examples=25, deadline=None)
def test_eno_positive_scaling_equivariance(c):
    # Stencil selection compares magnitudes of divided differences, so a
    # positive rescale keeps every stencil and scales the output linearly.
    x = np.linspace(0.0, 2 * np.pi, 64)
    dx = x[1] - x[0]
    u = np.sin(x) + 0.3 * np.cos(3 * x)
    lhs = eno5_derivative_field(c * u, dx, 1)
    rhs = c * eno5_derivative_field(u, dx, 1)
    np.testing.assert_allclose(lhs[2:-2], rhs[2:-2], rtol=1e-9, atol=1e-12)


@pytest.mark.parametrize("order,rate", [(1, 4), (2, 3), (3, 2)])
def test_eno_convergence_rates(order, rate):
    errs = []
    for n in (65, 129, 257):
        x = np.linspace(0.0, 2 * np.pi, n)
        dx = x[1] - x[0]
        u = np.sin(x)
        d = eno5_derivative_field(u, dx, order)
        truth = np.sin(x + order * np.pi / 2)
        m = MARGINS[order]
        errs.append(np.max(np.abs(d[m:-m] - truth[m:-m])))
    slopes = np.diff(np.log(errs)) / np.log(0.5)
    assert np.all(slopes > rate - 0.5)


def test_forward_time_diff_on_decay(decay_grid):
    dudt = forward_time_diff(decay_grid)
    # Forward difference of exp(-t): first-order accurate.
    truth = -decay_grid.values
    err = np.nanmax(np.abs(dudt[:, :-1] - truth[:, :-1]))
    assert err < 0.01


def test_sdd_preserves_smooth_field(decay_grid):
    out = sdd_denoise(decay_grid, DenoiseSpec(7, 2, 1))
    interior = np.s_[10:-10, :]
    np.testing.assert_allclose(out.values[interior],
                               decay_grid.values[interior], atol=2e-3)


def test_stack_shapes_and_margins(decay_grid):
    stack = build_derivative_stack(decay_grid)
    shape = decay_grid.values.shape
    for arr in (stack.d0, stack.d1, stack.d2, stack.d3, stack.dt):
        assert arr.shape == shape
    # Margin 2 without smoothing.
    assert stack.valid_mask[2:-2, :-1].all()
    assert not stack.valid_mask[:2].any() and not stack.valid_mask[-2:].any()


def test_stack_margin_with_smoothing(decay_grid):
    stack = build_derivative_stack(decay_grid, DenoiseSpec(7, 2, 1))
    assert stack.valid_mask[6:-6, :-1].all()
    assert not stack.valid_mask[:6].any() and not stack.valid_mask[-6:].any()


def test_stack_derivatives_accurate(decay_grid):
    stack = build_derivative_stack(decay_grid)
    x = np.linspace(decay_grid.x_min, decay_grid.x_max, decay_grid.nx)
    t = np.linspace(0.0, decay_grid.t_max, decay_grid.nt)
    m = stack.valid_mask
    for arr, truth in ((stack.d1, np.cos(x)[:, None] * np.exp(-t)),
                       (stack.d2, -np.sin(x)[:, None] * np.exp(-t)),
                       (stack.d3, -np.cos(x)[:, None] * np.exp(-t))):
        assert np.max(np.abs(arr[m] - truth[m])) < 5e-3


def test_window_t_smooths_time_axis(rng):
    g = manufactured_grid(nx=64, nt=64)
    noisy = Grid2D(g.x_min, g.x_max, g.t_max, g.nx, g.nt,
                   g.values + 0.05 * rng.normal(size=g.values.shape))
    plain = sdd_denoise(noisy, DenoiseSpec(7, 2, 1))
    with_t = sdd_denoise(noisy, DenoiseSpec(7, 2, 1, window_t=7))
    err_plain = np.abs(plain.values - g.values)[10:-10, 10:-10].mean()
    err_t = np.abs(with_t.values - g.values)[10:-10, 10:-10].mean()
    assert err_t < err_plain


def test_denoise_spec_validation():
    with pytest.raises(ValueError):
        DenoiseSpec(6, 2, 1)
    with pytest.raises(ValueError):
        DenoiseSpec(7, 7, 1)
    with pytest.raises(ValueError):
        DenoiseSpec(7, 2, 1, window_t=4)
