"""Density field, spline fit, confidence bands, and the boundary metric."""

import numpy as np
import pytest

from phaseident.boundary import (boundary_error, bspline_design,
                                 build_density, confidence_band, fit_spline,
                                 pchip_1d, uniform_clamped_knots)
from phaseident.changepoint import ChangePointPMF


def test_pchip_interpolates_and_is_monotone():
    xs = np.array([0.0, 1.0, 2.0, 3.0])
    ys = np.array([0.0, 0.5, 0.6, 2.0])
    f = pchip_1d(xs, ys)
    np.testing.assert_allclose(f(xs), ys, atol=1e-12)
    fine = f(np.linspace(0, 3, 301))
    assert np.all(np.diff(fine) >= -1e-12)


def test_pchip_clip_zero():
    xs = np.array([0.0, 1.0, 2.0])
    ys = np.array([0.5, -0.2, 0.3])
    f = pchip_1d(xs, ys, clip_zero=True)
    assert np.all(f(np.linspace(0, 2, 101)) >= 0.0)


def test_bspline_partition_of_unity():
    knots = uniform_clamped_knots(0.0, 1.0, 10)
    x = np.linspace(0.0, 1.0, 57)
    design = bspline_design(x, knots)
    assert design.shape == (57, 10)
    np.testing.assert_allclose(design.sum(axis=1), 1.0, atol=1e-10)
    assert np.all(design >= -1e-12)


def _pmf_at(center_index, size, spread=2.0):
    m = np.arange(size)
    p = np.exp(-0.5 * ((m - center_index) / spread) ** 2)
    return ChangePointPMF(m, p / p.sum(), "barycenter", False)


def _density(curve, x_eval, nt=101, dt=0.01):
    pmfs = [_pmf_at(curve(x) / dt, nt) for x in x_eval]
    lo = np.zeros_like(x_eval)
    hi = np.full_like(x_eval, nt * dt)
    return build_density(pmfs, x_eval, lo, hi, dt, 0, x_eval)


def test_fit_spline_recovers_smooth_boundary():
    x = np.linspace(0.0, 1.0, 41)
    curve = lambda xv: 0.4 + 0.1 * np.sin(2 * np.pi * xv)
    density = _density(curve, x)
    est = fit_spline(density, n_basis=12, lam=1e-3)
    knots = uniform_clamped_knots(x[0], x[-1], 12)
    gamma_hat = bspline_design(x, knots) @ est.beta
    np.testing.assert_allclose(gamma_hat, curve(x), atol=0.02)


def test_confidence_band_covers_spline_center():
    x = np.linspace(0.0, 1.0, 31)
    curve = lambda xv: 0.5 + 0.05 * xv
    density = _density(curve, x)
    est = fit_spline(density, n_basis=8, lam=1e-3)
    band, flags = confidence_band(density, est, levels=(0.8,))
    lo, hi = band[0.8]
    assert np.all(hi >= lo)
    truth = curve(density.x_eval)
    frac = np.mean((truth >= lo) & (truth <= hi))
    assert frac > 0.9


def test_boundary_error_oracle():
    gamma_hat = lambda xv: 0.5 + 0.1 * xv
    gamma_true = lambda xv: 0.5 + 0.08 * xv
    w = 0.05
    lib = boundary_error(gamma_hat, gamma_true, 0.0, 1.0, w)
    xs = np.linspace(0.0 + 2 * w, 1.0 - 2 * w, 81)
    oracle = np.mean(np.abs(gamma_hat(xs) - gamma_true(xs)))
    assert lib == pytest.approx(oracle, rel=1e-12)


def test_boundary_error_zero_for_identical_curves():
    f = lambda xv: 0.3 * np.ones_like(xv)
    assert boundary_error(f, f, 0.0, 1.0, 0.01) == 0.0
