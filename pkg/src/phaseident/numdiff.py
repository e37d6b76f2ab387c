"""Numerical differentiation of noisy grid data.

Spatial derivatives up to order 3 come from a 5-point ENO scheme: at each
point the smoothest 5-point stencil is selected by comparing Newton divided
differences, and the derivative of the interpolating quartic is evaluated at
the point.  Time derivatives use forward differences.  Noisy data can be
pre-smoothed with successive local least-squares polynomial fits (SDD).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.signal import savgol_filter

from .dataset import Grid2D

# Derivative weights of the Lagrange basis on nodes {0,1,2,3,4}, evaluated at
# node l:  _WEIGHTS[order][l][i] = (d^order L_i / ds^order)(l), unit spacing.
def _lagrange_weights() -> dict[int, np.ndarray]:
    nodes = np.arange(5.0)
    tables = {1: np.zeros((5, 5)), 2: np.zeros((5, 5)), 3: np.zeros((5, 5))}
    for i in range(5):
        yi = np.zeros(5)
        yi[i] = 1.0
        poly = np.polynomial.polynomial.Polynomial.fit(nodes, yi, 4)
        for order in (1, 2, 3):
            d = poly.deriv(order)
            for l in range(5):
                tables[order][l, i] = d(nodes[l])
    return tables


_WEIGHTS = _lagrange_weights()


def eno5_stencil_starts(values: np.ndarray) -> np.ndarray:
    """Start index of the selected 5-point stencil at every point.

    ``values`` has space as the leading axis; selection is vectorized over
    all trailing axes.  The stencil grows from the point itself, extending
    left or right toward the smaller absolute divided difference (ties go
    left), and never leaves the array.
    """
    n = values.shape[0]
    if n < 5:
        raise ValueError("need at least 5 spatial points")
    # Undivided differences order 1..4 (scaling cancels in comparisons).
    diffs = []
    d = values
    for _ in range(4):
        d = np.diff(d, axis=0)
        diffs.append(np.abs(d))
    start = np.arange(n).reshape((n,) + (1,) * (values.ndim - 1))
    start = np.broadcast_to(start, values.shape).copy()
    for k in range(1, 5):
        dk = diffs[k - 1]  # length n-k along axis 0
        can_left = start - 1 >= 0
        can_right = start + k <= n - 1
        left_idx = np.clip(start - 1, 0, n - k - 1)
        right_idx = np.clip(start, 0, n - k - 1)
        left_val = np.take_along_axis(dk, left_idx, axis=0)
        right_val = np.take_along_axis(dk, right_idx, axis=0)
        go_left = can_left & (~can_right | (left_val <= right_val))
        start = np.where(go_left, start - 1, start)
    return start


def eno5_derivative_field(values: np.ndarray, dx: float, order: int) -> np.ndarray:
    """ENO-5 spatial derivative along axis 0; NaN where no stencil fits."""
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2, or 3")
    if dx <= 0:
        raise ValueError("dx must be positive")
    n = values.shape[0]
    if n < 6:
        raise ValueError("slice too short for the 5-point ENO scheme")
    start = eno5_stencil_starts(values)
    offset = np.arange(n).reshape((n,) + (1,) * (values.ndim - 1)) - start
    w = _WEIGHTS[order]  # (5 positions, 5 stencil points)
    out = np.zeros_like(values, dtype=float)
    for i in range(5):
        out += w[offset, i] * np.take_along_axis(
            values, np.clip(start + i, 0, n - 1), axis=0
        )
    out /= dx ** order
    out[:2] = np.nan
    out[n - 2:] = np.nan
    return out


def eno5_derivative(slice_: np.ndarray, dx: float, order: int) -> np.ndarray:
    """Derivative of a 1-D slice; invalid boundary points are NaN."""
    return eno5_derivative_field(np.asarray(slice_, dtype=float), dx, order)


def forward_time_diff(grid: Grid2D) -> np.ndarray:
    """(U[:, n+1] - U[:, n]) / dt; the last time column is NaN."""
    out = np.full((grid.nx, grid.nt), np.nan)
    out[:, :-1] = np.diff(grid.values, axis=1) / grid.dt
    return out


@dataclass(frozen=True)
class DenoiseSpec:
    window: int = 7
    poly_degree: int = 2
    passes: int = 1
    window_t: int = 0   # 0 disables the extra smoothing pass along time

    def __post_init__(self):
        if self.window % 2 == 0 or self.window <= 0:
            raise ValueError("window must be odd and positive")
        if self.window_t != 0 and (self.window_t % 2 == 0 or self.window_t < 5):
            raise ValueError("window_t must be 0 or an odd number >= 5")
        if self.poly_degree >= self.window:
            raise ValueError("poly_degree must be smaller than window")
        if self.passes < 0:
            raise ValueError("passes must be nonnegative")


def sdd_denoise(grid: Grid2D, spec: DenoiseSpec) -> Grid2D:
    """Sliding-window polynomial smoothing along space, optionally time.

    Smoothing along time systematically flattens fast coherent motion and
    biases everything derived from time differences, so it is off unless
    window_t is set.
    """
    if spec.window > min(grid.nx, grid.nt):
        raise ValueError("window larger than the grid")
    v = grid.values.copy()
    for _ in range(spec.passes):
        v = savgol_filter(v, spec.window, spec.poly_degree, axis=0,
                          mode="interp")
        if spec.window_t:
            v = savgol_filter(v, spec.window_t, spec.poly_degree, axis=1,
                              mode="interp")
    return grid.with_values(v)


@dataclass(frozen=True)
class DerivativeStack:
    """u and its derivatives on the full grid, with a validity mask."""

    grid: Grid2D
    d0: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray
    dt: np.ndarray
    valid_mask: np.ndarray

    @property
    def derivs(self) -> tuple[np.ndarray, ...]:
        return (self.d0, self.d1, self.d2, self.d3)


def _smooth_rows(field: np.ndarray, margin: int, spec: DenoiseSpec) -> np.ndarray:
    """Smooth a derivative field along space, leaving the NaN margins alone."""
    out = field.copy()
    core = field[margin:field.shape[0] - margin]
    if core.shape[0] > spec.window:
        out[margin:field.shape[0] - margin] = savgol_filter(
            core, spec.window, spec.poly_degree, axis=0, mode="interp")
    return out


def build_derivative_stack(
    grid: Grid2D, denoise: Optional[DenoiseSpec] = None
) -> DerivativeStack:
    """Optionally denoise, then fill spatial derivatives and u_t.

    On clean data each derivative order comes straight from the 5-point ENO
    scheme.  On noisy data the orders are built successively: differentiate
    once, re-smooth along space, differentiate again.  Repeated first-order
    passes with interleaved smoothing keep the noise amplification of the
    higher orders bounded, which a single smoothing pass does not.
    """
    smoothing = denoise is not None and denoise.passes > 0
    if smoothing:
        grid = sdd_denoise(grid, denoise)
    v = grid.values
    if smoothing:
        d1 = eno5_derivative_field(v, grid.dx, 1)
        d1 = _smooth_rows(d1, 2, denoise)
        d2 = np.full_like(d1, np.nan)
        d2[2:-2] = eno5_derivative_field(d1[2:-2], grid.dx, 1)
        d2 = _smooth_rows(d2, 4, denoise)
        d3 = np.full_like(d1, np.nan)
        d3[4:-4] = eno5_derivative_field(d2[4:-4], grid.dx, 1)
    else:
        d1 = eno5_derivative_field(v, grid.dx, 1)
        d2 = eno5_derivative_field(v, grid.dx, 2)
        d3 = eno5_derivative_field(v, grid.dx, 3)
    dt = forward_time_diff(grid)
    valid = np.ones((grid.nx, grid.nt), dtype=bool)
    margin = 6 if smoothing else 2
    valid[:margin] = False
    valid[-margin:] = False
    valid[:, -1] = False
    return DerivativeStack(grid, v.copy(), d1, d2, d3, dt, valid)
