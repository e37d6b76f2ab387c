"""Continuous boundary reconstruction from per-column change-point PMFs.

The sampled PMFs are zero-padded to a common time interval, interpolated
into a 2-D density with monotone cubic Hermite (PCHIP) interpolation, and a
cubic B-spline curve is fitted to the high-probability region by weighted,
derivative-penalized least squares.  Confidence radii come from the density
columns around the fitted curve.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from .changepoint import ChangePointPMF


def pchip_1d(xs: np.ndarray, ys: np.ndarray,
             clip_zero: bool = False) -> Callable[[np.ndarray], np.ndarray]:
    """Monotonicity-preserving cubic Hermite interpolant, exact at nodes.

    With ``clip_zero`` the output is truncated at zero (used for densities).
    Outside the node range the interpolant holds the end values.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size < 2:
        raise ValueError("need at least two nodes")
    if np.any(np.diff(xs) <= 0):
        raise ValueError("xs must be strictly increasing")
    interp = PchipInterpolator(xs, ys, extrapolate=False)

    def f(x):
        x = np.asarray(x, dtype=float)
        out = interp(np.clip(x, xs[0], xs[-1]))
        if clip_zero:
            out = np.maximum(out, 0.0)
        return out

    return f


@dataclass(frozen=True)
class DensityField:
    x_samples: np.ndarray        # sampled line abscissae
    x_eval: np.ndarray           # evaluation columns
    t_eval: np.ndarray           # evaluation time rows spanning the common T
    values: np.ndarray           # (len(x_eval), len(t_eval)), >= 0

    @property
    def t_range(self) -> tuple[float, float]:
        return float(self.t_eval[0]), float(self.t_eval[-1])


def build_density(pmfs: Sequence[ChangePointPMF], x_samples: np.ndarray,
                  gamma_lo_samples: np.ndarray, gamma_hi_samples: np.ndarray,
                  dt: float, m0: int, x_eval: np.ndarray,
                  refine: int = 4) -> DensityField:
    """Zero-pad the PMFs to the common interval and PCHIP-interpolate.

    PMF index ``m`` of sample column i sits at time ``gamma_lo[i] + m dt``.
    Degenerate (flat-error) columns carry weight 0.1.
    """
    if len(pmfs) == 0:
        raise ValueError("no PMFs supplied")
    if len(pmfs) != len(x_samples):
        raise ValueError("one PMF per sample column required")
    t_lo = float(np.min(gamma_lo_samples)) + m0 * dt
    t_hi = float(np.max(gamma_hi_samples)) - m0 * dt
    if t_hi <= t_lo:
        raise ValueError("degenerate common time interval")
    n_rows = max(int(round((t_hi - t_lo) / dt)) * refine + 1, 2)
    t_eval = np.linspace(t_lo, t_hi, n_rows)
    # Per-column interpolants in time over the zero-padded lattice.
    col_values = np.zeros((len(pmfs), n_rows))
    for i, pmf in enumerate(pmfs):
        lat_lo = int(np.floor((t_lo - gamma_lo_samples[i]) / dt))
        lat_hi = int(np.ceil((t_hi - gamma_lo_samples[i]) / dt))
        lattice = np.arange(lat_lo, lat_hi + 1)
        vals = np.zeros(lattice.size)
        pos = pmf.support - lat_lo
        inside = (pos >= 0) & (pos < lattice.size)
        weight = 0.1 if pmf.degenerate else 1.0
        vals[pos[inside]] = weight * pmf.probabilities[inside]
        times = gamma_lo_samples[i] + lattice * dt
        col_values[i] = pchip_1d(times, vals, clip_zero=True)(t_eval)
    # Interpolate along x per time row.
    values = np.empty((len(x_eval), n_rows))
    interp_x = PchipInterpolator(np.asarray(x_samples, dtype=float),
                                 col_values, axis=0, extrapolate=False)
    xq = np.clip(x_eval, x_samples[0], x_samples[-1])
    values[:] = np.maximum(interp_x(xq), 0.0)
    return DensityField(np.asarray(x_samples, float), np.asarray(x_eval, float),
                        t_eval, values)


def uniform_clamped_knots(x_min: float, x_max: float, n_basis: int) -> np.ndarray:
    """Clamped cubic knot vector with uniform interior knots (J+4 knots)."""
    if n_basis < 4:
        raise ValueError("need at least 4 basis functions")
    interior = np.linspace(x_min, x_max, n_basis - 2)[1:-1]
    return np.concatenate([[x_min] * 4, interior, [x_max] * 4])


def bspline_design(x: np.ndarray, knots: np.ndarray, deriv: int = 0,
                   degree: int = 3) -> np.ndarray:
    """Cox-de Boor design matrix (len(x), n_basis) with 0/0 read as 0."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n_basis = knots.size - degree - 1
    # Degree-0 indicators; the last span is closed so B(x_max) is defined.
    B = np.zeros((x.size, knots.size - 1))
    for j in range(knots.size - 1):
        B[:, j] = (knots[j] <= x) & (x < knots[j + 1])
    last = np.flatnonzero(knots < knots[-1])[-1]
    B[x == knots[-1], last] = 1.0
    for k in range(1, degree + 1):
        nb = knots.size - k - 1
        newB = np.zeros((x.size, nb))
        for j in range(nb):
            d1 = knots[j + k] - knots[j]
            d2 = knots[j + k + 1] - knots[j + 1]
            if k == degree and deriv == 1:
                left = (k / d1) * B[:, j] if d1 > 0 else 0.0
                right = (k / d2) * B[:, j + 1] if d2 > 0 else 0.0
                newB[:, j] = left - right
            else:
                left = ((x - knots[j]) / d1) * B[:, j] if d1 > 0 else 0.0
                right = ((knots[j + k + 1] - x) / d2) * B[:, j + 1] \
                    if d2 > 0 else 0.0
                newB[:, j] = left + right
        B = newB
    return B[:, :n_basis]


@dataclass(frozen=True)
class BoundaryEstimate:
    knots: np.ndarray
    beta: np.ndarray
    band: dict = field(default_factory=dict)   # level -> (x_eval, radii)
    band_flags: np.ndarray | None = None

    def gamma_hat(self, x) -> np.ndarray:
        B = bspline_design(np.atleast_1d(x), self.knots)
        out = B @ self.beta
        return out if np.ndim(x) else float(out[0])

    def __call__(self, x):
        return self.gamma_hat(x)


def fit_spline(density: DensityField, n_basis: int = 26,
               lam: float = 0.1) -> BoundaryEstimate:
    """Weighted regularized least-squares cubic B-spline fit of the ridge."""
    p = density.values
    if p.sum() <= 0:
        raise ValueError("density has no mass")
    x = density.x_eval
    t = density.t_eval
    knots = uniform_clamped_knots(x[0], x[-1], n_basis)
    B = bspline_design(x, knots)
    Bp = bspline_design(x, knots, deriv=1)
    w = p.sum(axis=1)                    # per-column total mass
    s = p @ t                            # per-column mass-weighted time sum
    A = B.T @ (w[:, None] * B) + lam * t.size * (Bp.T @ Bp)
    rhs = B.T @ s
    try:
        beta = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError:
        beta = None
    if beta is None or not np.all(np.isfinite(beta)):
        raise ValueError(
            "singular spline system: density mass spans too few columns; "
            "reduce the basis size or increase the regularization"
        )
    return BoundaryEstimate(knots, beta)


def confidence_band(density: DensityField, gamma_hat,
                    levels=(0.8,)) -> tuple[dict, np.ndarray]:
    """Per-column confidence radii around gamma_hat for each level."""
    t = density.t_eval
    dt_eval = t[1] - t[0]
    half_width = (t[-1] - t[0]) / 2
    gh = np.asarray(gamma_hat(density.x_eval), dtype=float)
    flags = np.zeros(density.x_eval.size, dtype=bool)
    bands = {level: np.empty(density.x_eval.size) for level in levels}
    for j in range(density.x_eval.size):
        col = density.values[j]
        mass = col.sum()
        if mass <= 0:
            flags[j] = True
            for level in levels:
                bands[level][j] = half_width
            continue
        col = col / mass
        dist = np.abs(t - gh[j])
        order = np.argsort(dist, kind="stable")
        cum = np.cumsum(col[order])
        for level in levels:
            hit = np.flatnonzero(cum > level)
            if hit.size:
                radius = dist[order[hit[0]]] + dt_eval
            else:
                radius = half_width
            bands[level][j] = radius
    band = {level: (density.x_eval.copy(), bands[level]) for level in levels}
    return band, flags


def boundary_error(gamma_hat, gamma_true, x_min: float, x_max: float,
                   w: float) -> float:
    """Mean |gamma_hat - gamma| over the 81-point trimmed spatial grid."""
    xs = np.linspace(x_min + 2 * w, x_max - 2 * w, 81)
    gh = np.asarray(gamma_hat(xs), dtype=float)
    gt = np.asarray(gamma_true(xs), dtype=float)
    return float(np.mean(np.abs(gh - gt)))
