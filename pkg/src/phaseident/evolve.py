"""Single-step (and multi-step) numerical evolution errors inside the band.

The identified right-hand sides are discretized with the same 5-point ENO
derivative formulas used for feature construction, evaluated on local
windows with periodic wraparound in space.  One forward-Euler step from a
mildly smoothed base value is compared with the observed next-time sample;
the resulting error sequences jump when the trajectory crosses the phase
boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cover import CoverBand
from .dataset import Grid2D
from .features import TERMS
from .ident import SparseModel
from .numdiff import _WEIGHTS, eno5_derivative_field

# Base-value smoothing weights, applied to the central five window samples.
_UHAT_WEIGHTS = np.array([1.0, 2.0, 4.0, 2.0, 1.0]) / 10.0


def _max_order(model: SparseModel) -> int:
    order = 0
    for k in model.support:
        for d in TERMS[k]:
            order = max(order, d)
    return order


@dataclass(frozen=True)
class DiscreteRHS:
    """Evaluator for sum_k c_k f_k on a (2h+1)-point window."""

    model: SparseModel
    h: int

    def _combine(self, derivs: dict[int, np.ndarray]) -> np.ndarray:
        out = np.zeros_like(derivs[0])
        dense = self.model.dense()
        for k, term in enumerate(TERMS):
            c = dense[k]
            if c == 0.0:
                continue
            if not term:
                out += c
            elif len(term) == 1:
                out += c * derivs[term[0]]
            else:
                out += c * derivs[term[0]] * derivs[term[1]]
        return out

    def evaluate(self, window: np.ndarray, dx: float) -> float:
        """RHS value at the window center."""
        window = np.asarray(window, dtype=float)
        if window.shape[0] != 2 * self.h + 1:
            raise ValueError(f"window must have {2 * self.h + 1} samples")
        out = self.evaluate_columns(window.reshape(2 * self.h + 1, -1), dx)
        return float(out[0]) if window.ndim == 1 else out

    def evaluate_columns(self, windows: np.ndarray, dx: float) -> np.ndarray:
        """Vectorized RHS over windows stacked as (2h+1, m) columns."""
        h = self.h
        c = h  # center row
        derivs: dict[int, np.ndarray] = {0: windows[c]}
        order = _max_order(self.model)
        if order >= 1 and h == 1:
            derivs[1] = (windows[2] - windows[0]) / (2 * dx)
        elif order >= 1 and h == 2:
            # Single 5-point stencil: exact quartic derivative weights.
            for p in range(1, order + 1):
                derivs[p] = (_WEIGHTS[p][2] @ windows) / dx ** p
        elif order >= 1:
            for p in range(1, order + 1):
                derivs[p] = eno5_derivative_field(windows, dx, p)[c]
        return self._combine(derivs)

    def evaluate_rows(self, rows: np.ndarray, dx: float) -> np.ndarray:
        """Vectorized RHS at every spatial point of periodic rows (nx, m)."""
        order = _max_order(self.model)
        derivs: dict[int, np.ndarray] = {0: rows}
        if order >= 1:
            ext = np.concatenate([rows[-4:], rows, rows[:4]], axis=0)
            for p in range(1, order + 1):
                derivs[p] = eno5_derivative_field(ext, dx, p)[4:-4]
        return self._combine(derivs)


def discretize(model: SparseModel) -> DiscreteRHS:
    """Stencil half-width is the smallest accommodating the highest active
    derivative order: 0 -> 0, u_x -> 1, u_xx -> 2, u_xxx -> 3."""
    return DiscreteRHS(model, _max_order(model))


@dataclass(frozen=True)
class ErrorSequencePair:
    x: float
    times: np.ndarray
    e_left: np.ndarray
    e_right: np.ndarray


def _uhat_rows(rows: np.ndarray, exact_center: bool) -> np.ndarray:
    """Smoothed base value at every spatial point (periodic in space)."""
    if exact_center:
        return rows.copy()
    out = np.zeros_like(rows)
    for k, w in enumerate(_UHAT_WEIGHTS):
        out += w * np.roll(rows, 2 - k, axis=0)
    return out


def _band_indices(grid: Grid2D, band: CoverBand, x: float) -> tuple[int, int, int]:
    jx = int(round((x - grid.x_min) / grid.dx))
    if not 0 <= jx < grid.nx or abs(grid.x_min + jx * grid.dx - x) > grid.dx / 2:
        raise ValueError(f"x={x} is not on the spatial grid")
    n_lo = int(round(band.gamma_lo[jx] / grid.dt))
    n_hi = int(round(band.gamma_hi[jx] / grid.dt))
    if n_hi - n_lo < 2:
        raise ValueError("band column too short for evolution")
    return jx, n_lo, n_hi


def multi_step_errors(grid: Grid2D, band: CoverBand, rhs_left: DiscreteRHS,
                      rhs_right: DiscreteRHS, x: float, steps: int = 1,
                      exact_center: bool = False) -> ErrorSequencePair:
    """Evolve `steps` forward-Euler sub-steps from the smoothed base state and
    compare with the observation `steps` levels later."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    jx, n_lo, n_hi = _band_indices(grid, band, x)
    m_max = min(n_hi, grid.nt - 1 - steps) - n_lo
    if m_max < 1:
        raise ValueError("band too short for the requested step count")
    dt, dx = grid.dt, grid.dx
    errors = {}
    for tag, rhs in (("l", rhs_left), ("r", rhs_right)):
        errs = np.empty(m_max + 1)
        for m in range(m_max + 1):
            n = n_lo + m
            raw = grid.values[:, n].copy()
            state = _uhat_rows(raw[:, None], exact_center)[:, 0]
            state = state + dt * rhs.evaluate_rows(raw[:, None], dx)[:, 0]
            for _ in range(steps - 1):
                state = state + dt * rhs.evaluate_rows(state[:, None], dx)[:, 0]
            errs[m] = abs(state[jx] - grid.values[jx, n + steps])
        errors[tag] = errs
    times = n_lo * dt + dt * np.arange(m_max + 1)
    return ErrorSequencePair(grid.x_min + jx * dx, times,
                             errors["l"], errors["r"])


def evolution_errors(grid: Grid2D, band: CoverBand, rhs_left: DiscreteRHS,
                     rhs_right: DiscreteRHS, x: float,
                     exact_center: bool = False) -> ErrorSequencePair:
    """Single-step evolution error pair along the vertical line at x."""
    return multi_step_errors(grid, band, rhs_left, rhs_right, x, steps=1,
                             exact_center=exact_center)


def error_fields(grid: Grid2D, rhs: DiscreteRHS, n_lo: int, n_hi: int,
                 exact_center: bool = False) -> np.ndarray:
    """Single-step error at every spatial point for time levels n_lo..n_hi.

    Column m corresponds to level n_lo + m; equivalent to the per-x routine
    but amortized across all columns sharing a time range.
    """
    n_hi = min(n_hi, grid.nt - 2)
    raw = grid.values[:, n_lo:n_hi + 1]
    base = _uhat_rows(raw, exact_center)
    pred = base + grid.dt * rhs.evaluate_rows(raw, grid.dx)
    return np.abs(pred - grid.values[:, n_lo + 1:n_hi + 2])


def verify_truncation_order(jump: float = 1.0, x: float = 0.7,
                            kappa: float = 0.5, dx: float = 2e-3,
                            dts=(4e-4, 2e-4, 1e-4, 5e-5)) -> dict[str, float]:
    """Refinement-ladder slopes of the single-step error.

    Manufactured field: u = sin(x) e^{-t} before the boundary at t = g (so
    u_t = -u, a dictionary model), continued after g with the time slope
    multiplied by (1 + jump).  The smooth-step error should scale like
    dt^2, the crossing-step error like dt when the slope jumps.
    """
    g = 0.01
    q = 1.0 + jump
    rhs = discretize(SparseModel((1,), np.array([-1.0])))

    def u(xv, t):
        if t <= g:
            return np.sin(xv) * np.exp(-t)
        return np.sin(xv) * np.exp(-g) * np.exp(-q * (t - g))

    offsets = dx * np.arange(-rhs.h, rhs.h + 1) if rhs.h else np.zeros(1)
    xs = x + offsets
    e_smooth, e_cross = [], []
    for dt in dts:
        tau = g - 10 * dt          # both tau and tau+dt below the boundary
        window = u(xs, tau)
        pred = u(x, tau) + dt * rhs.evaluate(window, dx)
        e_smooth.append(abs(pred - u(x, tau + dt)))
        tau_c = g - kappa * dt     # boundary crossed inside this step
        window = u(xs, tau_c)
        pred = u(x, tau_c) + dt * rhs.evaluate(window, dx)
        e_cross.append(abs(pred - u(x, tau_c + dt)))
    log_dt = np.log(np.asarray(dts))
    smooth_slope = float(np.polyfit(log_dt, np.log(e_smooth), 1)[0])
    if min(e_cross) <= 0:
        crossing_slope = smooth_slope
    else:
        crossing_slope = float(np.polyfit(log_dt, np.log(e_cross), 1)[0])
    return {"smooth_slope": smooth_slope, "crossing_slope": crossing_slope}
