"""Evaluation quantities: support similarity, CEE summaries, peak
discrepancy, and a local Sobolev-type norm of the data."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .changepoint import ChangePointPMF
from .cover import CoverBand
from .numdiff import DerivativeStack


@dataclass
class EvalReport:
    """Collected metrics for one pipeline run."""
    scenario: str
    seed: int
    noise_percent: float
    config_hash: str = ""
    grid_hash: str = ""
    two_phase: bool | None = None
    r_beta: float | None = None
    jsc_values: dict = field(default_factory=dict)        # region -> JSC
    supports: dict = field(default_factory=dict)          # region -> tuple
    coefficients: dict = field(default_factory=dict)      # region -> dict
    coefficient_errors: dict = field(default_factory=dict)
    boundary_error: float | None = None
    coverage: float | None = None
    epsilon_table: list = field(default_factory=list)     # (x, eps) rows
    sobolev_table: list = field(default_factory=list)     # (x, n_s) rows


def jsc(s_hat, s_true) -> float:
    """Jaccard similarity of two index sets; both empty reads as 1."""
    a, b = set(s_hat), set(s_true)
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def patchwise_jsc(s_patch, s_omega1, s_omega2) -> float:
    """Best Jaccard similarity against either regional ground truth."""
    return max(jsc(s_patch, s_omega1), jsc(s_patch, s_omega2))


def average_cee(cee_value: float, n_points: int) -> float:
    if n_points <= 0:
        raise ValueError("n_points must be positive")
    return cee_value / n_points


def peak_discrepancy(p_left: ChangePointPMF, p_right: ChangePointPMF,
                     m0: int, m_x: int) -> float:
    """Normalized distance between the two PMF modes."""
    if p_left.support[0] != p_right.support[0] \
            or p_left.support.size != p_right.support.size:
        raise ValueError("PMFs must share a common support")
    span = m_x - 2 * m0 + 1
    return abs(int(p_left.mode_index) - int(p_right.mode_index)) / span


def sobolev_norm(stack: DerivativeStack, x: float, band: CoverBand) -> float:
    """Mean squared-gradient energy in the strip around x inside the band.

    The strip is [x - dx, x + dx] crossed with the open band at x; spatial
    derivatives come from the 5-point ENO field, temporal from the forward
    difference, both already held in the stack.
    """
    grid = stack.grid
    cols = np.flatnonzero(np.abs(grid.x - x) <= grid.dx * (1 + 1e-9))
    lo = float(np.interp(x, grid.x, band.gamma_lo))
    hi = float(np.interp(x, grid.x, band.gamma_hi))
    rows = np.flatnonzero((grid.t > lo) & (grid.t < hi))
    if cols.size == 0 or rows.size == 0:
        raise ValueError("empty strip at x = %g" % x)
    sub = np.ix_(cols, rows)
    dxu = stack.d1[sub]
    dtu = stack.dt[sub]
    valid = np.isfinite(dxu) & np.isfinite(dtu)
    if not np.any(valid):
        raise ValueError("strip at x = %g has no valid derivative points" % x)
    return float(np.mean(dxu[valid] ** 2 + dtu[valid] ** 2))


def coefficient_errors(model, truth) -> dict:
    """Relative coefficient error per true feature (truth as denominator)."""
    est = dict(zip(model.support, model.coefficients))
    out = {}
    for k, c in zip(truth.support, truth.coefficients):
        out[int(k)] = abs(est.get(k, 0.0) - c) / abs(c)
    return out
