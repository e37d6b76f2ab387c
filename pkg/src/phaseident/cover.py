"""Patch covering of the space-time domain, phase-transition detection, and
construction of the boundary band.

The domain is covered by N_P x N_P half-overlapping rectangles.  Each patch
gets a locally identified PDE and its CEE.  Concentration of high-CEE
patches along a time level (measured by r_beta) signals a phase boundary;
the top-CEE patches are then grown into a connected cover C whose
convexification yields the band gamma_l(x) < t < gamma_r(x).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import ndimage

from .dataset import Grid2D
from .features import EmptyRegionError, N_FEATURES, assemble
from .ident import CEEReport, identify
from .numdiff import DerivativeStack

_FOUR_CONN = ndimage.generate_binary_structure(2, 1)


@dataclass(frozen=True)
class Patch:
    i: int                   # spatial patch index, 1..n_p
    j: int                   # temporal patch index, 1..n_p
    x_lo: float
    x_hi: float
    t_lo: float
    t_hi: float
    cee: Optional[float] = None
    n_points: int = 0
    report: Optional[CEEReport] = field(default=None, repr=False)

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x_lo + self.x_hi), 0.5 * (self.t_lo + self.t_hi))


@dataclass(frozen=True)
class PatchCover:
    grid: Grid2D
    n_p: int
    patches: tuple[Patch, ...]    # row-major over (i, j)

    @property
    def half_width(self) -> float:
        return (self.grid.x_max - self.grid.x_min) / (self.n_p + 1)

    @property
    def half_height(self) -> float:
        return self.grid.t_max / (self.n_p + 1)

    def interior_spatial(self) -> list[Patch]:
        """Pi*: patches that do not touch the spatial boundary."""
        return [p for p in self.patches if p.i not in (1, self.n_p)]

    def interior_temporal(self) -> list[Patch]:
        """Psi: patches that do not touch the temporal boundary."""
        return [p for p in self.patches if p.j not in (1, self.n_p)]


@dataclass(frozen=True)
class CoverBand:
    gamma_lo: np.ndarray      # (nx,) lower band time per spatial column
    gamma_hi: np.ndarray      # (nx,) upper band time per spatial column
    mask: np.ndarray          # (nx, nt) strict membership

    def __post_init__(self):
        if np.any(self.gamma_lo >= self.gamma_hi):
            raise ValueError("band must have gamma_lo < gamma_hi everywhere")


def build_cover(grid: Grid2D, n_p: int) -> PatchCover:
    """N_P^2 half-overlapping patches; errors if patches are data-starved."""
    if n_p < 1:
        raise ValueError("n_p must be positive")
    w = (grid.x_max - grid.x_min) / (n_p + 1)
    h = grid.t_max / (n_p + 1)
    pts = (2 * w / grid.dx + 1) * (2 * h / grid.dt + 1)
    if pts <= 2 * N_FEATURES:
        # Largest n_p with (2w/dx+1)(2h/dt+1) > 2K, found by scan.
        feasible = 1
        for cand in range(1, max(grid.nx, grid.nt)):
            ww = (grid.x_max - grid.x_min) / (cand + 1)
            hh = grid.t_max / (cand + 1)
            if (2 * ww / grid.dx + 1) * (2 * hh / grid.dt + 1) > 2 * N_FEATURES:
                feasible = cand
        raise ValueError(
            f"patches too small to identify {N_FEATURES} features; "
            f"use n_p <= {feasible}"
        )
    patches = []
    for i in range(1, n_p + 1):
        for j in range(1, n_p + 1):
            patches.append(Patch(
                i, j,
                grid.x_min + (i - 1) * w, grid.x_min + (i + 1) * w,
                (j - 1) * h, (j + 1) * h,
            ))
    return PatchCover(grid, n_p, tuple(patches))


def patch_index_ranges(cover: PatchCover, patch: Patch) -> tuple[slice, slice]:
    """Grid index slices covered by a patch rectangle."""
    g = cover.grid
    j_lo = int(np.ceil((patch.x_lo - g.x_min) / g.dx - 1e-9))
    j_hi = int(np.floor((patch.x_hi - g.x_min) / g.dx + 1e-9))
    n_lo = int(np.ceil(patch.t_lo / g.dt - 1e-9))
    n_hi = int(np.floor(patch.t_hi / g.dt + 1e-9))
    return (slice(max(j_lo, 0), min(j_hi, g.nx - 1) + 1),
            slice(max(n_lo, 0), min(n_hi, g.nt - 1) + 1))


def score_patches(cover: PatchCover, stack: DerivativeStack,
                  k_max: int = 8, trim_threshold: float = 0.05) -> PatchCover:
    """Identify a PDE on every patch and record its CEE.

    Patches with too few valid points get CEE = +inf rather than failing.
    """
    scored = []
    for patch in cover.patches:
        sx, st = patch_index_ranges(cover, patch)
        mask = np.zeros(stack.valid_mask.shape, dtype=bool)
        mask[sx, st] = True
        mask &= stack.valid_mask
        n_points = int(mask.sum())
        if n_points <= 2 * k_max + 2:
            scored.append(replace(patch, cee=np.inf, n_points=n_points))
            continue
        try:
            system = assemble(stack, mask)
            _, report = identify(system, k_max, trim_threshold)
            scored.append(replace(patch, cee=report.value,
                                  n_points=n_points, report=report))
        except (EmptyRegionError, ValueError):
            scored.append(replace(patch, cee=np.inf, n_points=n_points))
    return PatchCover(cover.grid, cover.n_p, tuple(scored))


def _top_percent(patches: list[Patch], percent: float) -> list[Patch]:
    cees = np.array([p.cee for p in patches])
    threshold = np.percentile(cees, 100 - percent)
    return [p for p in patches if p.cee >= threshold]


def r_beta(cover: PatchCover, beta: float = 10.0) -> float:
    """Spatial-to-temporal variance ratio of top-beta% CEE patch centers."""
    if not 0 < beta <= 100:
        raise ValueError("beta must be in (0, 100]")
    pool = cover.interior_spatial()
    if any(p.cee is None for p in pool):
        raise ValueError("patches are not scored")
    selected = _top_percent(pool, beta)
    if len(selected) < 2:
        raise ValueError("fewer than 2 patches selected")
    xs = np.array([p.center[0] for p in selected])
    ts = np.array([p.center[1] for p in selected])
    var_x = float(np.var(xs, ddof=1))
    var_t = float(np.var(ts, ddof=1))
    g = cover.grid
    if var_t == 0:
        return np.inf
    return var_x * g.dt ** 2 / (var_t * g.dx ** 2)


def detect_phase(cover: PatchCover, beta: float = 10.0,
                 threshold: float = 5.0) -> bool:
    return r_beta(cover, beta) >= threshold


def rasterize_patches(cover: PatchCover, patches) -> np.ndarray:
    mask = np.zeros((cover.grid.nx, cover.grid.nt), dtype=bool)
    for p in patches:
        sx, st = patch_index_ranges(cover, p)
        mask[sx, st] = True
    return mask


def _largest_component(mask: np.ndarray) -> np.ndarray:
    labels, n = ndimage.label(mask, structure=_FOUR_CONN)
    if n == 0:
        return mask
    sizes = ndimage.sum_labels(mask, labels, index=np.arange(1, n + 1))
    best = np.flatnonzero(sizes == sizes.max()) + 1
    if len(best) > 1:
        # Prefer the component whose centroid time is closest to T/2.
        centers = ndimage.center_of_mass(mask, labels, index=best)
        mid = (mask.shape[1] - 1) / 2
        best = [best[int(np.argmin([abs(c[1] - mid) for c in centers]))]]
    return labels == best[0]


def _splits_time_domain(mask: np.ndarray) -> bool:
    """True when the complement of ``mask`` has exactly two connected
    components, one holding the whole t = 0 edge and the other the whole
    t = T edge.  A region touching two adjacent domain edges also has a
    two-component complement but only cuts off a corner, which cannot
    separate an early phase from a late one."""
    labels, n = ndimage.label(~mask, structure=_FOUR_CONN)
    if n != 2:
        return False
    first, last = labels[:, 0], labels[:, -1]
    return (first.min() == first.max() and last.min() == last.max()
            and first[0] != last[0])


def build_initial_cover(cover: PatchCover, noisy: bool) -> np.ndarray:
    """Adaptive alpha*: the smallest top-alpha% cover whose complement has
    exactly two connected components.  Returns the rasterized region C."""
    pool = cover.interior_temporal()
    if any(p.cee is None for p in pool):
        raise ValueError("patches are not scored")
    start = 10 if noisy else 0
    for alpha in range(start, 101):
        selected = _top_percent(pool, alpha) if alpha > 0 else []
        if not selected:
            continue
        comp = _largest_component(rasterize_patches(cover, selected))
        if _splits_time_domain(comp):
            return comp
    raise AssertionError("no alpha produced a two-component complement")


def convexify(region: np.ndarray, grid: Grid2D,
              min_band: Optional[int] = None) -> CoverBand:
    """Two-pass hull fill (time then space) and band extraction.

    Columns that remain empty inherit the band of the nearest non-empty
    column; every band is widened to at least ``min_band`` time steps and
    clamped inside (0, T - dt) so a one-step evolution stays on the grid.
    """
    if not region.any():
        raise ValueError("empty initial cover")
    nx, nt = region.shape
    filled = np.zeros_like(region)
    # Pass 1: per-column convex hull of time indices.
    for j in range(nx):
        idx = np.flatnonzero(region[j])
        if idx.size:
            filled[j, idx[0]:idx[-1] + 1] = True
    # Pass 2: per-row convex hull of spatial indices.
    for n in range(nt):
        idx = np.flatnonzero(filled[:, n])
        if idx.size:
            filled[idx[0]:idx[-1] + 1, n] = True
    lo = np.full(nx, -1)
    hi = np.full(nx, -1)
    nonempty = []
    for j in range(nx):
        idx = np.flatnonzero(filled[j])
        if idx.size:
            lo[j], hi[j] = idx[0], idx[-1]
            nonempty.append(j)
    nonempty = np.array(nonempty)
    for j in range(nx):
        if lo[j] < 0:
            src = nonempty[np.argmin(np.abs(nonempty - j))]
            lo[j], hi[j] = lo[src], hi[src]
    # Open band (gamma_lo, gamma_hi) must contain the filled set.
    lo -= 1
    hi += 1
    if min_band is None:
        min_band = 2
    for j in range(nx):
        short = min_band - (hi[j] - lo[j])
        if short > 0:
            lo[j] -= short // 2
            hi[j] += short - short // 2
        lo[j] = max(lo[j], 1)
        hi[j] = min(hi[j], nt - 2)
        if hi[j] - lo[j] < 2:
            lo[j] = max(1, hi[j] - 2)
    gamma_lo = grid.t[lo]
    gamma_hi = grid.t[hi]
    tt = grid.t[np.newaxis, :]
    mask = (tt > gamma_lo[:, np.newaxis]) & (tt < gamma_hi[:, np.newaxis])
    return CoverBand(gamma_lo, gamma_hi, mask)
