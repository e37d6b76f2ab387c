"""The 15-term feature dictionary and regional feature systems.

Features are monomials of u, u_x, u_xx, u_xxx of multiplicative degree at
most 2, plus the constant term: 1 constant + 4 linear + 10 quadratic = 15.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .numdiff import DerivativeStack

# Each term is a tuple of indices into (u, u_x, u_xx, u_xxx); () is the
# constant feature.  Order is fixed and appears verbatim in reports.
TERMS: tuple[tuple[int, ...], ...] = (
    (), (0,), (1,), (2,), (3,),
    (0, 0), (0, 1), (0, 2), (0, 3),
    (1, 1), (1, 2), (1, 3),
    (2, 2), (2, 3), (3, 3),
)

_BASE_NAMES = ("u", "u_x", "u_xx", "u_xxx")


def _term_name(term: tuple[int, ...]) -> str:
    if not term:
        return "1"
    if len(term) == 1:
        return _BASE_NAMES[term[0]]
    a, b = term
    if a == b:
        return f"{_BASE_NAMES[a]}^2"
    return f"{_BASE_NAMES[a]}*{_BASE_NAMES[b]}"


FEATURE_NAMES: tuple[str, ...] = tuple(_term_name(t) for t in TERMS)
N_FEATURES = len(TERMS)

Region = Union[np.ndarray, Callable[[np.ndarray, np.ndarray], np.ndarray]]


class EmptyRegionError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureSystem:
    """Rows of feature values and time-derivative responses for a region."""

    matrix: np.ndarray        # (n_rows, 15)
    response: np.ndarray      # (n_rows,)
    point_index: np.ndarray   # (n_rows, 2) grid indices (j, n)

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def time_index(self) -> np.ndarray:
        return self.point_index[:, 1]


def region_mask(stack: DerivativeStack, region: Region) -> np.ndarray:
    """Rasterize a region (mask or predicate over (x, t)) onto the grid."""
    if isinstance(region, np.ndarray):
        if region.shape != stack.valid_mask.shape:
            raise ValueError("region mask shape does not match the grid")
        return region.astype(bool)
    g = stack.grid
    xx, tt = np.meshgrid(g.x, g.t, indexing="ij")
    return np.asarray(region(xx, tt), dtype=bool)


def feature_planes(stack: DerivativeStack) -> np.ndarray:
    """All 15 feature fields stacked into one (nx, nt, 15) array."""
    derivs = stack.derivs
    planes = np.empty(stack.grid.values.shape + (N_FEATURES,), order="F")
    for k, term in enumerate(TERMS):
        if not term:
            planes[:, :, k] = 1.0
        elif len(term) == 1:
            planes[:, :, k] = derivs[term[0]]
        else:
            planes[:, :, k] = derivs[term[0]] * derivs[term[1]]
    return planes


def assemble(stack: DerivativeStack, region: Region) -> FeatureSystem:
    """One row per valid in-region grid point, sorted by (time, space)."""
    mask = region_mask(stack, region) & stack.valid_mask
    if not mask.any():
        raise EmptyRegionError("region contains no valid grid points")
    jj, nn = np.nonzero(mask)
    order = np.lexsort((jj, nn))
    jj, nn = jj[order], nn[order]
    matrix = np.empty((jj.size, N_FEATURES))
    derivs = stack.derivs
    for k, term in enumerate(TERMS):
        if not term:
            matrix[:, k] = 1.0
        elif len(term) == 1:
            matrix[:, k] = derivs[term[0]][jj, nn]
        else:
            matrix[:, k] = derivs[term[0]][jj, nn] * derivs[term[1]][jj, nn]
    response = stack.dt[jj, nn]
    return FeatureSystem(matrix, response, np.column_stack([jj, nn]))


def column_norms(system: FeatureSystem) -> np.ndarray:
    """Euclidean norm of each feature column."""
    if system.n_rows == 0:
        raise ValueError("empty feature system")
    return np.linalg.norm(system.matrix, axis=0)
