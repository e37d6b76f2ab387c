"""Space-time observation container, noise injection, and file I/O.

A :class:`Grid2D` holds samples ``U[j, n]`` of a scalar field on a uniform
grid: ``j`` indexes space (``nx`` points on ``[x_min, x_max]``) and ``n``
indexes time (``nt`` points on ``[0, t_max]``).  The array is stored with
time as the trailing axis so a single time slice ``values[:, n]`` is
contiguous in the Fortran-ordered backing array used by the evolution code.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

_MAGIC = b"PIGRID01"


class GridFormatError(ValueError):
    """Raised when a grid file is malformed or contains invalid data."""


@dataclass(frozen=True)
class Grid2D:
    """Uniform space-time field.  Immutable after construction."""

    x_min: float
    x_max: float
    t_max: float
    nx: int
    nt: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.nx < 2 or self.nt < 2:
            raise ValueError("grid needs nx >= 2 and nt >= 2")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.nx, self.nt):
            raise ValueError(
                f"values shape {v.shape} does not match (nx, nt)="
                f"({self.nx}, {self.nt})"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("values contain non-finite entries")
        v = np.asfortranarray(v)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def dt(self) -> float:
        return self.t_max / (self.nt - 1)

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.nx)

    @property
    def t(self) -> np.ndarray:
        return self.dt * np.arange(self.nt)

    def with_values(self, values: np.ndarray) -> "Grid2D":
        return Grid2D(self.x_min, self.x_max, self.t_max, self.nx, self.nt, values)


@dataclass(frozen=True)
class NoiseSpec:
    level_percent: float
    seed: int = 0

    def __post_init__(self):
        if self.level_percent < 0:
            raise ValueError("noise level must be nonnegative")


def noise_sigma(grid: Grid2D, level_percent: float) -> float:
    """Standard deviation of the injected noise.

    sigma = (alpha/100) * RMS deviation of the samples from the midrange
    (max+min)/2 of the whole field.
    """
    u = grid.values
    mid = 0.5 * (u.max() + u.min())
    return (level_percent / 100.0) * float(np.sqrt(np.mean((u - mid) ** 2)))


def add_noise(grid: Grid2D, spec: NoiseSpec) -> Grid2D:
    """Add i.i.d. mean-zero Gaussian noise, deterministic under spec.seed."""
    if spec.level_percent == 0:
        return grid.with_values(grid.values.copy())
    sigma = noise_sigma(grid, spec.level_percent)
    if sigma == 0:
        return grid.with_values(grid.values.copy())
    rng = np.random.default_rng(spec.seed)
    noise = rng.normal(0.0, sigma, size=grid.values.shape)
    return grid.with_values(grid.values + noise)


def save_grid(grid: Grid2D, path) -> None:
    """Write a grid file.  ``.csv`` paths get the text format, anything
    else the binary layout (see module docs / README)."""
    path = str(path)
    if path.endswith(".csv"):
        header = f"{grid.x_min!r},{grid.x_max!r},{grid.t_max!r},{grid.nx},{grid.nt}"
        with open(path, "w") as f:
            f.write(header + "\n")
            for j in range(grid.nx):
                f.write(",".join(repr(v) for v in grid.values[j]) + "\n")
        return
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<dddqq", grid.x_min, grid.x_max, grid.t_max,
                            grid.nx, grid.nt))
        f.write(np.ascontiguousarray(grid.values, dtype="<f8").tobytes())


def load_grid(path) -> Grid2D:
    """Read a grid file written by :func:`save_grid`."""
    path = str(path)
    if path.endswith(".csv"):
        return _load_csv(path)
    with open(path, "rb") as f:
        magic = f.read(len(_MAGIC))
        if magic != _MAGIC:
            raise GridFormatError(f"{path}: bad magic {magic!r}")
        try:
            x_min, x_max, t_max, nx, nt = struct.unpack("<dddqq", f.read(40))
        except struct.error as e:
            raise GridFormatError(f"{path}: truncated header") from e
        raw = np.frombuffer(f.read(), dtype="<f8")
    if raw.size != nx * nt:
        raise GridFormatError(
            f"{path}: expected {nx * nt} values, found {raw.size}"
        )
    if not np.all(np.isfinite(raw)):
        raise GridFormatError(f"{path}: non-finite values")
    try:
        return Grid2D(x_min, x_max, t_max, int(nx), int(nt),
                      raw.reshape(nx, nt))
    except ValueError as e:
        raise GridFormatError(f"{path}: {e}") from e


def _load_csv(path: str) -> Grid2D:
    with open(path) as f:
        header = f.readline().strip().split(",")
        if len(header) != 5:
            raise GridFormatError(f"{path}: malformed header")
        try:
            x_min, x_max, t_max = (float(h) for h in header[:3])
            nx, nt = int(header[3]), int(header[4])
        except ValueError as e:
            raise GridFormatError(f"{path}: malformed header") from e
        rows = []
        for line in f:
            line = line.strip()
            if line:
                rows.append([float(v) for v in line.split(",")])
    values = np.array(rows, dtype=float)
    if values.shape != (nx, nt):
        raise GridFormatError(
            f"{path}: expected {nx}x{nt} values, found {values.shape}"
        )
    if not np.all(np.isfinite(values)):
        raise GridFormatError(f"{path}: non-finite values")
    return Grid2D(x_min, x_max, t_max, nx, nt, values)
