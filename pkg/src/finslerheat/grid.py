"""Planar lattices with a weighted measure, and regions on them.

Field values live on lattice nodes ``(i, j)`` at position ``(i hx, j hy)``.
On a torus every node carries the mass ``exp(psi) hx hy``; on a box the
domain is ``[0, (nx-1) hx] x [0, (ny-1) hy]`` and boundary nodes carry the
lumped trapezoid share of that mass (one half on edges, one quarter at
corners), which keeps the discrete integration by parts exact.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

TOPOLOGIES = ("torus", "box")


@dataclass(frozen=True, eq=False)
class Grid:
    nx: int
    ny: int
    hx: float
    hy: float
    topology: str = "torus"
    psi: np.ndarray | None = None
    rho: np.ndarray = field(init=False, repr=False)
    mass: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.nx < 8 or self.ny < 8:
            raise ValueError("grids need at least 8 nodes per direction")
        if not (self.hx > 0 and self.hy > 0):
            raise ValueError("grid spacings must be positive")
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"topology must be one of {TOPOLOGIES}")
        psi = np.zeros((self.nx, self.ny)) if self.psi is None else np.asarray(self.psi, dtype=float)
        if psi.shape != (self.nx, self.ny):
            raise ValueError(f"psi has shape {psi.shape}, expected {(self.nx, self.ny)}")
        if not np.all(np.isfinite(psi)):
            raise ValueError("psi must be finite")
        psi = np.ascontiguousarray(psi)
        psi.setflags(write=False)
        rho = np.exp(psi)
        mass = rho * self.hx * self.hy
        if self.topology == "box":
            mass[0, :] *= 0.5
            mass[-1, :] *= 0.5
            mass[:, 0] *= 0.5
            mass[:, -1] *= 0.5
        rho.setflags(write=False)
        mass.setflags(write=False)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "mass", mass)

    @classmethod
    def torus(cls, nx: int, ny: int | None = None, lx: float = 1.0, ly: float | None = None, psi=None):
        """Torus of side lengths ``lx`` by ``ly`` with ``nx`` by ``ny`` nodes."""
        ny = nx if ny is None else ny
        ly = lx * ny / nx if ly is None else ly
        return cls(nx, ny, lx / nx, ly / ny, "torus", psi)

    @classmethod
    def box(cls, nx: int, ny: int | None = None, lx: float = 1.0, ly: float | None = None, psi=None):
        """Closed rectangle ``[0, lx] x [0, ly]`` with ``nx`` by ``ny`` nodes."""
        ny = nx if ny is None else ny
        ly = lx * (ny - 1) / (nx - 1) if ly is None else ly
        return cls(nx, ny, lx / (nx - 1), ly / (ny - 1), "box", psi)

    @property
    def periodic(self) -> bool:
        return self.topology == "torus"

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def lengths(self) -> tuple[float, float]:
        if self.periodic:
            return (self.nx * self.hx, self.ny * self.hy)
        return ((self.nx - 1) * self.hx, (self.ny - 1) * self.hy)

    @property
    def h(self) -> float:
        return max(self.hx, self.hy)

    @property
    def square_shape(self) -> tuple[int, int]:
        """Number of lattice squares per direction."""
        if self.periodic:
            return (self.nx, self.ny)
        return (self.nx - 1, self.ny - 1)

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.arange(self.nx) * self.hx
        y = np.arange(self.ny) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def displacement(self, x0: float, y0: float) -> tuple[np.ndarray, np.ndarray]:
        """Node positions minus ``(x0, y0)``, wrapped to the nearest image on
        a torus."""
        x, y = self.coords()
        dx = x - x0
        dy = y - y0
        if self.periodic:
            lx, ly = self.lengths
            dx = dx - lx * np.round(dx / lx)
            dy = dy - ly * np.round(dy / ly)
        return dx, dy

    def total_mass(self) -> float:
        return float(np.sum(self.mass))

    def with_psi(self, psi) -> "Grid":
        return Grid(self.nx, self.ny, self.hx, self.hy, self.topology, psi)

    def check_field(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != self.shape:
            raise ValueError(f"field has shape {u.shape}, expected {self.shape}")
        return u


@dataclass(frozen=True, eq=False)
class Region:
    """A set of lattice nodes."""

    mask: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    def indicator(self) -> np.ndarray:
        return self.mask.astype(float)

    def __len__(self) -> int:
        return int(self.mask.sum())


def measure(grid: Grid, region: Region) -> float:
    """``m(A)`` of a nonempty region."""
    if region.mask.shape != grid.shape:
        raise ValueError("region does not match the grid")
    if not region.mask.any():
        raise ValueError("region is empty")
    return float(np.sum(grid.mass[region.mask]))


def integrate(grid: Grid, f) -> float:
    """``int f dm``, summed pairwise so repeated runs agree bit for bit."""
    f = grid.check_field(f)
    return float(np.sum((f * grid.mass).ravel()))


def l2_norm_sq(grid: Grid, f) -> float:
    f = grid.check_field(f)
    return integrate(grid, f * f)


def disk_region(grid: Grid, center, radius: float) -> Region:
    """Nodes within Euclidean distance ``radius`` of ``center`` (nearest
    periodic image on a torus)."""
    if radius < 2.0 * grid.h:
        raise ValueError(f"radius {radius} is below two grid spacings ({2 * grid.h})")
    dx, dy = grid.displacement(*center)
    mask = dx * dx + dy * dy < radius * radius
    if not mask.any():
        raise ValueError("disk contains no lattice node")
    return Region(mask)


def rectangle_region(grid: Grid, lower, upper) -> Region:
    """Nodes with ``lower <= (x, y) <= upper`` componentwise."""
    x, y = grid.coords()
    mask = (x >= lower[0]) & (x <= upper[0]) & (y >= lower[1]) & (y <= upper[1])
    if not mask.any():
        raise ValueError("rectangle contains no lattice node")
    return Region(mask)


def point_region(grid: Grid, point) -> Region:
    """The single node nearest to ``point``."""
    dx, dy = grid.displacement(*point)
    k = np.argmin(dx * dx + dy * dy)
    mask = np.zeros(grid.shape, dtype=bool)
    mask.flat[k] = True
    return Region(mask)


def write_field_csv(grid: Grid, values, path) -> Path:
    """Dump a node field as CSV with header ``i,j,x,y,value``."""
    values = np.asarray(values)
    if values.dtype == bool:
        values = values.astype(int)
    grid.check_field(values)
    path = Path(path)
    x, y = grid.coords()
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "x", "y", "value"])
        for i in range(grid.nx):
            for j in range(grid.ny):
                w.writerow([i, j, repr(float(x[i, j])), repr(float(y[i, j])), repr(values[i, j].item())])
    return path
