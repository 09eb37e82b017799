"""Discrete differential, divergence, gradient, Laplacian and energy.

Every lattice square is split along one of its diagonals into two right
triangles; a scalar field is piecewise linear on them, so its differential is
one covector per triangle.  Orientation ``False`` cuts the square along the
diagonal from ``(i+1, j)`` to ``(i, j+1)``; ``True`` uses the other diagonal.

The nonlinear operators pick, square by square, the diagonal with the smaller
Finsler energy (inner-product norms keep one fixed diagonal, see
:attr:`NormSpec.fixed_orientation`, so that their operator stays linear).  The
discrete energy is therefore

    E_h(u) = 1/2 sum_T w_T F*(du_T)^2

minimised over the two triangulations of each square, with ``w_T`` the
triangle area times the mean density at its vertices.  The divergence is the
negative adjoint of the differential with respect to those weights and the
node masses, and the Laplacian ``div(L*(du))`` is minus the mass-weighted
gradient of ``E_h``.  Both integration by parts and mass conservation hold to
round-off by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .grid import Grid
from .norms import NormSpec, eval_F, legendre_dual_to_primal

TRI = K.TRI


@dataclass(frozen=True, eq=False)
class TriangleField:
    """Two-component values on the active triangles.

    ``values`` has shape ``(sx, sy, 2, 2)``: square index, triangle slot,
    component.  ``flip`` has shape ``(sx, sy)`` and records the diagonal.
    """

    values: np.ndarray
    flip: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.flip.shape + (2, 2):
            raise ValueError("values and orientation shapes disagree")

    def __add__(self, other):
        self._same_mesh(other)
        return type(self)(self.values + other.values, self.flip)

    def __sub__(self, other):
        self._same_mesh(other)
        return type(self)(self.values - other.values, self.flip)

    def __mul__(self, c: float):
        return type(self)(self.values * c, self.flip)

    __rmul__ = __mul__

    def __neg__(self):
        return type(self)(-self.values, self.flip)

    def _same_mesh(self, other):
        if not np.array_equal(self.flip, other.flip):
            raise ValueError("fields live on different triangulations")


class CovectorField(TriangleField):
    """Per-triangle covectors, e.g. ``du``."""


class VectorField(TriangleField):
    """Per-triangle vectors, e.g. ``grad u``."""


def default_orientation(grid: Grid) -> np.ndarray:
    return np.zeros(grid.square_shape, dtype=bool)


def corner_values(grid: Grid, u: np.ndarray) -> np.ndarray:
    """Array ``(4, sx, sy)`` of the values of ``u`` at the square corners
    ``(i,j), (i+1,j), (i,j+1), (i+1,j+1)``."""
    if grid.periodic:
        u10 = np.roll(u, -1, axis=0)
        return np.stack([u, u10, np.roll(u, -1, axis=1), np.roll(u10, -1, axis=1)])
    return np.stack([u[:-1, :-1], u[1:, :-1], u[:-1, 1:], u[1:, 1:]])


def gather_corners(grid: Grid, c: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`corner_values`: sum corner contributions to nodes."""
    if grid.periodic:
        out = c[0] + np.roll(c[1], 1, axis=0) + np.roll(c[2], 1, axis=1)
        return out + np.roll(np.roll(c[3], 1, axis=0), 1, axis=1)
    out = np.zeros(grid.shape)
    out[:-1, :-1] += c[0]
    out[1:, :-1] += c[1]
    out[:-1, 1:] += c[2]
    out[1:, 1:] += c[3]
    return out


def _rows(flip: np.ndarray) -> np.ndarray:
    """Triangle table rows ``(sx, sy, 2, 7)`` for the given orientations."""
    o = flip.astype(np.int64)
    return np.stack([TRI[2 * o], TRI[2 * o + 1]], axis=2)


def triangle_weights(grid: Grid, flip: np.ndarray) -> np.ndarray:
    """``w_T``: triangle area times mean vertex density, shape ``(sx, sy, 2)``."""
    rho = corner_values(grid, grid.rho)  # (4, sx, sy)
    rows = _rows(flip)
    total = np.zeros(flip.shape + (2,))
    for col in (4, 5, 6):
        total += np.take_along_axis(np.moveaxis(rho, 0, -1)[:, :, None, :], rows[..., col : col + 1], axis=-1)[..., 0]
    return total * (grid.hx * grid.hy / 6.0)


def differential(grid: Grid, u, flip: np.ndarray | None = None) -> CovectorField:
    """``du`` on the triangulation ``flip`` (default: first diagonal
    everywhere).  Linear in ``u`` and exact for affine ``u``."""
    u = grid.check_field(u)
    flip = default_orientation(grid) if flip is None else np.asarray(flip, dtype=bool)
    c = np.moveaxis(corner_values(grid, u), 0, -1)[:, :, None, :]  # (sx, sy, 1, 4)
    rows = _rows(flip)

    def pick(col):
        return np.take_along_axis(c, rows[..., col : col + 1], axis=-1)[..., 0]

    ax = (pick(0) - pick(1)) / grid.hx
    ay = (pick(2) - pick(3)) / grid.hy
    return CovectorField(np.stack([ax, ay], axis=-1), flip)


def pairing(grid: Grid, alpha: CovectorField, v: VectorField) -> float:
    """``int alpha(V) dm`` with the triangle weights."""
    alpha._same_mesh(v)
    w = triangle_weights(grid, v.flip)
    return float(np.sum((w * np.sum(alpha.values * v.values, axis=-1)).ravel()))


def divergence(grid: Grid, v: VectorField) -> np.ndarray:
    """m-weighted divergence, defined by
    ``int phi div V dm = -int dphi(V) dm`` for every node field ``phi``."""
    w = triangle_weights(grid, v.flip)
    fx = w * v.values[..., 0] / grid.hx
    fy = w * v.values[..., 1] / grid.hy
    rows = _rows(v.flip)
    corners = np.zeros((4,) + v.flip.shape)
    for slot in range(2):
        r = rows[:, :, slot, :]
        for col, sign, flux in ((0, 1.0, fx), (1, -1.0, fx), (2, 1.0, fy), (3, -1.0, fy)):
            for c in range(4):
                corners[c] += np.where(r[..., col] == c, sign * flux[..., slot], 0.0)
    return -gather_corners(grid, corners) / grid.mass


def select_orientation(grid: Grid, F: NormSpec, u) -> np.ndarray:
    """Per-square diagonal giving the smaller energy of ``u``."""
    u = grid.check_field(u)
    flip = np.empty(grid.square_shape, dtype=bool)
    out = np.empty(grid.shape)
    K.nonlinear_operator(F.kernels.legendre, np.ascontiguousarray(u), F.params, grid.hx, grid.hy, grid.periodic, grid.rho, out, flip, F.fixed_orientation)
    return flip


def gradient(grid: Grid, F: NormSpec, u) -> VectorField:
    """``grad u = L*(du)`` on the energy-minimising triangulation; zero on
    triangles where ``du = 0``."""
    flip = select_orientation(grid, F, u)
    du = differential(grid, u, flip)
    return VectorField(legendre_dual_to_primal(F, du.values), flip)


def laplacian(grid: Grid, F: NormSpec, u) -> np.ndarray:
    """``Delta u = div(grad u)``."""
    lap, _, _ = laplacian_energy(grid, F, u)
    return lap


def laplacian_energy(grid: Grid, F: NormSpec, u) -> tuple[np.ndarray, float, np.ndarray]:
    """``(Delta u, E(u), orientation)`` from one fused pass."""
    u = grid.check_field(u)
    flip = np.empty(grid.square_shape, dtype=bool)
    out = np.empty(grid.shape)
    e = K.nonlinear_operator(F.kernels.legendre, np.ascontiguousarray(u), F.params, grid.hx, grid.hy, grid.periodic, grid.rho, out, flip, F.fixed_orientation)
    return -out / grid.mass, float(e), flip


def energy(grid: Grid, F: NormSpec, u) -> float:
    """``E(u) = 1/2 int F*(du)^2 dm``."""
    return laplacian_energy(grid, F, u)[1]


def energy_primal(grid: Grid, F: NormSpec, u) -> float:
    """``1/2 int F(grad u)^2 dm``, the same energy through the primal norm."""
    g = gradient(grid, F, u)
    w = triangle_weights(grid, g.flip)
    return 0.5 * float(np.sum((w * eval_F(F, g.values) ** 2).ravel()))
