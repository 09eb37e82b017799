"""Explicit time stepping of the nonlinear heat flow ``du/dt = Delta u / 2``.

One step is ``u <- u + dt/2 Delta u``, a gradient step on the discrete energy
with respect to the node masses.  Because ``L*(alpha) = g*(alpha) alpha``, a
step equals ``(I - dt/2 M^{-1} K(u)) u`` with ``K(u)`` assembled from the dual
metric on each triangle.  With the energy-selected diagonals the off-diagonal
entries of ``K(u)`` are non-positive, and below :func:`stability_bound` the
diagonal of the step matrix stays non-negative.  The scheme then preserves
order and the range ``[0, 1]``, conserves mass, and decreases the energy.
"""

from __future__ import annotations

import csv
import functools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels as K
from .grid import Grid, Region, integrate, measure
from .norms import NormSpec, metric_tensor_primal, sample_directions

_BOUND_DIRECTIONS = 4096
_BOUND_MARGIN = 1.001


@functools.lru_cache(maxsize=64)
def _dual_metric_extremes(spec: NormSpec) -> tuple[float, float, float, float]:
    """Sampled maxima of ``g*_xx``, ``g*_yy``, ``g*_xx + g*_yy + 2 g*_xy`` and
    ``g*_xx + g*_yy - 2 g*_xy`` over the dual sphere (reached through the
    primal directions, where ``g*`` is the inverse of ``g_v``)."""
    g = np.linalg.inv(metric_tensor_primal(spec, sample_directions(_BOUND_DIRECTIONS)).entries)
    a = g[:, 0, 0]
    b = g[:, 1, 1]
    c = g[:, 0, 1]
    return float(a.max()), float(b.max()), float((a + b + 2 * c).max()), float((a + b - 2 * c).max())


def density_ratio(grid: Grid) -> float:
    """Largest ratio of a neighbouring density to the density at a node."""
    rho = grid.rho
    if grid.periodic:
        nb = rho
        for sx in (-1, 0, 1):
            for sy in (-1, 0, 1):
                nb = np.maximum(nb, np.roll(np.roll(rho, sx, axis=0), sy, axis=1))
    else:
        p = np.pad(rho, 1, mode="edge")
        nb = rho.copy()
        for sx in range(3):
            for sy in range(3):
                nb = np.maximum(nb, p[sx : sx + grid.nx, sy : sy + grid.ny])
    return float((nb / rho).max())


def stability_bound(grid: Grid, F: NormSpec) -> float:
    """Largest explicit step keeping the step matrix order preserving.

    A node's diagonal stiffness over its lattice squares is at most
    ``2 rho_ratio D`` times its mass, where ``D`` bounds the quadratic form
    of the dual metric on the stencil rows ``(1/hx, +-1/hy)``, ``(1/hx, 0)``
    and ``(0, 1/hy)``.
    """
    gxx, gyy, gp, gm = _dual_metric_extremes(F)
    ix = 1.0 / grid.hx**2
    iy = 1.0 / grid.hy**2
    ixy = 1.0 / (grid.hx * grid.hy)
    # rows (1/hx, +-1/hy) give g_xx/hx^2 + g_yy/hy^2 +- 2 g_xy/(hx hy); split
    # the sum into the isotropic part bounded by gp or gm and a remainder
    # that vanishes when hx = hy
    mixed = max(gp, gm) * ixy + max(gxx * (ix - ixy), 0.0) + max(gyy * (iy - ixy), 0.0)
    d = max(gxx * ix + gyy * iy, mixed)
    return 1.0 / (_BOUND_MARGIN * density_ratio(grid) * d)


def _check_dt(dt: float, bound: float) -> None:
    if not dt > 0:
        raise ValueError(f"time step must be positive, got {dt}")
    if dt > bound * (1.0 + 1e-12):
        raise ValueError(f"time step {dt:.6g} exceeds the stability bound {bound:.6g}")


def _apply(grid: Grid, F: NormSpec, u: np.ndarray, dt: float, out: np.ndarray, flip: np.ndarray):
    e = K.nonlinear_operator(F.kernels.legendre, u, F.params, grid.hx, grid.hy, grid.periodic, grid.rho, out, flip, F.fixed_orientation)
    return u - (0.5 * dt) * out / grid.mass, e


def step(grid: Grid, F: NormSpec, u, dt: float) -> np.ndarray:
    """One explicit step ``u + dt/2 Delta u``; rejects ``dt`` above
    :func:`stability_bound`."""
    u = np.ascontiguousarray(grid.check_field(u))
    _check_dt(dt, stability_bound(grid, F))
    out = np.empty(grid.shape)
    flip = np.empty(grid.square_shape, dtype=bool)
    return _apply(grid, F, u, dt, out, flip)[0]


@dataclass(frozen=True)
class HeatParams:
    """Run length, safety factor on the stability bound, step budget and the
    times at which snapshots are taken (hit exactly).  A fixed ``dt``
    replaces ``cfl * stability_bound`` as the regular step."""

    t_end: float
    cfl: float = 0.5
    max_steps: int = 5_000_000
    record_times: tuple[float, ...] = ()
    keep_every_step: bool = False
    dt: float | None = None

    def __post_init__(self):
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if not 0 < self.cfl <= 1:
            raise ValueError("cfl must lie in (0, 1]")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        rt = tuple(float(t) for t in self.record_times)
        if any(b <= a for a, b in zip(rt, rt[1:])):
            raise ValueError("record_times must be strictly increasing")
        if rt and (rt[0] < 0 or rt[-1] > self.t_end):
            raise ValueError("record_times must lie in [0, t_end]")
        object.__setattr__(self, "record_times", rt)


@dataclass
class HeatTrace:
    """Snapshots at the recorded times plus per-step diagnostics and the
    state ``final`` at ``t_end``.

    ``step_times[k]`` is the time after step ``k`` (``step_times[0] = 0`` is
    the initial state); ``step_energies`` and ``step_masses`` are aligned
    with it.  With ``keep_every_step`` the fields at all step times are in
    ``step_fields``.
    """

    times: list[float]
    fields: list[np.ndarray]
    energies: list[float]
    masses: list[float]
    step_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    step_energies: np.ndarray = field(default_factory=lambda: np.zeros(0))
    step_masses: np.ndarray = field(default_factory=lambda: np.zeros(0))
    step_fields: list[np.ndarray] | None = None
    dt_max: float = np.nan
    final: np.ndarray | None = None

    def at(self, t: float) -> np.ndarray:
        for s, f in zip(self.times, self.fields):
            if s == t:
                return f
        raise KeyError(f"no snapshot at t = {t}")

    @property
    def n_steps(self) -> int:
        return max(len(self.step_times) - 1, 0)


def evolve(grid: Grid, F: NormSpec, f, params: HeatParams) -> HeatTrace:
    """Run the flow from ``f`` to ``params.t_end``.

    Steps have length ``cfl * stability_bound``; the step before a record
    time is shortened to land on it exactly.
    """
    u = np.array(grid.check_field(f), dtype=float, order="C")
    bound = stability_bound(grid, F)
    if params.dt is None:
        dt0 = params.cfl * bound
    else:
        _check_dt(params.dt, bound)
        dt0 = params.dt
    stops = list(params.record_times)
    if not stops or stops[-1] < params.t_end:
        stops.append(params.t_end)
    record = set(params.record_times)

    out = np.empty(grid.shape)
    flip = np.empty(grid.square_shape, dtype=bool)
    times, fields, energies, masses = [], [], [], []
    st, se, sm = [0.0], [], [integrate(grid, u)]
    keep = [u.copy()] if params.keep_every_step else None

    def snapshot(t, e):
        times.append(t)
        fields.append(u.copy())
        energies.append(e)
        masses.append(integrate(grid, u))

    t = 0.0
    n = 0
    if 0.0 in record:
        snapshot(0.0, K.nonlinear_operator(F.kernels.legendre, u, F.params, grid.hx, grid.hy, grid.periodic, grid.rho, out, flip, F.fixed_orientation))
    for stop in stops:
        while t < stop:
            if n >= params.max_steps:
                raise RuntimeError(
                    f"max_steps={params.max_steps} exhausted at t={t:.6g} of {params.t_end:.6g}"
                )
            dt = dt0
            last = t + dt >= stop * (1.0 - 1e-12)
            if last:
                dt = stop - t
            u, e = _apply(grid, F, u, dt, out, flip)
            se.append(e)
            t = stop if last else t + dt
            n += 1
            st.append(t)
            sm.append(integrate(grid, u))
            if keep is not None:
                keep.append(u.copy())
        if stop in record and (not times or times[-1] != stop):
            snapshot(stop, K.nonlinear_operator(F.kernels.legendre, u, F.params, grid.hx, grid.hy, grid.periodic, grid.rho, out, flip, F.fixed_orientation))
    # energy of the final state completes the per-step sequence
    se.append(K.nonlinear_operator(F.kernels.legendre, u, F.params, grid.hx, grid.hy, grid.periodic, grid.rho, out, flip, F.fixed_orientation))
    return HeatTrace(
        times, fields, energies, masses,
        step_times=np.array(st), step_energies=np.array(se), step_masses=np.array(sm),
        step_fields=keep, dt_max=bound, final=u,
    )


def pt_mass(grid: Grid, F: NormSpec, A: Region, B: Region, t_list, cfl: float = 0.5) -> list[tuple[float, float]]:
    """``P_t(A, B) = int_A T_t 1_B dm`` for every ``t`` in ``t_list``."""
    measure(grid, A)
    measure(grid, B)
    ts = sorted(set(float(t) for t in t_list))
    if ts[0] < 0:
        raise ValueError("times must be non-negative")
    positive = [t for t in ts if t > 0]
    results = {}
    if 0.0 in ts:
        results[0.0] = integrate(grid, A.indicator() * B.indicator())
    if positive:
        trace = evolve(grid, F, B.indicator(), HeatParams(positive[-1], cfl, record_times=tuple(positive)))
        ind = A.indicator()
        for t, u in zip(trace.times, trace.fields):
            results[t] = integrate(grid, ind * u)
    return [(float(t), results[float(t)]) for t in t_list]


def write_trace_csv(trace: HeatTrace, path) -> Path:
    """Per-step ``t,mass,energy`` table."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "mass", "energy"])
        for t, m, e in zip(trace.step_times, trace.step_masses, trace.step_energies):
            w.writerow([repr(float(t)), repr(float(m)), repr(float(e))])
    return path
