"""Linearised Laplacian and the linearised heat flow.

Freezing the dual metric at the differential of a reference field ``u``
gives the linear operator

    Delta^{grad u} h = div(g*_{du}(dh)),

which is symmetric in ``L^2(m)`` and satisfies ``Delta^{grad u} u = Delta u``
because ``L*(alpha) = g*_alpha(alpha)``.  On the lattice the coefficients
live on the triangles of the energy-selected triangulation of ``u``; where
``du`` vanishes the metric is taken at a fixed fallback covector.  With constant density the frozen operator has non-negative
off-diagonal weights, so the linearised flow preserves non-negativity; with
a varying density the energy-selected triangulation need not be monotone for
the frozen tensors and small negative values can appear (mass is still
conserved exactly).

:func:`closeness_check` compares the linearised flow driven by a reversed
nonlinear trajectory with the nonlinear flow itself and tests the
``L^2`` bound

    |w_{s+t} - h_t|^2 <= K (|w_s|^2 - |w_{s+t}|^2),
    K = (sqrt(S_F) + sqrt(C_F))^2 / 4 - 1,

where ``w = T 1_D`` and ``h`` solves ``dh/dt = Delta^{grad u_{t0 - t}} h / 2``
with ``u = T 1_B`` and ``h_0 = w_s``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels as K
from .grid import Grid, Region, integrate, l2_norm_sq, measure
from .heat import HeatParams, HeatTrace, _check_dt, evolve, stability_bound
from .norms import MetricTensor, NormSpec, compute_constants, eval_F_star


@dataclass(frozen=True, eq=False)
class FrozenCoefficients:
    """Dual metric per active triangle.

    ``flip`` ``(sx, sy)`` is the triangulation, ``gten`` ``(sx, sy, 2, 3)``
    holds ``g*_xx, g*_xy, g*_yy`` per triangle slot, ``fallback`` is the
    covector used where the reference differential vanishes.
    """

    flip: np.ndarray
    gten: np.ndarray
    fallback: np.ndarray

    @property
    def tensors(self) -> MetricTensor:
        g = self.gten
        m = np.empty(g.shape[:-1] + (2, 2))
        m[..., 0, 0] = g[..., 0]
        m[..., 0, 1] = m[..., 1, 0] = g[..., 1]
        m[..., 1, 1] = g[..., 2]
        return MetricTensor(m, "dual")

    def eigenvalue_range(self) -> tuple[float, float]:
        ev = np.linalg.eigvalsh(self.tensors.entries.reshape(-1, 2, 2))
        return float(ev.min()), float(ev.max())


def default_fallback(F: NormSpec) -> np.ndarray:
    """``(1, 0)`` scaled to unit dual norm."""
    e = np.array([1.0, 0.0])
    return e / float(eval_F_star(F, e))


def freeze(grid: Grid, F: NormSpec, u, fallback=None) -> FrozenCoefficients:
    """Coefficients of ``Delta^{grad u}``."""
    u = np.ascontiguousarray(grid.check_field(u), dtype=float)
    fb = default_fallback(F) if fallback is None else np.asarray(fallback, dtype=float)
    if fb.shape != (2,) or not np.all(np.isfinite(fb)) or not np.any(fb != 0):
        raise ValueError("fallback must be a finite nonzero covector")
    flip = np.empty(grid.square_shape, dtype=bool)
    gten = np.empty(grid.square_shape + (2, 3))
    K.freeze_tensors(
        F.kernels.legendre, F.kernels.metric_dual, u, F.params, grid.hx, grid.hy, grid.periodic,
        grid.rho, float(fb[0]), float(fb[1]), flip, gten, F.fixed_orientation,
    )
    return FrozenCoefficients(flip, gten, fb.copy())


def _lin_out(grid: Grid, coeffs: FrozenCoefficients, h: np.ndarray, out: np.ndarray) -> float:
    return K.linear_operator(h, coeffs.gten, coeffs.flip, grid.hx, grid.hy, grid.periodic, grid.rho, out)


def lin_laplacian(grid: Grid, coeffs: FrozenCoefficients, h) -> np.ndarray:
    """``Delta^{grad u} h``."""
    h = np.ascontiguousarray(grid.check_field(h), dtype=float)
    if coeffs.flip.shape != grid.square_shape:
        raise ValueError("coefficients were frozen on a different grid")
    out = np.empty(grid.shape)
    _lin_out(grid, coeffs, h, out)
    return -out / grid.mass


def lin_energy(grid: Grid, coeffs: FrozenCoefficients, h) -> float:
    """``1/2 int g*_{du}(dh, dh) dm``."""
    h = np.ascontiguousarray(grid.check_field(h), dtype=float)
    return float(_lin_out(grid, coeffs, h, np.empty(grid.shape)))


@dataclass
class LinearisedTrace:
    """Final field plus the time and mass after every step."""

    field: np.ndarray
    times: np.ndarray
    masses: np.ndarray
    minima: np.ndarray


def _reference_states(u_trace: HeatTrace, tau: float) -> tuple[np.ndarray, list[np.ndarray]]:
    if u_trace.step_fields is not None:
        times = np.asarray(u_trace.step_times)
        fields = u_trace.step_fields
    else:
        times = np.asarray(u_trace.times)
        fields = u_trace.fields
    keep = times <= tau * (1.0 + 1e-12)
    times = times[keep]
    fields = [f for f, k in zip(fields, keep) if k]
    if len(times) == 0 or times[0] != 0.0:
        raise ValueError("reference trace must contain the state at t = 0")
    if abs(times[-1] - tau) > 1e-12 * max(tau, 1.0):
        raise ValueError(f"reference trace has no state at t = {tau}")
    return times, fields


def linearised_trace(
    grid: Grid, F: NormSpec, u_trace: HeatTrace, h0, tau: float, fallback=None, cfl: float = 0.5
) -> LinearisedTrace:
    """Solve ``dh/dt = Delta^{grad u_{tau - t}} h / 2`` on ``[0, tau]``.

    The reference states of ``u_trace`` (every step if it kept them, else
    its snapshots) split ``[0, tau]`` into intervals.  On the ``h`` interval
    matching ``[s_k, s_{k+1}]`` of the reference clock, the coefficients are
    frozen at ``u_{s_k}``, the nearest state at or before that interval.
    Intervals longer than ``cfl * stability_bound`` are substepped; shorter
    ones are taken in one step.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    h = np.array(grid.check_field(h0), dtype=float, order="C")
    times, fields = _reference_states(u_trace, tau)
    bound = stability_bound(grid, F)
    out = np.empty(grid.shape)
    t = 0.0
    ts, ms, mins = [0.0], [integrate(grid, h)], [float(h.min())]
    for k in range(len(times) - 1, 0, -1):
        coeffs = freeze(grid, F, fields[k - 1], fallback)
        span = times[k] - times[k - 1]
        n_sub = max(1, math.ceil(span / (cfl * bound) - 1e-9)) if span > bound else 1
        dt = span / n_sub
        _check_dt(dt, bound)
        for _ in range(n_sub):
            _lin_out(grid, coeffs, h, out)
            h -= (0.5 * dt) * out / grid.mass
            t += dt
            ts.append(t)
            ms.append(integrate(grid, h))
            mins.append(float(h.min()))
    return LinearisedTrace(h, np.array(ts), np.array(ms), np.array(mins))


def evolve_linearised(grid: Grid, F: NormSpec, u_trace: HeatTrace, h0, tau: float, fallback=None) -> np.ndarray:
    """``h_tau`` from :func:`linearised_trace`."""
    return linearised_trace(grid, F, u_trace, h0, tau, fallback).field


def closeness_factor(F: NormSpec) -> float:
    """``(sqrt(S_F) + sqrt(C_F))^2 / 4 - 1``; zero for quadratic norms."""
    if F.kind == "quadratic":
        return 0.0
    return max(compute_constants(F).closeness_factor, 0.0)


# relative L^2 round-off allowed when comparing the two sides; it matches a
# pointwise agreement of the flows to about 1e-9 and adds no discretisation
# slack
ROUNDOFF_L2 = 1e-18


@dataclass(frozen=True)
class ClosenessRow:
    """``slack = rhs - lhs``; the bound holds when ``slack >= -roundoff``."""

    sigma: float
    tau: float
    lhs: float
    rhs: float
    slack: float
    max_diff: float
    mass_drift: float
    min_h: float
    roundoff: float = 0.0

    @property
    def holds(self) -> bool:
        return self.slack >= -self.roundoff


def common_step(grid: Grid, F: NormSpec, times, cfl: float = 0.5) -> float:
    """Largest step below ``cfl * stability_bound`` dividing the smallest
    of ``times``; all tested times are expected to be multiples of it."""
    base = min(times)
    return base / math.ceil(base / (cfl * stability_bound(grid, F)) - 1e-9)


def closeness_check(
    grid: Grid, F: NormSpec, B: Region, D: Region, sigmas, taus, cfl: float = 0.5, fallback=None
) -> list[ClosenessRow]:
    """Test the linearisation bound at every ``(sigma, tau)``.

    All flows use one fixed step so that the nonlinear and linearised runs
    are driven by identical step sequences.  ``slack = rhs - lhs`` and the
    bound holds when it is non-negative up to :data:`ROUNDOFF_L2` times
    ``|w_s|^2``.
    """
    measure(grid, B)
    measure(grid, D)
    sigmas = sorted(float(s) for s in sigmas)
    taus = sorted(float(t) for t in taus)
    dt = common_step(grid, F, sigmas + taus, cfl)
    k = closeness_factor(F)
    w_times = sorted(set(sigmas) | {s + t for s in sigmas for t in taus})
    w = evolve(grid, F, D.indicator(), HeatParams(w_times[-1], record_times=tuple(w_times), dt=dt))
    u = evolve(grid, F, B.indicator(), HeatParams(taus[-1], record_times=tuple(taus), dt=dt, keep_every_step=True))
    rows = []
    for s in sigmas:
        ws = w.at(_match(w.times, s))
        for t in taus:
            wst = w.at(_match(w.times, s + t))
            run = linearised_trace(grid, F, u, ws, _match(u.step_times, t), fallback)
            diff = wst - run.field
            lhs = l2_norm_sq(grid, diff)
            ws2 = l2_norm_sq(grid, ws)
            rhs = k * (ws2 - l2_norm_sq(grid, wst))
            m0 = run.masses[0]
            rows.append(
                ClosenessRow(
                    s, t, lhs, float(rhs), float(rhs - lhs), float(np.abs(diff).max()),
                    float(np.abs(run.masses - m0).max() / abs(m0)), float(run.minima.min()),
                    ROUNDOFF_L2 * ws2,
                )
            )
    return rows


def _match(times, t: float) -> float:
    """The entry of ``times`` equal to ``t`` up to accumulated round-off."""
    times = np.asarray(times)
    i = int(np.argmin(np.abs(times - t)))
    if abs(times[i] - t) > 1e-9 * max(t, 1e-300):
        raise KeyError(f"no state at t = {t}")
    return float(times[i])


def write_closeness_csv(rows, path) -> Path:
    """``sigma,tau,lhs,rhs,slack`` table."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["sigma", "tau", "lhs", "rhs", "slack"])
        for r in rows:
            wr.writerow([repr(r.sigma), repr(r.tau), repr(r.lhs), repr(r.rhs), repr(r.slack)])
    return path
