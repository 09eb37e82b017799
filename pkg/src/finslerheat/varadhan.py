"""Short-time heat content between two sets and its distance limit.

For open sets ``A`` and ``B``

    V(t) := -2 t log P_t(A, B) -> d(A, B)^2     as t -> 0,

with ``P_t(A, B) = int_A T_t 1_B dm``, and at every ``t``

    P_t(A, B) <= sqrt(m(A) m(B)) exp(-d(A, B)^2 / (2 t)).

On the lattice the distance in that bound is lowered by ``3 h kappa`` to
absorb the set discretisation (``kappa`` converts Euclidean grid error into
F-distance).  :func:`run_varadhan` records ``P_t`` on a geometric time
ladder for both orientations, checks the bound row by row and extrapolates
``V`` to ``t = 0``.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig
from .distance import anisotropy_constant, set_distance
from .grid import Grid, Region, measure
from .heat import pt_mass
from .norms import NormSpec

DISCRETE_SLACK = 3.0


@dataclass(frozen=True)
class VaradhanRow:
    """One ladder time.  ``bound_rhs`` is the lattice form of the upper bound
    and ``slack = log(bound_rhs) - log(P_t)``, non-negative when it holds."""

    t: float
    P_t: float
    V_t: float
    bound_rhs: float
    slack: float

    @property
    def bound_holds(self) -> bool:
        return self.slack >= 0.0


def extrapolate(ts, vs, method: str = "LinearInT", fit_points: int = 4) -> float:
    """Estimate ``lim_{t -> 0} V(t)`` from ladder samples.

    ``LinearInT`` fits ``d^2 + c t`` to the ``fit_points`` smallest times.
    ``Richardson`` eliminates the linear term between the two smallest
    times.  ``Prefactor`` fits ``d^2 + a t + b t log t`` to every sample,
    the form produced by a power-law prefactor ``P_t ~ C t^k exp(-d^2/2t)``.
    """
    ts = np.asarray(ts, dtype=float)
    vs = np.asarray(vs, dtype=float)
    order = np.argsort(ts)
    ts, vs = ts[order], vs[order]
    if method == "LinearInT":
        n = min(fit_points, ts.size)
        if n < 2:
            raise ValueError("LinearInT needs at least two ladder times")
        a = np.vstack([np.ones(n), ts[:n]]).T
        return float(np.linalg.lstsq(a, vs[:n], rcond=None)[0][0])
    if method == "Richardson":
        if ts.size < 2:
            raise ValueError("Richardson needs at least two ladder times")
        t1, t2 = ts[0], ts[1]
        return float((vs[0] * t2 - vs[1] * t1) / (t2 - t1))
    if method == "Prefactor":
        if ts.size < 3:
            raise ValueError("Prefactor needs at least three ladder times")
        a = np.vstack([np.ones(ts.size), ts, ts * np.log(ts)]).T
        return float(np.linalg.lstsq(a, vs, rcond=None)[0][0])
    raise ValueError(f"unknown extrapolation {method!r}")


@dataclass
class OrientationResult:
    """Ladder for ``P_t(source, target)`` tracking ``d(source, target)``."""

    label: str
    d: float
    d_oracle: float
    m_source: float
    m_target: float
    rows: list[VaradhanRow]
    dropped: list[float]
    V_extrap: float
    extrapolations: dict[str, float]
    seconds: float

    @property
    def target(self) -> float:
        return self.d * self.d

    @property
    def rel_error(self) -> float:
        return abs(self.V_extrap - self.target) / self.target

    @property
    def violations(self) -> int:
        return sum(not r.bound_holds for r in self.rows)


@dataclass
class VaradhanReport:
    forward: OrientationResult
    backward: OrientationResult | None
    h: float
    kappa: float
    extrapolation: str
    description: dict[str, str] = field(default_factory=dict)

    @property
    def d_AB(self) -> float:
        return self.forward.d

    @property
    def d_BA(self) -> float:
        return self.backward.d if self.backward is not None else math.nan

    @property
    def V_extrap(self) -> float:
        return self.forward.V_extrap

    @property
    def rel_error(self) -> float:
        return self.forward.rel_error

    @property
    def orientations(self) -> list[OrientationResult]:
        return [o for o in (self.forward, self.backward) if o is not None]

    @property
    def bound_violations(self) -> int:
        return sum(o.violations for o in self.orientations)

    def distinguished(self, tol: float) -> bool:
        """Whether the two targets differ by more than their ``tol`` bands."""
        if self.backward is None:
            return False
        a, b = self.forward.target, self.backward.target
        return abs(a - b) > tol * (a + b)


def ladder_rows(
    ts, P, d: float, m_a: float, m_b: float, h: float, kappa: float, floor: float
) -> tuple[list[VaradhanRow], list[float]]:
    """Rows for the recorded ``P_t``; values at or below ``floor`` are
    dropped with a warning.

    An exact zero is not round-off: the explicit scheme moves mass by one
    node per step, so at very small ``t`` it may not have reached the other
    set yet.
    """
    rows, dropped = [], []
    d_low = max(d - DISCRETE_SLACK * h * kappa, 0.0)
    for t, p in zip(ts, P):
        if not p > floor:
            why = " (too few steps to reach the other set)" if p == 0 else ""
            warnings.warn(f"P_t = {p:.3e} at t = {t:.6g} is below the underflow floor {floor:.1e}{why}; row dropped")
            dropped.append(float(t))
            continue
        log_rhs = 0.5 * math.log(m_a * m_b) - d_low * d_low / (2.0 * t)
        rows.append(VaradhanRow(float(t), float(p), -2.0 * t * math.log(p), math.exp(log_rhs), log_rhs - math.log(p)))
    if not rows:
        raise ValueError(f"every ladder time underflowed (floor {floor:.1e}); use larger times or a coarser grid")
    return rows, dropped


def _orientation(
    label: str, grid: Grid, F: NormSpec, source: Region, target: Region, ts, cfg: ExperimentConfig, kappa: float
) -> OrientationResult:
    start = time.perf_counter()
    d = set_distance(grid, F, source, target, "eikonal")
    d_oracle = set_distance(grid, F, source, target, "dijkstra")
    m_s = measure(grid, source)
    m_t = measure(grid, target)
    P = [p for _, p in pt_mass(grid, F, source, target, ts, cfg.cfl)]
    rows, dropped = ladder_rows(ts, P, d, m_s, m_t, grid.h, kappa, cfg.underflow_floor)
    rt = [r.t for r in rows]
    rv = [r.V_t for r in rows]
    ex = {}
    for method in ("LinearInT", "Richardson", "Prefactor"):
        try:
            ex[method] = extrapolate(rt, rv, method, cfg.fit_points)
        except ValueError:
            ex[method] = math.nan
    return OrientationResult(
        label, d, d_oracle, m_s, m_t, rows, dropped, ex[cfg.extrapolation], ex, time.perf_counter() - start
    )


def run_varadhan(cfg: ExperimentConfig, both: bool = True) -> VaradhanReport:
    """Run the ladder for ``A -> B`` (and ``B -> A`` when ``both``)."""
    grid = cfg.grid.build()
    F = cfg.norm
    A = cfg.A.build(grid)
    B = cfg.B.build(grid)
    ts = cfg.ladder.times()
    kappa = anisotropy_constant(F)
    fwd = _orientation("A->B", grid, F, A, B, ts, cfg, kappa)
    bwd = _orientation("B->A", grid, F, B, A, ts, cfg, kappa) if both else None
    lx, ly = grid.lengths
    desc = {
        "grid": f"{grid.topology} {grid.nx}x{grid.ny} lengths=({lx:g}, {ly:g}) h={grid.h:.6g}",
        "norm": describe_norm(F),
        "A": cfg.A.describe(),
        "B": cfg.B.describe(),
        "ladder": f"t_max={cfg.ladder.t_max:g} ratio={cfg.ladder.ratio:g} count={cfg.ladder.count}",
        "cfl": f"{cfg.cfl:g}",
        "regions": "open sets (disks or rectangles); the distance is the lattice set distance",
    }
    return VaradhanReport(fwd, bwd, grid.h, kappa, cfg.extrapolation, desc)


def describe_norm(F: NormSpec) -> str:
    if F.kind == "quadratic":
        return f"quadratic g={F.g.ravel().tolist()}"
    if F.kind == "randers":
        return f"randers g={F.g.ravel().tolist()} beta={F.beta.tolist()}"
    if F.kind == "lpeps":
        return f"lpeps p={F.p:g} eps={F.eps:g}"
    return f"table with {F.coeffs.size} Fourier coefficients"


# ---------------------------------------------------------------------------
# regularised lp family


@dataclass
class LpFamilyResult:
    """Reports per ``(p, eps)`` with the checks across ``eps``."""

    reports: dict[tuple[float, float], VaradhanReport]
    lp_reference: dict[float, float]
    monotone: dict[float, bool]
    stability: dict[float, float]
    monotone_tol: float
    stability_tol: float

    @property
    def bound_ok(self) -> bool:
        return all(r.bound_violations == 0 for r in self.reports.values())

    @property
    def monotone_ok(self) -> bool:
        return all(self.monotone.values())

    @property
    def stability_ok(self) -> bool:
        return all(v <= self.stability_tol for v in self.stability.values())

    @property
    def passed(self) -> bool:
        return self.bound_ok and self.monotone_ok and self.stability_ok


def run_lp_family(cfg: ExperimentConfig) -> LpFamilyResult:
    """Varadhan ladders for ``F_eps^2 = |v|_p^2 + eps |v|_2^2``.

    Checks that ``d_eps(A, B)`` does not increase as ``eps`` decreases (up
    to ``monotone_tol``), and that ``P_t`` at the largest ladder time moves
    by at most ``stability_tol`` (relative) between the two smallest ``eps``.
    The Dijkstra distance for a vanishing regulariser is kept as the ``lp``
    reference.
    """
    fam = cfg.lp_family
    grid = cfg.grid.build()
    A = cfg.A.build(grid)
    B = cfg.B.build(grid)
    reports, ref, mono, stab = {}, {}, {}, {}
    eps_desc = sorted(fam.eps, reverse=True)
    for p in fam.ps:
        for eps in eps_desc:
            sub = cfg.with_updates(norm=NormSpec.lp_eps(p, eps))
            reports[(p, eps)] = run_varadhan(sub, both=False)
        ref[p] = set_distance(grid, NormSpec.lp_eps(p, 1e-12), A, B, "dijkstra")
        ds = [reports[(p, e)].d_AB for e in eps_desc]
        mono[p] = all(b <= a + fam.monotone_tol for a, b in zip(ds, ds[1:]))
        if len(eps_desc) >= 2:
            r1 = reports[(p, eps_desc[-2])].forward.rows
            r2 = reports[(p, eps_desc[-1])].forward.rows
            p1 = max(r1, key=lambda r: r.t).P_t
            p2 = max(r2, key=lambda r: r.t).P_t
            stab[p] = abs(p1 - p2) / p2
    return LpFamilyResult(reports, ref, mono, stab, fam.monotone_tol, fam.stability_tol)
