"""Command line interface.

Every subcommand takes a TOML configuration (see :mod:`finslerheat.config`),
writes its artefacts below the configured output directory, prints one
line per checked invariant and exits with status 0 exactly when all of them
hold.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from .calculus import laplacian
from .config import ExperimentConfig, load_config
from .distance import dijkstra_oracle, eikonal, lipschitz_defect
from .grid import integrate, write_field_csv
from .heat import HeatParams, evolve, write_trace_csv
from .linheat import closeness_check, freeze, lin_laplacian, write_closeness_csv
from .norms import compute_constants, eval_F, eval_F_star, legendre_dual_to_primal
from .report import emit_lp_family, emit_report
from .varadhan import run_lp_family, run_varadhan


class Checks:
    """Collects named pass/fail results and prints them as they arrive."""

    def __init__(self, out=None):
        self.results: list[tuple[str, bool]] = []
        self.out = out

    def __call__(self, name: str, ok: bool, detail: str = "") -> bool:
        ok = bool(ok)
        self.results.append((name, ok))
        print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f": {detail}" if detail else ""), file=self.out or sys.stdout)
        return ok

    @property
    def passed(self) -> bool:
        return all(ok for _, ok in self.results)

    def write(self, path: Path) -> None:
        path.write_text("".join(f"{'PASS' if ok else 'FAIL'} {n}\n" for n, ok in self.results))


def cmd_norm_check(cfg: ExperimentConfig, chk: Checks, n_draws: int = 10_000, seed: int = 0) -> None:
    F = cfg.norm
    rng = np.random.default_rng(seed)
    alpha = rng.standard_normal((n_draws, 2)) * np.exp(rng.uniform(-3, 3, (n_draws, 1)))
    v = rng.standard_normal((n_draws, 2))
    fs = eval_F_star(F, alpha)
    w = legendre_dual_to_primal(F, alpha)
    err1 = np.max(np.abs(eval_F(F, w) - fs) / fs)
    err2 = np.max(np.abs(np.sum(alpha * w, axis=1) - fs**2) / fs**2)
    gap = np.max(np.sum(alpha * v, axis=1) - fs * eval_F(F, v))
    c = compute_constants(F)
    chk("F(L*(alpha)) = F*(alpha)", err1 <= 1e-9, f"max rel err {err1:.2e}")
    chk("alpha(L*(alpha)) = F*(alpha)^2", err2 <= 1e-9, f"max rel err {err2:.2e}")
    chk("alpha(v) <= F*(alpha) F(v)", gap <= 1e-12, f"max excess {gap:.2e}")
    bound = min(np.sqrt(c.c_unif), np.sqrt(c.s_unif))
    chk("lambda <= min(sqrt C, sqrt S)", c.lam <= bound + 1e-9,
        f"lambda={c.lam:.6g} C={c.c_unif:.6g} S={c.s_unif:.6g}")
    print(f"closeness factor (sqrt S + sqrt C)^2/4 - 1 = {c.closeness_factor:.6g}")


def cmd_heat(cfg: ExperimentConfig, chk: Checks) -> None:
    grid = cfg.grid.build()
    B = cfg.B.build(grid)
    trace = evolve(grid, cfg.norm, B.indicator(), HeatParams(cfg.heat.t_end, cfg.cfl, record_times=(cfg.heat.t_end,)))
    out = cfg.output
    write_trace_csv(trace, out / "heat_trace.csv")
    write_field_csv(grid, trace.fields[-1], out / "heat_field.csv")
    m = trace.step_masses
    drift = np.max(np.abs(m - m[0])) / abs(m[0])
    de = np.diff(trace.step_energies)
    rise = float(de.max()) / trace.step_energies[0] if de.size else 0.0
    u = trace.fields[-1]
    chk("mass conserved", drift <= 1e-11, f"relative drift {drift:.2e} over {trace.n_steps} steps")
    chk("energy non-increasing", rise <= 1e-12, f"largest relative increase {max(rise, 0):.2e}")
    chk("0 <= T_t 1_B <= 1", u.min() >= 0 and u.max() <= 1 + 1e-12, f"range [{u.min():.3e}, {u.max():.12f}]")


def cmd_distance(cfg: ExperimentConfig, chk: Checks) -> None:
    grid = cfg.grid.build()
    F = cfg.norm
    A = cfg.A.build(grid)
    B = cfg.B.build(grid)
    for label, src, dst in (("d(A,B)", A, B), ("d(B,A)", B, A)):
        field = eikonal(grid, F, dst)
        oracle = dijkstra_oracle(grid, F, dst)
        d = float(field.values[src.mask].min())
        do = float(oracle.values[src.mask].min())
        print(f"{label}: eikonal {d:.6g} ({field.iterations} sweeps, residual {field.residual:.2e}), dijkstra {do:.6g}")
        chk(f"{label} eikonal vs dijkstra within 3%", abs(d - do) <= 0.03 * do, f"{abs(d - do) / do:.3%}")
        defect = lipschitz_defect(grid, F, field.values)
        chk(f"{label} distance field is 1-Lipschitz", defect <= 1e-12, f"defect {defect:.2e}")
    write_field_csv(grid, eikonal(grid, F, B).values, cfg.output / "distance_to_B.csv")


def cmd_varadhan(cfg: ExperimentConfig, chk: Checks) -> None:
    report = run_varadhan(cfg)
    emit_report(report, cfg.output, cfg.tolerance)
    for o in report.orientations:
        print(f"{o.label}: d = {o.d:.6g}, V_extrap = {o.V_extrap:.6g}, target {o.target:.6g}, "
              f"rel error {o.rel_error:.3%}")
        chk(f"{o.label} upper bound at every ladder time", o.violations == 0, f"{o.violations} violations")
        if cfg.tolerance is not None:
            chk(f"{o.label} V_extrap within {100 * cfg.tolerance:g}% of d^2", o.rel_error <= cfg.tolerance)
    if cfg.tolerance is not None and report.backward is not None and not cfg.norm.reversible:
        chk("orientations distinguished", report.distinguished(cfg.tolerance))


def cmd_linearized(cfg: ExperimentConfig, chk: Checks) -> None:
    grid = cfg.grid.build()
    F = cfg.norm
    lin = cfg.linearized
    B = cfg.B.build(grid)
    D = (lin.D or cfg.A).build(grid)
    x, y = grid.coords()
    lx, ly = grid.lengths
    u = np.sin(2 * np.pi * x / lx) + 0.5 * np.cos(2 * np.pi * y / ly) + 0.3 * np.sin(2 * np.pi * (x / lx + 2 * y / ly))
    coeffs = freeze(grid, F, u, lin.fallback)
    lap = laplacian(grid, F, u)
    err = np.max(np.abs(lin_laplacian(grid, coeffs, u) - lap)) / np.max(np.abs(lap))
    chk("linearised Laplacian of u equals Laplacian of u", err <= 1e-9, f"rel err {err:.2e}")
    rng = np.random.default_rng(0)
    h1, h2 = rng.standard_normal((2,) + grid.shape)
    a = integrate(grid, h1 * lin_laplacian(grid, coeffs, h2))
    b = integrate(grid, h2 * lin_laplacian(grid, coeffs, h1))
    chk("linearised Laplacian self-adjoint", abs(a - b) <= 1e-10 * abs(a), f"rel asymmetry {abs(a - b) / abs(a):.2e}")
    rows = closeness_check(grid, F, B, D, lin.sigmas, lin.taus, cfg.cfl, lin.fallback)
    write_closeness_csv(rows, cfg.output / "closeness.csv")
    drift = max(r.mass_drift for r in rows)
    chk("mass of linearised solution conserved", drift <= 1e-11, f"max rel drift {drift:.2e}")
    chk("linearised solution non-negative", min(r.min_h for r in rows) >= -1e-12)
    bad = [r for r in rows if not r.holds]
    chk("closeness inequality at every (sigma, tau)", not bad,
        f"min slack {min(r.slack for r in rows):.3e} over {len(rows)} pairs")
    if F.kind == "quadratic":
        diff = max(r.max_diff for r in rows)
        chk("quadratic: linearised and nonlinear flows coincide", diff <= 1e-9, f"max diff {diff:.2e}")


def cmd_lp_family(cfg: ExperimentConfig, chk: Checks) -> None:
    res = run_lp_family(cfg)
    emit_lp_family(res, cfg.output)
    for (p, eps), rep in res.reports.items():
        o = rep.forward
        print(f"p={p:g} eps={eps:g}: d_eps={o.d:.6g} (dijkstra {o.d_oracle:.6g}), V_extrap={o.V_extrap:.6g}")
        chk(f"p={p:g} eps={eps:g} upper bound", o.violations == 0, f"{o.violations} violations")
    for p, ok in res.monotone.items():
        chk(f"p={p:g} d_eps non-increasing as eps decreases", ok)
    for p, v in res.stability.items():
        chk(f"p={p:g} P_t stable between the two smallest eps", v <= res.stability_tol, f"{v:.3%}")


COMMANDS = {
    "norm-check": cmd_norm_check,
    "heat": cmd_heat,
    "distance": cmd_distance,
    "varadhan": cmd_varadhan,
    "linearized-check": cmd_linearized,
    "lp-family": cmd_lp_family,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="finslerheat", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", type=Path, help="TOML configuration file")
        p.add_argument("--output", type=Path, default=None, help="override the configured output directory")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except (OSError, ValueError, TypeError) as exc:
        print(f"error: cannot load {args.config}: {exc}", file=sys.stderr)
        return 2
    if args.output is not None:
        cfg = cfg.with_updates(output=args.output)
    try:
        cfg.output.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create {cfg.output}: {exc}", file=sys.stderr)
        return 2
    chk = Checks()
    start = time.perf_counter()
    COMMANDS[args.command](cfg, chk)
    print(f"{args.command}: {'all checks passed' if chk.passed else 'some checks FAILED'} "
          f"({time.perf_counter() - start:.1f} s)")
    chk.write(cfg.output / f"{args.command}_checks.txt")
    return 0 if chk.passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
