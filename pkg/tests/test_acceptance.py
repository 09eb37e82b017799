"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Every criterion runs at its stated tolerance and within its runtime budget;
the line is printed straight to the terminal so that it also appears when
pytest captures output.
"""

from __future__ import annotations

import io
import math
import time
import warnings
from pathlib import Path

import numpy as np
import pytest

from finslerheat.calculus import differential, gradient, laplacian, pairing
from finslerheat.cli import Checks, cmd_linearized
from finslerheat.config import load_config
from finslerheat.distance import anisotropy_constant, dijkstra_oracle, eikonal, set_distance
from finslerheat.grid import Grid, disk_region, integrate, point_region
from finslerheat.heat import HeatParams, evolve, stability_bound
from finslerheat.norms import (
    NormSpec,
    compute_constants,
    eval_F,
    eval_F_star,
    legendre_dual_to_primal,
)
from finslerheat.varadhan import run_lp_family, run_varadhan

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
RANDERS = NormSpec.randers(beta=(0.5, 0.0))
EUCLID = NormSpec.quadratic()


def verdict(capsys, n: int, ok: bool, detail: str, seconds: float, budget: float) -> None:
    ok = bool(ok) and seconds <= budget
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail} ({seconds:.1f} s of {budget:.0f} s)"
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


# ---------------------------------------------------------------------------
# random norms for the pointwise suites


def random_spd(rng) -> np.ndarray:
    a = rng.standard_normal((2, 2))
    return a @ a.T + 0.3 * np.eye(2)


def random_randers(rng) -> NormSpec:
    g = random_spd(rng)
    # |beta|_{g^{-1}} < 1 keeps the norm positive and strongly convex
    beta = rng.standard_normal(2)
    beta *= rng.uniform(0.0, 0.9) / math.sqrt(beta @ np.linalg.solve(g, beta))
    return NormSpec.randers(g, beta)


def random_table(rng, n: int = 64) -> NormSpec:
    th = 2 * np.pi * np.arange(n) / n
    v = np.stack([np.cos(th), np.sin(th)], axis=-1)
    F = random_randers(rng)
    return NormSpec.table(eval_F(F, v))


def random_specs(rng, per_kind: int) -> list[NormSpec]:
    specs = []
    for _ in range(per_kind):
        specs.append(NormSpec.quadratic(random_spd(rng)))
        specs.append(random_randers(rng))
        specs.append(NormSpec.lp_eps(float(rng.choice([1.0, 1.5, 3.0, math.inf])), float(10 ** rng.uniform(-3, 0))))
        specs.append(random_table(rng))
    return specs


def test_criterion_1_legendre_duality(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    specs = random_specs(rng, 10)
    per_spec = 10_000 // len(specs)
    e1 = e2 = 0.0
    excess = -np.inf
    for F in specs:
        alpha = rng.standard_normal((per_spec, 2)) * np.exp(rng.uniform(-3, 3, (per_spec, 1)))
        v = rng.standard_normal((per_spec, 2)) * np.exp(rng.uniform(-3, 3, (per_spec, 1)))
        fs = eval_F_star(F, alpha)
        w = legendre_dual_to_primal(F, alpha)
        e1 = max(e1, float(np.max(np.abs(eval_F(F, w) - fs) / fs)))
        e2 = max(e2, float(np.max(np.abs(np.sum(alpha * w, axis=1) - fs**2) / fs**2)))
        excess = max(excess, float(np.max(np.sum(alpha * v, axis=1) - fs * eval_F(F, v))))
    ok = e1 <= 1e-9 and e2 <= 1e-9 and excess <= 1e-12
    detail = (f"{per_spec * len(specs)} draws over {len(specs)} norms; F(L*a)=F*(a) err {e1:.1e}, "
              f"a(L*a)=F*(a)^2 err {e2:.1e}, duality excess {excess:.1e}")
    verdict(capsys, 1, ok, detail, time.perf_counter() - start, 5)


def test_criterion_2_constants(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(202)
    quad = [compute_constants(NormSpec.quadratic(random_spd(rng))) for _ in range(5)]
    q_err = max(abs(x - 1.0) for c in quad for x in (c.lam, c.c_unif, c.s_unif))
    lam_r = compute_constants(RANDERS).lam
    others = [compute_constants(F) for F in random_specs(rng, 3)] + quad
    gap = max(c.lam - min(math.sqrt(c.c_unif), math.sqrt(c.s_unif)) for c in others)
    ok = q_err <= 1e-9 and abs(lam_r - 3.0) <= 1e-3 and gap <= 1e-9
    detail = (f"quadratic |const - 1| {q_err:.1e}; Randers b=0.5 Lambda {lam_r:.6f}; "
              f"max Lambda - min(sqrt C, sqrt S) {gap:.3f} over {len(others)} norms")
    verdict(capsys, 2, ok, detail, time.perf_counter() - start, 10)


def test_criterion_3_calculus(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(303)
    g = Grid.torus(16, psi=0.3 * rng.uniform(-1, 1, (16, 16)))
    ibp = 0.0
    for F in (RANDERS, NormSpec.quadratic(((1.0, 0.3), (0.3, 0.5)))):
        for _ in range(100):
            u, phi = rng.standard_normal((2,) + g.shape)
            grad = gradient(g, F, u)
            lhs = integrate(g, phi * laplacian(g, F, u))
            rhs = -pairing(g, differential(g, phi, grad.flip), grad)
            ibp = max(ibp, abs(lhs - rhs) / max(abs(lhs), abs(rhs)))
    g32 = Grid.torus(32)
    x, y = g32.coords()
    u1 = np.sin(2 * np.pi * x) + 0.5 * np.cos(2 * np.pi * y)
    u2 = np.cos(2 * np.pi * (x + y))

    def gap(F):
        return abs(integrate(g32, u1 * laplacian(g32, F, u2)) - integrate(g32, u2 * laplacian(g32, F, u1)))

    gap_r, gap_q = gap(RANDERS), gap(EUCLID)
    g256 = Grid.torus(256)
    x, _ = g256.coords()
    s = np.sin(2 * np.pi * x)
    exact = -(2 * np.pi) ** 2 * s
    eig = float(np.max(np.abs(laplacian(g256, EUCLID, s) - exact)) / np.max(np.abs(exact)))
    ok = ibp <= 1e-10 and gap_r > 1e-6 and gap_q < 1e-10 and eig <= 0.01
    detail = (f"integration by parts {ibp:.1e} on 200 pairs; asymmetry gap Randers {gap_r:.3g}, "
              f"quadratic {gap_q:.1e}; eigenfunction error {eig:.3%} at 256^2")
    verdict(capsys, 3, ok, detail, time.perf_counter() - start, 30)


def test_criterion_4_heat(capsys):
    start = time.perf_counter()
    g = load_config(CONFIGS / "quadratic.toml").grid.build()
    B = disk_region(g, (0.5, 0.5), 0.15)
    dt = 0.5 * stability_bound(g, RANDERS)
    trace = evolve(g, RANDERS, B.indicator(), HeatParams(1000 * dt, dt=dt))
    m = trace.step_masses
    drift = float(np.max(np.abs(m - m[0])) / m[0])
    rise = float(np.max(np.diff(trace.step_energies)) / trace.step_energies[0])
    u = trace.final
    in_range = u.min() >= 0.0 and u.max() <= 1.0 + 1e-12

    x, y = g.coords()
    f = np.exp(-((x - 0.4) ** 2 + (y - 0.6) ** 2) / 0.01) - 0.5 * np.exp(-((x - 0.7) ** 2 + (y - 0.3) ** 2) / 0.005)
    n1, n2 = 120, 80
    p = HeatParams((n1 + n2) * dt, dt=dt)
    a = evolve(g, RANDERS, f, p).final
    hom = float(np.max(np.abs(evolve(g, RANDERS, 2 * f, p).final - 2 * a)) / np.max(np.abs(2 * a)))
    neg = float(np.max(np.abs(evolve(g, RANDERS, -f, p).final + a)))
    half = evolve(g, RANDERS, f, HeatParams(n1 * dt, dt=dt)).final
    comp = evolve(g, RANDERS, half, HeatParams(n2 * dt, dt=dt)).final
    semi = float(np.max(np.abs(comp - a)) / np.max(np.abs(a)))
    ok = drift <= 1e-11 and rise <= 1e-12 and in_range and hom <= 1e-9 and neg > 1e-6 and semi <= 1e-8
    detail = (f"Randers 256^2: mass drift {drift:.1e} over {trace.n_steps} steps, largest energy rise {max(rise, 0):.1e}, "
              f"range [{u.min():.2e}, {u.max():.6f}], T(2f)-2Tf {hom:.1e}, |T(-f)+Tf| {neg:.2e}, semigroup {semi:.1e}")
    verdict(capsys, 4, ok, detail, time.perf_counter() - start, 120)


def closed_form(grid, F, point):
    dx, dy = grid.displacement(*point)
    lx, ly = grid.lengths
    best = np.full(grid.shape, np.inf)
    for kx in range(-3, 4):
        for ky in range(-3, 4):
            best = np.minimum(best, eval_F(F, np.stack([-dx + kx * lx, -dy + ky * ly], axis=-1)))
    return best


def test_criterion_5_distance(capsys):
    start = time.perf_counter()
    g = Grid.torus(256)
    h = g.h
    A = disk_region(g, (0.25, 0.5), 0.1)
    B = disk_region(g, (0.75, 0.5), 0.1)
    set_err = 0.0
    point_err = 0.0
    for F in (EUCLID, RANDERS):
        for src, dst in ((A, B), (B, A)):
            d = set_distance(g, F, src, dst, "eikonal")
            do = set_distance(g, F, src, dst, "dijkstra")
            set_err = max(set_err, abs(d - do) / do)
        P = point_region(g, (0.5, 0.5))
        de, dd = eikonal(g, F, P).values, dijkstra_oracle(g, F, P).values
        far = dd >= 0.05
        point_err = max(point_err, float(np.max(np.abs(de - dd)[far] / dd[far])))
    cf = float(np.max(np.abs(eikonal(g, RANDERS, point_region(g, (0.5, 0.5))).values
                             - closed_form(g, RANDERS, (0.5, 0.5)))))
    rng = np.random.default_rng(505)
    pts = rng.uniform(0, 1, (12, 2))
    fields = [eikonal(g, RANDERS, point_region(g, p)).values for p in pts]
    idx = [tuple(np.argwhere(point_region(g, p).mask)[0]) for p in pts]
    tri = max(
        fields[k][idx[i]] - fields[j][idx[i]] - fields[k][idx[j]]
        for i in range(12) for j in range(12) for k in range(12) if len({i, j, k}) == 3
    )
    ratio = max(fields[b][idx[a]] / fields[a][idx[b]] for a in range(12) for b in range(12) if a != b)
    lam = compute_constants(RANDERS).lam
    ok = set_err <= 0.03 and point_err <= 0.03 and cf <= 3 * h and tri <= 3 * h and ratio <= 1.05 * lam
    detail = (f"256^2: eikonal vs Dijkstra {set_err:.2%} (set distances), {point_err:.2%} (pointwise, d >= 0.05); "
              f"closed form error {cf / h:.2f} h; triangle excess {tri / h:.2f} h; "
              f"asymmetry ratio {ratio:.3f} vs Lambda {lam:.3f}")
    verdict(capsys, 5, ok, detail, time.perf_counter() - start, 120)


@pytest.fixture(scope="module")
def scenes():
    out = {}
    for name in ("quadratic", "randers"):
        start = time.perf_counter()
        cfg = load_config(CONFIGS / f"{name}.toml")
        out[name] = (cfg, run_varadhan(cfg), time.perf_counter() - start)
    return out


@pytest.mark.slow
def test_criterion_6_upper_bound(scenes, capsys):
    parts, total, rows = [], 0, 0
    for name, (_, rep, _) in scenes.items():
        for o in rep.orientations:
            parts.append(f"{name} {o.label} {o.violations}/{len(o.rows)}")
            total += o.violations
            rows += len(o.rows)
    seconds = sum(s for _, _, s in scenes.values())
    verdict(capsys, 6, total == 0, f"{total} violations in {rows} rows ({', '.join(parts)})", seconds, 600)


@pytest.mark.slow
def test_criterion_7_varadhan_limit(scenes, capsys):
    qcfg, q, _ = scenes["quadratic"]
    rcfg, r, _ = scenes["randers"]
    q_err = abs(q.V_extrap - 0.09) / 0.09
    f_err, b_err = r.forward.rel_error, r.backward.rel_error
    ok = (q_err <= qcfg.tolerance and f_err <= rcfg.tolerance and b_err <= rcfg.tolerance
          and r.distinguished(rcfg.tolerance))
    detail = (f"quadratic V_extrap {q.V_extrap:.5f} vs 0.09 ({q_err:.2%}); Randers A->B {r.forward.V_extrap:.4f} vs "
              f"{r.forward.target:.4f} ({f_err:.2%}), B->A {r.backward.V_extrap:.4f} vs {r.backward.target:.4f} "
              f"({b_err:.2%}); distinguished {r.distinguished(rcfg.tolerance)}")
    seconds = sum(s for _, _, s in scenes.values())
    verdict(capsys, 7, ok, detail, seconds, 600)


@pytest.mark.slow
def test_criterion_8_linearisation(tmp_path, capsys):
    start = time.perf_counter()
    failed, n = [], 0
    for name in ("linearized_quadratic", "linearized_randers"):
        cfg = load_config(CONFIGS / f"{name}.toml").with_updates(output=tmp_path / name)
        cfg.output.mkdir(parents=True)
        chk = Checks(io.StringIO())
        cmd_linearized(cfg, chk)
        n += len(chk.results)
        failed += [f"{name}: {label}" for label, ok in chk.results if not ok]
    detail = f"{n - len(failed)}/{n} checks hold" + (f"; failed {failed}" if failed else "")
    verdict(capsys, 8, not failed, detail, time.perf_counter() - start, 180)


@pytest.fixture(scope="module")
def lp_family():
    start = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = run_lp_family(load_config(CONFIGS / "lp_family.toml"))
    return res, time.perf_counter() - start


@pytest.mark.slow
def test_criterion_9_lp_family(lp_family, capsys):
    res, seconds = lp_family
    stab = ", ".join(f"p={p:g} {v:.2%}" for p, v in res.stability.items())
    detail = (f"{len(res.reports)} (p, eps) runs; upper bound {res.bound_ok}; d_eps monotone {res.monotone_ok}; "
              f"stability {stab} (limit {res.stability_tol:.0%})")
    verdict(capsys, 9, res.passed, detail, seconds, 600)


@pytest.mark.slow
def test_lp_family_distances_match_graph_oracle(lp_family):
    res, _ = lp_family
    for rep in res.reports.values():
        assert rep.d_AB == pytest.approx(rep.forward.d_oracle, rel=0.03)
