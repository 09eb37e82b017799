"""Explicit nonlinear heat flow."""

from __future__ import annotations

import csv
import math

import numpy as np
import pytest

from conftest import CATALOGUE
from finslerheat.grid import Grid, disk_region, integrate, l2_norm_sq, measure
from finslerheat.heat import HeatParams, evolve, pt_mass, stability_bound, step, write_trace_csv

RANDERS = CATALOGUE["randers-b05"]
EUCLID = CATALOGUE["quadratic-id"]


def blob(grid, center=(0.4, 0.55), radius=0.2):
    return disk_region(grid, center, radius).indicator()


class TestStep:
    @pytest.mark.parametrize("name", sorted(CATALOGUE))
    def test_constant_is_stationary(self, name, torus32):
        F = CATALOGUE[name]
        u = np.full(torus32.shape, 0.7)
        assert np.all(step(torus32, F, u, 0.5 * stability_bound(torus32, F)) == u)

    def test_rejects_large_step(self, torus32):
        bound = stability_bound(torus32, RANDERS)
        with pytest.raises(ValueError, match="stability bound"):
            step(torus32, RANDERS, np.zeros(torus32.shape), 1.01 * bound)
        with pytest.raises(ValueError):
            step(torus32, RANDERS, np.zeros(torus32.shape), 0.0)

    def test_bound_scales_with_h_squared(self):
        b32 = stability_bound(Grid.torus(32), RANDERS)
        b64 = stability_bound(Grid.torus(64), RANDERS)
        assert b32 / b64 == pytest.approx(4.0, rel=1e-9)

    def test_mass_drift_1000_steps(self):
        g = Grid.torus(64, psi=0.2 * np.random.default_rng(0).uniform(-1, 1, (64, 64)))
        u = blob(g)
        m0 = integrate(g, u)
        dt = 0.5 * stability_bound(g, RANDERS)
        for _ in range(1000):
            u = step(g, RANDERS, u, dt)
        assert abs(integrate(g, u) - m0) <= 1e-11 * m0


class TestEvolve:
    def test_sine_decay_256(self):
        g = Grid.torus(256)
        x, _ = g.coords()
        trace = evolve(g, EUCLID, np.sin(2 * np.pi * x), HeatParams(0.01, record_times=(0.01,)))
        amp = np.max(trace.fields[-1])
        assert amp == pytest.approx(math.exp(-0.5 * (2 * np.pi) ** 2 * 0.01), rel=0.01)

    def test_record_times_hit_exactly(self, torus32):
        rt = (0.0, 0.0011, 0.0031, 0.004)
        trace = evolve(torus32, RANDERS, blob(torus32), HeatParams(0.005, record_times=rt))
        assert trace.times == list(rt)
        assert trace.step_times[-1] == 0.005
        assert set(rt) <= set(trace.step_times.tolist())
        assert np.array_equal(trace.at(0.0), blob(torus32))
        with pytest.raises(KeyError):
            trace.at(0.002)

    @pytest.mark.parametrize("name", sorted(CATALOGUE))
    def test_energy_non_increasing_and_mass_conserved(self, name, torus32):
        F = CATALOGUE[name]
        trace = evolve(torus32, F, blob(torus32), HeatParams(60 * 0.5 * stability_bound(torus32, F)))
        e = trace.step_energies
        assert np.all(np.diff(e) <= 1e-12 * e[0])
        m = trace.step_masses
        assert np.max(np.abs(m - m[0])) <= 1e-11 * m[0]

    @pytest.mark.parametrize("name", ["quadratic-id", "quadratic-shear", "randers-b05", "lp1", "lpinf"])
    def test_indicator_stays_in_unit_interval(self, name):
        F = CATALOGUE[name]
        g = Grid.torus(48)
        trace = evolve(g, F, blob(g), HeatParams(0.004, record_times=(0.001, 0.002, 0.004)))
        for u in trace.fields:
            assert u.min() >= -1e-12 and u.max() <= 1 + 1e-12

    def test_positive_homogeneity(self, torus32):
        f = blob(torus32) + 0.3 * blob(torus32, (0.8, 0.2), 0.15)
        p = HeatParams(0.004)
        a = evolve(torus32, RANDERS, f, p).final
        b = evolve(torus32, RANDERS, 2 * f, p).final
        assert np.max(np.abs(b - 2 * a)) <= 1e-9 * np.max(np.abs(b))

    def test_negation_fails_for_randers(self, torus32):
        f = blob(torus32)
        p = HeatParams(0.004)
        a = evolve(torus32, RANDERS, f, p).final
        b = evolve(torus32, RANDERS, -f, p).final
        assert np.max(np.abs(b + a)) > 1e-6

    def test_negation_holds_for_quadratic(self, torus32):
        f = blob(torus32)
        F = CATALOGUE["quadratic-shear"]
        p = HeatParams(0.004)
        a = evolve(torus32, F, f, p).final
        b = evolve(torus32, F, -f, p).final
        assert np.max(np.abs(b + a)) <= 1e-12

    @pytest.mark.parametrize("name", ["randers-b05", "lp1", "quadratic-shear"])
    def test_semigroup(self, name, torus32):
        F = CATALOGUE[name]
        dt = 0.4 * stability_bound(torus32, F)
        t1, t2 = 40 * dt, 25 * dt
        f = blob(torus32)
        whole = evolve(torus32, F, f, HeatParams(t1 + t2, dt=dt)).final
        half = evolve(torus32, F, f, HeatParams(t1, dt=dt)).final
        composed = evolve(torus32, F, half, HeatParams(t2, dt=dt)).final
        assert np.max(np.abs(whole - composed)) <= 1e-8 * np.max(np.abs(whole))

    @pytest.mark.parametrize("name", ["randers-b05", "quadratic-id", "lp1"])
    def test_comparison_principle(self, name, torus32):
        F = CATALOGUE[name]
        rng = np.random.default_rng(1)
        f = rng.uniform(0, 1, torus32.shape)
        g = f + rng.uniform(0, 0.5, torus32.shape)
        p = HeatParams(0.003, record_times=(0.001, 0.003))
        a = evolve(torus32, F, f, p)
        b = evolve(torus32, F, g, p)
        for u, v in zip(a.fields, b.fields):
            assert np.all(u <= v + 1e-10)

    def test_l2_contraction_quadratic(self, torus32):
        rng = np.random.default_rng(2)
        f, g = rng.standard_normal((2,) + torus32.shape)
        p = HeatParams(0.002)
        F = CATALOGUE["quadratic-shear"]
        a = evolve(torus32, F, f, p).final
        b = evolve(torus32, F, g, p).final
        assert l2_norm_sq(torus32, a - b) <= l2_norm_sq(torus32, f - g) + 1e-10

    def test_fixed_dt(self, torus32):
        bound = stability_bound(torus32, RANDERS)
        trace = evolve(torus32, RANDERS, blob(torus32), HeatParams(10 * 0.3 * bound, dt=0.3 * bound))
        assert trace.n_steps == 10
        assert np.allclose(np.diff(trace.step_times), 0.3 * bound, rtol=1e-9)
        with pytest.raises(ValueError, match="stability bound"):
            evolve(torus32, RANDERS, blob(torus32), HeatParams(0.01, dt=2 * bound))

    def test_max_steps(self, torus32):
        with pytest.raises(RuntimeError, match="max_steps"):
            evolve(torus32, RANDERS, blob(torus32), HeatParams(0.01, max_steps=5))

    def test_keep_every_step(self, torus32):
        trace = evolve(torus32, RANDERS, blob(torus32), HeatParams(0.001, keep_every_step=True))
        assert len(trace.step_fields) == len(trace.step_times)
        assert np.array_equal(trace.step_fields[-1], trace.final)
        assert np.array_equal(trace.step_fields[0], blob(torus32))

    @pytest.mark.parametrize(
        "kw",
        [dict(t_end=0.0), dict(t_end=1.0, cfl=1.5), dict(t_end=1.0, dt=-1.0), dict(t_end=1.0, record_times=(0.5, 0.2)),
         dict(t_end=1.0, record_times=(2.0,))],
    )
    def test_params_validation(self, kw):
        with pytest.raises(ValueError):
            HeatParams(**kw)

    def test_trace_csv(self, torus32, tmp_path):
        trace = evolve(torus32, RANDERS, blob(torus32), HeatParams(0.001))
        rows = list(csv.reader(write_trace_csv(trace, tmp_path / "t.csv").open()))
        assert rows[0] == ["t", "mass", "energy"]
        assert len(rows) == trace.n_steps + 2


class TestHeatContent:
    def test_time_zero(self, torus32):
        A = disk_region(torus32, (0.25, 0.5), 0.1)
        B = disk_region(torus32, (0.75, 0.5), 0.1)
        assert pt_mass(torus32, RANDERS, A, B, [0.0]) == [(0.0, 0.0)]
        assert pt_mass(torus32, RANDERS, A, A, [0.0])[0][1] == pytest.approx(measure(torus32, A))

    def test_values_in_range(self, torus32):
        A = disk_region(torus32, (0.25, 0.5), 0.1)
        B = disk_region(torus32, (0.75, 0.5), 0.1)
        res = pt_mass(torus32, RANDERS, A, B, [0.02, 0.005, 0.01])
        assert [t for t, _ in res] == [0.02, 0.005, 0.01]
        bound = min(measure(torus32, A), measure(torus32, B))
        assert all(0 < p <= bound for _, p in res)
        ps = dict(res)
        assert ps[0.005] < ps[0.01] < ps[0.02]

    def test_equilibrium(self):
        g = Grid.torus(16)
        A = disk_region(g, (0.25, 0.5), 0.15)
        B = disk_region(g, (0.75, 0.5), 0.15)
        (_, p), = pt_mass(g, EUCLID, A, B, [5.0], cfl=1.0)
        assert p == pytest.approx(measure(g, A) * measure(g, B) / g.total_mass(), rel=0.01)
