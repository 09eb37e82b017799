"""Eikonal distances, the graph oracle and their invariants."""

from __future__ import annotations

import numpy as np
import pytest

from conftest import CATALOGUE
from finslerheat.distance import (
    anisotropy_constant,
    dijkstra_oracle,
    eikonal,
    lipschitz_defect,
    set_distance,
)
from finslerheat.grid import Grid, Region, disk_region, point_region
from finslerheat.norms import NormSpec, compute_constants, eval_F

RANDERS = CATALOGUE["randers-b05"]
EUCLID = CATALOGUE["quadratic-id"]


def closed_form_to_point(grid, F, point):
    """``min over periodic images y of F(y - x)``: straight lines are
    geodesics of a constant norm.  Strongly drifted norms can make a
    route around the torus cheaper, so several images are scanned."""
    dx, dy = grid.displacement(*point)
    lx, ly = grid.lengths
    best = np.full(grid.shape, np.inf)
    for kx in range(-3, 4):
        for ky in range(-3, 4):
            v = np.stack([-dx + kx * lx, -dy + ky * ly], axis=-1)
            best = np.minimum(best, eval_F(F, v))
    return best


@pytest.fixture(scope="module")
def torus128():
    return Grid.torus(128)


class TestEikonal:
    @pytest.mark.parametrize("name", ["quadratic-id", "quadratic-shear", "randers-b05", "randers-shear"])
    def test_closed_form_point_source(self, name, torus128):
        F = CATALOGUE[name]
        B = point_region(torus128, (0.5, 0.5))
        d = eikonal(torus128, F, B).values
        assert np.max(np.abs(d - closed_form_to_point(torus128, F, (0.5, 0.5)))) <= 3 * torus128.h

    def test_randers_orientation(self, torus128):
        # B at the origin; from (-0.25, 0) the path to B runs along +x
        B = point_region(torus128, (0.0, 0.0))
        d = eikonal(torus128, RANDERS, B).values
        h = torus128.h
        i_left = round(0.75 / torus128.hx)
        i_right = round(0.25 / torus128.hx)
        assert d[i_left, 0] == pytest.approx(0.375, abs=3 * h)
        assert d[i_right, 0] == pytest.approx(0.125, abs=3 * h)

    def test_zero_exactly_on_target(self, torus128):
        B = disk_region(torus128, (0.3, 0.3), 0.1)
        d = eikonal(torus128, RANDERS, B).values
        assert np.all(d[B.mask] == 0) and np.all(d[~B.mask] > 0)

    def test_full_target(self, torus32):
        d = eikonal(torus32, RANDERS, Region(np.ones(torus32.shape, bool))).values
        assert np.all(d == 0)

    @pytest.mark.parametrize("name", sorted(CATALOGUE))
    def test_lipschitz(self, name, torus32):
        F = CATALOGUE[name]
        d = eikonal(torus32, F, disk_region(torus32, (0.5, 0.4), 0.1)).values
        assert lipschitz_defect(torus32, F, d) <= 1e-12

    def test_box(self):
        g = Grid.box(65)
        B = point_region(g, (0.0, 0.0))
        d = eikonal(g, EUCLID, B).values
        x, y = g.coords()
        assert np.max(np.abs(d - np.hypot(x, y))) <= 3 * g.h

    def test_empty_target_rejected(self, torus32):
        with pytest.raises(ValueError):
            eikonal(torus32, EUCLID, Region(np.zeros(torus32.shape, bool)))

    def test_non_convergence_reported(self, torus128):
        with pytest.raises(RuntimeError, match="did not converge"):
            eikonal(torus128, RANDERS, point_region(torus128, (0.5, 0.5)), max_sweeps=1)


class TestDijkstra:
    @pytest.mark.parametrize("name", ["quadratic-id", "randers-b05", "lp1"])
    def test_overestimates_within_graph_resolution(self, name, torus128):
        F = CATALOGUE[name]
        d = dijkstra_oracle(torus128, F, point_region(torus128, (0.5, 0.5))).values
        exact = closed_form_to_point(torus128, F, (0.5, 0.5))
        far = exact > 0.05
        rel = (d - exact)[far] / exact[far]
        assert rel.min() >= -1e-12
        assert rel.max() <= 0.02 if name == "quadratic-id" else rel.max() <= 0.03

    @pytest.mark.parametrize("name", ["quadratic-id", "randers-b05", "randers-shear", "lp1", "lpinf"])
    def test_brackets_eikonal(self, name, torus128):
        F = CATALOGUE[name]
        B = disk_region(torus128, (0.5, 0.5), 0.1)
        d = eikonal(torus128, F, B).values
        o = dijkstra_oracle(torus128, F, B).values
        assert np.all(o >= d - 3 * torus128.h)

    def test_reversible_symmetric(self, torus128):
        A = disk_region(torus128, (0.2, 0.3), 0.1)
        B = disk_region(torus128, (0.7, 0.6), 0.1)
        F = CATALOGUE["quadratic-shear"]
        assert set_distance(torus128, F, A, B, "dijkstra") == pytest.approx(set_distance(torus128, F, B, A, "dijkstra"), rel=1e-13)


class TestSetDistance:
    def test_same_set(self, torus32):
        A = disk_region(torus32, (0.5, 0.5), 0.1)
        assert set_distance(torus32, RANDERS, A, A) == 0.0

    def test_euclidean_disks(self, torus128):
        A = disk_region(torus128, (0.25, 0.5), 0.1)
        B = disk_region(torus128, (0.75, 0.5), 0.1)
        assert set_distance(torus128, EUCLID, A, B) == pytest.approx(0.3, abs=3 * torus128.h)

    def test_randers_asymmetric(self):
        # 2 x 0.5 torus: from A the cheap +x route to B wraps around (0.5 * 1.0),
        # from B the cheap route to A is direct (0.5 * 0.6)
        g = Grid.torus(256, 64, lx=2.0, ly=0.5)
        A = disk_region(g, (0.6, 0.25), 0.1)
        B = disk_region(g, (1.4, 0.25), 0.1)
        d_ab = set_distance(g, RANDERS, A, B)
        d_ba = set_distance(g, RANDERS, B, A)
        assert d_ab == pytest.approx(0.5, abs=3 * g.h * anisotropy_constant(RANDERS))
        assert d_ba == pytest.approx(0.3, abs=3 * g.h * anisotropy_constant(RANDERS))
        for s, t, d in ((A, B, d_ab), (B, A, d_ba)):
            assert d == pytest.approx(set_distance(g, RANDERS, s, t, "dijkstra"), rel=0.03)

    def test_unknown_solver(self, torus32):
        A = disk_region(torus32, (0.5, 0.5), 0.1)
        with pytest.raises(ValueError):
            set_distance(torus32, EUCLID, A, A, "marching")


class TestMetricProperties:
    @pytest.mark.parametrize("name", ["randers-b05", "randers-shear", "lpinf"])
    def test_triangle_inequality(self, name, torus32):
        F = CATALOGUE[name]
        rng = np.random.default_rng(0)
        pts = rng.uniform(0, 1, (30, 2))
        fields = [eikonal(torus32, F, point_region(torus32, p)).values for p in pts]
        idx = [tuple(np.argwhere(point_region(torus32, p).mask)[0]) for p in pts]
        h = torus32.h
        for _ in range(100):
            i, j, k = rng.choice(30, 3, replace=False)
            # d(x, z) with x = pts[i], z = pts[k] is fields[k] at x
            assert fields[k][idx[i]] <= fields[j][idx[i]] + fields[k][idx[j]] + 3 * h

    @pytest.mark.parametrize("name", ["randers-b05", "randers-shear", "table"])
    def test_asymmetry_bounded_by_reversibility(self, name, torus32):
        F = CATALOGUE[name]
        lam = compute_constants(F).lam
        rng = np.random.default_rng(1)
        pts = rng.uniform(0, 1, (20, 2))
        fields = [eikonal(torus32, F, point_region(torus32, p)).values for p in pts]
        idx = [tuple(np.argwhere(point_region(torus32, p).mask)[0]) for p in pts]
        worst = max(
            fields[b][idx[a]] / fields[a][idx[b]] for a in range(20) for b in range(20) if a != b and fields[a][idx[b]] > 0
        )
        assert worst <= 1.05 * lam

    def test_anisotropy_constant(self):
        assert anisotropy_constant(RANDERS) == pytest.approx(1.5, abs=1e-6)
        assert anisotropy_constant(EUCLID) == pytest.approx(1.0, abs=1e-12)
        assert anisotropy_constant(NormSpec.quadratic(((4.0, 0.0), (0.0, 1.0)))) == pytest.approx(2.0, abs=1e-6)
