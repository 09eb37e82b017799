"""Shared norm catalogue and small grids for the test suite."""

from __future__ import annotations

import math

import numpy as np
import pytest

from finslerheat.grid import Grid
from finslerheat.norms import NormSpec

SHEAR = ((1.0, 0.3), (0.3, 0.5))


def randers_table_samples(n: int = 64) -> np.ndarray:
    """Direction samples of a smooth irreversible norm used for table specs."""
    th = 2 * np.pi * np.arange(n) / n
    v = np.stack([np.cos(th), np.sin(th)], axis=-1)
    g = np.array([[1.5, 0.2], [0.2, 1.0]])
    return np.sqrt(np.einsum("ia,ab,ib->i", v, g, v)) + v @ np.array([0.2, 0.1])


def norm_catalogue() -> dict[str, NormSpec]:
    return {
        "quadratic-id": NormSpec.quadratic(),
        "quadratic-shear": NormSpec.quadratic(SHEAR),
        "randers-b05": NormSpec.randers(beta=(0.5, 0.0)),
        "randers-shear": NormSpec.randers(SHEAR, (0.3, -0.4)),
        "lp1": NormSpec.lp_eps(1.0, 1e-2),
        "lp3": NormSpec.lp_eps(3.0, 1e-2),
        "lpinf": NormSpec.lp_eps(math.inf, 1e-2),
        "table": NormSpec.table(randers_table_samples()),
    }


CATALOGUE = norm_catalogue()
SMOOTH_KINDS = ["quadratic-id", "quadratic-shear", "randers-b05", "randers-shear", "lp3", "table"]


@pytest.fixture(params=sorted(CATALOGUE))
def any_norm(request) -> NormSpec:
    return CATALOGUE[request.param]


@pytest.fixture
def torus32() -> Grid:
    return Grid.torus(32)


@pytest.fixture
def randers() -> NormSpec:
    return CATALOGUE["randers-b05"]


@pytest.fixture
def euclid() -> NormSpec:
    return CATALOGUE["quadratic-id"]
