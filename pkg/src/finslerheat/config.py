"""Experiment configuration read from TOML files.

A configuration names a grid, a norm, two regions and a time ladder, plus
optional sections for the individual CLI subcommands::

    output = "out/quadratic"
    cfl = 0.5
    extrapolation = "LinearInT"

    [grid]
    topology = "torus"
    nx = 256
    lx = 1.0

    [norm]
    kind = "quadratic"

    [A]
    shape = "disk"
    center = [0.25, 0.5]
    radius = 0.1

    [B]
    shape = "disk"
    center = [0.75, 0.5]
    radius = 0.1

    [ladder]
    t_max = 0.02
    ratio = 0.5
    count = 6
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .grid import Grid, Region, disk_region, point_region, rectangle_region
from .norms import NormSpec

EXTRAPOLATIONS = ("LinearInT", "Richardson", "Prefactor")
SHAPES = ("disk", "rectangle", "point")


@dataclass(frozen=True)
class GridConfig:
    """Lattice size and side lengths.  With ``normalize`` the density is the
    constant making the total mass one."""

    nx: int = 256
    ny: int | None = None
    lx: float = 1.0
    ly: float | None = None
    topology: str = "torus"
    normalize: bool = True

    def build(self) -> Grid:
        make = Grid.torus if self.topology == "torus" else Grid.box
        if self.topology not in ("torus", "box"):
            raise ValueError(f"unknown topology {self.topology!r}")
        grid = make(self.nx, self.ny, self.lx, self.ly)
        if self.normalize:
            lx, ly = grid.lengths
            grid = grid.with_psi(np.full(grid.shape, -math.log(lx * ly)))
        return grid


@dataclass(frozen=True)
class RegionConfig:
    shape: str = "disk"
    center: tuple[float, float] = (0.5, 0.5)
    radius: float = 0.1
    lower: tuple[float, float] = (0.0, 0.0)
    upper: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"region shape must be one of {SHAPES}")

    def build(self, grid: Grid) -> Region:
        if self.shape == "disk":
            return disk_region(grid, self.center, self.radius)
        if self.shape == "rectangle":
            return rectangle_region(grid, self.lower, self.upper)
        return point_region(grid, self.center)

    def describe(self) -> str:
        if self.shape == "disk":
            return f"disk center=({self.center[0]:g}, {self.center[1]:g}) radius={self.radius:g}"
        if self.shape == "rectangle":
            return f"rectangle [{self.lower[0]:g}, {self.upper[0]:g}] x [{self.lower[1]:g}, {self.upper[1]:g}]"
        return f"point ({self.center[0]:g}, {self.center[1]:g})"


@dataclass(frozen=True)
class LadderConfig:
    """Geometric time ladder ``t_max * ratio^k`` for ``k < count``."""

    t_max: float = 0.02
    ratio: float = 0.5
    count: int = 6

    def __post_init__(self):
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if not 0 < self.ratio < 1:
            raise ValueError("ladder ratio must lie in (0, 1)")
        if self.count < 1:
            raise ValueError("ladder needs at least one time")

    def times(self) -> list[float]:
        """Strictly decreasing."""
        return [self.t_max * self.ratio**k for k in range(self.count)]


@dataclass(frozen=True)
class HeatConfig:
    t_end: float = 0.01
    steps_check: int = 1000


@dataclass(frozen=True)
class LinearizedConfig:
    sigmas: tuple[float, ...] = (0.001, 0.005, 0.02)
    taus: tuple[float, ...] = (0.001, 0.005, 0.02)
    D: RegionConfig | None = None
    fallback: tuple[float, float] | None = None


@dataclass(frozen=True)
class LpFamilyConfig:
    ps: tuple[float, ...] = (1.0, math.inf)
    eps: tuple[float, ...] = (1e-1, 1e-2, 1e-3)
    monotone_tol: float = 1e-3
    stability_tol: float = 0.02


@dataclass(frozen=True)
class ExperimentConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    norm: NormSpec = field(default_factory=NormSpec.quadratic)
    A: RegionConfig = field(default_factory=lambda: RegionConfig(center=(0.25, 0.5)))
    B: RegionConfig = field(default_factory=lambda: RegionConfig(center=(0.75, 0.5)))
    ladder: LadderConfig = field(default_factory=LadderConfig)
    cfl: float = 0.5
    output: Path = Path("out")
    extrapolation: str = "LinearInT"
    fit_points: int = 4
    tolerance: float | None = None
    underflow_floor: float = 1e-280
    heat: HeatConfig = field(default_factory=HeatConfig)
    linearized: LinearizedConfig = field(default_factory=LinearizedConfig)
    lp_family: LpFamilyConfig = field(default_factory=LpFamilyConfig)

    def __post_init__(self):
        if self.extrapolation not in EXTRAPOLATIONS:
            raise ValueError(f"extrapolation must be one of {EXTRAPOLATIONS}")
        if not 0 < self.cfl <= 1:
            raise ValueError("cfl must lie in (0, 1]")
        if self.fit_points < 2:
            raise ValueError("fit_points must be at least 2")
        object.__setattr__(self, "output", Path(self.output))

    def with_updates(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)


def _pair(v, name):
    v = tuple(float(x) for x in v)
    if len(v) != 2:
        raise ValueError(f"{name} needs two entries")
    return v


def _region(d: dict) -> RegionConfig:
    known = {"shape", "center", "radius", "lower", "upper"}
    unknown = set(d) - known
    if unknown:
        raise ValueError(f"unknown region keys {sorted(unknown)}")
    kw = {}
    if "shape" in d:
        kw["shape"] = str(d["shape"]).lower()
    for key in ("center", "lower", "upper"):
        if key in d:
            kw[key] = _pair(d[key], key)
    if "radius" in d:
        kw["radius"] = float(d["radius"])
    return RegionConfig(**kw)


def _float(v) -> float:
    if isinstance(v, str) and v.lower() in ("inf", "infinity"):
        return math.inf
    return float(v)


def config_from_dict(d: dict) -> ExperimentConfig:
    """Validate and convert a parsed TOML document."""
    d = dict(d)
    kw: dict = {}
    if "grid" in d:
        g = dict(d.pop("grid"))
        kw["grid"] = GridConfig(**g)
    if "norm" in d:
        kw["norm"] = NormSpec.from_dict(d.pop("norm"))
    for name in ("A", "B"):
        if name in d:
            kw[name] = _region(d.pop(name))
    if "ladder" in d:
        kw["ladder"] = LadderConfig(**d.pop("ladder"))
    if "heat" in d:
        kw["heat"] = HeatConfig(**d.pop("heat"))
    if "linearized" in d:
        s = dict(d.pop("linearized"))
        lk = {}
        for key in ("sigmas", "taus"):
            if key in s:
                lk[key] = tuple(float(x) for x in s.pop(key))
        if "D" in s:
            lk["D"] = _region(s.pop("D"))
        if "fallback" in s:
            lk["fallback"] = _pair(s.pop("fallback"), "fallback")
        if s:
            raise ValueError(f"unknown linearized keys {sorted(s)}")
        kw["linearized"] = LinearizedConfig(**lk)
    if "lp_family" in d:
        s = dict(d.pop("lp_family"))
        lk = {}
        if "p" in s:
            lk["ps"] = tuple(_float(x) for x in s.pop("p"))
        if "eps" in s:
            lk["eps"] = tuple(float(x) for x in s.pop("eps"))
        for key in ("monotone_tol", "stability_tol"):
            if key in s:
                lk[key] = float(s.pop(key))
        if s:
            raise ValueError(f"unknown lp_family keys {sorted(s)}")
        kw["lp_family"] = LpFamilyConfig(**lk)
    if "output" in d:
        kw["output"] = Path(d.pop("output"))
    for key, conv in (("cfl", float), ("extrapolation", str), ("fit_points", int), ("tolerance", float),
                      ("underflow_floor", float)):
        if key in d:
            kw[key] = conv(d.pop(key))
    if d:
        raise ValueError(f"unknown configuration keys {sorted(d)}")
    return ExperimentConfig(**kw)


def load_config(path) -> ExperimentConfig:
    """Parse a TOML file; a relative ``output`` is resolved against the
    current directory."""
    path = Path(path)
    with path.open("rb") as fh:
        data = tomllib.load(fh)
    return config_from_dict(data)
