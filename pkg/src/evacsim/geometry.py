"""Scenario files, grid rasterization, and obstacle distance fields.

A scenario file is a sectioned key-value document (configparser syntax) with
sections [domain], [obstacles], [exits], [fire], [population], [physics] and
[lattice].  Lengths are meters, times seconds.  The exact key set is listed in
the README and locked by a golden parse test.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np
from scipy import ndimage

from .fields import ScalarField
from .lattice import LatticeConfig

_EDGE_TOL = 1e-9


class ConfigError(Exception):
    """Base class for scenario-file problems."""


class MissingKeyError(ConfigError):
    """A required section or key is absent."""


class GeometryViolationError(ConfigError):
    """Obstacle outside the domain, exit off the boundary, fire touching an exit."""


class NonPositiveParameterError(ConfigError):
    """A parameter violates its positivity/sign constraint."""


class Cell(IntEnum):
    FREE = 0
    OBSTACLE = 1
    EXIT = 2
    FIRE = 3


# Outward side of a boundary cell, used for exit faces.
WEST, EAST, SOUTH, NORTH = 0, 1, 2, 3


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle [x0, x1] x [y0, y1]."""

    x0: float
    y0: float
    x1: float
    y1: float

    def contains(self, x, y) -> bool:
        return (self.x0 <= x) & (x <= self.x1) & (self.y0 <= y) & (y <= self.y1)


@dataclass(frozen=True)
class Segment:
    """Axis-aligned boundary segment from (x0, y0) to (x1, y1)."""

    x0: float
    y0: float
    x1: float
    y1: float


@dataclass(frozen=True)
class Physics:
    """Continuous-model parameters; every key has a documented default."""

    walk_effort: float = 1.0          # base cost per meter walked, > 0
    obstacle_range: float = 0.5       # repulsion range around obstacles [m], > 0
    walk_speed: float = 1.4           # active walking speed [m/s]
    sight_radius: float = 2.0         # clear-air sight radius [m]
    smoke_diffusivity: float = 0.2    # [m^2/s]
    drift: tuple[float, float] = (0.0, 0.0)   # smoke drift [m/s]
    smoke_production: float = 0.5     # source coefficient
    exit_exchange: float = 1.0        # Robin outflow coefficient at exits
    speed_base: float = 1.0           # speed factor in clear air
    speed_smoke_slope: float = 0.1    # speed factor lost per smoke unit
    passive_diffusion: tuple[tuple[float, float], tuple[float, float]] = ((0.1, 0.0), (0.0, 0.1))
    discomfort_radius: float = 0.75   # counting radius for the crowd-pressure field [m]
    awareness_radius: float = 2.0     # distance to the fire center that flips awareness [m]
    mollify_width: float = 0.5        # Gaussian width for the smoothed fire field [m]
    passive_noise: float = 0.15       # Brownian scale, second-order passive mode
    dynamics: str = "second_order"    # "second_order" or "overdamped"
    smoke_slows_active: bool = False  # scale walk_speed by speed_factor(s)/speed_base


@dataclass(frozen=True)
class Scenario:
    """Validated run geometry, population and parameters — one per scenario file."""

    width: float
    height: float
    grid_spacing: float
    obstacles: tuple[Rect, ...] = ()
    exits: tuple[Segment, ...] = ()
    fire_center: tuple[float, float] | None = None
    fire_radius: float = 0.0
    fire_intensity: float = 0.0
    n_active: int = 0
    n_passive: int = 0
    physics: Physics = field(default_factory=Physics)
    lattice: LatticeConfig | None = None

    @property
    def n_agents(self) -> int:
        return self.n_active + self.n_passive

    @property
    def area(self) -> float:
        return self.width * self.height


@dataclass
class GridMask:
    """Cell classification of a scenario on the simulation grid.

    ``cells[i, j]`` is the :class:`Cell` code of the cell centered at
    ``((i + 0.5) h, (j + 0.5) h)``.  ``exit_faces`` lists the outer boundary
    faces carrying the exit outflow as (i, j, side) triples.
    """

    nx: int
    ny: int
    h: float
    cells: np.ndarray
    exit_faces: tuple[tuple[int, int, int], ...] = ()

    def exit_cells(self) -> list[tuple[int, int]]:
        ii, jj = np.nonzero(self.cells == Cell.EXIT)
        return list(zip(ii.tolist(), jj.tolist()))

    def blank_field(self, fill: float = 0.0) -> ScalarField:
        return ScalarField(self.nx, self.ny, self.h, np.full((self.nx, self.ny), float(fill)))


def _cell_count(extent: float, h: float) -> int:
    # ceil with a slop guard so width/h landing a hair above an integer
    # (binary rounding) does not add a phantom row of cells
    return int(np.ceil(extent / h - 1e-9))


def _get(section, key, conv, *, where):
    try:
        raw = section[key]
    except KeyError:
        raise MissingKeyError(f"[{where}] is missing key '{key}'") from None
    try:
        return conv(raw)
    except ValueError:
        raise ConfigError(f"[{where}] {key} = {raw!r} cannot be parsed") from None


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(raw)


def _parse_quads(raw: str, where: str) -> list[tuple[float, float, float, float]]:
    quads = []
    for line in raw.splitlines():
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ConfigError(f"[{where}] expects 4 numbers per line, got {line!r}")
        quads.append(tuple(float(p) for p in parts))
    return quads


def _positive(name: str, value: float) -> float:
    if not value > 0:
        raise NonPositiveParameterError(f"{name} must be > 0, got {value}")
    return value


def _nonnegative(name: str, value: float) -> float:
    if value < 0:
        raise NonPositiveParameterError(f"{name} must be >= 0, got {value}")
    return value


def _segment_on_boundary(seg: Segment, width: float, height: float) -> int:
    """Return the edge constant a segment lies on, or raise GeometryViolationError."""
    tol = _EDGE_TOL * max(1.0, width, height)
    if abs(seg.x0) <= tol and abs(seg.x1) <= tol:
        edge = WEST
        span = (seg.y0, seg.y1)
    elif abs(seg.x0 - width) <= tol and abs(seg.x1 - width) <= tol:
        edge = EAST
        span = (seg.y0, seg.y1)
    elif abs(seg.y0) <= tol and abs(seg.y1) <= tol:
        edge = SOUTH
        span = (seg.x0, seg.x1)
    elif abs(seg.y0 - height) <= tol and abs(seg.y1 - height) <= tol:
        edge = NORTH
        span = (seg.x0, seg.x1)
    else:
        raise GeometryViolationError(f"exit segment {seg} does not lie on the domain boundary")
    limit = height if edge in (WEST, EAST) else width
    if min(span) < -tol or max(span) > limit + tol:
        raise GeometryViolationError(f"exit segment {seg} extends past the domain edge")
    return edge


def _point_segment_distance(px, py, seg: Segment) -> float:
    ax, ay, bx, by = seg.x0, seg.y0, seg.x1, seg.y1
    dx, dy = bx - ax, by - ay
    den = dx * dx + dy * dy
    t = 0.0 if den == 0 else max(0.0, min(1.0, ((px - ax) * dx + (py - ay) * dy) / den))
    qx, qy = ax + t * dx, ay + t * dy
    return float(np.hypot(px - qx, py - qy))


def _parse_lattice(section) -> LatticeConfig:
    n_cols = _get(section, "width", int, where="lattice") if "width" in section else 50
    n_rows = _get(section, "height", int, where="lattice") if "height" in section else 50
    _positive("lattice width", n_cols)
    _positive("lattice height", n_rows)
    door_width = int(section.get("door_width", "2"))
    _positive("door_width", door_width)
    door_inclusive = _parse_bool(section.get("door_inclusive", "true"))
    n_door = door_width + 1 if door_inclusive else door_width
    if "door_start" in section:
        door_start = int(section["door_start"])
    else:
        door_start = (n_cols - n_door) // 2 + 1
    drift_x = float(section.get("drift_x", "0.1"))
    drift_y = float(section.get("drift_y", "0.1"))
    _nonnegative("lattice drift_x", drift_x)
    _nonnegative("lattice drift_y", drift_y)
    occupancy = float(section.get("occupancy", "0.985"))
    if not 0.0 <= occupancy <= 1.0:
        raise NonPositiveParameterError(f"occupancy must be in [0, 1], got {occupancy}")
    aware = int(section["aware"]) if "aware" in section else None
    unaware = int(section["unaware"]) if "unaware" in section else None
    if (aware is None) != (unaware is None):
        raise MissingKeyError("[lattice] aware and unaware must be given together")
    if aware is not None:
        _nonnegative("lattice aware", aware)
        _nonnegative("lattice unaware", unaware)

    obstacle_sites = []
    if "obstacle_rects" in section:
        for i0, j0, i1, j1 in _parse_quads(section["obstacle_rects"], "lattice"):
            for idx in (i0, j0, i1, j1):
                if idx != int(idx):
                    raise ConfigError("[lattice] obstacle_rects entries must be integers")
            if not (1 <= i0 <= i1 <= n_cols and 1 <= j0 <= j1 <= n_rows):
                raise GeometryViolationError("lattice obstacle rect outside the lattice")
            for i in range(int(i0), int(i1) + 1):
                for j in range(int(j0), int(j1) + 1):
                    obstacle_sites.append((i, j))

    cfg = LatticeConfig(
        n_cols=n_cols,
        n_rows=n_rows,
        door_start=door_start,
        door_width=door_width,
        door_inclusive=door_inclusive,
        drift_x=drift_x,
        drift_y=drift_y,
        occupancy=occupancy,
        n_aware=aware,
        n_unaware=unaware,
        obstacle_sites=tuple(sorted(set(obstacle_sites))),
    )
    cfg.validate()
    return cfg


def parse_scenario(text: str) -> Scenario:
    """Parse and validate a scenario document given as a string."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse scenario file: {exc}") from exc

    if "domain" not in parser:
        raise MissingKeyError("scenario file has no [domain] section")
    dom = parser["domain"]
    width = _positive("width", _get(dom, "width", float, where="domain"))
    height = _positive("height", _get(dom, "height", float, where="domain"))
    h = _positive("grid_spacing", _get(dom, "grid_spacing", float, where="domain"))

    obstacles = []
    if "obstacles" in parser and "rects" in parser["obstacles"]:
        for x0, y0, x1, y1 in _parse_quads(parser["obstacles"]["rects"], "obstacles"):
            if not (x0 < x1 and y0 < y1):
                raise GeometryViolationError(f"degenerate obstacle rect {(x0, y0, x1, y1)}")
            if x0 < 0 or y0 < 0 or x1 > width or y1 > height:
                raise GeometryViolationError(f"obstacle {(x0, y0, x1, y1)} outside the domain")
            obstacles.append(Rect(x0, y0, x1, y1))

    if "exits" not in parser or "segments" not in parser["exits"]:
        raise MissingKeyError("scenario file needs an [exits] section with 'segments'")
    exits = []
    for x0, y0, x1, y1 in _parse_quads(parser["exits"]["segments"], "exits"):
        seg = Segment(x0, y0, x1, y1)
        _segment_on_boundary(seg, width, height)
        exits.append(seg)
    if not exits:
        raise MissingKeyError("[exits] segments lists no segment")

    fire_center = None
    fire_radius = 0.0
    fire_intensity = 0.0
    if "fire" in parser and len(parser["fire"]):
        f = parser["fire"]
        cx = _get(f, "center_x", float, where="fire")
        cy = _get(f, "center_y", float, where="fire")
        fire_radius = _positive("fire radius", _get(f, "radius", float, where="fire"))
        fire_intensity = _nonnegative("fire intensity", float(f.get("intensity", "1.0")))
        if not (0 <= cx <= width and 0 <= cy <= height):
            raise GeometryViolationError("fire center outside the domain")
        fire_center = (cx, cy)
        for seg in exits:
            if _point_segment_distance(cx, cy, seg) < fire_radius:
                raise GeometryViolationError("fire disc intersects an exit segment")

    n_active = n_passive = 0
    if "population" in parser:
        pop = parser["population"]
        n_active = int(pop.get("active", "0"))
        n_passive = int(pop.get("passive", "0"))
        _nonnegative("active count", n_active)
        _nonnegative("passive count", n_passive)

    phys_kwargs = {}
    if "physics" in parser:
        p = parser["physics"]
        known_scalar = {
            "walk_effort": "walk_effort",
            "obstacle_range": "obstacle_range",
            "walk_speed": "walk_speed",
            "sight_radius": "sight_radius",
            "smoke_diffusivity": "smoke_diffusivity",
            "smoke_production": "smoke_production",
            "exit_exchange": "exit_exchange",
            "speed_base": "speed_base",
            "speed_smoke_slope": "speed_smoke_slope",
            "discomfort_radius": "discomfort_radius",
            "awareness_radius": "awareness_radius",
            "mollify_width": "mollify_width",
            "passive_noise": "passive_noise",
        }
        for key, attr in known_scalar.items():
            if key in p:
                phys_kwargs[attr] = float(p[key])
        if "drift_x" in p or "drift_y" in p:
            phys_kwargs["drift"] = (float(p.get("drift_x", "0.0")), float(p.get("drift_y", "0.0")))
        if "passive_diffusion" in p:
            parts = [float(tok) for tok in p["passive_diffusion"].split()]
            if len(parts) == 1:
                d = parts[0]
                phys_kwargs["passive_diffusion"] = ((d, 0.0), (0.0, d))
            elif len(parts) == 4:
                phys_kwargs["passive_diffusion"] = ((parts[0], parts[1]), (parts[2], parts[3]))
            else:
                raise ConfigError("[physics] passive_diffusion takes 1 or 4 numbers")
        if "dynamics" in p:
            mode = p["dynamics"].strip().lower()
            if mode not in ("second_order", "overdamped"):
                raise ConfigError(f"[physics] dynamics must be second_order or overdamped, got {mode!r}")
            phys_kwargs["dynamics"] = mode
        if "smoke_slows_active" in p:
            phys_kwargs["smoke_slows_active"] = _parse_bool(p["smoke_slows_active"])
    physics = Physics(**phys_kwargs)
    for name in ("walk_effort", "obstacle_range", "walk_speed", "sight_radius",
                 "speed_base", "discomfort_radius", "awareness_radius"):
        _positive(name, getattr(physics, name))
    for name in ("smoke_diffusivity", "smoke_production", "exit_exchange",
                 "speed_smoke_slope", "mollify_width", "passive_noise"):
        _nonnegative(name, getattr(physics, name))

    lattice = _parse_lattice(parser["lattice"]) if "lattice" in parser else None

    return Scenario(
        width=width,
        height=height,
        grid_spacing=h,
        obstacles=tuple(obstacles),
        exits=tuple(exits),
        fire_center=fire_center,
        fire_radius=fire_radius,
        fire_intensity=fire_intensity,
        n_active=n_active,
        n_passive=n_passive,
        physics=physics,
        lattice=lattice,
    )


def build_scenario(path) -> Scenario:
    """Read and validate a scenario file."""
    text = Path(path).read_text()
    return parse_scenario(text)


def scenario_hash(path) -> str:
    """Content hash of a scenario file, recorded in run outputs."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def rasterize(scenario: Scenario) -> GridMask:
    """Classify every grid cell by its center: Obstacle > Fire > Exit > Free."""
    h = scenario.grid_spacing
    nx = _cell_count(scenario.width, h)
    ny = _cell_count(scenario.height, h)
    cells = np.full((nx, ny), int(Cell.FREE), dtype=np.int8)
    cx = (np.arange(nx) + 0.5) * h
    cy = (np.arange(ny) + 0.5) * h
    gx, gy = np.meshgrid(cx, cy, indexing="ij")

    fire_mask = np.zeros((nx, ny), dtype=bool)
    if scenario.fire_center is not None:
        fx, fy = scenario.fire_center
        fire_mask = (gx - fx) ** 2 + (gy - fy) ** 2 < scenario.fire_radius ** 2

    exit_mask = np.zeros((nx, ny), dtype=bool)
    faces = set()
    for seg in scenario.exits:
        edge = _segment_on_boundary(seg, scenario.width, scenario.height)
        if edge in (WEST, EAST):
            i = 0 if edge == WEST else nx - 1
            lo, hi = sorted((seg.y0, seg.y1))
            js = np.nonzero((cy >= lo) & (cy <= hi))[0]
            for j in js:
                exit_mask[i, j] = True
                faces.add((i, int(j), edge))
        else:
            j = 0 if edge == SOUTH else ny - 1
            lo, hi = sorted((seg.x0, seg.x1))
            is_ = np.nonzero((cx >= lo) & (cx <= hi))[0]
            for i in is_:
                exit_mask[i, j] = True
                faces.add((int(i), j, edge))

    cells[exit_mask] = int(Cell.EXIT)
    cells[fire_mask] = int(Cell.FIRE)
    obstacle_mask = np.zeros((nx, ny), dtype=bool)
    for rect in scenario.obstacles:
        obstacle_mask |= rect.contains(gx, gy)
    cells[obstacle_mask] = int(Cell.OBSTACLE)

    faces = tuple(sorted(f for f in faces if cells[f[0], f[1]] == Cell.EXIT))
    return GridMask(nx=nx, ny=ny, h=h, cells=cells, exit_faces=faces)


def distance_to_obstacles(mask: GridMask) -> ScalarField:
    """Euclidean distance from each cell center to the nearest obstacle cell center.

    0 on obstacle cells; +inf everywhere when the grid has no obstacles.
    """
    obstacle = mask.cells == Cell.OBSTACLE
    if not obstacle.any():
        return ScalarField(mask.nx, mask.ny, mask.h,
                           np.full((mask.nx, mask.ny), np.inf))
    dist = ndimage.distance_transform_edt(~obstacle, sampling=mask.h)
    return ScalarField(mask.nx, mask.ny, mask.h, dist)
