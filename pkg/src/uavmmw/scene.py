"""World geometry for the air-to-ground scenarios.

A scene is a flat rectangular terrain with a ground material, axis-aligned
box buildings, foliage blocks (attenuation only) and, over the sea, two
metallic ships.  Layouts are drawn from :class:`uavmmw.rng.XorShift64Star`
so that ``generate_scenario(kind, seed)`` is reproducible everywhere.

Default layout (all lengths in metres, terrain origin at one corner)::

    terrain            10 000 x 10 000
    transmitter        (4000, 5000), 2 m above ground
    flight line        y = 5000, x from 4050 to 6050
    building corridor  x in [4050, 6050], y in [4500, 5500]
    street             |y - 5000| < 20 is kept free of buildings and foliage
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.constants import epsilon_0

from .errors import ModelValidityError, SceneGenerationError, UnsupportedMaterialError
from .rng import XorShift64Star

TERRAIN_SIZE = (10_000.0, 10_000.0)
TX_GROUND = (4000.0, 5000.0)
TX_HEIGHT = 2.0
TRAJECTORY_START_OFFSET = 50.0
TRAJECTORY_LENGTH = 2000.0
CORRIDOR_LENGTH = 2000.0
CORRIDOR_WIDTH = 1000.0
STREET_HALF_WIDTH = 20.0
MIN_GAP = 2.0
MAX_PLACEMENT_TRIES = 2000

FREQ_RANGE = (10e9, 100e9)


class MaterialKind(Enum):
    CONCRETE = "concrete"
    DRY_GROUND = "dry_ground"
    SEA_WATER = "sea_water"
    PERFECT_CONDUCTOR = "pec"
    FOLIAGE = "foliage"


class ScenarioKind(Enum):
    OVER_SEA = "oversea"
    RURAL = "rural"
    SUBURBAN = "suburban"
    URBAN = "urban"


# (building height range, building count); over sea has ships instead
SCENARIO_TABLE = {
    ScenarioKind.OVER_SEA: (None, 0),
    ScenarioKind.RURAL: ((4.0, 8.0), 10),
    ScenarioKind.SUBURBAN: ((4.0, 30.0), 20),
    ScenarioKind.URBAN: ((70.0, 180.0), 100),
}
FOOTPRINT_SIDE = {ScenarioKind.URBAN: (10.0, 40.0)}
DEFAULT_FOOTPRINT_SIDE = (8.0, 20.0)
FOLIAGE_COUNT = {ScenarioKind.RURAL: 5, ScenarioKind.SUBURBAN: 8}
FOLIAGE_HEIGHT = (4.0, 10.0)

# Infinite-conductivity marker; fresnel_reflection treats it as the PEC limit.
PEC = complex(1.0, -math.inf)


def is_perfect_conductor(eta: complex) -> bool:
    return math.isinf(eta.imag)


def _sea_water_permittivity(f_ghz, temperature=20.0, salinity=35.0):
    # Double-Debye sea water model (ITU-R P.527-6 / Meissner-Wentz coefficients)
    t, s = temperature, salinity
    eps_s = (3.70886e4 - 8.2168e1 * t) / (4.21854e2 + t)
    eps_1 = 5.7230 + 2.2379e-2 * t - 7.1237e-4 * t**2
    f_1 = (45.0 + t) / (5.0478 - 7.0315e-2 * t + 6.0059e-4 * t**2)
    eps_inf = 3.6143 + 2.8841e-2 * t
    f_2 = (45.0 + t) / (1.3652e-1 + 1.4825e-3 * t + 2.4166e-4 * t**2)

    eps_s *= math.exp(-3.56417e-3 * s + 4.74868e-6 * s**2 + 1.15574e-5 * t * s)
    f_1 *= 1.0 + s * (2.39357e-3 - 3.13530e-5 * t + 2.52477e-7 * t**2)
    eps_1 *= math.exp(-6.28908e-3 * s + 1.76032e-4 * s**2 - 9.22144e-5 * t * s)
    f_2 *= 1.0 + s * (-1.99723e-2 + 1.81176e-4 * t)
    eps_inf *= 1.0 + s * (-2.04265e-3 + 1.57883e-4 * t)

    sigma_35 = 2.903602 + 8.607e-2 * t + 4.738817e-4 * t**2 - 2.991e-6 * t**3 + 4.3047e-9 * t**4
    r_15 = s * (37.5109 + 5.45216 * s + 1.4409e-2 * s**2) / (1004.75 + 182.283 * s + s**2)
    alpha_0 = (6.9431 + 3.2841 * s - 9.9486e-2 * s**2) / (84.850 + 69.024 * s + s**2)
    alpha_1 = 49.843 - 0.2276 * s + 0.198e-2 * s**2
    sigma = sigma_35 * r_15 * (1.0 + alpha_0 * (t - 15.0) / (alpha_1 + t))

    eps = (
        (eps_s - eps_1) / (1.0 + 1j * f_ghz / f_1)
        + (eps_1 - eps_inf) / (1.0 + 1j * f_ghz / f_2)
        + eps_inf
    )
    return eps - 1j * sigma / (2.0 * math.pi * epsilon_0 * f_ghz * 1e9)


def material_permittivity(kind: MaterialKind, f_c: float) -> complex:
    """Complex relative permittivity ``eps' - j*sigma/(2*pi*f*eps0)``.

    Concrete follows ITU-R P.2040 (eps' = 5.31, sigma = 0.0326 f_GHz^0.8095),
    dry ground uses eps' = 15 and a band-flat sigma = 0.035 S/m, sea water is
    the 20 degC / 35 g/kg Debye model, and metal returns :data:`PEC`.
    """
    if kind is MaterialKind.FOLIAGE:
        raise UnsupportedMaterialError("foliage is modelled as attenuation only")
    if not FREQ_RANGE[0] <= f_c <= FREQ_RANGE[1]:
        raise ModelValidityError(f"carrier {f_c:g} Hz outside the 10-100 GHz model range")
    if kind is MaterialKind.PERFECT_CONDUCTOR:
        return PEC
    f_ghz = f_c / 1e9
    if kind is MaterialKind.CONCRETE:
        eps_r, sigma = 5.31, 0.0326 * f_ghz**0.8095
    elif kind is MaterialKind.DRY_GROUND:
        eps_r, sigma = 15.0, 0.035
    elif kind is MaterialKind.SEA_WATER:
        return complex(_sea_water_permittivity(f_ghz))
    else:  # pragma: no cover
        raise UnsupportedMaterialError(str(kind))
    return complex(eps_r, -sigma / (2.0 * math.pi * f_c * epsilon_0))


@dataclass(frozen=True)
class Building:
    """Axis-aligned box standing on the ground."""

    x0: float
    y0: float
    x1: float
    y1: float
    height: float
    material: MaterialKind = MaterialKind.CONCRETE

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError("building footprint must have positive area")
        if self.height <= 0:
            raise ValueError("building height must be positive")

    @property
    def footprint(self):
        return ((self.x0, self.y0), (self.x1, self.y0), (self.x1, self.y1), (self.x0, self.y1))

    @property
    def area(self):
        return (self.x1 - self.x0) * (self.y1 - self.y0)


@dataclass(frozen=True)
class FoliageBlock:
    x0: float
    y0: float
    x1: float
    y1: float
    z0: float
    z1: float

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0 and self.z1 > self.z0):
            raise ValueError("foliage block must have positive volume")


@dataclass(frozen=True)
class Scene:
    """Immutable scene; safe to share between worker processes."""

    kind: ScenarioKind | None
    seed: int
    ground: MaterialKind
    buildings: tuple[Building, ...] = ()
    foliage: tuple[FoliageBlock, ...] = ()
    ships: tuple[Building, ...] = ()
    extent: tuple[float, float] = TERRAIN_SIZE

    def __post_init__(self):
        w, d = self.extent
        for b in self.buildings + self.ships:
            if b.x0 < 0 or b.y0 < 0 or b.x1 > w or b.y1 > d:
                raise ValueError("building footprint outside terrain bounds")
        if self.ground is MaterialKind.FOLIAGE:
            raise ValueError("foliage cannot be a ground material")

    @property
    def obstacles(self) -> tuple[Building, ...]:
        """Opaque boxes: buildings followed by ships."""
        return self.buildings + self.ships

    def contains(self, point) -> bool:
        w, d = self.extent
        return 0.0 <= point[0] <= w and 0.0 <= point[1] <= d


@dataclass(frozen=True)
class TrajectorySpec:
    start: tuple[float, float, float]
    heading: tuple[float, float, float] = (1.0, 0.0, 0.0)
    length: float = TRAJECTORY_LENGTH
    height: float | None = None
    speed: float = 15.0
    spacing: float = 1.0

    def __post_init__(self):
        if self.length < 0 or self.spacing <= 0:
            raise ValueError("trajectory needs length >= 0 and spacing > 0")
        if self.height is not None and self.height < 0:
            raise ValueError("trajectory height must be >= 0")
        hx, hy, hz = self.heading
        if abs(hz) > 1e-12 or abs(math.hypot(hx, hy) - 1.0) > 1e-9:
            raise ValueError("heading must be a horizontal unit vector")


def default_trajectory(height: float, spacing: float = 1.0, length: float = TRAJECTORY_LENGTH,
                       start_offset: float = TRAJECTORY_START_OFFSET) -> TrajectorySpec:
    """Straight flight along +x starting ``start_offset`` metres past the transmitter."""
    return TrajectorySpec(
        start=(TX_GROUND[0] + start_offset, TX_GROUND[1], height),
        length=length,
        height=height,
        spacing=spacing,
    )


def default_tx(height: float = TX_HEIGHT):
    return np.array([TX_GROUND[0], TX_GROUND[1], height])


def trajectory_samples(spec: TrajectorySpec) -> np.ndarray:
    """Receiver positions, shape ``(n, 3)``, at uniform spacing along the line.

    ``n = floor(length / spacing) + 1``; the last sample is the end point only
    when ``length`` is a multiple of ``spacing``.
    """
    n = int(math.floor(spec.length / spec.spacing + 1e-9)) + 1
    start = np.asarray(spec.start, dtype=float)
    if spec.height is not None:
        start = np.array([start[0], start[1], spec.height])
    steps = np.arange(n) * spec.spacing
    return start + steps[:, None] * np.asarray(spec.heading, dtype=float)


def _overlaps(box, others, gap):
    x0, y0, x1, y1 = box
    for ox0, oy0, ox1, oy1 in others:
        if x0 < ox1 + gap and ox0 < x1 + gap and y0 < oy1 + gap and oy0 < y1 + gap:
            return True
    return False


def _place(rng, side_range, taken, seed, what):
    cx0 = TX_GROUND[0] + TRAJECTORY_START_OFFSET
    cy0 = TX_GROUND[1] - CORRIDOR_WIDTH / 2
    street = (TX_GROUND[1] - STREET_HALF_WIDTH, TX_GROUND[1] + STREET_HALF_WIDTH)
    for _ in range(MAX_PLACEMENT_TRIES):
        w = rng.uniform(*side_range)
        d = rng.uniform(*side_range)
        x0 = rng.uniform(cx0, cx0 + CORRIDOR_LENGTH - w)
        y0 = rng.uniform(cy0, cy0 + CORRIDOR_WIDTH - d)
        box = (x0, y0, x0 + w, y0 + d)
        if y0 < street[1] and y0 + d > street[0]:
            continue
        if _overlaps(box, taken, MIN_GAP):
            continue
        taken.append(box)
        return box
    raise SceneGenerationError(f"could not place {what} {len(taken)}", seed=seed)


def _ships(rng):
    # Placeholder hulls: 120 m x 20 m, 25 m tall, one on each side of the flight line.
    ships = []
    for side in (1.0, -1.0):
        x0 = rng.uniform(TX_GROUND[0] + 300.0, TX_GROUND[0] + 1700.0)
        offset = rng.uniform(60.0, 300.0)
        y_near = TX_GROUND[1] + side * offset
        y0, y1 = (y_near, y_near + 20.0) if side > 0 else (y_near - 20.0, y_near)
        ships.append(Building(x0, y0, x0 + 120.0, y1, 25.0, MaterialKind.PERFECT_CONDUCTOR))
    return tuple(ships)


def generate_scenario(kind: ScenarioKind, seed: int) -> Scene:
    """Build the scene for ``kind`` deterministically from ``seed``.

    Draw order per building: width, depth, x, y (repeated on rejection), then
    height.  Foliage blocks are placed after all buildings the same way, with
    their height drawn last.
    """
    kind = ScenarioKind(kind)
    rng = XorShift64Star(seed)
    if kind is ScenarioKind.OVER_SEA:
        return Scene(kind, seed, MaterialKind.SEA_WATER, ships=_ships(rng))

    (h_lo, h_hi), count = SCENARIO_TABLE[kind]
    side = FOOTPRINT_SIDE.get(kind, DEFAULT_FOOTPRINT_SIDE)
    taken = []
    buildings = []
    for _ in range(count):
        x0, y0, x1, y1 = _place(rng, side, taken, seed, "building")
        buildings.append(Building(x0, y0, x1, y1, rng.uniform(h_lo, h_hi)))

    foliage = []
    for _ in range(FOLIAGE_COUNT.get(kind, 0)):
        x0, y0, x1, y1 = _place(rng, DEFAULT_FOOTPRINT_SIDE, taken, seed, "foliage block")
        foliage.append(FoliageBlock(x0, y0, x1, y1, 0.0, rng.uniform(*FOLIAGE_HEIGHT)))

    return Scene(kind, seed, MaterialKind.DRY_GROUND, tuple(buildings), tuple(foliage))


def bare_scene(ground: MaterialKind = MaterialKind.DRY_GROUND) -> Scene:
    """Flat terrain with no objects (two-ray reference geometry)."""
    return Scene(None, 0, ground)


# -- text format ------------------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def export_scene(scene: Scene) -> str:
    """Serialize to the line-oriented ``scene v1`` text format (see docs/formats.md)."""
    kind = scene.kind.value if scene.kind is not None else "bare"
    lines = [f"scene v1 {kind} {scene.seed}",
             f"terrain {_fmt(scene.extent[0])} {_fmt(scene.extent[1])} {scene.ground.value}"]
    for b in scene.buildings:
        lines.append(f"building {_fmt(b.x0)} {_fmt(b.y0)} {_fmt(b.x1)} {_fmt(b.y1)} "
                     f"{_fmt(b.height)} {b.material.value}")
    for f in scene.foliage:
        lines.append(f"foliage {_fmt(f.x0)} {_fmt(f.y0)} {_fmt(f.x1)} {_fmt(f.y1)} "
                     f"{_fmt(f.z0)} {_fmt(f.z1)}")
    for s in scene.ships:
        lines.append(f"ship {_fmt(s.x0)} {_fmt(s.y0)} {_fmt(s.x1)} {_fmt(s.y1)} "
                     f"{_fmt(s.height)} {s.material.value}")
    return "\n".join(lines) + "\n"


def import_scene(text: str) -> Scene:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty scene text")
    head = lines[0].split()
    if len(head) != 4 or head[:2] != ["scene", "v1"]:
        raise ValueError(f"bad scene header: {lines[0]!r}")
    kind = None if head[2] == "bare" else ScenarioKind(head[2])
    seed = int(head[3])
    extent, ground = TERRAIN_SIZE, MaterialKind.DRY_GROUND
    buildings, foliage, ships = [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        tag, *rest = line.split()
        try:
            if tag == "terrain":
                extent, ground = (float(rest[0]), float(rest[1])), MaterialKind(rest[2])
            elif tag in ("building", "ship"):
                x0, y0, x1, y1, h = map(float, rest[:5])
                box = Building(x0, y0, x1, y1, h, MaterialKind(rest[5]))
                (buildings if tag == "building" else ships).append(box)
            elif tag == "foliage":
                foliage.append(FoliageBlock(*map(float, rest[:6])))
            else:
                raise ValueError(f"unknown object {tag!r}")
        except (IndexError, ValueError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
    return Scene(kind, seed, ground, tuple(buildings), tuple(foliage), tuple(ships), extent)
