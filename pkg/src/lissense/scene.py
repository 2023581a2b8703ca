"""Scene geometry: room, ceiling array, emitters, scatterers, humans.

All types are frozen dataclasses; a scenario is immutable once built and
safe to share between threads.  The pixel lattice of every map produced
downstream coincides with the array element lattice, so the pixel->world
mapping lives here next to the array geometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import yaml

SPEED_OF_LIGHT = 299792458.0

DEFAULT_CARRIER_HZ = 3.5e9
DEFAULT_TX_POWER_DBM = 20.0
DEFAULT_EMITTER_HEIGHT_M = 1.8
# Scalar amplitude reflection coefficients standing in for full material
# modeling; chosen so human echoes are weaker than metal echoes.
SCATTERER_REFLECTION = 0.7
HUMAN_REFLECTION = 0.35


def wavelength(frequency_hz: float) -> float:
    """Free-space wavelength in meters."""
    if frequency_hz <= 0:
        raise ValueError(f"carrier frequency must be > 0, got {frequency_hz}")
    return SPEED_OF_LIGHT / frequency_hz


@dataclass(frozen=True)
class RoomGeometry:
    """Axis-aligned room; the array plane sits at z = height."""

    length_x: float
    length_y: float
    height: float


@dataclass(frozen=True)
class LisArrayConfig:
    """Ceiling array lattice: elements_x x elements_y, pitch `spacing` meters.

    `origin` is the world (x, y) of element (0, 0); element (col, row) sits at
    origin + (col, row) * spacing, at z = room height.
    """

    elements_x: int
    elements_y: int
    spacing: float
    carrier_frequency: float = DEFAULT_CARRIER_HZ
    origin: tuple[float, float] = (0.0, 0.0)

    @property
    def total_elements(self) -> int:
        return self.elements_x * self.elements_y

    @property
    def wavelength(self) -> float:
        return wavelength(self.carrier_frequency)

    def footprint(self) -> tuple[float, float]:
        """(x, y) extent of the lattice in meters."""
        return ((self.elements_x - 1) * self.spacing,
                (self.elements_y - 1) * self.spacing)


@dataclass(frozen=True)
class Emitter:
    """Active transmitter at a world position, narrowband unit symbol."""

    position: tuple[float, float, float]
    tx_power: float = DEFAULT_TX_POWER_DBM  # dBm
    symbol_phase: float = 0.0  # radians, per snapshot

    @property
    def amplitude(self) -> complex:
        """Complex baseband amplitude: sqrt(watts) at the stated phase."""
        watts = 10.0 ** ((self.tx_power - 30.0) / 10.0)
        return math.sqrt(watts) * complex(math.cos(self.symbol_phase),
                                          math.sin(self.symbol_phase))


@dataclass(frozen=True)
class Scatterer:
    """Static cylindrical reflector (e.g. metal furniture)."""

    center: tuple[float, float]
    radius: float = 0.5
    height: float = 2.0
    reflection_coeff: float = SCATTERER_REFLECTION


@dataclass(frozen=True)
class Human:
    """Passive person, modeled as an axis-aligned box footprint."""

    center: tuple[float, float]
    extent_x: float = 0.3
    extent_y: float = 0.5
    height: float = 1.7
    reflection_coeff: float = HUMAN_REFLECTION


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete description of one simulated scene."""

    room: RoomGeometry
    lis: LisArrayConfig
    emitters: tuple[Emitter, ...] = ()
    scatterers: tuple[Scatterer, ...] = ()
    humans: tuple[Human, ...] = ()
    snr_db: float | None = None  # None = noiseless
    averaging_count: int = 1
    rng_seed: int = 0

    def with_emitters(self, emitters) -> "ScenarioConfig":
        return replace(self, emitters=tuple(emitters))

    def with_humans(self, humans) -> "ScenarioConfig":
        return replace(self, humans=tuple(humans))


def pixel_to_world(pixel: tuple[int, int], lis: LisArrayConfig) -> tuple[float, float]:
    """Map an integer (col, row) lattice pixel to world (x, y) meters.

    Raises ValueError for pixels outside the lattice.
    """
    col, row = pixel
    if not (0 <= col < lis.elements_x and 0 <= row < lis.elements_y):
        raise ValueError(
            f"pixel {pixel!r} outside lattice "
            f"{lis.elements_x}x{lis.elements_y}")
    return lattice_to_world(col, row, lis)


def lattice_to_world(col: float, row: float, lis: LisArrayConfig) -> tuple[float, float]:
    """Affine pixel->world mapping, also valid for fractional coordinates."""
    return (lis.origin[0] + col * lis.spacing,
            lis.origin[1] + row * lis.spacing)


def world_to_pixel(xy: tuple[float, float], lis: LisArrayConfig) -> tuple[int, int]:
    """Nearest lattice pixel (col, row) for a world (x, y); clipped to the lattice."""
    col = round((xy[0] - lis.origin[0]) / lis.spacing)
    row = round((xy[1] - lis.origin[1]) / lis.spacing)
    col = min(max(col, 0), lis.elements_x - 1)
    row = min(max(row, 0), lis.elements_y - 1)
    return int(col), int(row)


def validate_config(cfg: ScenarioConfig) -> list[str]:
    """Check every scenario invariant; returns a deterministically ordered
    list of human-readable violations (empty list = valid)."""
    v: list[str] = []
    room = cfg.room
    if room.length_x <= 0 or room.length_y <= 0 or room.height <= 0:
        v.append(f"room: all dimensions must be > 0, got "
                 f"{room.length_x} x {room.length_y} x {room.height}")

    lis = cfg.lis
    if lis.elements_x < 1 or lis.elements_y < 1:
        v.append(f"lis: element counts must be >= 1, got "
                 f"{lis.elements_x} x {lis.elements_y}")
    if lis.spacing <= 0:
        v.append(f"lis: spacing must be > 0, got {lis.spacing}")
    if lis.carrier_frequency <= 0:
        v.append(f"lis: carrier frequency must be > 0, got {lis.carrier_frequency}")
    if lis.elements_x >= 1 and lis.elements_y >= 1 and lis.spacing > 0:
        ext_x, ext_y = lis.footprint()
        ox, oy = lis.origin
        if ox < 0 or oy < 0 or ox + ext_x > room.length_x or oy + ext_y > room.length_y:
            v.append(
                f"lis: footprint {ext_x:.3f} x {ext_y:.3f} m at origin "
                f"({ox:.3f}, {oy:.3f}) does not fit inside room "
                f"{room.length_x} x {room.length_y} m")

    for i, e in enumerate(cfg.emitters):
        x, y, z = e.position
        if not (0 <= x <= room.length_x and 0 <= y <= room.length_y):
            v.append(f"emitter[{i}]: (x, y) = ({x}, {y}) outside room")
        if z >= room.height:
            v.append(f"emitter[{i}]: z = {z} on or above the LIS plane "
                     f"(room height {room.height})")
        elif z <= 0:
            v.append(f"emitter[{i}]: z = {z} must be > 0")

    for i, s in enumerate(cfg.scatterers):
        cx, cy = s.center
        if s.radius <= 0:
            v.append(f"scatterer[{i}]: radius must be > 0, got {s.radius}")
        elif not (cx - s.radius >= 0 and cx + s.radius <= room.length_x
                  and cy - s.radius >= 0 and cy + s.radius <= room.length_y):
            v.append(f"scatterer[{i}]: footprint outside room")
        if not 0 < s.height < room.height:
            v.append(f"scatterer[{i}]: height {s.height} not in (0, {room.height})")
        if not 0 < s.reflection_coeff <= 1:
            v.append(f"scatterer[{i}]: reflection_coeff {s.reflection_coeff} "
                     f"not in (0, 1]")

    for i, h in enumerate(cfg.humans):
        cx, cy = h.center
        if h.extent_x <= 0 or h.extent_y <= 0:
            v.append(f"human[{i}]: extents must be > 0")
        elif not (cx - h.extent_x / 2 >= 0 and cx + h.extent_x / 2 <= room.length_x
                  and cy - h.extent_y / 2 >= 0 and cy + h.extent_y / 2 <= room.length_y):
            v.append(f"human[{i}]: footprint outside room")
        if not 0 < h.height < room.height:
            v.append(f"human[{i}]: height {h.height} not in (0, {room.height})")
        if not 0 < h.reflection_coeff <= 1:
            v.append(f"human[{i}]: reflection_coeff {h.reflection_coeff} not in (0, 1]")
        elif h.reflection_coeff >= SCATTERER_REFLECTION:
            v.append(f"human[{i}]: reflection_coeff {h.reflection_coeff} must stay "
                     f"below the scatterer default {SCATTERER_REFLECTION} "
                     f"(humans reflect less than metal)")

    if cfg.snr_db is not None and not math.isfinite(cfg.snr_db):
        v.append(f"snr_db must be finite or None (noiseless), got {cfg.snr_db}")
    if cfg.averaging_count < 1:
        v.append(f"averaging_count: S must be >= 1, got {cfg.averaging_count}")
    return v


def centered_lis(room: RoomGeometry, elements_x: int, elements_y: int,
                 carrier_frequency: float = DEFAULT_CARRIER_HZ,
                 spacing: float | None = None) -> LisArrayConfig:
    """Half-wavelength-spaced array centered in the room (spacing overridable)."""
    if spacing is None:
        spacing = wavelength(carrier_frequency) / 2.0
    ext_x = (elements_x - 1) * spacing
    ext_y = (elements_y - 1) * spacing
    return LisArrayConfig(
        elements_x=elements_x, elements_y=elements_y, spacing=spacing,
        carrier_frequency=carrier_frequency,
        origin=((room.length_x - ext_x) / 2.0, (room.length_y - ext_y) / 2.0))


def full_scale_scenario(snr_db: float | None = None, averaging_count: int = 1,
                        rng_seed: int = 0) -> ScenarioConfig:
    """Full-size reference scene: 10.34 x 10.34 x 8 m room, ceiling array at
    half-wavelength pitch, 3.5 GHz.

    At exactly lambda/2 the nominal 259-per-side lattice would overhang a
    10.34 m room, so the element count is reduced to the largest lattice that
    fits; spacing is kept at exactly lambda/2.
    """
    room = RoomGeometry(10.34, 10.34, 8.0)
    pitch = wavelength(DEFAULT_CARRIER_HZ) / 2.0
    n = int(math.floor(room.length_x / pitch)) + 1
    return ScenarioConfig(room=room, lis=centered_lis(room, n, n),
                          snr_db=snr_db, averaging_count=averaging_count,
                          rng_seed=rng_seed)


def scaled_scenario(elements_per_side: int = 129, room_margin: float = 0.3,
                    snr_db: float | None = None, averaging_count: int = 1,
                    rng_seed: int = 0) -> ScenarioConfig:
    """Desk-scale scene for fast experiments: room sized to the array
    footprint plus `room_margin` meters on each side, full 8 m height."""
    pitch = wavelength(DEFAULT_CARRIER_HZ) / 2.0
    ext = (elements_per_side - 1) * pitch
    room = RoomGeometry(ext + 2 * room_margin, ext + 2 * room_margin, 8.0)
    return ScenarioConfig(
        room=room, lis=centered_lis(room, elements_per_side, elements_per_side),
        snr_db=snr_db, averaging_count=averaging_count, rng_seed=rng_seed)


# --- scenario files -------------------------------------------------------
#
# One scenario per YAML file, keys mirroring the dataclass fields.

def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    return {
        "room": {"length_x": cfg.room.length_x, "length_y": cfg.room.length_y,
                 "height": cfg.room.height},
        "lis": {"elements_x": cfg.lis.elements_x, "elements_y": cfg.lis.elements_y,
                "spacing": cfg.lis.spacing,
                "carrier_frequency": cfg.lis.carrier_frequency,
                "origin": list(cfg.lis.origin)},
        "emitters": [{"position": list(e.position), "tx_power": e.tx_power,
                      "symbol_phase": e.symbol_phase} for e in cfg.emitters],
        "scatterers": [{"center": list(s.center), "radius": s.radius,
                        "height": s.height, "reflection_coeff": s.reflection_coeff}
                       for s in cfg.scatterers],
        "humans": [{"center": list(h.center), "extent_x": h.extent_x,
                    "extent_y": h.extent_y, "height": h.height,
                    "reflection_coeff": h.reflection_coeff} for h in cfg.humans],
        "snr_db": cfg.snr_db,
        "averaging_count": cfg.averaging_count,
        "rng_seed": cfg.rng_seed,
    }


def scenario_from_dict(d: dict) -> ScenarioConfig:
    room = RoomGeometry(**d["room"])
    lis_d = dict(d["lis"])
    lis_d["origin"] = tuple(lis_d.get("origin", (0.0, 0.0)))
    lis = LisArrayConfig(**lis_d)
    emitters = tuple(
        Emitter(position=tuple(e["position"]),
                tx_power=e.get("tx_power", DEFAULT_TX_POWER_DBM),
                symbol_phase=e.get("symbol_phase", 0.0))
        for e in d.get("emitters") or ())
    scatterers = tuple(
        Scatterer(center=tuple(s["center"]), radius=s.get("radius", 0.5),
                  height=s.get("height", 2.0),
                  reflection_coeff=s.get("reflection_coeff", SCATTERER_REFLECTION))
        for s in d.get("scatterers") or ())
    humans = tuple(
        Human(center=tuple(h["center"]), extent_x=h.get("extent_x", 0.3),
              extent_y=h.get("extent_y", 0.5), height=h.get("height", 1.7),
              reflection_coeff=h.get("reflection_coeff", HUMAN_REFLECTION))
        for h in d.get("humans") or ())
    return ScenarioConfig(room=room, lis=lis, emitters=emitters,
                          scatterers=scatterers, humans=humans,
                          snr_db=d.get("snr_db"),
                          averaging_count=d.get("averaging_count", 1),
                          rng_seed=d.get("rng_seed", 0))


def canonical_yaml(cfg: ScenarioConfig) -> str:
    """Stable, human-readable rendering used by `validate` and round-trips."""
    return yaml.safe_dump(scenario_to_dict(cfg), sort_keys=True,
                          default_flow_style=None)


def load_scenario(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: scenario file must hold a mapping")
    return scenario_from_dict(data)


def save_scenario(cfg: ScenarioConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_yaml(cfg))
