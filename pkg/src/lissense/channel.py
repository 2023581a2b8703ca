"""Synthetic spherical-wave channel for the ceiling array.

Every emitter contributes a line-of-sight term plus one re-radiated term per
scatterer/human (single bounce, object treated as a point source at the
centroid of its top face).  The complex field over the lattice is then scaled
to an antenna output signal and calibrated circular Gaussian noise is added.

Amplitude conventions (global scale drops out of matched-filter magnitudes):
  LoS:       amp / d                * exp(-j 2 pi d / lambda)
  reflected: amp * refl / (d1 * d2) * exp(-j 2 pi (d1 + d2) / lambda)
with amp the emitter's complex baseband amplitude, d / d1 / d2 Euclidean 3-D
distances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scene import (Emitter, Human, LisArrayConfig, ScenarioConfig, Scatterer,
                    validate_config)

FREE_SPACE_IMPEDANCE = 120.0 * math.pi  # ohms


@dataclass(frozen=True)
class NoiseSpec:
    """Noise settings: target average SNR (None = noiseless), snapshot
    averaging count S, and the seed that makes draws reproducible."""

    snr_db: float | None
    averaging_count: int = 1
    rng_seed: int = 0

    @property
    def noiseless(self) -> bool:
        return self.snr_db is None or math.isinf(self.snr_db)


def element_positions(lis: LisArrayConfig, plane_height: float) -> np.ndarray:
    """(elements_y, elements_x, 3) world coordinates of the lattice, z = plane_height."""
    cols = lis.origin[0] + np.arange(lis.elements_x) * lis.spacing
    rows = lis.origin[1] + np.arange(lis.elements_y) * lis.spacing
    xg, yg = np.meshgrid(cols, rows)
    zg = np.full_like(xg, plane_height)
    return np.stack([xg, yg, zg], axis=-1)


def reradiation_point(obj: Scatterer | Human) -> tuple[float, float, float]:
    """Point from which a passive object re-radiates: centroid of its top face
    (the face nearest the ceiling array)."""
    return (obj.center[0], obj.center[1], obj.height)


def los_field(emitter: Emitter, element_pos, wavelength: float) -> complex:
    """Line-of-sight field sample at one element position."""
    ex, ey, ez = emitter.position
    px, py, pz = element_pos
    d = math.dist((ex, ey, ez), (px, py, pz))
    if d == 0.0:
        raise ValueError("emitter coincides with the array element")
    return emitter.amplitude / d * complex(math.cos(-2 * math.pi * d / wavelength),
                                           math.sin(-2 * math.pi * d / wavelength))


def virtual_source_field(emitter: Emitter, obj: Scatterer | Human,
                         element_pos, wavelength: float) -> complex:
    """Single-bounce field sample: emitter -> object top face -> element."""
    if obj.reflection_coeff == 0.0:
        return 0.0 + 0.0j
    q = reradiation_point(obj)
    d1 = math.dist(emitter.position, q)
    d2 = math.dist(q, element_pos)
    if d1 == 0.0 or d2 == 0.0:
        raise ValueError("zero-length propagation path through object")
    total = d1 + d2
    return (emitter.amplitude * obj.reflection_coeff / (d1 * d2)
            * complex(math.cos(-2 * math.pi * total / wavelength),
                      math.sin(-2 * math.pi * total / wavelength)))


def _distances(points: np.ndarray, target: tuple[float, float, float]) -> np.ndarray:
    diff = points - np.asarray(target, dtype=float)
    return np.sqrt(np.sum(diff * diff, axis=-1))


def superpose(cfg: ScenarioConfig) -> np.ndarray:
    """Noiseless complex field over the whole lattice, all emitters and
    single-bounce object paths summed; shape (elements_y, elements_x)."""
    violations = validate_config(cfg)
    if violations:
        raise ValueError("invalid scenario: " + "; ".join(violations))
    lam = cfg.lis.wavelength
    elements = element_positions(cfg.lis, cfg.room.height)
    field = np.zeros(elements.shape[:2], dtype=np.complex128)
    objects = list(cfg.scatterers) + list(cfg.humans)
    for emitter in cfg.emitters:
        d = _distances(elements, emitter.position)
        if np.any(d == 0.0):
            raise ValueError("emitter coincides with an array element")
        field += emitter.amplitude / d * np.exp(-2j * np.pi * d / lam)
        for obj in objects:
            if obj.reflection_coeff == 0.0:
                continue
            q = reradiation_point(obj)
            d1 = math.dist(emitter.position, q)
            d2 = _distances(elements, q)
            if d1 == 0.0 or np.any(d2 == 0.0):
                raise ValueError("zero-length propagation path through object")
            field += (emitter.amplitude * obj.reflection_coeff / (d1 * d2)
                      * np.exp(-2j * np.pi * (d1 + d2) / lam))
    return field


def field_to_signal_scale(wavelength: float) -> float:
    """sqrt(lambda^2 * Z_i / (4 pi Z_0)) with unit antenna impedance."""
    return math.sqrt(wavelength ** 2 / (4.0 * math.pi * FREE_SPACE_IMPEDANCE))


def calibrate_noise_variance(field: np.ndarray, snr_db: float,
                             wavelength: float) -> float:
    """Per-element noise variance that realizes the requested average SNR.

    Inverts  gamma = lambda^2 / (4 pi Z0 M sigma^2) * sum |E_i|^2  exactly.
    """
    energy = float(np.sum(np.abs(field) ** 2))
    if energy == 0.0:
        raise ValueError("all-zero field: SNR is undefined")
    gamma = 10.0 ** (snr_db / 10.0)
    m = field.size
    return (wavelength ** 2 * energy
            / (4.0 * math.pi * FREE_SPACE_IMPEDANCE * m * gamma))


def element_signal(field: np.ndarray, noise: NoiseSpec, wavelength: float,
                   rng: np.random.Generator | None = None) -> np.ndarray:
    """Antenna output signal: scaled field plus calibrated noise.

    With averaging_count S > 1 the returned grid is the mean of S independent
    noisy snapshots, so the effective noise variance is sigma^2 / S.
    """
    scaled = field_to_signal_scale(wavelength) * field.astype(np.complex128)
    if noise.noiseless:
        return scaled
    sigma2 = calibrate_noise_variance(field, noise.snr_db, wavelength)
    if rng is None:
        rng = np.random.default_rng(noise.rng_seed)
    s = noise.averaging_count
    draws = math.sqrt(sigma2 / 2.0) * (
        rng.standard_normal((s,) + field.shape)
        + 1j * rng.standard_normal((s,) + field.shape))
    return scaled + draws.mean(axis=0)


def simulate_received(cfg: ScenarioConfig,
                      rng: np.random.Generator | None = None) -> np.ndarray:
    """Convenience: superpose the scene and apply the antenna output stage
    using the scenario's own noise settings."""
    field = superpose(cfg)
    noise = NoiseSpec(cfg.snr_db, cfg.averaging_count, cfg.rng_seed)
    return element_signal(field, noise, cfg.lis.wavelength, rng=rng)
