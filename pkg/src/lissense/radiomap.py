"""Near-field matched filtering: kernel design and radio-map formation.

The filter kernel samples the expected spherical wavefront from a point
source at a chosen depth below the array; sliding its conjugate over the
received-signal lattice (2-D "same" correlation, zero-padded borders) yields
a magnitude map whose bright spots mark real and virtual sources.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .channel import simulate_received
from .scene import LisArrayConfig, RoomGeometry, ScenarioConfig, wavelength

# Grids at or above this many elements always go through the FFT path.
FFT_MANDATORY_ELEMENTS = 128 * 128


@dataclass(frozen=True)
class FilterKernel:
    """Spherical-wavefront pattern sampled on the element lattice.

    `grid[p, q]` holds (1/d) * exp(-j 2 pi d / lambda) for the distance d from
    a source at `design_depth` straight below the kernel center to the lattice
    offset (p, q).  The center sample (largest magnitude) is at index
    (size // 2) per axis.
    """

    grid: np.ndarray
    design_frequency: float
    design_depth: float
    spacing: float


@dataclass(frozen=True)
class RadioMap:
    """Matched-filter output over the lattice: complex map plus magnitudes,
    with the array geometry kept for pixel->world conversion."""

    magnitudes: np.ndarray
    complex_map: np.ndarray
    lis: LisArrayConfig | None = None


def default_kernel_size(lis: LisArrayConfig) -> int:
    """Kernel side length scaled to the array: ~0.4 of the shorter side, odd."""
    n = max(1, round(0.4 * min(lis.elements_x, lis.elements_y)))
    return n if n % 2 == 1 else n - 1


def default_design_depth(room: RoomGeometry) -> float:
    """Depth the filter focuses at: array plane minus nominal emitter height."""
    return room.height - 1.8


def design_filter(frequency: float, depth: float, size: int,
                  spacing: float) -> FilterKernel:
    """Build the spherical matched-filter pattern.

    Parameters
    ----------
    frequency : carrier the filter is designed for (Hz)
    depth : assumed source distance below the array plane (m)
    size : kernel side length in lattice elements (odd keeps it symmetric)
    spacing : lattice pitch (m)
    """
    if frequency <= 0 or depth <= 0 or spacing <= 0:
        raise ValueError("frequency, depth and spacing must all be > 0")
    if size < 1:
        raise ValueError(f"kernel size must be >= 1, got {size}")
    lam = wavelength(frequency)
    offsets = (np.arange(size) - size // 2) * spacing
    dist = np.sqrt(depth ** 2 + offsets[:, None] ** 2 + offsets[None, :] ** 2)
    grid = np.exp(-2j * np.pi * dist / lam) / dist
    return FilterKernel(grid=grid, design_frequency=frequency,
                        design_depth=depth, spacing=spacing)


def _correlate_direct(grid: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # Tap-by-tap shift and accumulate; reference path, no FFT involved.
    kr, kc = kernel.shape
    orow, ocol = kr // 2, kc // 2
    rows, cols = grid.shape
    out = np.zeros(grid.shape, dtype=np.complex128)
    for p in range(kr):
        r0 = max(0, orow - p)
        r1 = min(rows, rows + orow - p)
        if r0 >= r1:
            continue
        for q in range(kc):
            c0 = max(0, ocol - q)
            c1 = min(cols, cols + ocol - q)
            if c0 >= c1:
                continue
            w = np.conj(kernel[p, q])
            out[r0:r1, c0:c1] += w * grid[r0 + p - orow:r1 + p - orow,
                                          c0 + q - ocol:c1 + q - ocol]
    return out


def _correlate_fft(grid: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    return fftconvolve(grid, np.conj(kernel[::-1, ::-1]), mode="same")


def apply_filter(received: np.ndarray, kernel: FilterKernel,
                 lis: LisArrayConfig | None = None,
                 method: str = "auto") -> RadioMap:
    """Correlate the received grid with the conjugated kernel ("same" size,
    zero-padded borders) and return the resulting radio map.

    method: "fft", "direct", or "auto" (FFT; grids of >= 128x128 elements are
    never sent down the direct path).
    """
    received = np.asarray(received, dtype=np.complex128)
    if received.ndim != 2:
        raise ValueError("received grid must be 2-D")
    kr, kc = kernel.grid.shape
    if kr > received.shape[0] or kc > received.shape[1]:
        raise ValueError(
            f"kernel {kr}x{kc} larger than received grid "
            f"{received.shape[0]}x{received.shape[1]}")
    if method == "auto":
        method = "fft"
    elif method == "direct" and received.size >= FFT_MANDATORY_ELEMENTS:
        raise ValueError(
            "direct path refused for grids of >= 128x128 elements; use fft")
    if method == "fft":
        filtered = _correlate_fft(received, kernel.grid)
    elif method == "direct":
        filtered = _correlate_direct(received, kernel.grid)
    else:
        raise ValueError(f"unknown method {method!r}")
    return RadioMap(magnitudes=np.abs(filtered), complex_map=filtered, lis=lis)


def map_to_image(radio_map: RadioMap | np.ndarray) -> np.ndarray:
    """Min-max normalize magnitudes onto 8-bit grayscale; a constant map
    renders as all zeros."""
    mags = radio_map.magnitudes if isinstance(radio_map, RadioMap) else radio_map
    lo = float(np.min(mags))
    hi = float(np.max(mags))
    if hi == lo:
        return np.zeros(mags.shape, dtype=np.uint8)
    scaled = (mags - lo) / (hi - lo) * 255.0
    return np.rint(scaled).astype(np.uint8)


def form_radio_map(cfg: ScenarioConfig, depth: float | None = None,
                   kernel_size: int | None = None, method: str = "auto",
                   rng: np.random.Generator | None = None) -> RadioMap:
    """Scene -> received signal -> matched-filter radio map in one call."""
    received = simulate_received(cfg, rng=rng)
    kernel = design_filter(
        cfg.lis.carrier_frequency,
        depth if depth is not None else default_design_depth(cfg.room),
        kernel_size if kernel_size is not None else default_kernel_size(cfg.lis),
        cfg.lis.spacing)
    return apply_filter(received, kernel, lis=cfg.lis)
