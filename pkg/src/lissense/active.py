"""Active-transmitter extraction from radio maps.

Peaks are local maxima under a sliding max window; the number of active
transmitters is inferred by walking the peaks in descending order and
stopping at the first energy drop beyond the configured ratio, so no prior
knowledge of the transmitter count is needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .radiomap import RadioMap
from .scene import LisArrayConfig, pixel_to_world


@dataclass(frozen=True)
class PeakEntry:
    pixel: tuple[int, int]  # (col, row)
    magnitude: float


@dataclass(frozen=True)
class PeakList:
    """Local maxima sorted by descending magnitude (magnitude ties broken by
    (row, col) order); pairwise Chebyshev distance exceeds min_distance."""

    entries: tuple[PeakEntry, ...]
    min_distance: int


@dataclass(frozen=True)
class Detection:
    pixel: tuple[int, int]
    world: tuple[float, float] | None
    magnitude: float


@dataclass(frozen=True)
class ActiveDetectionResult:
    detections: tuple[Detection, ...]

    @property
    def count(self) -> int:
        return len(self.detections)


def _magnitudes(radio_map) -> np.ndarray:
    if isinstance(radio_map, RadioMap):
        return radio_map.magnitudes
    return np.asarray(radio_map, dtype=float)


def local_maxima(radio_map, min_distance: int) -> PeakList:
    """Find local maxima with a (2*min_distance+1)^2 sliding max window.

    A pixel qualifies when it equals the window maximum centered on it
    (windows are clipped at the map edge); among qualifying pixels, any that
    lie within `min_distance` Chebyshev distance of a stronger one are
    suppressed.
    """
    mags = _magnitudes(radio_map)
    if mags.size == 0:
        raise ValueError("empty map")
    if min_distance < 1:
        raise ValueError(f"min_distance must be >= 1, got {min_distance}")
    size = 2 * min_distance + 1
    dilated = ndimage.maximum_filter(mags, size=size, mode="constant",
                                     cval=-np.inf)
    rows, cols = np.nonzero(mags == dilated)
    vals = mags[rows, cols]
    order = np.lexsort((cols, rows, -vals))
    kept_rc: list[tuple[int, int]] = []
    entries = []
    for idx in order:
        r, c = int(rows[idx]), int(cols[idx])
        if any(max(abs(r - kr), abs(c - kc)) <= min_distance
               for kr, kc in kept_rc):
            continue
        kept_rc.append((r, c))
        entries.append(PeakEntry(pixel=(c, r), magnitude=float(vals[idx])))
    return PeakList(entries=tuple(entries), min_distance=min_distance)


def count_and_select(peaks: PeakList, drop_ratio: float = 0.9,
                     lis: LisArrayConfig | None = None,
                     compare_to: str = "previous") -> ActiveDetectionResult:
    """Walk the descending peak list and keep peaks until the energy drops by
    more than `drop_ratio` of the reference peak.

    The comparison is on peak energy (squared magnitude): transmitter peaks
    carry comparable energy while sidelobe/scatterer maxima fall an order of
    magnitude lower, which is the cliff the default 0.9 ratio detects.

    compare_to: "previous" compares each peak against the last accepted one
    (default); "first" compares against the strongest peak.
    """
    if not peaks.entries:
        raise ValueError("empty peak list")
    if not 0.0 <= drop_ratio < 1.0:
        raise ValueError(f"drop_ratio must be in [0, 1), got {drop_ratio}")
    if compare_to not in ("previous", "first"):
        raise ValueError(f"compare_to must be 'previous' or 'first', "
                         f"got {compare_to!r}")
    accepted = [peaks.entries[0]]
    for entry in peaks.entries[1:]:
        ref = accepted[-1] if compare_to == "previous" else accepted[0]
        if entry.magnitude ** 2 >= (1.0 - drop_ratio) * ref.magnitude ** 2:
            accepted.append(entry)
        else:
            break
    detections = tuple(
        Detection(pixel=e.pixel,
                  world=pixel_to_world(e.pixel, lis) if lis is not None else None,
                  magnitude=e.magnitude)
        for e in accepted)
    return ActiveDetectionResult(detections=detections)
