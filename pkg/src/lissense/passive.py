"""Passive-human pipeline: binarization, transmitter-pattern removal,
masking-map calibration, OR composition, despeckling, component labeling.

Polarity convention follows the maps it mirrors: right after binarization
white (1) marks high matched-filter energy; the "negative" maps flip that so
scatterers and humans are black (0), and the stored masking map (white =
static scatterers) is OR-ed in to erase static clutter.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import fftconvolve

from .active import PeakEntry, PeakList, count_and_select, local_maxima
from .channel import element_signal, superpose, NoiseSpec
from .radiomap import (RadioMap, apply_filter, default_design_depth,
                       default_kernel_size, design_filter)
from .scene import (Emitter, LisArrayConfig, ScenarioConfig, lattice_to_world)

log = logging.getLogger(__name__)


class Polarity(enum.Enum):
    WHITE_IS_HIGH_ENERGY = "white_is_high_energy"
    NEGATIVE = "negative"


@dataclass(frozen=True)
class BinaryMap:
    bits: np.ndarray  # uint8, values in {0, 1}
    polarity: Polarity = Polarity.WHITE_IS_HIGH_ENERGY

    @property
    def shape(self) -> tuple[int, int]:
        return self.bits.shape


@dataclass(frozen=True)
class MaskingMap:
    """Calibrated map of the static environment: white = scatterers."""

    bits: np.ndarray
    source_count: int


@dataclass(frozen=True)
class ComponentInfo:
    pixel: tuple[float, float]  # centroid (col, row), fractional
    world: tuple[float, float] | None
    area: int


@dataclass(frozen=True)
class LabeledComponents:
    labels: np.ndarray  # int32, 0 = background, components numbered 1..count
    component_count: int
    centroids: tuple[ComponentInfo, ...]


def binarize_kmeans(radio_map: RadioMap | np.ndarray,
                    max_iterations: int = 100) -> BinaryMap:
    """Two-cluster Lloyd clustering of the magnitude values; the cluster with
    the greater centroid becomes white (1).

    Centroids start at the min and max values, assignments iterate to a
    fixpoint (or `max_iterations`).  A constant map has no two-cluster
    structure and raises ValueError.
    """
    mags = radio_map.magnitudes if isinstance(radio_map, RadioMap) else np.asarray(radio_map, dtype=float)
    vals = mags.ravel()
    c_lo = float(vals.min())
    c_hi = float(vals.max())
    if c_lo == c_hi:
        raise ValueError("constant map cannot be split into two clusters")
    high = None
    for _ in range(max_iterations):
        threshold = 0.5 * (c_lo + c_hi)
        high = vals >= threshold
        new_lo = float(vals[~high].mean())
        new_hi = float(vals[high].mean())
        if new_lo == c_lo and new_hi == c_hi:
            break
        c_lo, c_hi = new_lo, new_hi
    bits = (mags >= 0.5 * (c_lo + c_hi)).astype(np.uint8)
    return BinaryMap(bits=bits, polarity=Polarity.WHITE_IS_HIGH_ENERGY)


def negate(binary: BinaryMap) -> BinaryMap:
    flipped = (Polarity.NEGATIVE if binary.polarity is Polarity.WHITE_IS_HIGH_ENERGY
               else Polarity.WHITE_IS_HIGH_ENERGY)
    return BinaryMap(bits=(1 - binary.bits).astype(np.uint8), polarity=flipped)


def make_transmitter_template(cfg: ScenarioConfig, depth: float | None = None,
                              kernel_size: int | None = None) -> np.ndarray:
    """Synthesize the expected single-transmitter blob for template matching.

    Simulates a lone noiseless emitter above the array center, forms its
    matched-filter map, binarizes, and crops the bounding box of the white
    blob containing the peak.
    """
    lis = cfg.lis
    fx, fy = lis.footprint()
    center = (lis.origin[0] + fx / 2.0, lis.origin[1] + fy / 2.0)
    if depth is None:
        depth = default_design_depth(cfg.room)
    emitter = Emitter(position=(center[0], center[1], cfg.room.height - depth))
    lone = replace(cfg, emitters=(emitter,), scatterers=(), humans=(),
                   snr_db=None)
    field = superpose(lone)
    signal = element_signal(field, NoiseSpec(None), lis.wavelength)
    kernel = design_filter(
        lis.carrier_frequency, depth,
        kernel_size if kernel_size is not None else default_kernel_size(lis),
        lis.spacing)
    binary = binarize_kmeans(apply_filter(signal, kernel, lis=lis))
    peak_r, peak_c = np.unravel_index(np.argmax(np.abs(signal)), signal.shape)
    comps = label_components(binary, connectivity=8, foreground=1)
    blob_label = comps.labels[peak_r, peak_c]
    if blob_label == 0:
        raise ValueError("transmitter blob missing from its own binary map")
    rows, cols = np.nonzero(comps.labels == blob_label)
    return binary.bits[rows.min():rows.max() + 1,
                       cols.min():cols.max() + 1].copy()


def _normxcorr_same(image: np.ndarray, template: np.ndarray) -> np.ndarray:
    # Zero-mean normalized cross-correlation, "same" size, zero-padded.
    image = image.astype(float)
    tpl = template.astype(float) - float(template.mean())
    tpl_energy = float(np.sum(tpl ** 2))
    if tpl_energy == 0.0:
        return np.zeros(image.shape)
    flipped = tpl[::-1, ::-1]
    ones = np.ones(template.shape)
    num = fftconvolve(image, flipped, mode="same")
    patch_sum = fftconvolve(image, ones, mode="same")
    patch_sq = fftconvolve(image ** 2, ones, mode="same")
    patch_var = patch_sq - patch_sum ** 2 / template.size
    patch_var[patch_var < 0] = 0.0
    denom = np.sqrt(patch_var * tpl_energy)
    out = np.zeros(image.shape)
    np.divide(num, denom, out=out, where=denom > 0)
    return out


def remove_active_pattern(binary: BinaryMap, templates,
                          known_peaks: PeakList | None = None,
                          threshold: float = 0.6,
                          max_removals: int = 1,
                          pad: int | None = None) -> BinaryMap:
    """Blank the expected transmitter blob(s) out of a binarized map.

    For every template the best normalized-cross-correlation match is set to
    black; when `known_peaks` is given the search is confined to a
    template-sized neighborhood of each peak (one removal per peak), otherwise
    up to `max_removals` matches above `threshold` are removed globally.
    A missing match leaves the map untouched and is only logged.

    The blanked region is the template box grown by `pad` pixels per side
    (default: the template side length), wide enough to take the
    transmitter's first sidelobe ring with it; in mixed maps the clustering
    threshold sits lower than in the calibration map the template was cut
    from, so the live pattern is wider than the template.
    """
    templates = [np.asarray(t, dtype=np.uint8) for t in templates]
    if not templates:
        raise ValueError("at least one template is required")
    bits = binary.bits.copy()
    rows, cols = bits.shape
    for template in templates:
        ncc = _normxcorr_same(bits, template)
        tr, tc = template.shape
        grow = pad if pad is not None else max(tr, tc)
        if known_peaks is not None:
            centers = []
            for entry in known_peaks.entries:
                pc, pr = entry.pixel
                r0, r1 = max(0, pr - tr), min(rows, pr + tr + 1)
                c0, c1 = max(0, pc - tc), min(cols, pc + tc + 1)
                window = ncc[r0:r1, c0:c1]
                wr, wc = np.unravel_index(np.argmax(window), window.shape)
                if window[wr, wc] >= threshold:
                    centers.append((r0 + wr, c0 + wc))
                else:
                    log.info("no transmitter pattern above %.2f near pixel %s",
                             threshold, entry.pixel)
            for r, c in centers:
                _blank_box(bits, r, c, tr, tc, grow)
        else:
            for _ in range(max_removals):
                r, c = np.unravel_index(np.argmax(ncc), ncc.shape)
                if ncc[r, c] < threshold:
                    log.info("no transmitter pattern above %.2f anywhere",
                             threshold)
                    break
                _blank_box(bits, r, c, tr, tc, grow)
                _blank_box(ncc, r, c, tr, tc, grow)
    return BinaryMap(bits=bits, polarity=binary.polarity)


def _blank_box(grid: np.ndarray, r: int, c: int, tr: int, tc: int,
               pad: int = 0) -> None:
    r0 = max(0, r - tr // 2 - pad)
    c0 = max(0, c - tc // 2 - pad)
    grid[r0:r0 + tr + 2 * pad, c0:c0 + tc + 2 * pad] = 0


def build_masking_map(maps) -> MaskingMap:
    """Elementwise OR of binarized (transmitter-removed) maps captured while
    the room held no humans; white accumulates the static scatterers."""
    maps = list(maps)
    if not maps:
        raise ValueError("at least one binary map is required")
    shape = maps[0].bits.shape
    bits = np.zeros(shape, dtype=np.uint8)
    for m in maps:
        if m.bits.shape != shape:
            raise ValueError(f"dimension mismatch: {m.bits.shape} vs {shape}")
        bits |= m.bits
    return MaskingMap(bits=bits, source_count=len(maps))


def subtract_static(negative: BinaryMap, mask: MaskingMap) -> BinaryMap:
    """OR the negative map (scatterers+humans black) with the stored masking
    map: static-scatterer pixels are forced white, human echoes stay black."""
    if negative.bits.shape != mask.bits.shape:
        raise ValueError(f"dimension mismatch: {negative.bits.shape} vs "
                         f"{mask.bits.shape}")
    return BinaryMap(bits=(negative.bits | mask.bits).astype(np.uint8),
                     polarity=Polarity.NEGATIVE)


def despeckle(binary: BinaryMap, window: int, threshold: float) -> BinaryMap:
    """Remove salt-pepper artifacts: tile the map with non-overlapping
    window x window blocks and whiten every block whose black-pixel fraction
    falls below `threshold` (edge tiles use their actual size)."""
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")
    bits = binary.bits.copy()
    rows, cols = bits.shape
    for r0 in range(0, rows, window):
        for c0 in range(0, cols, window):
            tile = bits[r0:r0 + window, c0:c0 + window]
            if (tile == 0).sum() / tile.size < threshold:
                tile[:] = 1
    return BinaryMap(bits=bits, polarity=binary.polarity)


class _UnionFind:
    def __init__(self):
        self.parent = [0]

    def make(self) -> int:
        label = len(self.parent)
        self.parent.append(label)
        return label

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra < rb:
            self.parent[rb] = ra
        else:
            self.parent[ra] = rb


def label_components(binary: BinaryMap, connectivity: int = 8,
                     foreground: int = 0,
                     lis: LisArrayConfig | None = None) -> LabeledComponents:
    """Label connected components of the `foreground` pixels (default black,
    where the human echoes live after static subtraction).

    Two-pass scan with union-find; final labels are renumbered 1..count in
    row-major first-touch order.  Centroids are arithmetic means of member
    pixel coordinates, converted to world meters when `lis` is given.
    """
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    bits = binary.bits
    rows, cols = bits.shape
    labels = np.zeros((rows, cols), dtype=np.int32)
    uf = _UnionFind()
    if connectivity == 8:
        neighbors = ((-1, -1), (-1, 0), (-1, 1), (0, -1))
    else:
        neighbors = ((-1, 0), (0, -1))
    for r in range(rows):
        for c in range(cols):
            if bits[r, c] != foreground:
                continue
            seen = []
            for dr, dc in neighbors:
                rr, cc = r + dr, c + dc
                if 0 <= rr < rows and 0 <= cc < cols and labels[rr, cc] > 0:
                    seen.append(labels[rr, cc])
            if not seen:
                labels[r, c] = uf.make()
            else:
                labels[r, c] = min(seen)
                for other in seen[1:]:
                    uf.union(seen[0], other)
    # Canonicalize: first-touch row-major order of the union-find roots.
    remap: dict[int, int] = {}
    for r in range(rows):
        for c in range(cols):
            provisional = labels[r, c]
            if provisional == 0:
                continue
            root = uf.find(provisional)
            if root not in remap:
                remap[root] = len(remap) + 1
            labels[r, c] = remap[root]
    count = len(remap)
    centroids = []
    for label in range(1, count + 1):
        member_r, member_c = np.nonzero(labels == label)
        col = float(member_c.mean())
        row = float(member_r.mean())
        centroids.append(ComponentInfo(
            pixel=(col, row),
            world=lattice_to_world(col, row, lis) if lis is not None else None,
            area=int(member_r.size)))
    return LabeledComponents(labels=labels, component_count=count,
                             centroids=tuple(centroids))


def filter_components(components: LabeledComponents,
                      min_area: int) -> LabeledComponents:
    """Drop components smaller than `min_area` pixels, renumbering the rest."""
    keep = [i for i, c in enumerate(components.centroids) if c.area >= min_area]
    mapping = np.zeros(components.component_count + 1, dtype=np.int32)
    for new_label, old_index in enumerate(keep, start=1):
        mapping[old_index + 1] = new_label
    return LabeledComponents(
        labels=mapping[components.labels],
        component_count=len(keep),
        centroids=tuple(components.centroids[i] for i in keep))


def detect_passive(maps, mask: MaskingMap, templates,
                   lis: LisArrayConfig | None = None,
                   peak_min_distance: int = 5, drop_ratio: float = 0.9,
                   window: int = 2, threshold: float = 0.5,
                   min_area: int = 3, connectivity: int = 8,
                   stage_sink=None) -> LabeledComponents:
    """Full passive pipeline over one or more detection-phase radio maps.

    Each map is binarized and cleaned of its active-transmitter pattern; the
    cleaned maps are OR-combined, inverted, static clutter is erased with the
    stored masking map, speckle is removed, and the surviving black shapes
    are labeled (components below `min_area` pixels are discarded).

    `stage_sink(name, bits)` receives intermediate binary grids when given.
    """
    if mask is None:
        raise ValueError("a calibrated masking map is required")
    maps = list(maps)
    if not maps:
        raise ValueError("at least one detection map is required")
    combined = None
    for radio_map in maps:
        binary = binarize_kmeans(radio_map)
        peaks = local_maxima(radio_map, peak_min_distance)
        selected = count_and_select(peaks, drop_ratio)
        seed = PeakList(entries=tuple(
            PeakEntry(pixel=d.pixel, magnitude=d.magnitude)
            for d in selected.detections), min_distance=peaks.min_distance)
        cleaned = remove_active_pattern(binary, templates, known_peaks=seed)
        if combined is None:
            combined = cleaned.bits.copy()
        else:
            if cleaned.bits.shape != combined.shape:
                raise ValueError("detection maps differ in dimensions")
            combined |= cleaned.bits
    if stage_sink is not None:
        stage_sink("combined", combined)
    negative = negate(BinaryMap(bits=combined,
                                polarity=Polarity.WHITE_IS_HIGH_ENERGY))
    if stage_sink is not None:
        stage_sink("negative", negative.bits)
    unmasked = subtract_static(negative, mask)
    if stage_sink is not None:
        stage_sink("masked", unmasked.bits)
    smoothed = despeckle(unmasked, window, threshold)
    if stage_sink is not None:
        stage_sink("despeckled", smoothed.bits)
    components = label_components(smoothed, connectivity=connectivity,
                                  foreground=0, lis=lis)
    return filter_components(components, min_area)
