"""Monte-Carlo harness and metrics: detection matching, positioning-error
ECDFs, detection percentages, and the human-separation sweep.

Every trial owns an independent RNG seeded by hashing (master seed, trial
index), so results are reproducible regardless of execution order and
different sweep settings can share placements for paired comparisons.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace

import numpy as np

from .active import count_and_select, local_maxima
from .passive import (binarize_kmeans, build_masking_map, detect_passive,
                      make_transmitter_template, remove_active_pattern)
from .radiomap import form_radio_map
from .scene import Emitter, Human, ScenarioConfig

DEFAULT_GATE_M = 0.75  # counts a detection as "the" target if within this radius


def derive_seed(master_seed: int, purpose: str) -> int:
    """Stable sub-seed from (master seed, purpose string)."""
    digest = hashlib.sha256(f"{master_seed}:{purpose}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class MatchResult:
    pairs: tuple[tuple[int, int, float], ...]  # (truth idx, detection idx, error m)
    misses: tuple[int, ...]
    false_alarms: tuple[int, ...]


@dataclass(frozen=True)
class TrialReport:
    seed: int
    match: MatchResult
    detection_rate: float
    errors: tuple[float, ...]


def match_detections(truth, detected, gate: float) -> MatchResult:
    """Greedy nearest-pair assignment between truth and detected positions.

    Repeatedly pairs the globally closest unmatched (truth, detection) pair
    with distance <= gate; distance ties fall to the lexicographically first
    index pair.  Leftovers become misses / false alarms.
    """
    if gate <= 0:
        raise ValueError(f"gate must be > 0, got {gate}")
    truth = [tuple(t) for t in truth]
    detected = [tuple(d) for d in detected]
    candidates = []
    for ti, t in enumerate(truth):
        for di, d in enumerate(detected):
            dist = math.dist(t, d)
            if dist <= gate:
                candidates.append((dist, ti, di))
    candidates.sort()
    used_t: set[int] = set()
    used_d: set[int] = set()
    pairs = []
    for dist, ti, di in candidates:
        if ti in used_t or di in used_d:
            continue
        used_t.add(ti)
        used_d.add(di)
        pairs.append((ti, di, dist))
    misses = tuple(i for i in range(len(truth)) if i not in used_t)
    false_alarms = tuple(i for i in range(len(detected)) if i not in used_d)
    return MatchResult(pairs=tuple(pairs), misses=misses,
                       false_alarms=false_alarms)


def ecdf(errors) -> list[tuple[float, float]]:
    """Empirical CDF points (value, cumulative fraction), sorted ascending."""
    values = sorted(float(e) for e in errors)
    n = len(values)
    return [(v, (i + 1) / n) for i, v in enumerate(values)]


def ecdf_value_at(errors, fraction: float) -> float:
    """Smallest value whose cumulative fraction reaches `fraction`."""
    values = sorted(float(e) for e in errors)
    if not values:
        raise ValueError("empty error list")
    idx = max(0, math.ceil(fraction * len(values)) - 1)
    return values[idx]


def summarize(reports) -> dict:
    """Aggregate trial reports: mean detection rate and error statistics."""
    reports = list(reports)
    errors = [e for r in reports for e in r.errors]
    return {
        "trials": len(reports),
        "mean_detection_rate": (sum(r.detection_rate for r in reports)
                                / len(reports)) if reports else float("nan"),
        "mean_error": float(np.mean(errors)) if errors else float("nan"),
        "min_error": float(np.min(errors)) if errors else float("nan"),
        "max_error": float(np.max(errors)) if errors else float("nan"),
    }


# --- randomized placement ---------------------------------------------------

def random_points(n: int, cfg: ScenarioConfig, rng: np.random.Generator,
                  margin: float = 0.5, min_separation: float = 0.0,
                  clear_of=(), max_tries: int = 10000) -> list[tuple[float, float]]:
    """Uniform (x, y) draws inside the array footprint inset by `margin`,
    respecting a pairwise minimum separation and keep-out discs
    (`clear_of` = iterable of ((x, y), radius))."""
    ox, oy = cfg.lis.origin
    fx, fy = cfg.lis.footprint()
    lo_x, hi_x = ox + margin, ox + fx - margin
    lo_y, hi_y = oy + margin, oy + fy - margin
    if hi_x <= lo_x or hi_y <= lo_y:
        raise ValueError("margin leaves no placement area")
    points: list[tuple[float, float]] = []
    for _ in range(max_tries):
        if len(points) == n:
            break
        p = (rng.uniform(lo_x, hi_x), rng.uniform(lo_y, hi_y))
        if any(math.dist(p, q) < min_separation for q in points):
            continue
        if any(math.dist(p, c) < r for c, r in clear_of):
            continue
        points.append(p)
    if len(points) < n:
        raise ValueError(f"could not place {n} points after {max_tries} tries")
    return points


def _scatterer_keepouts(cfg: ScenarioConfig, extra: float) -> list:
    return [(s.center, s.radius + extra) for s in cfg.scatterers]


def random_emitters(n: int, cfg: ScenarioConfig, rng: np.random.Generator,
                    margin: float = 0.5, min_separation: float = 0.0,
                    height: float = 1.8) -> tuple[Emitter, ...]:
    """Random transmitters on the default height plane with random symbol
    phases, clear of scatterer footprints."""
    points = random_points(n, cfg, rng, margin=margin,
                           min_separation=min_separation,
                           clear_of=_scatterer_keepouts(cfg, 0.2))
    return tuple(
        Emitter(position=(x, y, height),
                symbol_phase=float(rng.uniform(0.0, 2.0 * math.pi)))
        for x, y in points)


def random_humans(n: int, cfg: ScenarioConfig, rng: np.random.Generator,
                  margin: float = 0.5,
                  min_separation: float = 0.5) -> tuple[Human, ...]:
    """Random humans clear of scatterers (nobody stands inside a cylinder)."""
    points = random_points(n, cfg, rng, margin=margin,
                           min_separation=min_separation,
                           clear_of=_scatterer_keepouts(cfg, 0.4))
    return tuple(Human(center=(x, y)) for x, y in points)


# --- trial runners ----------------------------------------------------------

def run_active_trial(cfg: ScenarioConfig, seed: int, n_emitters: int = 3,
                     min_separation: float = 1.0, peak_min_distance: int = 5,
                     drop_ratio: float = 0.9, gate: float = DEFAULT_GATE_M,
                     depth: float | None = None,
                     kernel_size: int | None = None,
                     placement_margin: float = 0.5) -> TrialReport:
    """One active-detection trial: random transmitters, one map, peak picking."""
    rng = np.random.default_rng(seed)
    emitters = random_emitters(n_emitters, cfg, rng, margin=placement_margin,
                               min_separation=min_separation)
    trial_cfg = replace(cfg, emitters=emitters, humans=())
    radio_map = form_radio_map(trial_cfg, depth=depth,
                               kernel_size=kernel_size, rng=rng)
    peaks = local_maxima(radio_map, peak_min_distance)
    result = count_and_select(peaks, drop_ratio, lis=cfg.lis)
    truth = [e.position[:2] for e in emitters]
    detected = [d.world for d in result.detections]
    match = match_detections(truth, detected, gate)
    return TrialReport(seed=seed, match=match,
                       detection_rate=len(match.pairs) / len(truth),
                       errors=tuple(err for _, _, err in match.pairs))


def calibrate_mask(cfg: ScenarioConfig, transmissions: int,
                   rng: np.random.Generator, template,
                   peak_min_distance: int = 5, drop_ratio: float = 0.9,
                   depth: float | None = None, kernel_size: int | None = None,
                   placement_margin: float = 0.5, emitter_groups=None):
    """Offline scanning phase: `transmissions` single-transmitter maps of the
    empty-of-humans room, binarized, transmitter-removed, OR-combined.

    `emitter_groups` fixes the per-transmission emitters instead of drawing
    random ones (each entry is the emitter tuple of one transmission).
    """
    if emitter_groups is None:
        emitter_groups = [random_emitters(1, cfg, rng, margin=placement_margin)
                          for _ in range(transmissions)]
    cleaned = []
    for emitters in emitter_groups:
        scan_cfg = replace(cfg, emitters=tuple(emitters), humans=())
        radio_map = form_radio_map(scan_cfg, depth=depth,
                                   kernel_size=kernel_size, rng=rng)
        binary = binarize_kmeans(radio_map)
        peaks = local_maxima(radio_map, peak_min_distance)
        selected = count_and_select(peaks, drop_ratio)
        cleaned.append(remove_active_pattern(
            binary, [template],
            known_peaks=_peaks_from_detections(selected, peaks.min_distance)))
    return build_masking_map(cleaned)


def _peaks_from_detections(result, min_distance):
    from .active import PeakEntry, PeakList
    return PeakList(entries=tuple(
        PeakEntry(pixel=d.pixel, magnitude=d.magnitude)
        for d in result.detections), min_distance=min_distance)


def run_passive_trial(cfg: ScenarioConfig, seed: int, n_humans: int = 4,
                      cal_transmissions: int = 10, det_transmissions: int = 10,
                      peak_min_distance: int = 5, drop_ratio: float = 0.9,
                      window: int = 2, threshold: float = 0.5,
                      min_area: int = 3, gate: float = DEFAULT_GATE_M,
                      depth: float | None = None,
                      kernel_size: int | None = None,
                      placement_margin: float = 0.5,
                      humans=None, template=None) -> TrialReport:
    """One passive-detection trial: calibrate a mask on the empty room, then
    detect randomly placed humans from fresh transmissions."""
    rng = np.random.default_rng(seed)
    if template is None:
        template = make_transmitter_template(cfg, depth=depth,
                                             kernel_size=kernel_size)
    mask = calibrate_mask(cfg, cal_transmissions, rng, template,
                          peak_min_distance=peak_min_distance,
                          drop_ratio=drop_ratio, depth=depth,
                          kernel_size=kernel_size,
                          placement_margin=placement_margin)
    if humans is None:
        humans = random_humans(n_humans, cfg, rng, margin=placement_margin)
    maps = []
    for _ in range(det_transmissions):
        emitters = random_emitters(1, cfg, rng, margin=placement_margin)
        det_cfg = replace(cfg, emitters=emitters, humans=tuple(humans))
        maps.append(form_radio_map(det_cfg, depth=depth,
                                   kernel_size=kernel_size, rng=rng))
    components = detect_passive(maps, mask, [template], lis=cfg.lis,
                                peak_min_distance=peak_min_distance,
                                drop_ratio=drop_ratio, window=window,
                                threshold=threshold, min_area=min_area)
    truth = [h.center for h in humans]
    detected = [c.world for c in components.centroids]
    match = match_detections(truth, detected, gate)
    return TrialReport(seed=seed, match=match,
                       detection_rate=len(match.pairs) / len(truth),
                       errors=tuple(err for _, _, err in match.pairs))


def run_monte_carlo(cfg: ScenarioConfig, trials: int, mode: str = "active",
                    master_seed: int | None = None,
                    **params) -> list[TrialReport]:
    """Run seeded independent trials; extra keyword parameters are forwarded
    to the per-mode trial runner."""
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if master_seed is None:
        master_seed = cfg.rng_seed
    if mode == "active":
        runner = run_active_trial
    elif mode == "passive":
        runner = run_passive_trial
        if params.get("template") is None:
            # Template depends only on the array geometry; build it once.
            params = dict(params, template=make_transmitter_template(
                cfg, depth=params.get("depth"),
                kernel_size=params.get("kernel_size")))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return [runner(cfg, derive_seed(master_seed, f"trial:{i}"), **params)
            for i in range(trials)]


def run_separation_sweep(cfg: ScenarioConfig, separations, trials: int,
                         master_seed: int | None = None,
                         placement_margin: float = 1.0,
                         **params) -> dict[float, list[TrialReport]]:
    """Two humans at controlled center separation; trial seeds are shared
    across separations so the comparison is paired."""
    if master_seed is None:
        master_seed = cfg.rng_seed
    if params.get("template") is None:
        params = dict(params, template=make_transmitter_template(
            cfg, depth=params.get("depth"),
            kernel_size=params.get("kernel_size")))
    results: dict[float, list[TrialReport]] = {}
    for separation in separations:
        reports = []
        for i in range(trials):
            seed = derive_seed(master_seed, f"trial:{i}")
            rng = np.random.default_rng(derive_seed(seed, "pair-placement"))
            (mx, my), = random_points(1, cfg, rng, margin=placement_margin,
                                      clear_of=_scatterer_keepouts(cfg, 0.9))
            angle = rng.uniform(0.0, math.pi)
            dx = separation / 2.0 * math.cos(angle)
            dy = separation / 2.0 * math.sin(angle)
            humans = (Human(center=(mx - dx, my - dy)),
                      Human(center=(mx + dx, my + dy)))
            reports.append(run_passive_trial(cfg, seed, humans=humans,
                                             **params))
        results[float(separation)] = reports
    return results
