"""Component selection experiments and the direct-method baseline.

Phase 1 counts features and matches, phase 2 sums edge and overlap metrics,
phase 3 times every combination and keeps its panorama for visual review,
phase 4 sweeps the blend width.
"""

from __future__ import annotations

import itertools
import statistics
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .compose import (
    LOW_COUNT,
    BlendConfig,
    ShiftMeasurement,
    StitchConfig,
    StitchStats,
    compose_sequence,
    stitch_video,
)
from .errors import IdenticalRegions
from .imgcore import as_image, to_grayscale
from .metrics import edge_metric, exposure_metric, overlap_metric, sharpness_fft, sharpness_laplace

DETECTORS = ("harris_norm", "harris_sub")
MATCHERS = ("bf", "bf_knn")
RESAMPLERS = ("ransac", "lmeds")


@dataclass(frozen=True)
class ComboSpec:
    detector: str
    matcher: str
    resampler: str

    def __post_init__(self):
        if self.detector not in DETECTORS:
            raise ValueError(f"unknown detector {self.detector!r}")
        if self.matcher not in MATCHERS:
            raise ValueError(f"unknown matcher {self.matcher!r}")
        if self.resampler not in RESAMPLERS:
            raise ValueError(f"unknown resampler {self.resampler!r}")

    @property
    def name(self) -> str:
        return f"{self.detector}+{self.matcher}+{self.resampler}"

    def apply(self, cfg: StitchConfig) -> StitchConfig:
        return replace(
            cfg,
            detector=self.detector,
            matcher=self.matcher,
            robust=replace(cfg.robust, method=self.resampler),
        )


def all_combos() -> list[ComboSpec]:
    return [ComboSpec(*c) for c in itertools.product(DETECTORS, MATCHERS, RESAMPLERS)]


@dataclass
class PhaseRow:
    combo: ComboSpec
    iterations: int = 0
    avg_features: float = 0.0
    avg_matches: float = 0.0
    low_feature_iters: int = 0
    low_match_iters: int = 0
    em_sum: float = 0.0
    om_sum: float = 0.0
    perfect_iters: int = 0
    misalignment_count: int = 0
    elapsed_ms: float = 0.0

    @property
    def total(self) -> float:
        """Phase-2 score: edge sum plus overlap sum (PSNR already subtracted)."""
        return self.em_sum + self.om_sum

    def to_dict(self) -> dict:
        d = asdict(self)
        d["combo"] = self.combo.name
        d["total"] = self.total
        return d


@dataclass(frozen=True)
class Phase4Row:
    width: int
    exposure: float
    sharpness_fft: float
    sharpness_laplace: float
    avg_shift: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class HarnessConfig:
    stitch: StitchConfig = field(default_factory=StitchConfig)
    misalignment_thresh: float = 25.0
    # stands in for an infinite PSNR when overlap regions are identical
    psnr_cap: float = 100.0


def _counts_row(combo: ComboSpec, stats: StitchStats) -> PhaseRow:
    its = stats.iterations
    row = PhaseRow(combo, iterations=len(its))
    if its:
        row.avg_features = float(np.mean([m.n_features_b for m in its]))
        row.avg_matches = float(np.mean([m.n_matches for m in its]))
        row.low_feature_iters = sum(m.n_features_b < LOW_COUNT for m in its)
        row.low_match_iters = sum(m.n_matches < LOW_COUNT for m in its)
    return row


def run_phase1(combos, frames, hc: HarnessConfig = HarnessConfig()) -> list[PhaseRow]:
    """Average feature/match counts and how often either drops below ten."""
    rows = []
    for combo in combos:
        _, stats = stitch_video(frames, combo.apply(hc.stitch))
        rows.append(_counts_row(combo, stats))
    return rows


def seam_scores(tail: np.ndarray, frame: np.ndarray, col_min: int, psnr_cap: float):
    """Edge metric at the seam and overlap report of the raw (unblended) overlap.

    Returns ``(em, om, perfect)``; identical overlaps score ``-psnr_cap``.
    """
    w = frame.shape[1]
    s = int(col_min)
    if s <= 0 or s >= w:
        return None
    em = edge_metric(tail[:, :s], frame)
    try:
        om = overlap_metric(tail[:, s:], frame[:, : w - s]).om
        return em, om, False
    except IdenticalRegions:
        return em, -psnr_cap, True


def run_phase2(combos, frames, hc: HarnessConfig = HarnessConfig(), match_fn=None) -> list[PhaseRow]:
    """Sum edge and overlap metrics over all iterations; lowest total wins."""
    rows = []
    for combo in combos:
        acc = {"em": 0.0, "om": 0.0, "perfect": 0, "mis": 0}

        def observe(i, tail, frame, meas: ShiftMeasurement):
            scored = seam_scores(tail, frame, meas.col_min, hc.psnr_cap)
            if scored is None:
                return
            em, om, perfect = scored
            acc["em"] += em
            acc["om"] += om
            acc["perfect"] += perfect
            acc["mis"] += em > hc.misalignment_thresh

        _, stats = stitch_video(frames, combo.apply(hc.stitch), observer=observe, match_fn=match_fn)
        row = _counts_row(combo, stats)
        row.em_sum, row.om_sum = acc["em"], acc["om"]
        row.perfect_iters, row.misalignment_count = acc["perfect"], acc["mis"]
        rows.append(row)
    return rows


def run_phase3(combos, frames, repeats: int = 3, hc: HarnessConfig = HarnessConfig()):
    """Median wall-clock time per combination over ``repeats`` runs.

    Returns
    -------
    (rows, panoramas)
        ``panoramas`` maps combo name to the stitched result of the last run.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    frames = list(frames)
    rows, panos = [], {}
    for combo in combos:
        cfg = combo.apply(hc.stitch)
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            pano, stats = stitch_video(frames, cfg)
            times.append((time.perf_counter() - t0) * 1000.0)
        row = _counts_row(combo, stats)
        row.elapsed_ms = statistics.median(times)
        rows.append(row)
        panos[combo.name] = pano
    return rows, panos


def run_phase4(widths, frames, hc: HarnessConfig = HarnessConfig()) -> list[Phase4Row]:
    """Stitch once per fixed blend width and score exposure and sharpness."""
    rows = []
    for width in widths:
        cfg = replace(hc.stitch, blend=BlendConfig(width=int(width), auto=False))
        pano, stats = stitch_video(frames, cfg)
        rows.append(
            Phase4Row(
                width=int(width),
                exposure=exposure_metric(pano),
                sharpness_fft=sharpness_fft(pano),
                sharpness_laplace=sharpness_laplace(pano),
                avg_shift=stats.mean_shift,
            )
        )
    return rows


def direct_shift(tail, frame, search_window: int) -> int:
    """Horizontal shift in ``0..search_window`` minimising the overlap's mean absolute difference."""
    a = to_grayscale(tail).astype(np.int16)
    b = to_grayscale(frame).astype(np.int16)
    w = a.shape[1]
    best_s, best = 0, np.inf
    for s in range(0, min(search_window, w - 1) + 1):
        cost = np.abs(a[:, s:] - b[:, : w - s]).mean()
        if cost < best:
            best_s, best = s, cost
    return best_s


def direct_stitch(frames, search_window: int = 32, blend: BlendConfig = BlendConfig()):
    """Direct-method baseline stitcher using the same composition machinery.

    Returns
    -------
    (panorama, elapsed_ms, StitchStats)
    """
    stats = StitchStats()

    def shift(tail, frame, _stats):
        return ShiftMeasurement(direct_shift(tail, frame, search_window))

    frames = [as_image(f) for f in frames]
    t0 = time.perf_counter()
    pano = compose_sequence(frames, shift, blend, stats)
    return pano, (time.perf_counter() - t0) * 1000.0, stats


def rows_to_table(rows) -> list[dict]:
    return [r.to_dict() for r in rows]
