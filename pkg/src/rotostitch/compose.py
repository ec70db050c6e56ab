"""Line-scan style composition.

Each iteration measures how far the next frame has moved relative to the last
frame-width slice of the panorama (``col_min``), extends the panorama by that
many columns and inserts the *unwarped* next frame. The transform fitted
between the two frames is only used to find ``col_min``; it never touches the
pixels that end up in the panorama, so perspective distortion cannot
accumulate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import EmptySequence, NoValidColumn, StitchError
from .estimate import AFFINE, PROJECTIVE, RobustParams, robust_fit
from .features import HarrisParams, describe, detect_corners, refine_subpixel
from .imgcore import as_image, round_u8, to_grayscale, warp, warp_mask
from .matching import Match, match_bf, match_knn_ratio

log = logging.getLogger(__name__)

WBP_FACTOR = 1.82
LOW_COUNT = 10


@dataclass(frozen=True)
class BlendConfig:
    """Width of the linear alpha ramp at each seam.

    ``width == 0`` disables blending. With ``auto`` the width follows
    ``round(1.82 * mean_shift)`` and ``width`` is ignored.
    """

    width: int = 0
    auto: bool = False

    def __post_init__(self):
        if self.width < 0:
            raise ValueError("blend width must be >= 0")


@dataclass(frozen=True)
class StitchConfig:
    detector: str = "harris_norm"
    harris: HarrisParams = field(default_factory=HarrisParams)
    patch_size: int = 15
    matcher: str = "bf"
    cross_check: bool = True
    ratio: float = 0.75
    model: str = PROJECTIVE
    robust: RobustParams = field(default_factory=RobustParams)
    blend: BlendConfig = field(default_factory=BlendConfig)
    crop_frac: float = 0.10
    outlier_cap: float = 0.5
    paper_fidelity: bool = False

    def __post_init__(self):
        if self.detector not in ("harris_norm", "harris_sub"):
            raise ValueError(f"unknown detector {self.detector!r}")
        if self.matcher not in ("bf", "bf_knn"):
            raise ValueError(f"unknown matcher {self.matcher!r}")
        if self.model not in (AFFINE, PROJECTIVE):
            raise ValueError(f"unknown model {self.model!r}")
        if not 0 <= self.crop_frac < 0.5:
            raise ValueError("crop_frac must lie in [0, 0.5)")
        if not self.outlier_cap > 0:
            raise ValueError("outlier_cap must be > 0")

    def with_seed(self, seed: int) -> StitchConfig:
        return replace(self, robust=replace(self.robust, seed=seed))


@dataclass
class ShiftMeasurement:
    col_min: int
    n_features_a: int = 0
    n_features_b: int = 0
    n_matches: int = 0
    n_inliers: int = 0
    degenerate: bool = False
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "col_min": self.col_min,
            "n_features_a": self.n_features_a,
            "n_features_b": self.n_features_b,
            "n_matches": self.n_matches,
            "n_inliers": self.n_inliers,
            "degenerate": self.degenerate,
            "reason": self.reason,
        }


@dataclass
class StitchStats:
    iterations: list[ShiftMeasurement] = field(default_factory=list)
    accepted: list[int] = field(default_factory=list)
    wbp: list[int] = field(default_factory=list)

    @property
    def mean_shift(self) -> float:
        return float(np.mean(self.accepted)) if self.accepted else 0.0

    @property
    def low_match_count(self) -> int:
        return sum(1 for m in self.iterations if m.n_matches < LOW_COUNT)

    @property
    def low_feature_count(self) -> int:
        return sum(1 for m in self.iterations if m.n_features_b < LOW_COUNT)

    def to_dict(self) -> dict:
        return {
            "iterations": [m.to_dict() for m in self.iterations],
            "mean_shift": self.mean_shift,
            "low_match_count": self.low_match_count,
            "wbp": self.wbp,
            "accepted_sum": int(sum(self.accepted)),
        }


def find_col_min(mask, crop_frac: float = 0.10) -> int:
    """First column that is valid in every row once the top and bottom
    ``crop_frac`` of rows are dropped."""
    m = np.asarray(mask, dtype=bool)
    h = m.shape[0]
    cut = int(crop_frac * h)
    rows = m[cut : h - cut] if h - 2 * cut > 0 else m
    full = rows.all(axis=0)
    hits = np.flatnonzero(full)
    if hits.size == 0:
        raise NoValidColumn("every column contains an invalid pixel")
    return int(hits[0])


def find_col_min_intensity(warped, crop_frac: float = 0.10) -> int:
    """Literal variant: scan for the first column without any black (0) pixel."""
    a = np.asarray(warped)
    nonblack = a != 0 if a.ndim == 2 else np.any(a != 0, axis=2)
    return find_col_min(nonblack, crop_frac)


def compute_wbp(mean_shift: float, frame_width: int | None = None) -> int:
    """Blend width ``round(1.82 * mean_shift)``, clamped to ``[1, frame_width]``."""
    if mean_shift < 0:
        raise ValueError("mean_shift must be >= 0")
    w = int(np.floor(WBP_FACTOR * mean_shift + 0.5))
    w = max(1, w)
    if frame_width is not None:
        w = min(w, frame_width)
    return w


MatchFn = Callable[[np.ndarray, np.ndarray], "list[Match]"]


@dataclass
class _FrameFeatures:
    points: np.ndarray
    desc: np.ndarray


def _features(gray: np.ndarray, cfg: StitchConfig) -> _FrameFeatures:
    try:
        pts = detect_corners(gray, cfg.harris)
    except StitchError:
        pts = []
    if cfg.detector == "harris_sub" and pts:
        pts = refine_subpixel(gray, pts)
    kept, desc = describe(gray, pts, cfg.patch_size)
    xy = np.array([(p.x, p.y) for p in kept], dtype=np.float64).reshape(-1, 2)
    return _FrameFeatures(xy, desc)


def _match(fa: np.ndarray, fb: np.ndarray, cfg: StitchConfig, match_fn: MatchFn | None):
    if match_fn is not None:
        return match_fn(fa, fb)
    if cfg.matcher == "bf":
        return match_bf(fa, fb, cross_check=cfg.cross_check)
    if len(fb) < 2:
        return []
    return match_knn_ratio(fa, fb, ratio=cfg.ratio)


class FeatureCache:
    """Remembers the features of the last analysed frame.

    Without blending the panorama tail is byte-identical to the previous
    frame, so its features need not be recomputed. Lookups compare pixels
    exactly, so a hit never changes the result.
    """

    def __init__(self):
        self._gray: np.ndarray | None = None
        self._feat: _FrameFeatures | None = None

    def get(self, gray: np.ndarray, cfg: StitchConfig) -> _FrameFeatures:
        if self._gray is not None and self._gray.shape == gray.shape and np.array_equal(self._gray, gray):
            return self._feat
        return _features(gray, cfg)

    def put(self, gray: np.ndarray, feat: _FrameFeatures) -> None:
        self._gray, self._feat = gray, feat


def measure_shift(
    panorama_tail,
    nxt,
    cfg: StitchConfig = StitchConfig(),
    mean_shift: float | None = None,
    match_fn: MatchFn | None = None,
    cache: FeatureCache | None = None,
) -> ShiftMeasurement:
    """Measure the horizontal shift of ``nxt`` relative to ``panorama_tail``.

    Feature detection, matching and a robust fit give the transform that maps
    ``nxt`` into the tail's coordinates; ``col_min`` is read off the warped
    validity mask. Any failure, or a shift above ``outlier_cap * width``, falls
    back to ``round(mean_shift)`` (1 without history) and sets ``degenerate``.
    """
    tail = as_image(panorama_tail)
    nxt = as_image(nxt)
    if tail.shape[:2] != nxt.shape[:2]:
        raise ValueError(f"tail {tail.shape} and next frame {nxt.shape} differ in size")
    h, w = nxt.shape[:2]
    fallback = int(np.floor(mean_shift + 0.5)) if mean_shift else 1
    ga, gb = to_grayscale(tail), to_grayscale(nxt)
    if cache is None:
        fa, fb = _features(ga, cfg), _features(gb, cfg)
    else:
        fa, fb = cache.get(ga, cfg), _features(gb, cfg)
        cache.put(gb, fb)
    meas = ShiftMeasurement(0, n_features_a=len(fa.points), n_features_b=len(fb.points))

    def degrade(reason: str) -> ShiftMeasurement:
        meas.col_min = min(fallback, w)
        meas.degenerate = True
        meas.reason = reason
        return meas

    if len(fa.points) == 0 or len(fb.points) == 0:
        return degrade("no features")
    # query = next frame; model maps next -> tail coordinates
    matches = _match(fb.desc, fa.desc, cfg, match_fn)
    meas.n_matches = len(matches)
    if not matches:
        return degrade("no matches")
    src = fb.points[[m.idx_a for m in matches]]
    dst = fa.points[[m.idx_b for m in matches]]
    try:
        t, inliers = robust_fit(src, dst, cfg.model, cfg.robust)
    except StitchError as exc:
        return degrade(f"fit failed: {exc}")
    meas.n_inliers = int(np.count_nonzero(inliers))
    try:
        if cfg.paper_fidelity:
            warped, _ = warp(nxt, t, (w, h), interp="bilinear")
            col = find_col_min_intensity(warped, cfg.crop_frac)
        else:
            col = _col_min_fast(t, h, w, cfg)
    except StitchError as exc:
        return degrade(f"col_min failed: {exc}")
    if col > cfg.outlier_cap * w:
        return degrade(f"outlier shift {col}")
    meas.col_min = col
    return meas


def _col_min_fast(t, h: int, w: int, cfg: StitchConfig) -> int:
    """``find_col_min`` on the full warped mask, evaluated only where it matters.

    Rows outside the crop band never count, and any shift past the outlier
    cap is rejected anyway, so only the columns up to one past the cap are
    back-projected. Past the cap the returned column just has to exceed it.
    """
    cut = int(cfg.crop_frac * h)
    if h - 2 * cut <= 0:
        cut = 0
    limit = min(w, int(np.floor(cfg.outlier_cap * w)) + 2)
    mask = warp_mask((h, w), t, (limit, h - 2 * cut), origin=(0, cut))
    try:
        return find_col_min(mask, 0.0)
    except NoValidColumn:
        if limit == w:
            raise
        return limit


def blend_seam(left, right, width: int | None = None) -> np.ndarray:
    """Linear alpha ramp from ``left`` (alpha 1) to ``right`` (alpha 0).

    ``left`` and ``right`` are equally sized regions; the ramp runs over their
    first ``width`` columns (all of them by default), evaluated at column
    centres, and columns past the ramp keep ``right``.
    """
    lf = np.asarray(left)
    rf = np.asarray(right)
    if lf.shape != rf.shape:
        raise ValueError("blend regions must have equal shape")
    n = lf.shape[1]
    width = n if width is None else min(int(width), n)
    out = rf.copy()
    if width <= 0:
        return out
    alpha = 1.0 - (np.arange(width) + 0.5) / width
    if lf.ndim == 3:
        alpha = alpha[:, None]
    mixed = alpha * lf[:, :width].astype(np.float64) + (1.0 - alpha) * rf[:, :width]
    out[:, :width] = round_u8(mixed)
    return out


def stitch_pair(tail, frame, col_min: int, blend_width: int = 0) -> np.ndarray:
    """Frame-1 ``tail`` extended by ``col_min`` columns with ``frame`` inserted.

    Frame pixels win in the overlap except in the blend zone, which starts at
    the seam and covers ``blend_width`` columns of the overlap.
    """
    w = frame.shape[1]
    s = int(col_min)
    pair = np.empty((frame.shape[0], w + s) + frame.shape[2:], dtype=np.uint8)
    pair[:, :s] = tail[:, :s]
    pair[:, s:] = frame
    zone = min(int(blend_width), w - s)
    if zone > 0:
        pair[:, s : s + zone] = blend_seam(tail[:, s : s + zone], frame[:, :zone])
    return pair


def append_frame(panorama, frame, col_min: int, blend_width: int = 0) -> np.ndarray:
    """Grow ``panorama`` by ``col_min`` columns with ``frame`` at the right end."""
    pano = as_image(panorama)
    frame = as_image(frame)
    w = frame.shape[1]
    if pano.shape[1] < w or pano.shape[0] != frame.shape[0]:
        raise ValueError("panorama must be at least one frame wide and equally tall")
    s = int(col_min)
    if not 0 <= s <= w:
        raise ValueError(f"col_min {s} outside [0, {w}]")
    if s == 0:
        return pano
    pair = stitch_pair(pano[:, -w:], frame, s, blend_width)
    return np.concatenate([pano[:, :-w], pair], axis=1)


Observer = Callable[[int, np.ndarray, np.ndarray, ShiftMeasurement], None]


def compose_sequence(frames, shift_fn, blend: BlendConfig, stats: StitchStats, observer=None):
    """Shared composition loop; ``shift_fn(tail, frame, stats)`` yields a measurement."""
    it = iter(frames)
    try:
        first = as_image(next(it))
    except StopIteration:
        raise EmptySequence("no frames to stitch") from None
    w = first.shape[1]
    chunks: list[np.ndarray] = []
    tail = first
    for i, frame in enumerate(it, start=1):
        frame = as_image(frame)
        if frame.shape != first.shape:
            raise ValueError(f"frame {i} has shape {frame.shape}, expected {first.shape}")
        meas = shift_fn(tail, frame, stats)
        stats.iterations.append(meas)
        if observer is not None:
            observer(i, tail, frame, meas)
        s = meas.col_min
        if s <= 0:
            stats.wbp.append(0)
            continue
        stats.accepted.append(s)
        if blend.auto:
            bw = compute_wbp(stats.mean_shift, w)
        else:
            bw = min(blend.width, w)
        stats.wbp.append(bw)
        pair = stitch_pair(tail, frame, s, bw)
        chunks.append(pair[:, :s])
        tail = pair[:, s:]
    chunks.append(tail)
    return np.concatenate(chunks, axis=1) if len(chunks) > 1 else tail.copy()


def stitch_video(
    frames,
    cfg: StitchConfig = StitchConfig(),
    observer: Observer | None = None,
    match_fn: MatchFn | None = None,
):
    """Stitch a frame sequence into one unrolled panorama.

    The panorama starts as the first frame (the first frame is compared with
    itself, which is a no-op). ``observer(i, tail, frame, measurement)`` is
    called before every append with the raw, unblended inputs.

    Returns
    -------
    (panorama, StitchStats)
    """
    stats = StitchStats()
    cache = FeatureCache()

    def shift(tail, frame, st):
        return measure_shift(tail, frame, cfg, st.mean_shift if st.accepted else None, match_fn, cache)

    pano = compose_sequence(frames, shift, cfg.blend, stats, observer)
    log.debug("stitched %d iterations, mean shift %.3f", len(stats.iterations), stats.mean_shift)
    return pano, stats
