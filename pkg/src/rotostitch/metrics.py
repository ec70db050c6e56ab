"""Stitch quality metrics: edge, overlap, exposure and two sharpness measures.

The overlap metric follows its published definition literally: PSNR is built
on the mean *absolute* difference, and the final score mixes gray-level,
probability-mass and decibel terms without rescaling. Lower is better.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import HeightMismatch, IdenticalRegions, ImageTooNarrow, ImageTooSmall
from .imgcore import to_grayscale


@dataclass(frozen=True)
class OverlapReport:
    d_area: float
    psnr: float
    d_euk: float
    d_man: float
    d_chi: float

    @property
    def om(self) -> float:
        return self.d_area + self.d_euk + self.d_man + self.d_chi - self.psnr

    def to_dict(self) -> dict:
        return {
            "d_area": self.d_area,
            "psnr": self.psnr,
            "d_euk": self.d_euk,
            "d_man": self.d_man,
            "d_chi": self.d_chi,
            "om": self.om,
        }


@dataclass(frozen=True)
class ExposureParams:
    smooth_window: int = 15
    min_prominence_rel: float = 0.05

    def __post_init__(self):
        if self.smooth_window < 1 or self.smooth_window % 2 == 0:
            raise ValueError("smooth_window must be odd and >= 1")
        if not 0 <= self.min_prominence_rel < 1:
            raise ValueError("min_prominence_rel must lie in [0, 1)")


def _gray(img) -> np.ndarray:
    a = np.asarray(img)
    if a.dtype == np.uint8:
        a = to_grayscale(a)
    elif a.ndim != 2:
        raise ValueError("metrics need single-channel input")
    return a.astype(np.float64)


def edge_metric(f1, f2) -> float:
    """Mean absolute difference between the last column of ``f1`` and the first of ``f2``."""
    a, b = _gray(f1), _gray(f2)
    if a.shape[0] != b.shape[0]:
        raise HeightMismatch(f"frame heights differ: {a.shape[0]} vs {b.shape[0]}")
    return float(np.mean(np.abs(a[:, -1] - b[:, 0])))


def histogram(region: np.ndarray, bins: int = 256) -> np.ndarray:
    """Probability-mass histogram over ``[0, 255]`` with equal-width bins."""
    v = np.asarray(region, dtype=np.float64).ravel()
    idx = np.minimum((v * bins / 256.0).astype(np.intp), bins - 1)
    counts = np.bincount(idx, minlength=bins).astype(np.float64)
    return counts / counts.sum()


def overlap_metric(a1, a2, bins: int = 256) -> OverlapReport:
    """Pixel and histogram comparison of two equally sized overlap regions.

    Raises :class:`IdenticalRegions` when the regions agree everywhere, since
    PSNR is then infinite.
    """
    x1, x2 = _gray(a1), _gray(a2)
    if x1.shape != x2.shape:
        raise ValueError(f"overlap regions differ in shape: {x1.shape} vs {x2.shape}")
    d_area = float(np.mean(np.abs(x1 - x2)))
    if d_area == 0:
        raise IdenticalRegions("overlap regions are identical")
    psnr = 20.0 * math.log10(255.0 / math.sqrt(d_area))
    h1, h2 = histogram(x1, bins), histogram(x2, bins)
    diff = h1 - h2
    tot = h1 + h2
    nz = tot > 0
    return OverlapReport(
        d_area=d_area,
        psnr=psnr,
        d_euk=float(np.sqrt(np.sum(diff * diff))),
        d_man=float(np.sum(np.abs(diff))),
        d_chi=float(np.sum(diff[nz] ** 2 / tot[nz])),
    )


def column_profile(img, smooth_window: int = 15) -> np.ndarray:
    """Column intensity sums smoothed by a centred moving average (valid part only)."""
    sums = _gray(img).sum(axis=0)
    k = smooth_window
    c = np.concatenate([[0.0], np.cumsum(sums)])
    return (c[k:] - c[:-k]) / k


def zigzag_extrema(signal: np.ndarray, threshold: float) -> list[int]:
    """Alternating peaks and troughs whose swings are at least ``threshold``.

    A running extreme is confirmed once the signal retraces ``threshold`` from
    it. Extrema sitting on the first or last sample are discarded, because the
    signal may merely be cut off there.
    """
    n = len(signal)
    if n < 3 or threshold <= 0:
        return []
    s = np.asarray(signal, dtype=np.float64)
    out: list[int] = []
    hi_i = lo_i = 0
    mode = 0  # 0 undecided, +1 tracking a peak, -1 tracking a trough
    for i in range(1, n):
        v = s[i]
        if mode >= 0 and v > s[hi_i]:
            hi_i = i
        if mode <= 0 and v < s[lo_i]:
            lo_i = i
        if mode == 0:
            if s[hi_i] - v >= threshold and hi_i < i:
                out.append(hi_i)
                mode, lo_i = -1, i
            elif v - s[lo_i] >= threshold and lo_i < i:
                out.append(lo_i)
                mode, hi_i = 1, i
        elif mode == 1 and s[hi_i] - v >= threshold:
            out.append(hi_i)
            mode, lo_i = -1, i
        elif mode == -1 and v - s[lo_i] >= threshold:
            out.append(lo_i)
            mode, hi_i = 1, i
    pending = hi_i if mode == 1 else lo_i if mode == -1 else None
    if pending is not None and out and abs(s[pending] - s[out[-1]]) >= threshold:
        out.append(pending)
    return [i for i in out if 0 < i < n - 1]


def exposure_metric(img, p: ExposureParams = ExposureParams()) -> float:
    """Mean peak-to-trough swing of the smoothed column-sum profile.

    Only swings of at least ``min_prominence_rel`` times the profile range
    count. Returns 0 with fewer than two qualifying extrema.
    """
    g = _gray(img)
    if g.shape[1] < 3 * p.smooth_window:
        raise ImageTooNarrow(f"width {g.shape[1]} < 3 * smooth_window ({3 * p.smooth_window})")
    prof = column_profile(g, p.smooth_window)
    span = float(prof.max() - prof.min())
    if span <= 0:
        return 0.0
    ext = zigzag_extrema(prof, p.min_prominence_rel * span)
    if len(ext) < 2:
        return 0.0
    vals = prof[ext]
    return float(np.mean(np.abs(np.diff(vals))))


def sharpness_laplace(img) -> float:
    """Variance of the 4-neighbour Laplacian over interior pixels."""
    g = _gray(img)
    if min(g.shape) < 3:
        raise ImageTooSmall("Laplace sharpness needs at least 3x3 pixels")
    lap = g[:-2, 1:-1] + g[2:, 1:-1] + g[1:-1, :-2] + g[1:-1, 2:] - 4.0 * g[1:-1, 1:-1]
    return float(np.var(lap))


def sharpness_fft(img, center_radius_frac: float = 0.10) -> float:
    """Mean log-magnitude spectrum outside a centred low-frequency disc.

    The image is mean subtracted, so a uniform image scores the floor
    ``20 log10(1e-9) = -180``.
    """
    g = _gray(img)
    h, w = g.shape
    if min(h, w) < 3:
        raise ImageTooSmall("FFT sharpness needs at least 3x3 pixels")
    spec = np.fft.fftshift(np.fft.fft2(g - g.mean()))
    yy, xx = np.mgrid[0:h, 0:w]
    r = center_radius_frac * min(w, h)
    outside = (yy - h // 2) ** 2 + (xx - w // 2) ** 2 > r * r
    mag = 20.0 * np.log10(np.abs(spec[outside]) + 1e-9)
    return float(mag.mean())


def all_metrics(img) -> dict:
    out = {
        "sharpness_laplace": sharpness_laplace(img),
        "sharpness_fft": sharpness_fft(img),
    }
    try:
        out["exposure"] = exposure_metric(img)
    except ImageTooNarrow:
        out["exposure"] = None
    return out
