"""Harris corners (plain and subpixel-refined) and normalised patch descriptors."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import cv2
import numpy as np

from .errors import ImageTooSmall


class FeaturePoint(NamedTuple):
    x: float
    y: float
    response: float


@dataclass(frozen=True)
class HarrisParams:
    k: float = 0.04
    sigma: float = 1.0
    threshold_rel: float = 0.01
    nms_radius: float = 3.0
    max_points: int = 500

    def __post_init__(self):
        if not 0.01 <= self.k <= 0.2:
            raise ValueError(f"Harris k must lie in [0.01, 0.2], got {self.k}")
        if not 0.0 < self.threshold_rel < 1.0:
            raise ValueError("threshold_rel must lie in (0, 1)")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.max_points < 1:
            raise ValueError("max_points must be >= 1")

    @property
    def window_radius(self) -> int:
        # sigma 1.0 -> 5x5 window
        return max(1, int(round(2.0 * self.sigma)))

    @property
    def border(self) -> int:
        return 1 + self.window_radius


def _as_float_gray(img, dtype=np.float64) -> np.ndarray:
    a = np.asarray(img)
    if a.ndim != 2:
        raise ValueError("Harris detection needs a single-channel image")
    return a.astype(dtype, copy=False)


def sobel_gradients(img) -> tuple[np.ndarray, np.ndarray]:
    """3x3 Sobel derivatives (unnormalised, single precision), replicated border.

    Integer-valued input gives exact gradients.
    """
    f = _as_float_gray(img, np.float32)
    gx = cv2.Sobel(f, cv2.CV_32F, 1, 0, ksize=3, borderType=cv2.BORDER_REPLICATE)
    gy = cv2.Sobel(f, cv2.CV_32F, 0, 1, ksize=3, borderType=cv2.BORDER_REPLICATE)
    return gx, gy


def gaussian_taps(sigma: float, radius: int) -> np.ndarray:
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-0.5 * (x / sigma) ** 2)
    return g / g.sum()


def harris_response(img, p: HarrisParams = HarrisParams()) -> np.ndarray:
    """``R = det(M) - k trace(M)^2`` from the Gaussian-weighted Sobel structure tensor.

    Accepts uint8 or float grayscale input and computes in single precision,
    as is customary for this detector. Pixels within the combined Sobel and
    window radius of the border are set to 0.
    """
    f = _as_float_gray(img, np.float32)
    b = p.border
    if min(f.shape) < 2 * b + 1:
        raise ImageTooSmall(f"Harris needs min dimension >= {2 * b + 1}, got {f.shape}")
    gx, gy = sobel_gradients(f)
    g = gaussian_taps(p.sigma, p.window_radius).astype(np.float32)

    def window(a):
        return cv2.sepFilter2D(a, cv2.CV_32F, g, g, borderType=cv2.BORDER_REPLICATE)

    sxx = window(gx * gx)
    syy = window(gy * gy)
    sxy = window(gx * gy)
    tr = sxx + syy
    resp = sxx * syy - sxy * sxy - np.float32(p.k) * tr * tr
    resp[:b, :] = 0
    resp[-b:, :] = 0
    resp[:, :b] = 0
    resp[:, -b:] = 0
    return resp


def detect_corners(img, p: HarrisParams = HarrisParams()) -> list[FeaturePoint]:
    """Local maxima of the Harris response above ``threshold_rel * max(R)``.

    Greedy non-maximum suppression visits candidates strongest first (ties in
    row-major order) and drops any candidate closer than ``nms_radius`` to an
    accepted point. At most ``max_points`` are returned, strongest first.
    """
    resp = harris_response(img, p)
    peak = float(resp.max())
    if peak <= 0:
        return []
    local_max = resp == cv2.dilate(resp, np.ones((3, 3), np.uint8), borderType=cv2.BORDER_REPLICATE)
    cand = local_max & (resp > p.threshold_rel * peak)
    ys, xs = np.nonzero(cand)
    if ys.size == 0:
        return []
    vals = resp[ys, xs]
    # nonzero() is row-major already, so a stable sort keeps that tie order
    order = np.argsort(-vals, kind="stable")
    # candidates sit on integer pixels, so suppression is a stamped disc of
    # offsets with d^2 < r^2 in an occupancy raster
    rad = max(int(np.ceil(p.nms_radius)) - 1, 0)
    off = np.arange(-rad, rad + 1)
    disc = off[:, None] ** 2 + off[None, :] ** 2 < p.nms_radius * p.nms_radius
    h, w = resp.shape
    taken = np.zeros((h + 2 * rad, w + 2 * rad), dtype=bool)
    span = 2 * rad + 1
    out: list[FeaturePoint] = []
    for i in order.tolist():
        y, x = int(ys[i]), int(xs[i])
        if taken[y + rad, x + rad]:
            continue
        out.append(FeaturePoint(float(x), float(y), float(vals[i])))
        if len(out) >= p.max_points:
            break
        taken[y : y + span, x : x + span] |= disc
    return out


def refine_subpixel(
    img,
    pts: list[FeaturePoint],
    win: int = 5,
    eps: float = 0.001,
    max_iter: int = 40,
) -> list[FeaturePoint]:
    """Iterative gradient-orthogonality corner refinement.

    Each step solves ``sum(g g^T) q = sum(g g^T x)`` over the integer pixels
    ``x`` of a ``(2 win + 1)^2`` window around the current estimate, with
    Sobel gradients ``g``. All window pixels count equally.
    Iteration stops once the update is below ``eps`` or after ``max_iter``
    steps. A point that would drift more than ``win`` pixels from its seed
    falls back to the seed; a window without gradient structure leaves the
    point unchanged.
    """
    f = _as_float_gray(img)
    h, w = f.shape
    if not pts:
        return []
    gx, gy = sobel_gradients(f)
    gx = gx.astype(np.float64)
    gy = gy.astype(np.float64)
    d = np.arange(-win, win + 1)
    seed = np.array([(p.x, p.y) for p in pts], dtype=np.float64)
    cur = seed.copy()
    active = np.ones(len(pts), dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        c = cur[idx]
        cx = np.floor(c[:, 0] + 0.5).astype(np.intp)
        cy = np.floor(c[:, 1] + 0.5).astype(np.intp)
        xs = np.clip(cx[:, None] + d, 0, w - 1)
        ys = np.clip(cy[:, None] + d, 0, h - 1)
        px = xs[:, None, :].astype(np.float64)
        py = ys[:, :, None].astype(np.float64)
        ix = gx[ys[:, :, None], xs[:, None, :]]
        iy = gy[ys[:, :, None], xs[:, None, :]]
        wxx, wxy, wyy = ix * ix, ix * iy, iy * iy
        a = wxx.sum(axis=(1, 2))
        b = wxy.sum(axis=(1, 2))
        cc = wyy.sum(axis=(1, 2))
        det = a * cc - b * b
        ok = det > 1e-9 * np.maximum((a + cc) ** 2, 1e-300)
        bx = (wxx * px + wxy * py).sum(axis=(1, 2))
        by = (wxy * px + wyy * py).sum(axis=(1, 2))
        with np.errstate(divide="ignore", invalid="ignore"):
            nxt = np.stack([(cc * bx - b * by) / det, (a * by - b * bx) / det], axis=1)
        drift = np.hypot(*(nxt - seed[idx]).T) > win
        step = np.hypot(*(nxt - c).T)
        move = ok & ~drift
        cur[idx[move]] = nxt[move]
        cur[idx[ok & drift]] = seed[idx[ok & drift]]
        active[idx[~ok | drift | (step < eps)]] = False
    x = np.clip(cur[:, 0], 0.0, w - 1.0)
    y = np.clip(cur[:, 1], 0.0, h - 1.0)
    return [FeaturePoint(float(x[i]), float(y[i]), p.response) for i, p in enumerate(pts)]


def describe(img, pts: list[FeaturePoint], patch_size: int = 15):
    """Mean- and variance-normalised bilinear patches around each point.

    Points closer than the patch radius to the border are dropped.

    Returns
    -------
    (kept_points, descriptors)
        ``descriptors`` is a float64 array of shape ``(len(kept_points),
        patch_size**2)``. A flat patch yields an all-zero row.
    """
    if patch_size < 1 or patch_size % 2 == 0:
        raise ValueError("patch_size must be odd and positive")
    f = np.asarray(img)
    if f.ndim != 2:
        raise ValueError("descriptors need a single-channel image")
    h, w = f.shape
    r = patch_size // 2
    kept = [p for p in pts if r <= p.x <= w - 1 - r and r <= p.y <= h - 1 - r]
    if not kept:
        return [], np.zeros((0, patch_size * patch_size))
    xy = np.array([(p.x, p.y) for p in kept])
    x0 = np.floor(xy[:, 0]).astype(np.intp)
    y0 = np.floor(xy[:, 1]).astype(np.intp)
    # integer patch offsets share one fractional position per point, so the
    # bilinear patch is a weighted sum of four integer-aligned windows
    if h > patch_size and w > patch_size:
        # shift points on the last usable row/column one pixel back (weight 1)
        x0 = np.minimum(x0, w - 2 - r)
        y0 = np.minimum(y0, h - 2 - r)
        src = f
    else:
        src = np.pad(f, ((0, 1), (0, 1)), mode="edge")
    fx = (xy[:, 0] - x0)[:, None, None]
    fy = (xy[:, 1] - y0)[:, None, None]
    win = np.lib.stride_tricks.sliding_window_view(src, (patch_size + 1, patch_size + 1))
    blk = win[y0 - r, x0 - r].astype(np.float64)
    patches = (
        (1 - fy) * ((1 - fx) * blk[:, :-1, :-1] + fx * blk[:, :-1, 1:])
        + fy * ((1 - fx) * blk[:, 1:, :-1] + fx * blk[:, 1:, 1:])
    ).reshape(len(kept), -1)
    patches = patches - patches.mean(axis=1, keepdims=True)
    std = patches.std(axis=1, keepdims=True)
    flat = std[:, 0] < 1e-9
    std[flat] = 1.0
    patches = patches / std
    patches[flat] = 0.0
    return kept, patches
