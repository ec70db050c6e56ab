"""Image containers, colour conversion, warping with validity masks, cropping.

Images are plain ``numpy.uint8`` arrays, shaped ``(H, W)`` for grayscale and
``(H, W, 3)`` for colour. Masks are boolean ``(H, W)`` arrays. Pixel centres
sit on integer coordinates, ``x`` is the column and ``y`` the row.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import NamedTuple

import numpy as np
from PIL import Image as PILImage

from .errors import ImageTooSmall, OutOfBounds, SingularTransform

# Back-projected coordinates this close outside the source raster still count
# as inside; absorbs float error of near-integer transforms.
_EDGE_EPS = 1e-6


class Rect(NamedTuple):
    x: int
    y: int
    w: int
    h: int


def as_image(img) -> np.ndarray:
    """Validate ``img`` as an 8-bit raster and return it as an array."""
    a = np.asarray(img)
    if a.dtype != np.uint8:
        raise TypeError(f"expected uint8 image, got {a.dtype}")
    if a.ndim == 3 and a.shape[2] == 1:
        a = a[:, :, 0]
    if a.ndim not in (2, 3) or (a.ndim == 3 and a.shape[2] != 3):
        raise ValueError(f"expected (H, W) or (H, W, 3) image, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ImageTooSmall("image must be at least 1x1")
    return a


def channels(img: np.ndarray) -> int:
    return 1 if img.ndim == 2 else img.shape[2]


def to_grayscale(img) -> np.ndarray:
    """Convert to 1 channel with luma weights 0.299/0.587/0.114, rounded to nearest."""
    a = as_image(img)
    if a.ndim == 2:
        return a
    f = a.astype(np.float64)
    y = 0.299 * f[..., 0] + 0.587 * f[..., 1] + 0.114 * f[..., 2]
    return np.clip(np.floor(y + 0.5), 0, 255).astype(np.uint8)


def round_u8(values: np.ndarray) -> np.ndarray:
    """Round half up and saturate to 8 bit."""
    return np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)


def _matrix(t) -> np.ndarray:
    m = np.asarray(getattr(t, "m", t), dtype=np.float64)
    if m.shape != (3, 3):
        raise ValueError(f"transform must be 3x3, got {m.shape}")
    return m


def _inverse(t) -> np.ndarray:
    m = _matrix(t)
    if not np.all(np.isfinite(m)) or abs(np.linalg.det(m)) <= 1e-12:
        raise SingularTransform("transform is not invertible")
    return np.linalg.inv(m)


def _back_project(inv: np.ndarray, width: int, height: int, x0: int = 0, y0: int = 0):
    xs = np.arange(x0, x0 + width, dtype=np.float64)
    ys = np.arange(y0, y0 + height, dtype=np.float64)[:, None]
    w = inv[2, 0] * xs + inv[2, 1] * ys + inv[2, 2]
    sx = (inv[0, 0] * xs + inv[0, 1] * ys + inv[0, 2]) / w
    sy = (inv[1, 0] * xs + inv[1, 1] * ys + inv[1, 2]) / w
    return sx, sy


def _valid(sx, sy, src_w: int, src_h: int) -> np.ndarray:
    return (
        (sx >= -_EDGE_EPS)
        & (sx <= src_w - 1 + _EDGE_EPS)
        & (sy >= -_EDGE_EPS)
        & (sy <= src_h - 1 + _EDGE_EPS)
    )


def warp_mask(src_shape, t, canvas: tuple[int, int], origin: tuple[int, int] = (0, 0)) -> np.ndarray:
    """Validity mask of :func:`warp` without resampling any pixels.

    ``src_shape`` is ``(H, W)`` of the source image, ``canvas`` is
    ``(width, height)`` of the destination. A non-zero ``origin`` ``(x, y)``
    evaluates only the window of a larger destination starting there.
    """
    inv = _inverse(t)
    sx, sy = _back_project(inv, canvas[0], canvas[1], origin[0], origin[1])
    return _valid(sx, sy, src_shape[1], src_shape[0])


def sample_bilinear(img: np.ndarray, sx: np.ndarray, sy: np.ndarray) -> np.ndarray:
    """Bilinear samples of ``img`` at float coordinates, clamped to the raster.

    Returns float64 values; colour images keep a trailing channel axis.
    """
    h, w = img.shape[:2]
    sx = np.clip(sx, 0.0, w - 1)
    sy = np.clip(sy, 0.0, h - 1)
    x0 = np.minimum(np.floor(sx).astype(np.intp), max(w - 2, 0))
    y0 = np.minimum(np.floor(sy).astype(np.intp), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = sx - x0
    fy = sy - y0
    f = img.astype(np.float64, copy=False)
    if img.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    top = f[y0, x0] * (1 - fx) + f[y0, x1] * fx
    bot = f[y1, x0] * (1 - fx) + f[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def warp(img, t, canvas: tuple[int, int] | None = None, interp: str = "bilinear"):
    """Warp ``img`` by the 3x3 transform ``t`` onto a ``(width, height)`` canvas.

    Every destination pixel samples the source at ``t^-1 (x, y)``. Pixels whose
    back-projection falls outside the source are 0 and flagged false in the
    returned mask.

    Returns
    -------
    (image, mask)
    """
    a = as_image(img)
    if canvas is None:
        canvas = (a.shape[1], a.shape[0])
    inv = _inverse(t)
    width, height = int(canvas[0]), int(canvas[1])
    sx, sy = _back_project(inv, width, height)
    mask = _valid(sx, sy, a.shape[1], a.shape[0])
    if interp == "nearest":
        xi = np.clip(np.floor(sx + 0.5), 0, a.shape[1] - 1).astype(np.intp)
        yi = np.clip(np.floor(sy + 0.5), 0, a.shape[0] - 1).astype(np.intp)
        out = a[yi, xi]
    elif interp == "bilinear":
        out = round_u8(sample_bilinear(a, sx, sy))
    else:
        raise ValueError(f"unknown interpolation {interp!r}")
    out[~mask] = 0
    return out, mask


def rotation_transform(width: int, height: int, angle_deg: float):
    """Affine rotation about the image centre and the canvas that contains it.

    A positive angle rotates a line's direction angle upwards in image
    coordinates (y pointing down), i.e. slope ``tan(phi)`` becomes
    ``tan(phi + angle)``.

    Returns
    -------
    (m, (canvas_w, canvas_h))
    """
    if not math.isfinite(angle_deg):
        raise ValueError("angle must be finite")
    a = math.radians(angle_deg)
    c, s = math.cos(a), math.sin(a)
    cw = abs(c) * width + abs(s) * height
    ch = abs(s) * width + abs(c) * height
    new_w = max(1, math.ceil(cw - 1e-6))
    new_h = max(1, math.ceil(ch - 1e-6))
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    ncx, ncy = (new_w - 1) / 2.0, (new_h - 1) / 2.0
    m = np.array(
        [
            [c, -s, ncx - (c * cx - s * cy)],
            [s, c, ncy - (s * cx + c * cy)],
            [0.0, 0.0, 1.0],
        ]
    )
    return m, (new_w, new_h)


def rotate(img, angle_deg: float, interp: str = "bilinear"):
    """Rotate about the image centre onto a canvas holding the rotated bounds."""
    a = as_image(img)
    if angle_deg == 0:
        return a.copy(), np.ones(a.shape[:2], dtype=bool)
    m, canvas = rotation_transform(a.shape[1], a.shape[0], angle_deg)
    return warp(a, m, canvas, interp)


def crop(img, r: Rect) -> np.ndarray:
    a = as_image(img)
    x, y, w, h = (int(v) for v in r)
    if w < 1 or h < 1 or x < 0 or y < 0 or x + w > a.shape[1] or y + h > a.shape[0]:
        raise OutOfBounds(f"rect {tuple(r)} outside image {a.shape[1]}x{a.shape[0]}")
    return a[y : y + h, x : x + w].copy()


def read_image(path) -> np.ndarray:
    """Read an 8-bit PNG, PGM or PPM file."""
    path = Path(path)
    if path.suffix.lower() not in (".png", ".pgm", ".ppm", ".pnm"):
        raise ValueError(f"unsupported image format: {path.suffix}")
    with PILImage.open(path) as im:
        if im.mode in ("L", "P", "1", "LA"):
            return np.asarray(im.convert("L"), dtype=np.uint8).copy()
        if im.mode not in ("RGB", "RGBA"):
            raise ValueError(f"unsupported pixel mode {im.mode} in {path}")
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def write_image(path, img) -> None:
    """Write an 8-bit PNG, PGM (grayscale) or PPM (colour) file."""
    a = as_image(img)
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix not in (".png", ".pgm", ".ppm", ".pnm"):
        raise ValueError(f"unsupported image format: {path.suffix}")
    if suffix == ".pgm" and a.ndim == 3:
        raise ValueError("PGM holds grayscale images only")
    if suffix == ".ppm" and a.ndim == 2:
        a = np.repeat(a[:, :, None], 3, axis=2)
    PILImage.fromarray(a).save(path)
