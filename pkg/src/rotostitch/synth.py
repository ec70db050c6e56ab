"""Synthetic ground truth: a textured cylinder rotating in front of a camera.

The texture is the unrolled surface; its width is the circumference in
pixels. Frames are rendered column by column by inverting the projection of
the cylinder, so the true per-frame surface shift is known exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InvalidGeometry
from .imgcore import as_image, round_u8

ORTHOGRAPHIC = "orthographic"
PERSPECTIVE = "perspective"


@dataclass(frozen=True)
class CameraConfig:
    """Camera looking at the cylinder axis from ``distance`` radii away.

    ``focal_px=None`` picks the focal length that maps one frame pixel to one
    texture pixel at the centre column. Orthographic mode ignores the focal
    length and distance and uses the same unit centre scale.
    """

    frame_w: int = 200
    frame_h: int | None = None
    mode: str = ORTHOGRAPHIC
    distance: float = 4.0
    focal_px: float | None = None

    def __post_init__(self):
        if self.mode not in (ORTHOGRAPHIC, PERSPECTIVE):
            raise InvalidGeometry(f"unknown camera mode {self.mode!r}")
        if self.frame_w < 1 or (self.frame_h is not None and self.frame_h < 1):
            raise InvalidGeometry("frame size must be positive")
        if self.mode == PERSPECTIVE and not self.distance > 1:
            raise InvalidGeometry("perspective camera must sit outside the cylinder (distance > 1)")
        if self.focal_px is not None and not self.focal_px > 0:
            raise InvalidGeometry("focal_px must be positive")


@dataclass(frozen=True)
class SequenceSpec:
    texture: np.ndarray
    deg_per_frame: float
    n_frames: int
    exposure_flicker: float = 0.0
    flicker_period: float = 7.0
    noise_sigma: float = 0.0
    seed: int = 0
    flicker_phase: float = 0.0

    def __post_init__(self):
        as_image(self.texture)
        if self.n_frames < 1:
            raise InvalidGeometry("n_frames must be >= 1")
        if not math.isfinite(self.deg_per_frame):
            raise InvalidGeometry("deg_per_frame must be finite")
        if self.exposure_flicker < 0 or self.noise_sigma < 0:
            raise InvalidGeometry("flicker and noise must be non-negative")

    @property
    def radius_px(self) -> float:
        return self.texture.shape[1] / (2.0 * math.pi)

    @property
    def true_shift_px(self) -> float:
        return self.deg_per_frame / 360.0 * self.texture.shape[1]


def _focal(spec: SequenceSpec, cam: CameraConfig) -> float:
    if cam.focal_px is not None:
        return cam.focal_px
    return (cam.distance - 1.0) * spec.radius_px


def column_angles(spec: SequenceSpec, cam: CameraConfig) -> np.ndarray:
    """Surface angle in radians seen by every frame column; NaN off the silhouette.

    Angle 0 faces the camera and grows towards +x.
    """
    cx = (cam.frame_w - 1) / 2.0
    x = np.arange(cam.frame_w, dtype=np.float64) - cx
    if cam.mode == ORTHOGRAPHIC:
        s = x / spec.radius_px
        with np.errstate(invalid="ignore"):
            return np.where(np.abs(s) <= 1.0, np.arcsin(np.clip(s, -1, 1)), np.nan)
    d = cam.distance
    u = x / _focal(spec, cam)
    # camera at (0, -d) looking along +z: ray (t u, t - d) hits x^2 + z^2 = 1
    a = u * u + 1.0
    disc = d * d - a * (d * d - 1.0)
    with np.errstate(invalid="ignore"):
        t = (d - np.sqrt(disc)) / a
    px, pz = t * u, t - d
    theta = np.arctan2(px, -pz)
    return np.where(disc >= 0, theta, np.nan)


def _texture_rows(spec: SequenceSpec, cam: CameraConfig) -> np.ndarray:
    th = spec.texture.shape[0]
    fh = cam.frame_h or th
    if fh == th:
        return np.arange(th, dtype=np.float64)
    return (np.arange(fh) + 0.5) * (th / fh) - 0.5


def _sample_texture(tex: np.ndarray, cols: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Bilinear texture lookup, wrapping horizontally and clamping vertically."""
    tw, th = tex.shape[1], tex.shape[0]
    f = tex.astype(np.float64)
    c = np.mod(cols, tw)
    c0 = np.floor(c).astype(np.intp)
    fc = c - c0
    c0 %= tw
    c1 = (c0 + 1) % tw
    r = np.clip(rows, 0, th - 1)
    r0 = np.minimum(np.floor(r).astype(np.intp), max(th - 2, 0))
    r1 = np.minimum(r0 + 1, th - 1)
    fr = (r - r0)[:, None]
    if tex.ndim == 3:
        fc = fc[:, None]
        fr = fr[..., None]
    top = f[r0][:, c0] * (1 - fc) + f[r0][:, c1] * fc
    bot = f[r1][:, c0] * (1 - fc) + f[r1][:, c1] * fc
    return top * (1 - fr) + bot * fr


def flicker_gain(spec: SequenceSpec, index: int) -> float:
    """Brightness gain of frame ``index``: ``1 + f sin(2 pi i / period + phase)``."""
    arg = 2.0 * math.pi * index / spec.flicker_period + spec.flicker_phase
    return 1.0 + spec.exposure_flicker * math.sin(arg)


def render_frame(spec: SequenceSpec, cam: CameraConfig, angle: float, index: int = 0) -> np.ndarray:
    """Render the cylinder rotated by ``angle`` degrees.

    ``index`` selects the flicker gain and the noise stream of this frame.
    """
    tex = as_image(spec.texture)
    theta = column_angles(spec, cam)
    visible = np.isfinite(theta)
    cols = (np.degrees(np.where(visible, theta, 0.0)) + angle) / 360.0 * tex.shape[1]
    vals = _sample_texture(tex, cols, _texture_rows(spec, cam))
    vals *= flicker_gain(spec, index)
    if spec.noise_sigma > 0:
        rng = np.random.default_rng([spec.seed, index])
        vals = vals + rng.normal(0.0, spec.noise_sigma, size=vals.shape)
    out = round_u8(vals)
    out[:, ~visible] = 0
    return out


def generate_sequence(spec: SequenceSpec, cam: CameraConfig):
    """Render ``n_frames`` frames at angles ``i * deg_per_frame``.

    The ground truth is the texture strip swept by the left frame edge, one
    frame width plus the total planted shift wide, starting at the texture
    column seen by column 0 of the first frame.

    Returns
    -------
    (frames, ground_truth, true_shift_px)
    """
    frames = [render_frame(spec, cam, i * spec.deg_per_frame, i) for i in range(spec.n_frames)]
    shift = spec.true_shift_px
    theta = column_angles(spec, cam)
    left = float(np.nanmin(theta)) if np.isfinite(theta).any() else 0.0
    start = math.degrees(left) / 360.0 * spec.texture.shape[1]
    width = cam.frame_w + int(round((spec.n_frames - 1) * shift))
    cols = start + np.arange(width, dtype=np.float64)
    truth = round_u8(_sample_texture(spec.texture, cols, _texture_rows(spec, cam)))
    return frames, truth, shift


def random_texture(width: int, height: int, seed: int = 0, blur: float = 2.0, contrast: float = 60.0):
    """Smooth random grayscale texture with unit-scale blobs and corners."""
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, 1.0, size=(height, width))
    smooth = ndimage.gaussian_filter(noise, blur, mode="wrap")
    smooth /= smooth.std() + 1e-12
    return round_u8(128.0 + contrast * smooth)


def checker_texture(
    width: int, height: int, cell: int = 10, lo: int = 40, hi: int = 215, jitter: int = 0, seed: int = 0
):
    """Checkerboard of ``cell`` px squares alternating between ``lo`` and ``hi``.

    ``jitter > 0`` offsets every cell's level by a uniform integer in
    ``[-jitter, jitter]``, which keeps the corners but makes neighbourhoods
    distinguishable for descriptor matching.
    """
    yy, xx = np.mgrid[0:height, 0:width]
    cy, cx = yy // cell, xx // cell
    img = np.where((cx + cy) % 2 == 1, hi, lo).astype(np.int64)
    if jitter > 0:
        rng = np.random.default_rng(seed)
        off = rng.integers(-jitter, jitter + 1, size=(cy.max() + 1, cx.max() + 1))
        img = img + off[cy, cx]
    return np.clip(img, 0, 255).astype(np.uint8)


def deg_for_shift(texture_width: int, shift_px: float) -> float:
    """Degrees per frame that move the surface by ``shift_px`` texture pixels."""
    return shift_px / texture_width * 360.0


def plant_defects(img, cells, size: int = 150, blob: int = 80, value: int = 20):
    """Copy of ``img`` with a dark ``blob`` square centred in each grid cell.

    ``cells`` holds ``(column, row)`` indices on the ``size`` patch grid. The
    default blob covers 28% of a 150 px patch.
    """
    out = as_image(img).copy()
    off = (size - blob) // 2
    for cx, cy in cells:
        x, y = cx * size + off, cy * size + off
        out[y : y + blob, x : x + blob] = value
    return out
