"""Turn raw frames into the working strip: pitch rotation, ROI crop, grayscale."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .imgcore import Rect, as_image, crop, rotate, to_grayscale


@dataclass(frozen=True)
class PreprocessConfig:
    """``roi`` is given in rotated coordinates; ``None`` keeps the whole frame."""

    roi: Rect | None = None
    pitch_angle_deg: float = 0.0
    grayscale: bool = False

    def __post_init__(self):
        if not abs(self.pitch_angle_deg) < 45:
            raise ConfigError("pitch_angle_deg must satisfy |angle| < 45")
        if self.roi is not None and not isinstance(self.roi, Rect):
            object.__setattr__(self, "roi", Rect(*self.roi))


def preprocess_frame(frame, cfg: PreprocessConfig) -> np.ndarray:
    """Rotate by the thread pitch angle, then crop the ROI, then optionally go gray.

    Rotation comes first so the ROI can be placed where the thread shoulder is
    already horizontal.
    """
    img = as_image(frame)
    if cfg.pitch_angle_deg != 0:
        img, _ = rotate(img, cfg.pitch_angle_deg, interp="bilinear")
    if cfg.roi is not None:
        img = crop(img, cfg.roi)
    if cfg.grayscale:
        img = to_grayscale(img)
    return img


def preprocess_sequence(frames, cfg: PreprocessConfig) -> list[np.ndarray]:
    out = [preprocess_frame(f, cfg) for f in frames]
    shapes = {f.shape for f in out}
    if len(shapes) > 1:
        raise ValueError(f"frames differ in size after preprocessing: {sorted(shapes)}")
    return out
