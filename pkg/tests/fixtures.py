"""Synthetic sequences shared by the harness, CLI and acceptance tests."""

from __future__ import annotations

import math

import numpy as np

from rotostitch.imgcore import round_u8
from rotostitch.synth import (
    CameraConfig,
    SequenceSpec,
    checker_texture,
    deg_for_shift,
    generate_sequence,
    random_texture,
)


def planted_translation(shift: int, n: int, w: int = 120, h: int = 80, seed: int = 0):
    """Frames cut from one texture at integer offsets ``i * shift``."""
    tex = random_texture(w + shift * (n - 1) + 1, h, seed=seed)
    return tex, [tex[:, i * shift : i * shift + w] for i in range(n)]


def checker_cylinder(n: int = 8, shift: float = 6.0, frame_w: int = 200, seed: int = 0):
    # per-cell level jitter; an exact checkerboard is one repeated motif
    tex = checker_texture(2000, 120, cell=12, lo=60, hi=195, jitter=40, seed=seed)
    spec = SequenceSpec(tex, deg_for_shift(2000, shift), n)
    frames, _, _ = generate_sequence(spec, CameraConfig(frame_w=frame_w))
    return frames


def uniform_sequence(n: int = 5, shape=(100, 160), value: int = 128):
    return [np.full(shape, value, np.uint8) for _ in range(n)]


def column_neutral_texture(width: int, height: int, seed: int) -> np.ndarray:
    """Random texture whose column sums are all equal.

    Any exposure swing in a panorama built from it comes from the rendering,
    not from the texture itself.
    """
    t = random_texture(width, height, seed=seed).astype(np.float64)
    return round_u8(t - t.mean(axis=0, keepdims=True) + 128.0)


def phase4_sequence(seed: int = 0, flicker: float = 0.05, n: int = 60, shift: float = 13.752):
    """Blend-width study sequence: frame-to-frame alternating brightness."""
    tex = column_neutral_texture(6000, 200, seed)
    spec = SequenceSpec(
        tex,
        deg_for_shift(6000, shift),
        n,
        exposure_flicker=flicker,
        flicker_period=2.0,
        flicker_phase=math.pi / 2,
    )
    frames, truth, _ = generate_sequence(spec, CameraConfig(frame_w=240))
    return frames, truth
