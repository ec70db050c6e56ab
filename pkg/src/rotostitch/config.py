"""Flat ``key = value`` run configuration shared by the CLI subcommands.

Keys are dotted (``harris.k``, ``blend.auto``). Values are parsed as JSON
where possible (numbers, booleans, lists, quoted strings) and as bare strings
otherwise. ``#`` starts a comment. Unknown keys are rejected.

A flat format is used because some keys are both a value and a section
prefix (``matcher = bf`` next to ``matcher.ratio = 0.8``), which nested
formats such as TOML cannot express.
"""

from __future__ import annotations

import json
from pathlib import Path

from .compose import BlendConfig, StitchConfig
from .errors import ConfigError
from .estimate import RobustParams
from .features import HarrisParams
from .imgcore import Rect
from .preprocess import PreprocessConfig

# key -> (default, kind); kind is one of bool, int, float, str, "rect", "path"
SCHEMA: dict[str, tuple[object, object]] = {
    "frames_dir": (None, "path"),
    "output_dir": (".", "path"),
    "seed": (0, int),
    "roi": (None, "rect"),
    "pitch_angle_deg": (0.0, float),
    "grayscale": (False, bool),
    "detector": ("harris_norm", str),
    "harris.k": (0.04, float),
    "harris.sigma": (1.0, float),
    "harris.threshold_rel": (0.01, float),
    "harris.nms_radius": (3.0, float),
    "harris.max_points": (500, int),
    "descriptor.patch_size": (15, int),
    "matcher": ("bf", str),
    "matcher.cross_check": (True, bool),
    "matcher.ratio": (0.75, float),
    "model": ("projective", str),
    "robust.method": ("ransac", str),
    "robust.inlier_thresh": (3.0, float),
    "robust.max_iters": (1000, int),
    "robust.confidence": (0.995, float),
    "robust.seed": (None, int),
    "blend.auto": (False, bool),
    "blend.width": (0, int),
    "compose.crop_frac": (0.10, float),
    "compose.outlier_cap": (0.5, float),
    "compose.paper_fidelity": (False, bool),
    "harness.misalignment_thresh": (25.0, float),
    "harness.psnr_cap": (100.0, float),
}


def _parse_scalar(text: str):
    text = text.strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        low = text.lower()
        if low in ("true", "yes", "on"):
            return True
        if low in ("false", "no", "off"):
            return False
        return text


def coerce(key: str, value):
    """Convert a parsed value to the schema type of ``key``."""
    if key not in SCHEMA:
        raise ConfigError(f"unknown config key {key!r}")
    default, kind = SCHEMA[key]
    if isinstance(value, str) and kind is not str and kind != "path":
        value = _parse_scalar(value)
    if value is None:
        if default is None:
            return None
        raise ConfigError(f"{key} may not be null")
    try:
        if kind is bool:
            if not isinstance(value, bool):
                raise TypeError
            return value
        if kind is int:
            if isinstance(value, bool) or float(value) != int(value):
                raise TypeError
            return int(value)
        if kind is float:
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if kind is str or kind == "path":
            return str(value)
        if kind == "rect":
            if len(value) != 4:
                raise TypeError
            return Rect(*(int(v) for v in value))
    except (TypeError, ValueError):
        pass
    raise ConfigError(f"bad value for {key}: {value!r}")


def parse_config_text(text: str, source: str = "<config>") -> dict:
    out = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in out:
            raise ConfigError(f"{source}:{n}: duplicate key {key!r}")
        out[key] = coerce(key, value)
    return out


def load_config(path) -> dict:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {p}: {exc}") from exc
    return parse_config_text(text, str(p))


def resolve(file_values: dict | None = None, overrides: dict | None = None) -> dict:
    """Defaults, then file values, then command-line overrides."""
    values = {k: d for k, (d, _) in SCHEMA.items()}
    for src in (file_values or {}, overrides or {}):
        for k, v in src.items():
            values[k] = coerce(k, v)
    return values


def stitch_config(values: dict) -> StitchConfig:
    seed = values["robust.seed"] if values["robust.seed"] is not None else values["seed"]
    try:
        return StitchConfig(
            detector=values["detector"],
            harris=HarrisParams(
                k=values["harris.k"],
                sigma=values["harris.sigma"],
                threshold_rel=values["harris.threshold_rel"],
                nms_radius=values["harris.nms_radius"],
                max_points=values["harris.max_points"],
            ),
            patch_size=values["descriptor.patch_size"],
            matcher=values["matcher"],
            cross_check=values["matcher.cross_check"],
            ratio=values["matcher.ratio"],
            model=values["model"],
            robust=RobustParams(
                method=values["robust.method"],
                inlier_thresh=values["robust.inlier_thresh"],
                max_iters=values["robust.max_iters"],
                confidence=values["robust.confidence"],
                seed=seed,
            ),
            blend=BlendConfig(width=values["blend.width"], auto=values["blend.auto"]),
            crop_frac=values["compose.crop_frac"],
            outlier_cap=values["compose.outlier_cap"],
            paper_fidelity=values["compose.paper_fidelity"],
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def preprocess_config(values: dict) -> PreprocessConfig:
    try:
        return PreprocessConfig(
            roi=values["roi"],
            pitch_angle_deg=values["pitch_angle_deg"],
            grayscale=values["grayscale"],
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
