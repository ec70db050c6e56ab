"""Patch-grid defect classification, ten-area aggregation and the JSON report."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import PanoramaTooSmall
from .imgcore import as_image, to_grayscale

OK = "ok"
DEFECT = "defect"


@dataclass(frozen=True)
class Patch:
    x: int
    y: int
    size: int = 150
    label: str = OK

    @property
    def is_defect(self) -> bool:
        return self.label == DEFECT


@dataclass(frozen=True)
class AreaCounts:
    label: str
    areas: tuple[int, ...]

    @property
    def total(self) -> int:
        return int(sum(self.areas))

    def to_dict(self) -> dict:
        return {"label": self.label, "areas": list(self.areas), "total": self.total}


Classifier = Callable[[np.ndarray], str]


def partition_grid(panorama, size: int = 150) -> list[Patch]:
    """Non-overlapping ``size`` squares in row-major order; remainders are dropped."""
    img = as_image(panorama)
    if size < 1:
        raise ValueError("patch size must be >= 1")
    h, w = img.shape[:2]
    if h < size or w < size:
        raise PanoramaTooSmall(f"panorama {w}x{h} is smaller than one {size}px patch")
    return [Patch(x, y, size) for y in range(0, h - size + 1, size) for x in range(0, w - size + 1, size)]


@dataclass(frozen=True)
class DarkRatioClassifier:
    """Defect iff at least ``ratio`` of the patch pixels are darker than ``level``."""

    level: int = 60
    ratio: float = 0.20

    def __call__(self, patch: np.ndarray) -> str:
        g = to_grayscale(as_image(patch))
        return DEFECT if np.mean(g < self.level) >= self.ratio else OK


def always_ok(_patch: np.ndarray) -> str:
    return OK


CLASSIFIERS: dict[str, Classifier] = {"dark_ratio": DarkRatioClassifier(), "always_ok": always_ok}

BORDER = 2


def _draw_box(img: np.ndarray, p: Patch) -> None:
    color = 255 if img.ndim == 2 else np.array([255, 0, 0], dtype=np.uint8)
    x0, y0, x1, y1 = p.x, p.y, p.x + p.size, p.y + p.size
    b = min(BORDER, p.size)
    img[y0 : y0 + b, x0:x1] = color
    img[y1 - b : y1, x0:x1] = color
    img[y0:y1, x0 : x0 + b] = color
    img[y0:y1, x1 - b : x1] = color


def classify_patches(panorama, patches: list[Patch], classifier: Classifier = DarkRatioClassifier()):
    """Label every patch and mark defects with a 2 px frame on a copy.

    Returns
    -------
    (labelled_patches, annotated)
    """
    img = as_image(panorama)
    out = img.copy()
    labelled = []
    for p in patches:
        label = classifier(img[p.y : p.y + p.size, p.x : p.x + p.size])
        if label not in (OK, DEFECT):
            raise ValueError(f"classifier returned unknown label {label!r}")
        q = replace(p, label=label)
        labelled.append(q)
        if q.is_defect:
            _draw_box(out, q)
    return labelled, out


def aggregate_areas(panorama_width: int, defects: list[Patch], n_areas: int = 10, label: str = "t1") -> AreaCounts:
    """Count defect patches per vertical band by their top-left x coordinate."""
    if n_areas < 1 or panorama_width < 1:
        raise ValueError("need a positive width and at least one area")
    band = panorama_width / n_areas
    counts = [0] * n_areas
    for p in defects:
        if p.is_defect:
            counts[min(int(np.floor(p.x / band)), n_areas - 1)] += 1
    return AreaCounts(label, tuple(counts))


def report_document(counts: list[AreaCounts]) -> dict:
    if not counts:
        raise ValueError("a report needs at least one timestep")
    return {"timesteps": [c.to_dict() for c in counts]}


def write_report(counts: list[AreaCounts], path) -> Path:
    """Write the JSON report and a CSV twin (``.csv`` beside it) for plotting."""
    doc = report_document(counts)
    path = Path(path)
    path.write_text(json.dumps(doc, indent=2) + "\n")
    with path.with_suffix(".csv").open("w", newline="") as fh:
        wr = csv.writer(fh)
        n = len(counts[0].areas)
        wr.writerow(["label", *[f"area_{i}" for i in range(n)], "total"])
        for c in counts:
            wr.writerow([c.label, *c.areas, c.total])
    return path


def read_report(path) -> list[AreaCounts]:
    doc = json.loads(Path(path).read_text())
    out = []
    for ts in doc["timesteps"]:
        c = AreaCounts(str(ts["label"]), tuple(int(v) for v in ts["areas"]))
        if c.total != ts["total"]:
            raise ValueError(f"timestep {c.label}: total {ts['total']} != sum of areas {c.total}")
        out.append(c)
    return out


def analyse_panorama(panorama, label: str, size: int = 150, n_areas: int = 10, classifier: Classifier = DarkRatioClassifier()):
    """Partition, classify and aggregate one panorama.

    Returns ``(AreaCounts, labelled_patches, annotated)``.
    """
    img = as_image(panorama)
    labelled, annotated = classify_patches(img, partition_grid(img, size), classifier)
    counts = aggregate_areas(img.shape[1], [p for p in labelled if p.is_defect], n_areas, label)
    return counts, labelled, annotated
