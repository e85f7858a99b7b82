"""Upstream detection ingestion and segmentation/classification metrics.

A segmentation backend hands over one record per image listing candidate
instances as (mask, class, confidence) triples.  The index file is
newline-delimited JSON; masks are referenced by file path (raster image or
RLE record) rather than embedded, so any backend can feed the pipeline.

Index record schema::

    {"image_id": str,
     "image_file": str,
     "detections": [{"class": "canoe"|"kayak", "confidence": float in (0,1],
                     "mask_file": str}, ...]}

Mask (and image) paths are resolved relative to the index file's directory
unless absolute.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NoDetectionError
from .mask import Mask

CLASSES = ("canoe", "kayak")


@dataclass(frozen=True)
class Detection:
    mask: Mask
    cls: str
    confidence: float

    def __post_init__(self) -> None:
        if self.cls not in CLASSES:
            raise ValueError(f"class must be one of {CLASSES}, got {self.cls!r}")
        if not 0.0 < self.confidence <= 1.0:
            raise ValueError(f"confidence must be in (0, 1], got {self.confidence}")


@dataclass(frozen=True)
class DetectionSet:
    image_id: str
    detections: list[Detection]

    def __post_init__(self) -> None:
        shapes = {d.mask.pixels.shape for d in self.detections}
        if len(shapes) > 1:
            raise ValueError(f"detections of {self.image_id} have mixed mask shapes: {shapes}")


@dataclass(frozen=True)
class GroundTruthMask:
    image_id: str
    mask: Mask
    cls: str

    def __post_init__(self) -> None:
        if self.cls not in CLASSES:
            raise ValueError(f"class must be one of {CLASSES}, got {self.cls!r}")
        if self.mask.foreground_count == 0:
            raise ValueError(f"ground-truth mask of {self.image_id} is empty")


def select_instance(det: DetectionSet) -> Detection:
    """The detection with the highest confidence; ties go to the earliest entry."""
    if not det.detections:
        raise NoDetectionError(f"image {det.image_id} has no detections")
    return max(det.detections, key=lambda d: d.confidence)


def iou(a: Mask, b: Mask) -> float:
    """Intersection over union of two same-shaped masks.  Two empty masks give 1.0."""
    if not a.same_shape(b):
        raise ValueError(
            f"mask shape mismatch: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
    union = int(np.logical_or(a.pixels, b.pixels).sum())
    if union == 0:
        return 1.0
    inter = int(np.logical_and(a.pixels, b.pixels).sum())
    return inter / union


def f1_per_class(preds: list[str], truths: list[str], cls: str) -> float:
    """F1 score treating ``cls`` as the positive class; 0.0 when never predicted nor true."""
    if len(preds) != len(truths):
        raise ValueError(f"length mismatch: {len(preds)} predictions vs {len(truths)} truths")
    tp = sum(1 for p, t in zip(preds, truths) if p == cls and t == cls)
    fp = sum(1 for p, t in zip(preds, truths) if p == cls and t != cls)
    fn = sum(1 for p, t in zip(preds, truths) if p != cls and t == cls)
    denom = 2 * tp + fp + fn
    if denom == 0:
        return 0.0
    return 2 * tp / denom


# -- index files ------------------------------------------------------------


def _resolve(path_str: str, base: Path) -> Path:
    p = Path(path_str)
    return p if p.is_absolute() else base / p


def load_detection_index(path: str | Path) -> list[DetectionSet]:
    """Read and validate a newline-delimited detection index, loading all masks."""
    path = Path(path)
    base = path.parent
    out: list[DetectionSet] = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        try:
            image_id = rec["image_id"]
            raw_dets = rec["detections"]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"{path}:{lineno}: missing field {exc}") from exc
        if not isinstance(raw_dets, list):
            raise ValueError(f"{path}:{lineno}: detections must be a list")
        try:
            dets = [
                Detection(
                    mask=Mask.load(_resolve(d["mask_file"], base)),
                    cls=d["class"],
                    confidence=float(d["confidence"]),
                )
                for d in raw_dets
            ]
            out.append(DetectionSet(image_id=image_id, detections=dets))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{path}:{lineno}: bad detection entry: {exc}") from exc
    return out


def load_groundtruth_index(path: str | Path) -> list[GroundTruthMask]:
    """Read a newline-delimited ground-truth index: {image_id, class, mask_file}."""
    path = Path(path)
    base = path.parent
    out: list[GroundTruthMask] = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            out.append(
                GroundTruthMask(
                    image_id=rec["image_id"],
                    mask=Mask.load(_resolve(rec["mask_file"], base)),
                    cls=rec["class"],
                )
            )
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        except (KeyError, TypeError) as exc:
            raise ValueError(f"{path}:{lineno}: missing field {exc}") from exc
    return out
