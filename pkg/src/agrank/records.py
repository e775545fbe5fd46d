"""Detection manifest ingestion, validation and serialization.

A manifest is a JSON file describing, per image, the detected objects
(class label, bounding box, per-object attribute scores) and a single
whole-image attribute vector. It is the hand-off point from whatever
detector/classifier stack produced the detections; this module only
ingests, never infers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

DEFAULT_LOCAL_DIM = 64
DEFAULT_GLOBAL_DIM = 205


class ManifestError(ValueError):
    """Raised when a manifest file cannot be ingested."""


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in pixel coordinates, origin top-left."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    @property
    def centroid(self) -> tuple[float, float]:
        return ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)

    def clamped(self, width: float, height: float) -> "BoundingBox":
        """Clip the box to the image frame; may become degenerate."""
        return BoundingBox(
            x_min=min(max(self.x_min, 0.0), width),
            y_min=min(max(self.y_min, 0.0), height),
            x_max=min(max(self.x_max, 0.0), width),
            y_max=min(max(self.y_max, 0.0), height),
        )

    def is_degenerate(self) -> bool:
        return not (self.x_min < self.x_max and self.y_min < self.y_max)

    def as_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]


def _frozen_array(values, dtype=np.float64) -> np.ndarray:
    arr = np.asarray(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Detection:
    """One detected object: class label, box, attribute score vector."""

    class_label: str
    bbox: BoundingBox
    local_attributes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "local_attributes", _frozen_array(self.local_attributes))


@dataclass(frozen=True)
class ImageRecord:
    """All ingested data for one image; immutable after construction."""

    image_id: str
    width: int
    height: int
    detections: tuple[Detection, ...]
    global_attributes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "detections", tuple(self.detections))
        object.__setattr__(self, "global_attributes", _frozen_array(self.global_attributes))

    @property
    def num_objects(self) -> int:
        return len(self.detections)

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    @property
    def area(self) -> float:
        return float(self.width) * float(self.height)


def _clamp_unit(values: np.ndarray) -> np.ndarray:
    return np.clip(values, 0.0, 1.0)


def parse_manifest(path, binarize_threshold: float | None = None) -> list[ImageRecord]:
    """Read a manifest JSON file into validated, normalized records.

    Attribute scores are clamped to [0, 1]; boxes are clipped to the image
    frame. ``binarize_threshold``, when given, maps each attribute score to
    0/1 by thresholding (the classifier-probability scores are kept raw by
    default).

    Raises ManifestError on malformed JSON, duplicate image ids, wrong
    attribute dimensionality, non-finite values, or boxes that are
    degenerate after clipping.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ManifestError(f"manifest file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ManifestError(
            f"malformed JSON in {path} at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc

    if not isinstance(data, dict) or "images" not in data:
        raise ManifestError(f"{path}: manifest must be an object with an 'images' array")

    local_dim = int(data.get("local_dim", DEFAULT_LOCAL_DIM))
    global_dim = int(data.get("global_dim", DEFAULT_GLOBAL_DIM))

    records: list[ImageRecord] = []
    seen: set[str] = set()
    for entry in data["images"]:
        image_id = entry.get("id")
        if not isinstance(image_id, str) or not image_id:
            raise ManifestError(f"{path}: every image needs a non-empty string 'id'")
        if image_id in seen:
            raise ManifestError(f"{path}: duplicate image_id '{image_id}'")
        seen.add(image_id)

        width = entry.get("width")
        height = entry.get("height")
        if not isinstance(width, int) or not isinstance(height, int) or width <= 0 or height <= 0:
            raise ManifestError(f"{path}: image '{image_id}' needs positive integer width/height")

        gattr = np.asarray(entry.get("global_attributes", []), dtype=np.float64)
        if gattr.shape != (global_dim,):
            raise ManifestError(
                f"{path}: image '{image_id}' global_attributes has {gattr.size} entries, "
                f"expected {global_dim}"
            )
        if not np.all(np.isfinite(gattr)):
            raise ManifestError(f"{path}: image '{image_id}' has non-finite global attributes")
        gattr = _clamp_unit(gattr)

        detections = []
        for d_idx, det in enumerate(entry.get("detections", [])):
            label = det.get("class")
            if not isinstance(label, str) or not label:
                raise ManifestError(
                    f"{path}: image '{image_id}' detection {d_idx} needs a string 'class'"
                )
            bbox_raw = det.get("bbox")
            if not isinstance(bbox_raw, (list, tuple)) or len(bbox_raw) != 4:
                raise ManifestError(
                    f"{path}: image '{image_id}' detection {d_idx} bbox must be "
                    "[x_min, y_min, x_max, y_max]"
                )
            if not all(isinstance(v, (int, float)) and math.isfinite(v) for v in bbox_raw):
                raise ManifestError(
                    f"{path}: image '{image_id}' detection {d_idx} bbox has non-finite entries"
                )
            bbox = BoundingBox(*(float(v) for v in bbox_raw)).clamped(width, height)
            if bbox.is_degenerate():
                raise ManifestError(
                    f"{path}: image '{image_id}' detection {d_idx} box degenerate after "
                    "clipping to the image frame"
                )
            attrs = np.asarray(det.get("attributes", []), dtype=np.float64)
            if attrs.shape != (local_dim,):
                raise ManifestError(
                    f"{path}: image '{image_id}' detection {d_idx} has {attrs.size} "
                    f"attribute entries, expected {local_dim}"
                )
            if not np.all(np.isfinite(attrs)):
                raise ManifestError(
                    f"{path}: image '{image_id}' detection {d_idx} has non-finite attributes"
                )
            attrs = _clamp_unit(attrs)
            if binarize_threshold is not None:
                attrs = (attrs >= binarize_threshold).astype(np.float64)
            detections.append(Detection(class_label=label, bbox=bbox, local_attributes=attrs))

        if binarize_threshold is not None:
            gattr = (gattr >= binarize_threshold).astype(np.float64)
        records.append(
            ImageRecord(
                image_id=image_id,
                width=width,
                height=height,
                detections=tuple(detections),
                global_attributes=gattr,
            )
        )
    return records


def serialize_manifest(
    records: Iterable[ImageRecord],
    local_dim: int = DEFAULT_LOCAL_DIM,
    global_dim: int = DEFAULT_GLOBAL_DIM,
) -> dict:
    """Build the manifest JSON structure for a list of records."""
    images = []
    for rec in records:
        images.append(
            {
                "id": rec.image_id,
                "width": rec.width,
                "height": rec.height,
                "global_attributes": [float(v) for v in rec.global_attributes],
                "detections": [
                    {
                        "class": det.class_label,
                        "bbox": det.bbox.as_list(),
                        "attributes": [float(v) for v in det.local_attributes],
                    }
                    for det in rec.detections
                ],
            }
        )
    return {"local_dim": local_dim, "global_dim": global_dim, "images": images}


def write_manifest(
    records: Sequence[ImageRecord],
    path,
    local_dim: int = DEFAULT_LOCAL_DIM,
    global_dim: int = DEFAULT_GLOBAL_DIM,
) -> None:
    """Write records as a manifest file; deterministic byte output."""
    doc = serialize_manifest(records, local_dim=local_dim, global_dim=global_dim)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def validate_record(record: ImageRecord) -> list[str]:
    """Return every invariant violation as a human-readable message.

    An empty list means the record is valid.
    """
    problems: list[str] = []
    if not record.image_id:
        problems.append("empty image_id")
    if record.width <= 0 or record.height <= 0:
        problems.append(f"non-positive image size {record.width}x{record.height}")
    gattr = record.global_attributes
    if not np.all(np.isfinite(gattr)):
        problems.append("non-finite global attribute value")
    elif gattr.size and (gattr.min() < 0.0 or gattr.max() > 1.0):
        problems.append("global attribute value outside [0, 1]")
    for idx, det in enumerate(record.detections):
        box = det.bbox
        if box.is_degenerate():
            problems.append(f"detection {idx}: degenerate box {box.as_list()}")
        if (
            box.x_min < 0
            or box.y_min < 0
            or box.x_max > record.width
            or box.y_max > record.height
        ):
            problems.append(f"detection {idx}: box outside image frame")
        attrs = det.local_attributes
        if not np.all(np.isfinite(attrs)):
            problems.append(f"detection {idx}: non-finite attribute value")
        elif attrs.size and (attrs.min() < 0.0 or attrs.max() > 1.0):
            problems.append(f"detection {idx}: attribute value outside [0, 1]")
    return problems
