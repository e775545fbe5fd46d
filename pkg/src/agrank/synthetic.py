"""Seeded synthetic scene generator with graded ground truth.

Each base scene becomes one query; its reference family is the base image
(relevance 3) plus one perturbed copy per ladder magnitude, with relevance
falling toward 0 as the perturbation grows. Objects keep their class under
perturbation (apart from random drops), so attribute and geometry cues are
what separate the family, not class membership alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from agrank.evaluation import RelevanceAnnotations
from agrank.records import BoundingBox, Detection, ImageRecord

MAX_REL = 3
_ATTR_NOISE_SCALE = 0.4  # attribute noise std at magnitude 1
_JITTER_SCALE = 0.15  # centroid shift fraction of the diagonal at magnitude 1
_DROP_SCALE = 0.5  # object drop probability at magnitude 1


@dataclass(frozen=True)
class SynthParams:
    """The seed fully determines every emitted byte."""

    seed: int = 0
    num_images: int = 10  # number of base scenes (= queries)
    num_classes: int = 8
    max_objects: int = 5
    ladder: tuple[float, ...] = (0.1, 0.25, 0.5)
    width: int = 640
    height: int = 480
    local_dim: int = 64
    global_dim: int = 205
    # optional irrelevant sibling per scene: same objects, scrambled layout
    layout_distractors: bool = False

    def __post_init__(self):
        object.__setattr__(self, "ladder", tuple(float(m) for m in self.ladder))
        if any(m < 0 for m in self.ladder):
            raise ValueError("perturbation magnitudes must be non-negative")
        if self.num_images < 0 or self.num_classes < 1 or self.max_objects < 1:
            raise ValueError("invalid synthetic dataset sizes")


def _rung_relevance(rung: int, ladder_len: int) -> int:
    """Base = 3; rung i of L maps to round(3 * (L - 1 - i) / L), floor 0."""
    return max(0, int(round(3.0 * (ladder_len - 1 - rung) / ladder_len)))


def _random_box(rng: np.random.Generator, width: int, height: int) -> BoundingBox:
    # integer pixel coordinates keep downstream geometry exact
    bw = int(rng.integers(max(16, width // 12), width // 2))
    bh = int(rng.integers(max(16, height // 12), height // 2))
    x0 = int(rng.integers(0, width - bw))
    y0 = int(rng.integers(0, height - bh))
    return BoundingBox(float(x0), float(y0), float(x0 + bw), float(y0 + bh))


def _perturb_record(
    rng: np.random.Generator, base: ImageRecord, magnitude: float, image_id: str
) -> ImageRecord:
    """Attribute noise + box jitter + random object drops, scaled by magnitude."""
    if magnitude == 0.0:
        return ImageRecord(
            image_id=image_id,
            width=base.width,
            height=base.height,
            detections=base.detections,
            global_attributes=base.global_attributes,
        )

    drop_p = min(0.8, _DROP_SCALE * magnitude)
    # smallest objects disappear first: their absence perturbs perceived
    # similarity least, mirroring area-based importance
    n = len(base.detections)
    areas = np.array([det.bbox.area for det in base.detections])
    shares = areas / areas.sum() if n else areas
    n_drop = min(int((rng.random(n) < drop_p).sum()), max(0, n - 1))
    drop_idx = set(np.argsort(areas)[:n_drop].tolist())
    keep_pairs = [
        (det, share)
        for i, (det, share) in enumerate(zip(base.detections, shares))
        if i not in drop_idx
    ]

    jitter_px = _JITTER_SCALE * magnitude * base.diagonal
    detections = []
    for det, share in keep_pairs:
        shift_x = float(np.round(rng.normal(0.0, jitter_px)))
        shift_y = float(np.round(rng.normal(0.0, jitter_px)))
        box = det.bbox
        shift_x = min(max(shift_x, -box.x_min), base.width - box.x_max)
        shift_y = min(max(shift_y, -box.y_min), base.height - box.y_max)
        moved = BoundingBox(
            box.x_min + shift_x, box.y_min + shift_y, box.x_max + shift_x, box.y_max + shift_y
        )
        # small objects also degrade faster in appearance
        noise_std = _ATTR_NOISE_SCALE * magnitude * (0.5 + (1.0 - share))
        attrs = np.clip(
            det.local_attributes + rng.normal(0.0, noise_std, det.local_attributes.shape),
            0.0,
            1.0,
        )
        detections.append(Detection(class_label=det.class_label, bbox=moved, local_attributes=attrs))

    gattrs = np.clip(
        base.global_attributes
        + rng.normal(0.0, _ATTR_NOISE_SCALE * magnitude, base.global_attributes.shape),
        0.0,
        1.0,
    )
    return ImageRecord(
        image_id=image_id,
        width=base.width,
        height=base.height,
        detections=tuple(detections),
        global_attributes=gattrs,
    )


def _scramble_layout(
    rng: np.random.Generator, base: ImageRecord, image_id: str
) -> ImageRecord:
    """Same objects (sizes, classes, lightly-noised attributes), new positions.

    Only the spatial arrangement distinguishes this sibling from the base,
    so it separates rankers that model layout from ones that do not. It is
    annotated irrelevant (0).
    """
    detections = []
    for det in base.detections:
        box = det.bbox
        bw = box.x_max - box.x_min
        bh = box.y_max - box.y_min
        x0 = float(rng.integers(0, max(1, int(base.width - bw))))
        y0 = float(rng.integers(0, max(1, int(base.height - bh))))
        attrs = np.clip(det.local_attributes + rng.normal(0.0, 0.05, det.local_attributes.shape), 0.0, 1.0)
        detections.append(
            Detection(det.class_label, BoundingBox(x0, y0, x0 + bw, y0 + bh), attrs)
        )
    gattrs = np.clip(
        base.global_attributes + rng.normal(0.0, 0.05, base.global_attributes.shape), 0.0, 1.0
    )
    return ImageRecord(
        image_id=image_id,
        width=base.width,
        height=base.height,
        detections=tuple(detections),
        global_attributes=gattrs,
    )


def synth_generate(params: SynthParams) -> tuple[list[ImageRecord], RelevanceAnnotations]:
    """Generate (records, annotations) for the configured scene set.

    The query for scene s is its base image id. Annotations grade the whole
    database for every query: the family by rung relevance, everything else
    explicitly 0.
    """
    rng = np.random.default_rng(params.seed)
    class_pool = [f"class_{i:02d}" for i in range(params.num_classes)]
    # per-class attribute prototypes make same-class objects comparable
    prototypes = {c: rng.uniform(0.0, 1.0, params.local_dim) for c in class_pool}

    records: list[ImageRecord] = []
    families: dict[str, list[tuple[str, float]]] = {}
    ladder_len = len(params.ladder)

    for s in range(params.num_images):
        n_obj = int(rng.integers(1, params.max_objects + 1))
        detections = []
        for _ in range(n_obj):
            cls = class_pool[int(rng.integers(0, params.num_classes))]
            attrs = np.clip(prototypes[cls] + rng.normal(0.0, 0.05, params.local_dim), 0.0, 1.0)
            detections.append(
                Detection(class_label=cls, bbox=_random_box(rng, params.width, params.height), local_attributes=attrs)
            )
        gattrs = rng.uniform(0.0, 1.0, params.global_dim)
        base_id = f"scene{s:03d}_base"
        base = ImageRecord(
            image_id=base_id,
            width=params.width,
            height=params.height,
            detections=tuple(detections),
            global_attributes=gattrs,
        )
        records.append(base)
        family = [(base_id, 0.0)]
        for rung, magnitude in enumerate(params.ladder):
            pid = f"scene{s:03d}_p{rung}"
            records.append(_perturb_record(rng, base, magnitude, pid))
            family.append((pid, magnitude))
        families[base_id] = family
        if params.layout_distractors:
            records.append(_scramble_layout(rng, base, f"scene{s:03d}_shuf"))

    annotations = RelevanceAnnotations()
    all_ids = [rec.image_id for rec in records]
    for base_id, family in families.items():
        family_rel = {base_id: MAX_REL}
        for rung, (pid, _mag) in enumerate(family[1:]):
            family_rel[pid] = _rung_relevance(rung, ladder_len)
        for image_id in all_ids:
            annotations.set(base_id, image_id, family_rel.get(image_id, 0))
    return records, annotations


def family_magnitudes(params: SynthParams, query_id: str) -> dict[str, float]:
    """Perturbation magnitude per family member id for one query."""
    scene = query_id.rsplit("_", 1)[0]
    out = {f"{scene}_base": 0.0}
    for rung, magnitude in enumerate(params.ladder):
        out[f"{scene}_p{rung}"] = magnitude
    return out
