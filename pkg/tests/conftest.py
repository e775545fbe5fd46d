import numpy as np
import pytest

from agrank.records import BoundingBox, Detection, ImageRecord

LOCAL_DIM = 64
GLOBAL_DIM = 205


def random_record(
    rng: np.random.Generator,
    n_objects: int,
    image_id: str = "img",
    width: int = 640,
    height: int = 480,
    distinct_classes: bool = True,
    class_pool: list[str] | None = None,
    integer_boxes: bool = True,
) -> ImageRecord:
    """Random but valid record; integer boxes keep geometry float-exact."""
    detections = []
    for i in range(n_objects):
        bw = int(rng.integers(16, width // 2))
        bh = int(rng.integers(16, height // 2))
        x0 = int(rng.integers(0, width - bw))
        y0 = int(rng.integers(0, height - bh))
        coords = (x0, y0, x0 + bw, y0 + bh)
        if not integer_boxes:
            coords = tuple(c + float(rng.uniform(0, 0.5)) for c in coords)
        if class_pool is not None:
            label = class_pool[int(rng.integers(0, len(class_pool)))]
        elif distinct_classes:
            label = f"class_{i}"
        else:
            label = "class_shared"
        detections.append(
            Detection(
                class_label=label,
                bbox=BoundingBox(*(float(c) for c in coords)),
                local_attributes=rng.uniform(0.0, 1.0, LOCAL_DIM),
            )
        )
    return ImageRecord(
        image_id=image_id,
        width=width,
        height=height,
        detections=tuple(detections),
        global_attributes=rng.uniform(0.0, 1.0, GLOBAL_DIM),
    )


def mirrored_record(record: ImageRecord) -> ImageRecord:
    """Horizontal flip: x -> width - x for every box."""
    detections = tuple(
        Detection(
            class_label=det.class_label,
            bbox=BoundingBox(
                record.width - det.bbox.x_max,
                det.bbox.y_min,
                record.width - det.bbox.x_min,
                det.bbox.y_max,
            ),
            local_attributes=det.local_attributes,
        )
        for det in record.detections
    )
    return ImageRecord(
        image_id=record.image_id,
        width=record.width,
        height=record.height,
        detections=detections,
        global_attributes=record.global_attributes,
    )


def translated_record(record: ImageRecord, dx: float, dy: float) -> ImageRecord:
    detections = tuple(
        Detection(
            class_label=det.class_label,
            bbox=BoundingBox(
                det.bbox.x_min + dx, det.bbox.y_min + dy, det.bbox.x_max + dx, det.bbox.y_max + dy
            ),
            local_attributes=det.local_attributes,
        )
        for det in record.detections
    )
    return ImageRecord(
        image_id=record.image_id,
        width=record.width,
        height=record.height,
        detections=detections,
        global_attributes=record.global_attributes,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
