"""Attribute-graph construction and the on-disk graph cache.

Each image becomes a fully connected undirected graph with N object nodes
and one scene node: C(N,2) object-object edges plus N object-scene edges.
Geometry is normalized by the image diagonal so graphs from images of
different resolutions are comparable; that convention is recorded in the
cache header.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from agrank.records import ImageRecord, _frozen_array

DISTANCE_NORMALIZATION = "image_diagonal"
CACHE_FORMAT_VERSION = 1

LOCAL_EDGE = "local"
GLOBAL_EDGE = "global"


@dataclass(frozen=True)
class LocalNode:
    """Object node: attributes plus normalized geometry and importance weight."""

    node_index: int
    class_label: str
    attributes: np.ndarray
    centroid: tuple[float, float]  # pixel centroid / image diagonal
    area_fraction: float  # bbox area / image area
    weight: float  # bbox area / total bbox area

    def __post_init__(self):
        object.__setattr__(self, "attributes", _frozen_array(self.attributes))


@dataclass(frozen=True)
class GlobalNode:
    """Scene node: whole-image attributes; centroid is the object-layout mean."""

    attributes: np.ndarray
    centroid: tuple[float, float] | None  # None when the image has no objects

    def __post_init__(self):
        object.__setattr__(self, "attributes", _frozen_array(self.attributes))


@dataclass(frozen=True)
class EdgeFeature:
    """Geometric edge payload: distance, canonical angle, and a third channel.

    The third channel is the box-overlap score for object-object edges and
    the object's image-area fraction for object-scene edges.
    """

    kind: str  # LOCAL_EDGE or GLOBAL_EDGE
    mu: float  # centroid distance / image diagonal
    theta: float  # degrees in [0, 90]
    third: float


@dataclass(frozen=True)
class AttributeGraph:
    image_id: str
    local_nodes: tuple[LocalNode, ...]
    global_node: GlobalNode
    local_edges: Mapping[tuple[int, int], EdgeFeature]  # keys (i, j) with i < j
    global_edges: Mapping[int, EdgeFeature]

    @property
    def num_local(self) -> int:
        return len(self.local_nodes)

    @property
    def num_nodes(self) -> int:
        return len(self.local_nodes) + 1

    @property
    def weights(self) -> np.ndarray:
        return np.array([n.weight for n in self.local_nodes], dtype=np.float64)

    def local_edge(self, i: int, j: int) -> EdgeFeature:
        return self.local_edges[(i, j) if i < j else (j, i)]


def overlap(a, b) -> float:
    """Box overlap: intersection area over the smaller box's area.

    A smaller box fully inside a larger one scores exactly 1.
    """
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    return (iw * ih) / min(a.area, b.area)


def global_centroid(centroids) -> tuple[float, float]:
    """Arithmetic mean of object centroids (the layout centre)."""
    pts = list(centroids)
    if not pts:
        raise ValueError("global centroid undefined for an empty centroid list")
    n = len(pts)
    return (sum(p[0] for p in pts) / n, sum(p[1] for p in pts) / n)


def canonical_angle(dx: float, dy: float) -> float:
    """Angle of an undirected segment vs the horizontal, folded into [0, 90].

    Folding identifies an angle t with 180 - t, which makes the value
    invariant to horizontal (and vertical) flips. Implemented as
    atan2(|dy|, |dx|) so flipped inputs give bit-identical output.
    A zero-length segment maps to 0 (coincident centroids).
    """
    if dx == 0.0 and dy == 0.0:
        return 0.0
    return math.degrees(math.atan2(abs(dy), abs(dx)))


def node_weights(record: ImageRecord) -> np.ndarray:
    """Per-object importance: box area over the total of all box areas."""
    areas = np.array([det.bbox.area for det in record.detections], dtype=np.float64)
    if areas.size == 0:
        return areas
    return areas / areas.sum()


def build_graph(record: ImageRecord) -> AttributeGraph:
    """Construct the attribute graph for one image record.

    Works for N = 0 (scene node only, no edges). Edge geometry is computed
    from pixel centroids and divided by the image diagonal at the end, so
    translating all boxes by an integer offset leaves features bit-equal.
    """
    diag = record.diagonal
    n = record.num_objects
    weights = node_weights(record)

    centroids_px = [det.bbox.centroid for det in record.detections]
    area_fracs = [det.bbox.area / record.area for det in record.detections]

    local_nodes = tuple(
        LocalNode(
            node_index=i,
            class_label=det.class_label,
            attributes=det.local_attributes,
            centroid=(centroids_px[i][0] / diag, centroids_px[i][1] / diag),
            area_fraction=area_fracs[i],
            weight=float(weights[i]),
        )
        for i, det in enumerate(record.detections)
    )

    local_edges: dict[tuple[int, int], EdgeFeature] = {}
    for i in range(n):
        for j in range(i + 1, n):
            dx = centroids_px[i][0] - centroids_px[j][0]
            dy = centroids_px[i][1] - centroids_px[j][1]
            local_edges[(i, j)] = EdgeFeature(
                kind=LOCAL_EDGE,
                mu=math.hypot(dx, dy) / diag,
                theta=canonical_angle(dx, dy),
                third=overlap(record.detections[i].bbox, record.detections[j].bbox),
            )

    global_edges: dict[int, EdgeFeature] = {}
    gc = None
    if n >= 1:
        sx = sum(c[0] for c in centroids_px)
        sy = sum(c[1] for c in centroids_px)
        gc = (sx / n / diag, sy / n / diag)
        for i in range(n):
            # n*c_i - sum(c) keeps the difference exact for integer-pixel
            # boxes, so mirrored records produce bit-identical features.
            sdx = n * centroids_px[i][0] - sx
            sdy = n * centroids_px[i][1] - sy
            global_edges[i] = EdgeFeature(
                kind=GLOBAL_EDGE,
                mu=math.hypot(sdx, sdy) / (n * diag),
                theta=canonical_angle(sdx, sdy),
                third=area_fracs[i],
            )

    return AttributeGraph(
        image_id=record.image_id,
        local_nodes=local_nodes,
        global_node=GlobalNode(attributes=record.global_attributes, centroid=gc),
        local_edges=local_edges,
        global_edges=global_edges,
    )


# --- graph cache ------------------------------------------------------------


def _edge_to_list(e: EdgeFeature) -> list[float]:
    return [e.mu, e.theta, e.third]


def graph_to_dict(g: AttributeGraph) -> dict:
    return {
        "image_id": g.image_id,
        "local_nodes": [
            {
                "index": node.node_index,
                "class": node.class_label,
                "attributes": [float(v) for v in node.attributes],
                "centroid": list(node.centroid),
                "area_fraction": node.area_fraction,
                "weight": node.weight,
            }
            for node in g.local_nodes
        ],
        "global_node": {
            "attributes": [float(v) for v in g.global_node.attributes],
            "centroid": list(g.global_node.centroid) if g.global_node.centroid else None,
        },
        "local_edges": [
            [i, j] + _edge_to_list(e) for (i, j), e in sorted(g.local_edges.items())
        ],
        "global_edges": [[i] + _edge_to_list(e) for i, e in sorted(g.global_edges.items())],
    }


def graph_from_dict(d: dict) -> AttributeGraph:
    local_nodes = tuple(
        LocalNode(
            node_index=node["index"],
            class_label=node["class"],
            attributes=np.asarray(node["attributes"], dtype=np.float64),
            centroid=tuple(node["centroid"]),
            area_fraction=node["area_fraction"],
            weight=node["weight"],
        )
        for node in d["local_nodes"]
    )
    gn = d["global_node"]
    global_node = GlobalNode(
        attributes=np.asarray(gn["attributes"], dtype=np.float64),
        centroid=tuple(gn["centroid"]) if gn["centroid"] else None,
    )
    local_edges = {
        (int(i), int(j)): EdgeFeature(LOCAL_EDGE, mu, theta, third)
        for i, j, mu, theta, third in d["local_edges"]
    }
    global_edges = {
        int(i): EdgeFeature(GLOBAL_EDGE, mu, theta, third)
        for i, mu, theta, third in d["global_edges"]
    }
    return AttributeGraph(
        image_id=d["image_id"],
        local_nodes=local_nodes,
        global_node=global_node,
        local_edges=local_edges,
        global_edges=global_edges,
    )


def write_graph_cache(graphs: Iterable[AttributeGraph], path, header_extra: dict | None = None):
    """Serialize graphs to a JSON cache; byte-identical across reruns."""
    header = {
        "format_version": CACHE_FORMAT_VERSION,
        "distance_normalization": DISTANCE_NORMALIZATION,
        "angle_convention": "degrees_folded_0_90",
        "builder": "agrank",
    }
    if header_extra:
        header.update(header_extra)
    doc = {
        "header": header,
        "graphs": {g.image_id: graph_to_dict(g) for g in graphs},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def read_graph_cache(path) -> tuple[dict, dict[str, AttributeGraph]]:
    """Load a graph cache; returns (header, {image_id: graph})."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    header = doc.get("header", {})
    graphs = {gid: graph_from_dict(gd) for gid, gd in doc.get("graphs", {}).items()}
    return header, graphs
