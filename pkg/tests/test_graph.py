import math

import numpy as np
import pytest

from agrank.graph import (
    build_graph,
    canonical_angle,
    global_centroid,
    graph_from_dict,
    graph_to_dict,
    node_weights,
    overlap,
    read_graph_cache,
    write_graph_cache,
)
from agrank.records import BoundingBox, Detection, ImageRecord
from conftest import mirrored_record, random_record, translated_record


def box(*coords):
    return BoundingBox(*(float(c) for c in coords))


class TestOverlap:
    def test_nested_box_scores_one(self):
        assert overlap(box(0, 0, 100, 100), box(20, 20, 40, 40)) == 1.0

    def test_disjoint_boxes_score_zero(self):
        assert overlap(box(0, 0, 10, 10), box(20, 20, 30, 30)) == 0.0

    def test_half_overlap_equal_areas(self):
        assert overlap(box(0, 0, 2, 2), box(1, 0, 3, 2)) == 0.5

    def test_touching_edges_score_zero(self):
        assert overlap(box(0, 0, 10, 10), box(10, 0, 20, 10)) == 0.0

    def test_bounds_random(self, rng):
        for _ in range(300):
            x = np.sort(rng.uniform(0, 100, 2)); y = np.sort(rng.uniform(0, 100, 2))
            u = np.sort(rng.uniform(0, 100, 2)); v = np.sort(rng.uniform(0, 100, 2))
            b1 = box(x[0], y[0], x[1] + 1, y[1] + 1)
            b2 = box(u[0], v[0], u[1] + 1, v[1] + 1)
            assert 0.0 <= overlap(b1, b2) <= 1.0


class TestGlobalCentroid:
    def test_mean_of_three(self):
        assert global_centroid([(0, 0), (2, 0), (1, 3)]) == (1.0, 1.0)

    def test_single_identity(self):
        assert global_centroid([(3.5, 4.5)]) == (3.5, 4.5)

    def test_pair(self):
        assert global_centroid([(0, 0), (1, 1)]) == (0.5, 0.5)

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            global_centroid([])


class TestCanonicalAngle:
    def test_horizontal(self):
        assert canonical_angle(1, 0) == 0.0

    def test_vertical(self):
        assert canonical_angle(0, 1) == 90.0

    def test_fold_identifies_mirror_angles(self):
        a = canonical_angle(math.sqrt(3), 1)  # raw 30 deg
        b = canonical_angle(-math.sqrt(3), 1)  # raw 150 deg
        assert a == pytest.approx(30.0, abs=1e-12)
        assert a == b

    def test_zero_vector_defined(self):
        assert canonical_angle(0, 0) == 0.0

    def test_range(self, rng):
        for _ in range(500):
            dx, dy = rng.normal(size=2)
            assert 0.0 <= canonical_angle(dx, dy) <= 90.0


class TestNodeWeights:
    def test_equal_areas(self):
        rec = ImageRecord(
            "x", 10, 10,
            (
                Detection("a", box(0, 0, 2, 2), np.zeros(2)),
                Detection("b", box(5, 5, 7, 7), np.zeros(2)),
            ),
            np.zeros(2),
        )
        assert node_weights(rec).tolist() == [0.5, 0.5]

    def test_nine_to_one(self):
        rec = ImageRecord(
            "x", 10, 10,
            (
                Detection("a", box(0, 0, 3, 3), np.zeros(2)),
                Detection("b", box(5, 5, 6, 6), np.zeros(2)),
            ),
            np.zeros(2),
        )
        np.testing.assert_allclose(node_weights(rec), [0.9, 0.1], atol=1e-15)

    def test_single_box(self):
        rec = ImageRecord("x", 10, 10, (Detection("a", box(0, 0, 2, 2), np.zeros(2)),), np.zeros(2))
        assert node_weights(rec).tolist() == [1.0]

    def test_empty(self):
        rec = ImageRecord("x", 10, 10, (), np.zeros(2))
        assert node_weights(rec).size == 0

    def test_sums_to_one(self, rng):
        for n in range(1, 11):
            rec = random_record(rng, n)
            assert abs(node_weights(rec).sum() - 1.0) < 1e-12


class TestBuildGraph:
    def test_counts_n3(self, rng):
        g = build_graph(random_record(rng, 3))
        assert g.num_nodes == 4
        assert len(g.local_edges) == 3
        assert len(g.global_edges) == 3

    def test_counts_n0(self, rng):
        g = build_graph(random_record(rng, 0))
        assert g.num_nodes == 1
        assert len(g.local_edges) == 0
        assert len(g.global_edges) == 0
        assert g.global_node.centroid is None

    def test_counts_n8(self, rng):
        g = build_graph(random_record(rng, 8))
        assert len(g.local_edges) == 28
        assert len(g.global_edges) == 8

    def test_structural_counts_sweep(self, rng):
        for n in range(11):
            g = build_graph(random_record(rng, n))
            assert len(g.local_edges) == n * (n - 1) // 2
            assert len(g.global_edges) == n
            assert set(g.local_edges) == {(i, j) for i in range(n) for j in range(i + 1, n)}
            assert set(g.global_edges) == set(range(n))

    def test_global_edge_third_is_area_fraction(self, rng):
        g = build_graph(random_record(rng, 4))
        for i, e in g.global_edges.items():
            assert e.third == g.local_nodes[i].area_fraction

    def test_mu_normalized_below_one(self, rng):
        for _ in range(20):
            g = build_graph(random_record(rng, 5))
            for e in list(g.local_edges.values()) + list(g.global_edges.values()):
                assert 0.0 <= e.mu < 1.0


def edge_payload(g):
    locs = [(k, e.mu, e.theta, e.third) for k, e in sorted(g.local_edges.items())]
    globs = [(k, e.mu, e.theta, e.third) for k, e in sorted(g.global_edges.items())]
    return locs, globs


class TestInvariances:
    def test_mirror_payload_bit_equal(self, rng):
        for _ in range(50):
            rec = random_record(rng, int(rng.integers(1, 8)))
            g = build_graph(rec)
            gm = build_graph(mirrored_record(rec))
            assert edge_payload(g) == edge_payload(gm)
            for a, b in zip(g.local_nodes, gm.local_nodes):
                np.testing.assert_array_equal(a.attributes, b.attributes)
                assert a.weight == b.weight
                assert a.area_fraction == b.area_fraction

    def test_translation_local_edges_bit_equal(self, rng):
        for _ in range(50):
            rec = random_record(rng, int(rng.integers(2, 7)), width=1000, height=1000)
            # records built with boxes within 500x500 so a +100 shift stays in frame
            rec2 = translated_record(rec, 100.0, 50.0)
            g, g2 = build_graph(rec), build_graph(rec2)
            assert edge_payload(g) == edge_payload(g2)


class TestGraphCache:
    def test_round_trip_value_exact(self, tmp_path, rng):
        graphs = [build_graph(random_record(rng, n, image_id=f"g{n}")) for n in range(6)]
        path = tmp_path / "cache.json"
        write_graph_cache(graphs, path)
        header, back = read_graph_cache(path)
        assert header["distance_normalization"] == "image_diagonal"
        assert set(back) == {g.image_id for g in graphs}
        for g in graphs:
            b = back[g.image_id]
            assert graph_to_dict(g) == graph_to_dict(b)

    def test_rewrite_byte_identical(self, tmp_path, rng):
        graphs = [build_graph(random_record(rng, 4, image_id="only"))]
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        write_graph_cache(graphs, p1)
        write_graph_cache(graphs, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_dict_round_trip(self, rng):
        g = build_graph(random_record(rng, 5))
        assert graph_to_dict(graph_from_dict(graph_to_dict(g))) == graph_to_dict(g)
