"""Evaluation checks: projective warping, greedy matcher vs an edge-sort
oracle, repeatability / matching-score constructions with hand-computed
expectations."""

import numpy as np
import pytest

from elfkit.evalkit import (
    Homography,
    MetricError,
    evaluate_pairs,
    greedy_match,
    matching_score,
    read_homography,
    repeatability,
    warp_points,
    write_homography,
)


def greedy_edge_oracle(a, b):
    """Materialise every edge, sort by (weight, i, j), filter greedily."""
    edges = []
    for i in range(len(a)):
        for j in range(len(b)):
            edges.append((float(np.linalg.norm(a[i] - b[j])), i, j))
    edges.sort()
    used_a, used_b, out = set(), set(), []
    for w, i, j in edges:
        if i in used_a or j in used_b:
            continue
        used_a.add(i)
        used_b.add(j)
        out.append((i, j, w))
    return out


class TestHomography:
    def test_normalises_h33(self):
        h = Homography(2.0 * np.eye(3))
        assert h.matrix[2, 2] == 1.0
        np.testing.assert_allclose(h.matrix, np.eye(3))

    def test_singular_rejected(self):
        m = np.eye(3)
        m[0, 0] = 0.0
        m[1, 1] = 0.0
        with pytest.raises(ValueError):
            Homography(m)

    def test_file_roundtrip(self, tmp_path):
        rng = np.random.default_rng(0)
        m = np.eye(3) + 0.01 * rng.normal(size=(3, 3))
        h = Homography(m)
        p = tmp_path / "h.hom"
        write_homography(p, h)
        back = read_homography(p)
        np.testing.assert_array_equal(back.matrix, h.matrix)

    def test_wrong_count_rejected(self, tmp_path):
        p = tmp_path / "bad.hom"
        p.write_text("1 2 3\n")
        with pytest.raises(ValueError):
            read_homography(p)


class TestWarpPoints:
    def test_identity(self):
        pts = np.array([[1.0, 2.0], [30.0, 40.0]])
        out, valid = warp_points(Homography.identity(), pts)
        np.testing.assert_array_equal(out, pts)
        assert valid.all()

    def test_translation(self):
        m = np.eye(3)
        m[0, 2], m[1, 2] = 3.0, -2.0
        pts = np.array([[0.0, 0.0], [5.0, 5.0]])
        out, _ = warp_points(Homography(m), pts)
        np.testing.assert_allclose(out, pts + [3.0, -2.0])

    def test_rotation_matches_matrix_oracle(self):
        from elfkit.datasets import rotation_homography
        h = rotation_homography(90, 640, 480)
        pts = np.array([[0.0, 0.0], [100.0, 200.0]])
        out, _ = warp_points(h, pts)
        hom = np.concatenate([pts, np.ones((2, 1))], axis=1)
        expected = (h.matrix @ hom.T).T
        expected = expected[:, :2] / expected[:, 2:3]
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_vanishing_denominator_flagged(self):
        m = np.array([[1.0, 0.0, 0.0],
                      [0.0, 1.0, 0.0],
                      [-1.0, 0.0, 1.0]])  # w = 1 - x, vanishes at x=1
        out, valid = warp_points(Homography(m), np.array([[1.0, 5.0], [0.0, 1.0]]))
        assert not valid[0] and valid[1]
        assert np.isnan(out[0]).all()


class TestGreedyMatch:
    def test_single_nearest(self):
        m = greedy_match(np.array([[0.0, 0.0]]),
                         np.array([[1.0, 0.0], [10.0, 0.0]]))
        assert len(m) == 1
        assert (m.idx1[0], m.idx2[0]) == (0, 0)
        assert m.weight[0] == 1.0

    def test_no_double_counting(self):
        # both A points are nearest to B0; only the closer one gets it
        a = np.array([[0.0, 0.0], [2.0, 0.0]])
        b = np.array([[1.0, 0.0], [50.0, 0.0]])
        m = greedy_match(a, b)
        pairs = dict(zip(m.idx1.tolist(), m.idx2.tolist()))
        assert pairs == {0: 0, 1: 1}

    def test_matches_edge_sort_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            a = rng.uniform(0, 100, size=(20, 2))
            b = rng.uniform(0, 100, size=(20, 2))
            m = greedy_match(a, b)
            oracle = greedy_edge_oracle(a, b)
            assert list(zip(m.idx1, m.idx2)) == [(i, j) for i, j, _ in oracle]
            np.testing.assert_allclose(m.weight, [w for _, _, w in oracle],
                                       atol=1e-12)

    def test_vector_mode_oracle(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=(15, 8))
        b = rng.normal(size=(12, 8))
        m = greedy_match(a, b)
        oracle = greedy_edge_oracle(a, b)
        assert list(zip(m.idx1, m.idx2)) == [(i, j) for i, j, _ in oracle]

    def test_cardinality_and_uniqueness(self):
        rng = np.random.default_rng(3)
        a = rng.uniform(size=(17, 2))
        b = rng.uniform(size=(9, 2))
        m = greedy_match(a, b)
        assert len(m) == 9
        assert len(set(m.idx1.tolist())) == 9
        assert len(set(m.idx2.tolist())) == 9

    def test_empty_side(self):
        assert len(greedy_match(np.zeros((0, 2)), np.ones((4, 2)))) == 0

    def test_deterministic_tie_break(self):
        a = np.array([[0.0, 0.0], [0.0, 0.0]])
        b = np.array([[1.0, 0.0], [1.0, 0.0]])
        m = greedy_match(a, b)
        assert list(zip(m.idx1, m.idx2)) == [(0, 0), (1, 1)]


class TestRepeatability:
    def test_self_pair_identity_is_100(self):
        rng = np.random.default_rng(4)
        kps = rng.uniform(0, 400, size=(50, 2))
        assert repeatability(kps, kps, Homography.identity()) == 100.0

    def test_all_far_is_0(self):
        kps1 = np.array([[10.0, 10.0], [20.0, 20.0]])
        kps2 = kps1 + 100.0
        assert repeatability(kps1, kps2, Homography.identity()) == 0.0

    def test_constructed_60_percent(self):
        """10 keypoints, 6 aligned within 1 px, 4 displaced by 20 px."""
        rng = np.random.default_rng(5)
        kps1 = rng.uniform(50, 350, size=(10, 2)).round()
        # spread them out so greedy matching is unambiguous
        kps1 = np.array([[40.0 * i + 20.0, 37.0 * i + 15.0] for i in range(10)])
        kps2 = kps1.copy()
        kps2[:6] += 1.0 / np.sqrt(2.0)  # within 1 px
        kps2[6:] += 20.0
        rep = repeatability(kps1, kps2, Homography.identity())
        assert rep == 60.0

    def test_empty_inputs_error(self):
        with pytest.raises(MetricError):
            repeatability(np.zeros((0, 2)), np.ones((3, 2)),
                          Homography.identity())

    def test_out_of_bounds_culled_but_denominator_keeps_originals(self):
        m = np.eye(3)
        m[0, 2] = 95.0  # pushes x=10 to 105, outside a 100-wide image
        kps1 = np.array([[10.0, 50.0], [2.0, 50.0]])
        kps2 = np.array([[97.0, 50.0], [105.0 - 100.0, 50.0]])
        rep = repeatability(kps1, kps2, Homography(m), eps=5.0,
                            image_size=(100, 100))
        # only kp (2,50)->(97,50) stays in bounds and matches kps2[0]
        assert rep == 50.0

    def test_symmetry_under_isometry_no_culling(self):
        from elfkit.datasets import rotation_homography
        rng = np.random.default_rng(6)
        h = rotation_homography(40, 480, 480)
        kps1 = rng.uniform(100, 380, size=(25, 2))
        kps2_full, _ = warp_points(h, rng.uniform(100, 380, size=(25, 2)))
        a = repeatability(kps1, kps2_full, h)
        b = repeatability(kps2_full, kps1, h.inverse())
        assert a == pytest.approx(b, abs=1e-9)


class TestMatchingScore:
    def test_single_aligned_pair_100(self):
        kps = np.array([[30.0, 40.0]])
        d1 = np.array([[0.3, 0.4]])
        d2 = np.array([[9.0, 9.0]])
        assert matching_score(kps, d1, kps, d2, Homography.identity()) == 100.0

    def test_coordinates_as_descriptors_equals_repeatability(self):
        rng = np.random.default_rng(7)
        for trial in range(5):
            kps1 = rng.uniform(0, 300, size=(30, 2))
            kps2 = rng.uniform(0, 300, size=(30, 2))
            h = Homography.identity()
            warped, _ = warp_points(h, kps1)
            rep = repeatability(kps1, kps2, h)
            ms = matching_score(kps1, warped, kps2, kps2, h)
            assert ms == rep

    def test_swapped_descriptors_drop_from_intersection(self):
        kps = np.array([[50.0, 50.0], [200.0, 200.0], [300.0, 100.0]])
        good = kps.copy()
        swapped = kps.copy()
        swapped[[0, 1]] = swapped[[1, 0]]  # descriptor cross-over for 2 pairs
        h = Homography.identity()
        ms_good = matching_score(kps, good, kps, good, h)
        ms_swap = matching_score(kps, swapped, kps, good, h)
        assert ms_good == 100.0
        # brute-force intersection: image space matches all 3, descriptor
        # space matches pair 2 correctly, pairs 0/1 cross over
        assert ms_swap == pytest.approx(100.0 / 3.0)

    def test_ms_never_exceeds_rep_random(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            n1, n2 = rng.integers(3, 25, size=2)
            kps1 = rng.uniform(0, 200, size=(n1, 2))
            kps2 = rng.uniform(0, 200, size=(n2, 2))
            d1 = rng.normal(size=(n1, 6))
            d2 = rng.normal(size=(n2, 6))
            h = Homography.identity()
            rep = repeatability(kps1, kps2, h)
            ms = matching_score(kps1, d1, kps2, d2, h)
            assert ms <= rep + 1e-12

    def test_joint_permutation_invariance(self):
        rng = np.random.default_rng(9)
        kps1 = rng.uniform(0, 100, size=(12, 2))
        kps2 = rng.uniform(0, 100, size=(14, 2))
        d1 = rng.normal(size=(12, 5))
        d2 = rng.normal(size=(14, 5))
        h = Homography.identity()
        base_rep = repeatability(kps1, kps2, h)
        base_ms = matching_score(kps1, d1, kps2, d2, h)
        p1 = rng.permutation(12)
        p2 = rng.permutation(14)
        assert repeatability(kps1[p1], kps2[p2], h) == pytest.approx(base_rep)
        assert matching_score(kps1[p1], d1[p1], kps2[p2], d2[p2], h) \
            == pytest.approx(base_ms)

    def test_count_mismatch_rejected(self):
        with pytest.raises(MetricError):
            matching_score(np.ones((3, 2)), np.ones((2, 4)), np.ones((3, 2)),
                           np.ones((3, 4)), Homography.identity())


class TestReport:
    def test_evaluate_pairs_structure(self, tmp_path):
        rng = np.random.default_rng(10)
        kps = rng.uniform(0, 100, size=(10, 2))
        d = rng.normal(size=(10, 4))
        records = [
            {"name": "a", "kps1": kps, "kps2": kps, "desc1": d, "desc2": d,
             "h": Homography.identity()},
            {"name": "b", "kps1": kps, "kps2": kps + 50.0, "desc1": d,
             "desc2": d, "h": Homography.identity()},
        ]
        report = evaluate_pairs(records)
        assert {p["name"] for p in report["pairs"]} == {"a", "b"}
        assert report["pairs"][0]["repeatability"] == 100.0
        assert report["repeatability_mean"] == pytest.approx(
            np.mean([p["repeatability"] for p in report["pairs"]]))
        for p in report["pairs"]:
            assert p["matching_score"] <= p["repeatability"] + 1e-12
