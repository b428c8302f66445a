"""Pairwise evaluation of keypoints and descriptors under a ground-truth
planar homography: greedy one-to-one matching, repeatability and matching
score.

Repeatability warps the first image's keypoints into the second, runs a
greedy bipartite matching on Euclidean distances and counts matches closer
than a pixel tolerance.  The matching score additionally runs the same greedy
matching on descriptor distances with no cutoff and counts the index pairs
present in both matchings.  Both metrics divide by the smaller of the two
original keypoint counts and are reported as percentages.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


class MetricError(ValueError):
    """Metric is undefined for the given inputs (e.g. an empty keypoint set)."""


# ---------------------------------------------------------------------------
# Homography
# ---------------------------------------------------------------------------

class Homography:
    """3x3 planar map, normalised so the bottom-right entry is 1."""

    def __init__(self, matrix):
        m = np.asarray(matrix, dtype=np.float64).reshape(3, 3)
        if abs(m[2, 2]) < 1e-12:
            raise ValueError("homography has (2,2) entry ~ 0, cannot normalise")
        m = m / m[2, 2]
        if abs(np.linalg.det(m)) <= 1e-12:
            raise ValueError("homography is singular")
        self.matrix = m

    @classmethod
    def identity(cls):
        return cls(np.eye(3))

    def inverse(self):
        return Homography(np.linalg.inv(self.matrix))

    def __matmul__(self, other):
        return Homography(self.matrix @ other.matrix)

    def __repr__(self):
        return f"Homography({self.matrix.tolist()})"


def write_homography(path, h):
    """Nine whitespace-separated floats, row-major."""
    m = h.matrix if isinstance(h, Homography) else np.asarray(h, dtype=np.float64)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(" ".join(repr(float(v)) for v in m.ravel()) + "\n")


def read_homography(path):
    with open(path, "r", encoding="utf-8") as fh:
        vals = [float(v) for v in fh.read().split()]
    if len(vals) != 9:
        raise ValueError(f"{path}: expected 9 values, got {len(vals)}")
    return Homography(np.array(vals).reshape(3, 3))


def warp_points(h, points):
    """Projective transform of (N, 2) points.

    Returns ``(warped, valid)``; a point is flagged invalid when its third
    homogeneous coordinate is smaller than 1e-12 in magnitude, and its warped
    coordinates are left as NaN.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    m = h.matrix if isinstance(h, Homography) else np.asarray(h, dtype=np.float64)
    hom = np.concatenate([pts, np.ones((pts.shape[0], 1))], axis=1)
    q = hom @ m.T
    w = q[:, 2]
    valid = np.abs(w) >= 1e-12
    out = np.full_like(pts, np.nan)
    out[valid] = q[valid, :2] / w[valid, None]
    return out, valid


# ---------------------------------------------------------------------------
# Greedy bipartite matching
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MatchSet:
    """One-to-one pairs (index into A, index into B, edge weight)."""

    idx1: np.ndarray
    idx2: np.ndarray
    weight: np.ndarray

    def __len__(self):
        return self.idx1.shape[0]

    def pairs(self):
        return set(zip(self.idx1.tolist(), self.idx2.tolist()))

    def filtered(self, max_weight):
        keep = self.weight < max_weight
        return MatchSet(self.idx1[keep], self.idx2[keep], self.weight[keep])


_EMPTY_MATCHES = MatchSet(np.zeros(0, dtype=np.int64),
                          np.zeros(0, dtype=np.int64), np.zeros(0))


def greedy_match(a, b):
    """Greedy one-to-one matching on all pairwise Euclidean distances.

    Every edge of the full bipartite graph is sorted by ascending weight
    (ties by lexicographic index pair) and accepted iff both endpoints are
    still unmatched; the scan stops once the smaller side is exhausted.
    Rows of ``a`` and ``b`` may be 2-D points or descriptor vectors.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n, m = a.shape[0], b.shape[0]
    if n == 0 or m == 0:
        return _EMPTY_MATCHES
    # Direct differences, chunked over rows of `a` to bound memory; bitwise
    # identical to the per-pair formula, unlike the a.a + b.b - 2ab trick.
    d = np.empty((n, m))
    chunk = max(1, int(4_000_000 // max(1, m * a.shape[1])))
    for i0 in range(0, n, chunk):
        diff = a[i0:i0 + chunk, None, :] - b[None, :, :]
        d[i0:i0 + chunk] = np.sqrt((diff * diff).sum(-1))
    ii, jj = np.unravel_index(np.arange(n * m), (n, m))
    order = np.lexsort((jj, ii, d.ravel()))

    used1 = np.zeros(n, dtype=bool)
    used2 = np.zeros(m, dtype=bool)
    out1, out2, outw = [], [], []
    target = min(n, m)
    flat = d.ravel()
    for e in order:
        i, j = ii[e], jj[e]
        if used1[i] or used2[j]:
            continue
        used1[i] = used2[j] = True
        out1.append(i)
        out2.append(j)
        outw.append(flat[e])
        if len(out1) == target:
            break
    return MatchSet(np.array(out1, dtype=np.int64),
                    np.array(out2, dtype=np.int64),
                    np.array(outw, dtype=np.float64))


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def _as_points(kps):
    pts = np.asarray(
        [[kp.x, kp.y] for kp in kps] if len(kps) and hasattr(kps[0], "x")
        else kps,
        dtype=np.float64,
    ).reshape(-1, 2)
    return pts


def _warp_and_cull(kps1, h, image_size):
    pts1 = _as_points(kps1)
    warped, valid = warp_points(h, pts1)
    if image_size is not None:
        w, ht = image_size
        inside = ((warped[:, 0] >= 0) & (warped[:, 0] < w)
                  & (warped[:, 1] >= 0) & (warped[:, 1] < ht))
        valid = valid & inside
    return warped[valid], np.flatnonzero(valid)


def repeatability(kps1, kps2, h, eps=5.0, image_size=None):
    """Percentage of keypoints common to both images under ``h``.

    ``kps1`` is warped into image 2; points falling outside ``image_size``
    (W, H), when given, are dropped from the matching but the denominator
    keeps the original counts.  Matches closer than ``eps`` pixels count.
    """
    n1, n2 = len(kps1), len(kps2)
    if n1 == 0 or n2 == 0:
        raise MetricError("repeatability is undefined for empty keypoint sets")
    warped, _ = _warp_and_cull(kps1, h, image_size)
    matches = greedy_match(warped, _as_points(kps2)).filtered(eps)
    return 100.0 * len(matches) / min(n1, n2)


def matching_score(kps1, desc1, kps2, desc2, h, eps=5.0, image_size=None):
    """Percentage of pairs matched both in image space and descriptor space.

    The image-space matching is the repeatability matching (tolerance
    ``eps``); the descriptor-space matching runs on the same keypoint index
    sets with no distance cutoff.  A pair counts when the identical index
    pair appears in both matchings.
    """
    n1, n2 = len(kps1), len(kps2)
    if n1 == 0 or n2 == 0:
        raise MetricError("matching score is undefined for empty keypoint sets")
    d1 = desc1.vectors if hasattr(desc1, "vectors") else np.asarray(desc1, dtype=np.float64)
    d2 = desc2.vectors if hasattr(desc2, "vectors") else np.asarray(desc2, dtype=np.float64)
    if d1.shape[0] != n1 or d2.shape[0] != n2:
        raise MetricError(
            f"descriptor/keypoint count mismatch: {d1.shape[0]}/{n1}, "
            f"{d2.shape[0]}/{n2}"
        )

    warped, kept = _warp_and_cull(kps1, h, image_size)
    pts2 = _as_points(kps2)

    m_img = greedy_match(warped, pts2).filtered(eps)
    m_des = greedy_match(d1[kept], d2)
    img_pairs = {(kept[i], j) for i, j in zip(m_img.idx1, m_img.idx2)}
    des_pairs = {(kept[i], j) for i, j in zip(m_des.idx1, m_des.idx2)}
    return 100.0 * len(img_pairs & des_pairs) / min(n1, n2)


def evaluate_pairs(records, eps=5.0):
    """Aggregate per-pair metrics into the evaluation report structure.

    ``records`` is an iterable of dicts carrying ``kps1, kps2, h`` and
    optionally ``desc1, desc2, image_size`` plus identifying fields, which
    are passed through to the report.
    """
    pairs = []
    reps, mss = [], []
    for rec in records:
        entry = {k: rec[k] for k in rec
                 if k not in ("kps1", "kps2", "desc1", "desc2", "h", "image_size")}
        rep = repeatability(rec["kps1"], rec["kps2"], rec["h"], eps,
                            rec.get("image_size"))
        entry["repeatability"] = rep
        entry["n_kp1"] = len(rec["kps1"])
        entry["n_kp2"] = len(rec["kps2"])
        reps.append(rep)
        if rec.get("desc1") is not None and rec.get("desc2") is not None:
            ms = matching_score(rec["kps1"], rec["desc1"], rec["kps2"],
                                rec["desc2"], rec["h"], eps,
                                rec.get("image_size"))
            entry["matching_score"] = ms
            mss.append(ms)
        pairs.append(entry)
    report = {
        "pairs": pairs,
        "repeatability_mean": float(np.mean(reps)) if reps else None,
        "matching_score_mean": float(np.mean(mss)) if mss else None,
    }
    return report


def write_report(path, report):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
