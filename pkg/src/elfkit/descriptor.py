"""Keypoint description by bilinear interpolation of a CNN feature map.

Each keypoint's image coordinates are scaled proportionally into the feature
map's grid and every channel is sampled bilinearly there, yielding one vector
of length C per keypoint.  Descriptors are L2-normalised by default so that
layers with wildly different activation scales remain comparable under
unbounded Euclidean matching.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import ShapeError


@dataclass(frozen=True)
class DescriptorSet:
    """Fixed-length vectors, one per keypoint, in keypoint list order."""

    dim: int
    vectors: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != self.dim:
            raise ShapeError(
                f"vectors must have shape (N, {self.dim}), got {v.shape}"
            )
        object.__setattr__(self, "vectors", v)

    def __len__(self):
        return self.vectors.shape[0]


def describe(feature, keypoints, image_dims, normalize=True):
    """Sample a (C, h, w) feature map at keypoint locations.

    Image coordinates map to feature coordinates by pure proportional
    scaling, ``u = x * (w / W)`` and ``v = y * (h / H)``, clamped to the
    feature grid.  Each channel is bilinearly interpolated at (u, v).  With
    ``normalize`` on, every non-zero vector is scaled to unit L2 norm; zero
    vectors stay zero.

    Parameters
    ----------
    feature : ndarray, shape (C, h, w)
    keypoints : sequence of objects with integer ``x``/``y`` or an (N, 2) array
    image_dims : tuple (H, W) of the image the keypoints live in
    """
    f = np.asarray(feature, dtype=np.float64)
    if f.ndim != 3:
        raise ShapeError(f"feature map must be (C, h, w), got {f.shape}")
    c, h, w = f.shape
    hi, wi = image_dims

    if isinstance(keypoints, np.ndarray):
        pts = np.asarray(keypoints, dtype=np.float64).reshape(-1, 2)
    else:
        kplist = list(keypoints)
        if kplist and hasattr(kplist[0], "x"):
            pts = np.array([[kp.x, kp.y] for kp in kplist], dtype=np.float64)
        else:
            pts = np.asarray(kplist, dtype=np.float64).reshape(-1, 2)
    if pts.shape[0] == 0:
        return DescriptorSet(dim=c, vectors=np.zeros((0, c)),
                             normalized=normalize)
    if (pts[:, 0].min() < 0 or pts[:, 0].max() >= wi
            or pts[:, 1].min() < 0 or pts[:, 1].max() >= hi):
        raise ValueError("keypoint outside image bounds")

    u = np.clip(pts[:, 0] * (w / wi), 0.0, w - 1.0)
    v = np.clip(pts[:, 1] * (h / hi), 0.0, h - 1.0)
    x0 = np.floor(u).astype(np.int64)
    y0 = np.floor(v).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = u - x0
    fy = v - y0

    # (N, C) corner samples
    f00 = f[:, y0, x0].T
    f01 = f[:, y0, x1].T
    f10 = f[:, y1, x0].T
    f11 = f[:, y1, x1].T
    wx0, wx1 = (1.0 - fx)[:, None], fx[:, None]
    wy0, wy1 = (1.0 - fy)[:, None], fy[:, None]
    vecs = wy0 * (wx0 * f00 + wx1 * f01) + wy1 * (wx0 * f10 + wx1 * f11)

    if normalize:
        norms = np.linalg.norm(vecs, axis=1, keepdims=True)
        nz = norms[:, 0] > 0
        vecs[nz] /= norms[nz]
    return DescriptorSet(dim=c, vectors=vecs, normalized=normalize)


def descriptor_distance(a, b):
    """Euclidean distance between two descriptor vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"descriptor length mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(((a - b) ** 2).sum()))


def write_descriptors(path, descriptors):
    """Write ``# elf-desc v1 N dim`` then one line of dim floats per keypoint."""
    v = descriptors.vectors
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# elf-desc v1 {v.shape[0]} {descriptors.dim}\n")
        for row in v:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")


def read_descriptors(path):
    """Read an elf-desc v1 file into a :class:`DescriptorSet`."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if header[:3] != ["#", "elf-desc", "v1"] or len(header) != 5:
            raise ValueError(f"{path}: not an elf-desc v1 file")
        n, dim = int(header[3]), int(header[4])
        rows = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rows.append([float(x) for x in line.split()])
    vecs = np.array(rows, dtype=np.float64).reshape(n, dim)
    return DescriptorSet(dim=dim, vectors=vecs, normalized=False)
