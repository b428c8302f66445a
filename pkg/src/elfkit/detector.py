"""Keypoint extraction from a saliency map.

Pipeline: min-max normalise to [0, 255], blur once to estimate an automatic
entropy-maximising threshold (Kapur), blur again to denoise, zero everything
below the threshold, then iteratively pick decreasing global maxima while
suppressing a window around each pick and ignoring a border band.

Also provides the plain image-gradient saliencies (Sobel magnitude, absolute
Laplacian) used as baselines for the feature-gradient detector.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .netgraph import SaliencyMap
from .tensor import GaussianSpec, ShapeError, gaussian_blur


class DegenerateHistogramError(ValueError):
    """Histogram has fewer than two occupied bins: no threshold splits it."""


class DegenerateHistogramWarning(UserWarning):
    """Detection fell back to an empty result on a degenerate histogram."""


@dataclass(frozen=True)
class DetectorConfig:
    """Meta-parameters of the detection pipeline.

    ``thr_blur`` smooths the map before the threshold level is estimated;
    ``noise_blur`` denoises the map the keypoints are picked from.
    ``w_nms`` is the suppression window radius in pixels, ``b_nms`` the border
    band to ignore.  ``nms_metric`` selects the suppression neighbourhood
    shape: ``chebyshev`` (square window, the default) or ``euclidean`` (disk).
    """

    thr_blur: GaussianSpec = field(default_factory=lambda: GaussianSpec(5, 4.0))
    noise_blur: GaussianSpec = field(default_factory=lambda: GaussianSpec(5, 5.0))
    w_nms: int = 10
    b_nms: int = 10
    max_keypoints: int = 500
    nms_metric: str = "chebyshev"

    def __post_init__(self):
        if self.w_nms < 1:
            raise ValueError(f"w_nms must be >= 1, got {self.w_nms}")
        if self.b_nms < 0:
            raise ValueError(f"b_nms must be >= 0, got {self.b_nms}")
        if self.max_keypoints < 1:
            raise ValueError(f"max_keypoints must be >= 1, got {self.max_keypoints}")
        if self.nms_metric not in ("chebyshev", "euclidean"):
            raise ValueError(f"unknown nms_metric {self.nms_metric!r}")


@dataclass(frozen=True)
class Keypoint:
    """Integer pixel location (x = column, y = row) with its saliency score."""

    x: int
    y: int
    score: float


# ---------------------------------------------------------------------------
# Kapur maximum-entropy threshold
# ---------------------------------------------------------------------------

def kapur_threshold(histogram):
    """Entropy-maximising split level of a 256-bin histogram.

    For a candidate level ``s`` the bins below ``s`` form the background
    distribution and the bins at or above ``s`` the foreground; both are
    renormalised and their Shannon entropies (natural log, 0*log 0 = 0)
    summed.  Levels that leave either side empty are not valid splits.
    Returns the lowest maximising ``s`` in [1, 255]; the threshold applied
    downstream is the gray value ``s`` itself.

    Raises :class:`DegenerateHistogramError` when fewer than two bins are
    occupied.
    """
    h = np.asarray(histogram, dtype=np.float64)
    if h.shape != (256,):
        raise ValueError(f"expected a 256-bin histogram, got shape {h.shape}")
    if h.size and h.min() < 0:
        raise ValueError("histogram counts must be non-negative")
    occupied = np.flatnonzero(h > 0)
    if occupied.size < 2:
        raise DegenerateHistogramError(
            f"{occupied.size} occupied bin(s); need at least two"
        )
    p = h / h.sum()

    def entropy(part):
        # Occupied bins only: levels inside a run of empty bins then produce
        # bitwise-identical criteria, and the tie resolves to the lowest s.
        nz = part[part > 0]
        if nz.size == 0:
            return None
        a = nz / nz.sum()
        return -(a * np.log(a)).sum()

    best_s, best_val = -1, -np.inf
    for s in range(1, 256):
        h_lo = entropy(p[:s])
        h_hi = entropy(p[s:])
        if h_lo is None or h_hi is None:
            continue
        val = h_lo + h_hi
        if val > best_val:
            best_s, best_val = s, val
    return best_s


# ---------------------------------------------------------------------------
# Detection
# ---------------------------------------------------------------------------

def _normalize_255(values):
    lo = values.min()
    hi = values.max()
    if hi <= lo:
        return None
    return (values - lo) / (hi - lo) * 255.0


def _suppress(scores, y, x, w, metric):
    h, wd = scores.shape
    y0, y1 = max(0, y - w), min(h, y + w + 1)
    x0, x1 = max(0, x - w), min(wd, x + w + 1)
    if metric == "chebyshev":
        scores[y0:y1, x0:x1] = 0.0
    else:
        yy, xx = np.ogrid[y0:y1, x0:x1]
        scores[y0:y1, x0:x1][(yy - y) ** 2 + (xx - x) ** 2 <= w * w] = 0.0


def nms(scores, w_nms, b_nms, max_keypoints, metric="chebyshev"):
    """Iterative global-maximum selection with window suppression.

    Emits pixels in decreasing score order; after each pick the surrounding
    window (Chebyshev radius ``w_nms``, or a Euclidean disk) is zeroed.
    Pixels with score <= 0 and pixels within ``b_nms`` of a border are never
    candidates.  Ties on the score resolve to the lowest flat index.
    """
    s = np.array(scores, dtype=np.float64, copy=True)
    h, wd = s.shape
    if b_nms > 0:
        if h < 2 * b_nms + 1 or wd < 2 * b_nms + 1:
            raise ShapeError(
                f"map {h}x{wd} smaller than the border band b_nms={b_nms}"
            )
        s[:b_nms, :] = 0.0
        s[h - b_nms:, :] = 0.0
        s[:, :b_nms] = 0.0
        s[:, wd - b_nms:] = 0.0

    out = []
    while len(out) < max_keypoints:
        idx = int(np.argmax(s))
        val = s.flat[idx]
        if val <= 0.0:
            break
        y, x = divmod(idx, wd)
        out.append(Keypoint(x=x, y=y, score=float(val)))
        _suppress(s, y, x, w_nms, metric)
    return out


def detect(saliency_map, cfg=None):
    """Extract at most ``cfg.max_keypoints`` keypoints from a saliency map.

    Steps: min-max normalise to [0, 255]; estimate the Kapur level on the
    256-bin histogram of the threshold-blurred map; zero every pixel of the
    noise-blurred map below that level; run NMS.  Scores are the denoised
    map values at selection time, so the output is sorted by decreasing
    score.

    A constant map yields an empty list.  A degenerate post-blur histogram
    yields an empty list and emits :class:`DegenerateHistogramWarning`.
    """
    cfg = cfg or DetectorConfig()
    values = saliency_map.values if isinstance(saliency_map, SaliencyMap) \
        else np.asarray(saliency_map, dtype=np.float64)
    if values.ndim == 3 and values.shape[0] == 1:
        values = values[0]
    if values.ndim != 2:
        raise ShapeError(f"saliency map must be 2-D, got {values.shape}")
    if values.shape[0] < 2 * cfg.b_nms + 1 or values.shape[1] < 2 * cfg.b_nms + 1:
        raise ShapeError(
            f"map {values.shape} smaller than 2*b_nms+1 = {2 * cfg.b_nms + 1}"
        )

    norm = _normalize_255(values)
    if norm is None:
        return []

    blurred = gaussian_blur(norm, cfg.thr_blur)
    gray = np.clip(np.rint(blurred), 0, 255).astype(np.int64)
    hist = np.bincount(gray.ravel(), minlength=256)
    try:
        level = kapur_threshold(hist)
    except DegenerateHistogramError:
        warnings.warn("degenerate saliency histogram, no keypoints",
                      DegenerateHistogramWarning)
        return []

    denoised = gaussian_blur(norm, cfg.noise_blur)
    denoised[denoised < level] = 0.0
    return nms(denoised, cfg.w_nms, cfg.b_nms, cfg.max_keypoints, cfg.nms_metric)


# ---------------------------------------------------------------------------
# Image-gradient baselines
# ---------------------------------------------------------------------------

_SOBEL_X = np.array([[-1.0, 0.0, 1.0],
                     [-2.0, 0.0, 2.0],
                     [-1.0, 0.0, 1.0]])
_SOBEL_Y = _SOBEL_X.T
_LAPLACIAN = np.array([[0.0, 1.0, 0.0],
                       [1.0, -4.0, 1.0],
                       [0.0, 1.0, 0.0]])


def _to_gray(image):
    a = np.asarray(image, dtype=np.float64)
    if a.ndim == 3:
        a = a.mean(axis=0)
    if a.ndim != 2:
        raise ShapeError(f"expected an image, got shape {a.shape}")
    return a


def _correlate3x3_reflect(a, kernel):
    ap = np.pad(a, 1, mode="reflect")
    out = np.zeros_like(a)
    for dy in range(3):
        for dx in range(3):
            k = kernel[dy, dx]
            if k != 0.0:
                out += k * ap[dy:dy + a.shape[0], dx:dx + a.shape[1]]
    return out


def sobel_saliency(image):
    """Sobel gradient magnitude of the channel-mean image, reflect borders."""
    gray = _to_gray(image)
    gx = _correlate3x3_reflect(gray, _SOBEL_X)
    gy = _correlate3x3_reflect(gray, _SOBEL_Y)
    return SaliencyMap(values=np.sqrt(gx * gx + gy * gy), source_layer="sobel")


def laplacian_saliency(image):
    """Absolute 4-neighbour Laplacian of the channel-mean image."""
    gray = _to_gray(image)
    return SaliencyMap(values=np.abs(_correlate3x3_reflect(gray, _LAPLACIAN)),
                       source_layer="laplacian")


# ---------------------------------------------------------------------------
# Keypoint file format
# ---------------------------------------------------------------------------

def write_keypoints(path, keypoints, image_size):
    """Write ``# elf-keypoints v1 W H`` then one ``x y score`` line each."""
    w, h = image_size
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# elf-keypoints v1 {w} {h}\n")
        for kp in keypoints:
            fh.write(f"{kp.x} {kp.y} {kp.score:.6f}\n")


def read_keypoints(path):
    """Read a keypoint file; returns ``(keypoints, (W, H))``."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if header[:3] != ["#", "elf-keypoints", "v1"] or len(header) != 5:
            raise ValueError(f"{path}: not an elf-keypoints v1 file")
        w, h = int(header[3]), int(header[4])
        kps = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            xs, ys, ss = line.split()
            kps.append(Keypoint(x=int(xs), y=int(ys), score=float(ss)))
    return kps, (w, h)


def keypoint_array(keypoints):
    """(N, 2) float array of x, y columns."""
    if not keypoints:
        return np.zeros((0, 2))
    return np.array([[kp.x, kp.y] for kp in keypoints], dtype=np.float64)
