"""Benchmark dataset derivation: rotated and zoomed image sets with exact
ground-truth homographies, plus image warping and pair rectification.

Seed images are kept as the reference view; each derived view is produced by
inverse-mapped bilinear warping under a homography about the image centre.
Every derived image is written next to its homography file and all pairs are
listed in a JSON manifest consumed by the evaluation front end.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np
from PIL import Image

from .evalkit import Homography, write_homography

log = logging.getLogger(__name__)

ROTATION_ANGLES = (0, 40, 80, 120, 160, 200)
SCALE_FACTORS = (1.25, 1.5, 1.75, 2.0)


# ---------------------------------------------------------------------------
# Image IO (8-bit PGM / PNG)
# ---------------------------------------------------------------------------

def load_image(path):
    """Read an 8-bit grayscale or RGB image into (C, H, W) float64, 0..255."""
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB")
        arr = np.asarray(im, dtype=np.float64)
    if arr.ndim == 2:
        return arr[None]
    return np.ascontiguousarray(arr.transpose(2, 0, 1))


def save_image(path, image):
    """Write (C, H, W) or (H, W) values, clipped to 0..255, as PNG."""
    a = np.asarray(image, dtype=np.float64)
    if a.ndim == 3:
        a = a[0] if a.shape[0] == 1 else a.transpose(1, 2, 0)
    out = np.clip(np.rint(a), 0, 255).astype(np.uint8)
    Image.fromarray(out).save(path)


# ---------------------------------------------------------------------------
# Homography construction
# ---------------------------------------------------------------------------

def _about_center(core, w, h):
    # Continuous pixel-centre convention: the centre of a W-wide image is
    # (W-1)/2, so a 180-degree turn maps column x to W-1-x exactly.
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    t_fwd = np.array([[1.0, 0.0, cx], [0.0, 1.0, cy], [0.0, 0.0, 1.0]])
    t_back = np.array([[1.0, 0.0, -cx], [0.0, 1.0, -cy], [0.0, 0.0, 1.0]])
    return Homography(t_fwd @ core @ t_back)


def rotation_homography(angle_deg, w, h):
    """Rotation about the image centre; the output canvas keeps (w, h)."""
    th = np.deg2rad(angle_deg)
    core = np.array([[np.cos(th), -np.sin(th), 0.0],
                     [np.sin(th), np.cos(th), 0.0],
                     [0.0, 0.0, 1.0]])
    return _about_center(core, w, h)


def scale_homography(s, w, h):
    """Central zoom by factor ``s``; the centre is a fixed point."""
    if not s > 0:
        raise ValueError(f"scale must be positive, got {s}")
    core = np.diag([float(s), float(s), 1.0])
    return _about_center(core, w, h)


def rescale_homography(h, size1, size2, out_size):
    """Re-express ``h`` after both images are resized to ``out_size``.

    ``size1``/``size2``/``out_size`` are (W, H).  If S1 and S2 scale each
    native image onto the output grid, the rectified map is S2 * H * S1^-1.
    """
    def scaling(src, dst):
        sw, sh = dst[0] / src[0], dst[1] / src[1]
        return np.diag([sw, sh, 1.0])

    m = h.matrix if isinstance(h, Homography) else np.asarray(h, dtype=np.float64)
    s1 = scaling(size1, out_size)
    s2 = scaling(size2, out_size)
    return Homography(s2 @ m @ np.linalg.inv(s1))


# ---------------------------------------------------------------------------
# Warping
# ---------------------------------------------------------------------------

def warp_image(image, h, out_dims=None):
    """Warp (C, H, W) pixels under ``h`` by inverse-mapped bilinear sampling.

    Every output pixel is pulled from ``h^-1`` applied to its coordinates;
    samples falling outside the source image become 0.
    """
    img = np.asarray(image, dtype=np.float64)
    squeeze = img.ndim == 2
    if squeeze:
        img = img[None]
    c, hs, ws = img.shape
    ho, wo = out_dims if out_dims is not None else (hs, ws)

    hm = h if isinstance(h, Homography) else Homography(h)
    inv = hm.inverse().matrix
    xs, ys = np.meshgrid(np.arange(wo, dtype=np.float64),
                         np.arange(ho, dtype=np.float64))
    denom = inv[2, 0] * xs + inv[2, 1] * ys + inv[2, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = (inv[0, 0] * xs + inv[0, 1] * ys + inv[0, 2]) / denom
        v = (inv[1, 0] * xs + inv[1, 1] * ys + inv[1, 2]) / denom
    finite = np.isfinite(u) & np.isfinite(v)
    u = np.where(finite, u, -1.0)
    v = np.where(finite, v, -1.0)

    x0 = np.floor(u).astype(np.int64)
    y0 = np.floor(v).astype(np.int64)
    fx = u - x0
    fy = v - y0

    out = np.zeros((c, ho, wo))
    for dy in (0, 1):
        for dx in (0, 1):
            xi = x0 + dx
            yi = y0 + dy
            ok = (xi >= 0) & (xi < ws) & (yi >= 0) & (yi < hs)
            wgt = (fx if dx else 1.0 - fx) * (fy if dy else 1.0 - fy)
            wgt = np.where(ok, wgt, 0.0)
            xi = np.clip(xi, 0, ws - 1)
            yi = np.clip(yi, 0, hs - 1)
            out += wgt[None] * img[:, yi, xi]
    return out[0] if squeeze else out


def resize_image(image, out_hw):
    """Proportional resize via the scaling homography (bilinear)."""
    img = np.asarray(image, dtype=np.float64)
    hs, ws = (img.shape if img.ndim == 2 else img.shape[1:])
    ho, wo = out_hw
    s = np.diag([wo / ws, ho / hs, 1.0])
    return warp_image(image, Homography(s), (ho, wo))


# ---------------------------------------------------------------------------
# Dataset derivation
# ---------------------------------------------------------------------------

def derive_set(seed_paths, mode, out_dir):
    """Emit (derived image, homography) pairs for every readable seed.

    ``mode='rotation'`` produces the six 40-degree steps from 0 to 200;
    ``mode='scale'`` the four central zooms 1.25 to 2.  The manifest lists
    one pair per derived view, referencing the seed as the first image.
    Unreadable seeds are skipped with a log entry.  Returns the manifest
    dict (also written to ``out_dir/manifest.json``).
    """
    if mode == "rotation":
        variants = [(f"rot{int(a):03d}", lambda w, h, a=a: rotation_homography(a, w, h))
                    for a in ROTATION_ANGLES]
    elif mode == "scale":
        variants = [(f"scale{s:.2f}".replace(".", "_"),
                     lambda w, h, s=s: scale_homography(s, w, h))
                    for s in SCALE_FACTORS]
    else:
        raise ValueError(f"unknown mode {mode!r} (expected 'rotation' or 'scale')")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pairs = []
    for seed in map(Path, seed_paths):
        try:
            img = load_image(seed)
        except (OSError, ValueError) as exc:
            log.warning("skipping unreadable seed %s: %s", seed, exc)
            continue
        _, hs, ws = img.shape
        for tag, make_h in variants:
            hm = make_h(ws, hs)
            warped = warp_image(img, hm)
            img_path = out_dir / f"{seed.stem}_{tag}.png"
            hom_path = out_dir / f"{seed.stem}_{tag}.hom"
            save_image(img_path, warped)
            write_homography(hom_path, hm)
            pairs.append({
                "image1": str(seed),
                "image2": str(img_path),
                "homography": str(hom_path),
            })
    manifest = {"mode": mode, "pairs": pairs}
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest


def read_manifest(path):
    with open(path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if "pairs" not in manifest:
        raise ValueError(f"{path}: manifest has no 'pairs' list")
    return manifest
