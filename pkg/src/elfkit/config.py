"""Bundled detector presets and their resolution.

A preset is a JSON file mirroring :class:`~elfkit.detector.DetectorConfig`
plus the architecture file and layer names to use.  The bundled presets live
inside the package; the ``ELF_PRESET_DIR`` environment variable points the
lookup somewhere else.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

from .detector import DetectorConfig
from .tensor import GaussianSpec

PRESET_DIR_ENV = "ELF_PRESET_DIR"


def preset_dir():
    override = os.environ.get(PRESET_DIR_ENV)
    if override:
        return Path(override)
    return Path(__file__).parent / "presets"


def resolve_preset(name):
    """Resolve a preset name or path to a JSON file path."""
    p = Path(name)
    if p.suffix == ".json" and p.exists():
        return p
    candidate = preset_dir() / f"{name}.json"
    if candidate.exists():
        return candidate
    raise FileNotFoundError(f"no preset named {name!r} in {preset_dir()}")


def resolve_arch(name):
    """Resolve an architecture file name against the preset directory."""
    p = Path(name)
    if p.exists():
        return p
    candidate = preset_dir() / name
    if candidate.exists():
        return candidate
    raise FileNotFoundError(f"architecture file {name!r} not found")


def load_preset(name):
    with open(resolve_preset(name), "r", encoding="utf-8") as fh:
        return json.load(fh)


def detector_config(preset):
    """Build a :class:`DetectorConfig` from a preset dict."""
    def spec(key, default):
        size, sigma = preset.get(key, default)
        return GaussianSpec(int(size), float(sigma))

    return DetectorConfig(
        thr_blur=spec("thr_blur", (5, 4.0)),
        noise_blur=spec("noise_blur", (5, 5.0)),
        w_nms=int(preset.get("w_nms", 10)),
        b_nms=int(preset.get("b_nms", 10)),
        max_keypoints=int(preset.get("max_keypoints", 500)),
        nms_metric=preset.get("nms_metric", "chebyshev"),
    )
