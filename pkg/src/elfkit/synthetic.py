"""Self-contained toy data: a grid-of-squares test image with known corner
ground truth, and a tiny hand-set network whose feature gradients light up
exactly at those corners.

These generators back the demos and the end-to-end checks; nothing here
depends on external data.
"""

from __future__ import annotations

import numpy as np

from .netgraph import LayerSpec, NetGraph, WeightArchive


def grid_of_squares(height=240, width=320, square=16, pitch=32,
                    background=32.0, foreground=224.0, margin=24):
    """Bright axis-aligned squares on a dark background.

    Returns ``(image, corners)`` where image is (1, H, W) in 0..255 and
    corners lists the (x, y) pixel coordinates of every square corner.
    Squares are laid out on a regular grid with ``pitch`` spacing, starting
    ``margin`` pixels from the border so detector border bands do not clip
    the ground truth.
    """
    if square < 2 or pitch <= square:
        raise ValueError("need square >= 2 and pitch > square")
    img = np.full((1, height, width), background)
    corners = []
    for y0 in range(margin, height - margin - square + 1, pitch):
        for x0 in range(margin, width - margin - square + 1, pitch):
            img[0, y0:y0 + square, x0:x0 + square] = foreground
            x1, y1 = x0 + square - 1, y0 + square - 1
            corners.extend([(x0, y0), (x1, y0), (x0, y1), (x1, y1)])
    return img, corners


def edge_filter_graph():
    """Two-layer network (conv + relu) with hand-set mixed-difference filters.

    The two 2x2 filters are the checkerboard pattern and its negation: the
    discrete cross derivative, which responds at corners of axis-aligned
    intensity steps and cancels along straight edges.  Backpropagating its
    feature map therefore concentrates saliency on corners.
    """
    graph = NetGraph(
        layers=(
            LayerSpec.conv("edges", out_channels=2, kh=2, kw=2, stride=1, pad=0),
            LayerSpec.relu("act"),
        ),
        input_channels=1,
    )
    checker = np.array([[1.0, -1.0], [-1.0, 1.0]])
    weights = np.stack([checker[None], -checker[None]])  # (2, 1, 2, 2)
    archive = WeightArchive({
        "edges.weight": weights,
        "edges.bias": np.zeros(2),
    })
    return graph, archive


def impulse_map(height, width, points, value=1.0):
    """Zero map with impulses at the given (x, y) positions."""
    m = np.zeros((height, width))
    for x, y in points:
        m[y, x] = value
    return m
