"""Backproject a feature map to the image and look at where it lands.

A tiny hand-set network (one conv of mixed-difference filters + relu) is run
on a synthetic grid of squares.  Seeding the backward pass with the feature
map itself yields a saliency map whose local maxima sit on the square
corners.  The map is written next to this script as a PNG.
"""

from pathlib import Path

import numpy as np

from elfkit import saliency
from elfkit.datasets import save_image
from elfkit.synthetic import edge_filter_graph, grid_of_squares

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

image, corners = grid_of_squares(height=240, width=320, square=16, pitch=32)
graph, archive = edge_filter_graph()

for mode in ("identity", "mask"):
    smap = saliency(graph, archive, image, layer="act", relu_mode=mode)
    v = smap.values
    print(f"relu mode {mode!r}: saliency range [{v.min():.1f}, {v.max():.1f}],"
          f" nonzero at {np.count_nonzero(v)} px")
    png = out_dir / f"saliency_{mode}.png"
    save_image(png, v / v.max() * 255.0)
    print(f"  wrote {png}")

# the strongest saliency pixel should be one of the true corners
y, x = np.unravel_index(np.argmax(smap.values), smap.values.shape)
nearest = min(corners, key=lambda c: (c[0] - x) ** 2 + (c[1] - y) ** 2)
print(f"peak at ({x}, {y}), nearest true corner {nearest}")
