"""The full detection pipeline, step by step.

Saliency -> min-max normalisation -> blur -> automatic entropy threshold ->
denoise -> iterative non-maximum suppression.  Each stage is shown on the
synthetic grid so the effect of the threshold is visible in the numbers.
"""

import numpy as np

from elfkit import (
    DetectorConfig,
    GaussianSpec,
    detect,
    gaussian_blur,
    kapur_threshold,
    saliency,
)
from elfkit.synthetic import edge_filter_graph, grid_of_squares

image, corners = grid_of_squares(height=240, width=320, square=16, pitch=32)
graph, archive = edge_filter_graph()
smap = saliency(graph, archive, image, layer="act")

# what detect() does internally, spelled out
v = smap.values
norm = (v - v.min()) / (v.max() - v.min()) * 255.0
blurred = gaussian_blur(norm, GaussianSpec(5, 4.0))
hist = np.bincount(np.clip(np.rint(blurred), 0, 255).astype(int).ravel(),
                   minlength=256)
level = kapur_threshold(hist)
print(f"Kapur level on the blurred histogram: {level}")
denoised = gaussian_blur(norm, GaussianSpec(5, 5.0))
kept = (denoised >= level).sum()
print(f"pixels at or above the level: {kept} of {denoised.size}")

cfg = DetectorConfig(thr_blur=GaussianSpec(5, 4.0),
                     noise_blur=GaussianSpec(5, 5.0),
                     w_nms=10, b_nms=10, max_keypoints=500)
keypoints = detect(smap, cfg)
print(f"detected {len(keypoints)} keypoints (true corners: {len(corners)})")

within = sum(
    any((kp.x - cx) ** 2 + (kp.y - cy) ** 2 <= 25 for kp in keypoints)
    for cx, cy in corners)
print(f"corners with a keypoint within 5 px: {within}/{len(corners)}")
print("top five by score:")
for kp in keypoints[:5]:
    print(f"  ({kp.x:3d}, {kp.y:3d})  score {kp.score:.2f}")
