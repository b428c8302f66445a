"""Swap the feature-gradient saliency for plain Sobel / Laplacian maps.

The rest of the pipeline is untouched: same thresholding, same NMS, same
metrics.  On a clean synthetic grid the intensity-gradient baselines also
fire on the structure; their differences from feature gradients only show on
natural images.
"""

from elfkit import (
    DetectorConfig,
    detect,
    laplacian_saliency,
    repeatability,
    rotation_homography,
    saliency,
    sobel_saliency,
    warp_image,
)
from elfkit.synthetic import edge_filter_graph, grid_of_squares

image1, _ = grid_of_squares(height=240, width=320, square=16, pitch=32)
h = rotation_homography(40, 320, 240)
image2 = warp_image(image1, h)

graph, archive = edge_filter_graph()
cfg = DetectorConfig(w_nms=10, b_nms=10, max_keypoints=300)

sources = {
    "feature-gradient": lambda img: saliency(graph, archive, img, "act"),
    "sobel": sobel_saliency,
    "laplacian": laplacian_saliency,
}

for name, fn in sources.items():
    kps1 = detect(fn(image1), cfg)
    kps2 = detect(fn(image2), cfg)
    rep = repeatability(kps1, kps2, h, eps=5.0, image_size=(320, 240))
    print(f"{name:18s} kps {len(kps1):3d}/{len(kps2):3d}  rep {rep:5.1f}")
