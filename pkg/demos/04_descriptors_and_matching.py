"""Describe keypoints by interpolating a feature map, then match two views.

The scene is a random smooth texture so that descriptors are discriminative
(on a repeating pattern every corner looks alike and matching is chance).
The second view is a pure translation: convolution features translate with
the image, so most greedy descriptor matches land on true correspondences.
Zoom and rotation degrade this quickly; demo 05 quantifies that.
"""

import numpy as np

from elfkit import (
    DetectorConfig,
    GaussianSpec,
    describe,
    detect,
    forward_to,
    gaussian_blur,
    greedy_match,
    matching_score,
    parse_arch,
    random_archive,
    repeatability,
    saliency,
    warp_image,
    warp_points,
)
from elfkit.detector import keypoint_array
from elfkit.evalkit import Homography

rng = np.random.default_rng(5)

# smooth random texture, 0..255
noise = rng.uniform(0.0, 1.0, size=(180, 240))
tex = gaussian_blur(noise, GaussianSpec(5, 1.0))
image1 = ((tex - tex.min()) / (tex.max() - tex.min()) * 255.0)[None]

shift = np.eye(3)
shift[0, 2], shift[1, 2] = 13.0, -9.0
h = Homography(shift)
image2 = warp_image(image1, h)

# random two-conv chain: detection on the relu, description on the last conv
graph = parse_arch("""
input_channels 1
c1 conv 8 3 3 1 1
r1 relu
c2 conv 16 3 3 1 1
""")
archive = random_archive(graph, rng=3)
cfg = DetectorConfig(w_nms=10, b_nms=10, max_keypoints=200)


def extract(img):
    kps = detect(saliency(graph, archive, img, "r1"), cfg)
    feature, _ = forward_to(graph, archive, img, "c2")
    return kps, describe(feature, kps, img.shape[1:], normalize=True)


(kps1, ds1), (kps2, ds2) = extract(image1), extract(image2)
print(f"view 1: {len(kps1)} keypoints   view 2: {len(kps2)} keypoints "
      f"(descriptor dim {ds1.dim})")

matches = greedy_match(ds1.vectors, ds2.vectors)
warped, _ = warp_points(h, keypoint_array(kps1))
pts2 = keypoint_array(kps2)
good = sum(np.hypot(*(warped[i] - pts2[j])) < 5.0
           for i, j in zip(matches.idx1, matches.idx2))
print(f"greedy descriptor matches: {len(matches)}, "
      f"geometrically correct: {good}")

rep = repeatability(kps1, kps2, h, eps=5.0, image_size=(240, 180))
ms = matching_score(kps1, ds1, kps2, ds2, h, eps=5.0, image_size=(240, 180))
print(f"repeatability {rep:.1f}   matching score {ms:.1f}")
