"""Repeatability and matching score on a derived benchmark pair.

Repeatability: warp the first view's keypoints into the second and count
greedy one-to-one matches within 5 px, over the smaller keypoint count.
Matching score: additionally require the same pair to be matched by greedy
descriptor-space matching with no distance cutoff.
"""

from elfkit import (
    DetectorConfig,
    describe,
    detect,
    forward_to,
    matching_score,
    repeatability,
    rotation_homography,
    saliency,
    warp_image,
)
from elfkit.synthetic import edge_filter_graph, grid_of_squares

image1, _ = grid_of_squares(height=240, width=320, square=16, pitch=32)
graph, archive = edge_filter_graph()
cfg = DetectorConfig(w_nms=10, b_nms=10, max_keypoints=300)


def extract(img):
    kps = detect(saliency(graph, archive, img, "act"), cfg)
    feat, _ = forward_to(graph, archive, img, "act")
    return kps, describe(feat, kps, img.shape[1:])


kps1, ds1 = extract(image1)
print(f"reference view: {len(kps1)} keypoints")

for angle in (0, 40, 80):
    h = rotation_homography(angle, 320, 240)
    image2 = warp_image(image1, h)
    kps2, ds2 = extract(image2)
    rep = repeatability(kps1, kps2, h, eps=5.0, image_size=(320, 240))
    ms = matching_score(kps1, ds1, kps2, ds2, h, eps=5.0,
                        image_size=(320, 240))
    print(f"rotation {angle:3d} deg: rep {rep:5.1f}  ms {ms:5.1f}"
          f"  ({len(kps2)} kps)")

print("note: ms <= rep always; equality needs descriptors that never")
print("cross over between geometrically matched pairs")
