"""elfkit: training-free keypoint detection from the gradients of a trained
CNN's feature maps, with a simple feature-map descriptor and a full
repeatability / matching-score evaluation harness.
"""

from .tensor import (
    GaussianSpec,
    ShapeError,
    conv2d_forward,
    conv2d_vjp_input,
    gaussian_blur,
    maxpool_forward,
    maxpool_vjp,
    relu_forward,
    relu_vjp,
)
from .netgraph import (
    ArchiveFormatError,
    ArchParseError,
    LayerSpec,
    NetGraph,
    SaliencyMap,
    WeightArchive,
    forward_to,
    parse_arch,
    random_archive,
    read_archive,
    saliency,
    write_archive,
)
from .detector import (
    DegenerateHistogramError,
    DetectorConfig,
    Keypoint,
    detect,
    kapur_threshold,
    laplacian_saliency,
    nms,
    read_keypoints,
    sobel_saliency,
    write_keypoints,
)
from .descriptor import (
    DescriptorSet,
    describe,
    descriptor_distance,
    read_descriptors,
    write_descriptors,
)
from .evalkit import (
    Homography,
    MatchSet,
    MetricError,
    evaluate_pairs,
    greedy_match,
    matching_score,
    read_homography,
    repeatability,
    warp_points,
    write_homography,
)
from .datasets import (
    derive_set,
    load_image,
    rescale_homography,
    resize_image,
    rotation_homography,
    save_image,
    scale_homography,
    warp_image,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
