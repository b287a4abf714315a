"""Contrast-variant pooling (CVP) for illuminant estimation."""

from .algorithms import (
    EstimatorSpec,
    correct_image,
    double_opponency,
    estimate,
    grey_edge,
    grey_world,
    white_patch,
)
from .contrast import ContrastMap, CvpConfig, cvp_percentage, local_contrast
from .filters import FeatureMap, convolve_separable, dog_response, edge_feature_map, gaussian_kernel
from .imgio import Image, PreprocessSpec, load_image, load_manifest, save_image
from .metrics import ErrorStats, recovery_error, reproduction_error, summarize
from .pooling import PoolingSpec, PoolResult, pool, pool_cvp, pool_max, pool_minkowski, pool_top_x
from .synth import SyntheticSceneSpec, generate_synthetic

__version__ = "0.1.0"
