"""Explainable face verification toolkit.

Occlusion-based similarity maps (X-Maps) and calibrated confidence scores
(C-Scores) for any black-box facial embedding function, plus a batch
pipeline, an on-disk results store, and an HTTP service for operator
review.
"""

from .confidence import (
    ConfidenceCalibrator,
    RatioHistogram,
    SigmoidParams,
    best_threshold,
    c_score,
    candidate_thresholds,
    compute_thresholds_cv,
    fit_sigmoid,
    fit_sigmoid_points,
    ratio_histogram,
    threshold_accuracy,
)
from .datastore import (
    DecisionRecord,
    PairRecord,
    ResultRecord,
    ResultsStore,
    load_pairs,
    run_batch,
)
from .embedding import (
    CommandBackend,
    EmbeddingBackend,
    ReferenceEmbedder,
    cosine_distance,
    cosine_distance_matrix,
    make_backend,
)
from .errors import (
    BackendError,
    DegenerateImageError,
    DegenerateSplitError,
    InsufficientDataError,
    InvalidParameterError,
    NotFoundError,
    PairsFormatError,
    StoreLockedError,
    XVerifyError,
)
from .explain import (
    METHOD_I,
    METHOD_II,
    METHOD_III,
    METHODS,
    Method,
    PairExplainContext,
    PairExplainer,
    XMapResult,
    blend,
    default_specs,
    explain_pair,
    explain_pair_all,
    merge_scales,
    postprocess,
    select_distances,
    similarity_map,
)
from .imaging import (
    colormap_diverging,
    decode_png,
    gaussian_blur,
    hls_to_rgb,
    normalize_signed,
    read_png,
    rgb_to_hls,
    rgb_to_hsv,
    to_grayscale,
    write_png,
)
from .leastsq import LeastSquaresResult, least_squares_dogbox
from .occlusion import (
    DEFAULT_PATCH_SIZES,
    DEFAULT_STRIDE,
    OcclusionSet,
    PatchSpec,
    apply_patch,
    grid_positions,
    iter_patches,
    occlude_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "BackendError",
    "CommandBackend",
    "ConfidenceCalibrator",
    "DEFAULT_PATCH_SIZES",
    "DEFAULT_STRIDE",
    "DecisionRecord",
    "DegenerateImageError",
    "DegenerateSplitError",
    "EmbeddingBackend",
    "InsufficientDataError",
    "InvalidParameterError",
    "LeastSquaresResult",
    "METHOD_I",
    "METHOD_II",
    "METHOD_III",
    "METHODS",
    "Method",
    "NotFoundError",
    "OcclusionSet",
    "PairExplainContext",
    "PairExplainer",
    "PairRecord",
    "PairsFormatError",
    "PatchSpec",
    "RatioHistogram",
    "ReferenceEmbedder",
    "ResultRecord",
    "ResultsStore",
    "SigmoidParams",
    "StoreLockedError",
    "XMapResult",
    "XVerifyError",
    "apply_patch",
    "best_threshold",
    "blend",
    "c_score",
    "candidate_thresholds",
    "colormap_diverging",
    "compute_thresholds_cv",
    "cosine_distance",
    "cosine_distance_matrix",
    "decode_png",
    "default_specs",
    "explain_pair",
    "explain_pair_all",
    "fit_sigmoid",
    "fit_sigmoid_points",
    "gaussian_blur",
    "grid_positions",
    "hls_to_rgb",
    "iter_patches",
    "least_squares_dogbox",
    "load_pairs",
    "make_backend",
    "merge_scales",
    "normalize_signed",
    "occlude_sweep",
    "postprocess",
    "ratio_histogram",
    "read_png",
    "rgb_to_hls",
    "rgb_to_hsv",
    "run_batch",
    "select_distances",
    "similarity_map",
    "threshold_accuracy",
    "to_grayscale",
    "write_png",
]
