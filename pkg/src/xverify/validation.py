"""Input validation helpers for images, scalar maps, and feature vectors.

All pixel-level operations work on aligned 112x112 RGB face crops; these
helpers enforce that contract once so the algorithms can assume it.
"""

import numpy as np

from .errors import InvalidParameterError

IMAGE_SIZE = 112


def validate_image(img) -> np.ndarray:
    """Check that ``img`` is a 112x112x3 uint8 array and return it."""
    arr = np.asarray(img)
    if arr.shape != (IMAGE_SIZE, IMAGE_SIZE, 3):
        raise InvalidParameterError(
            f"image must have shape ({IMAGE_SIZE}, {IMAGE_SIZE}, 3), got {arr.shape}"
        )
    if arr.dtype != np.uint8:
        raise InvalidParameterError(f"image samples must be uint8, got {arr.dtype}")
    return arr


def validate_scalar_map(m) -> np.ndarray:
    """Check that ``m`` is a finite 112x112 scalar field, return it as float64."""
    arr = np.asarray(m, dtype=np.float64)
    if arr.shape != (IMAGE_SIZE, IMAGE_SIZE):
        raise InvalidParameterError(
            f"scalar map must have shape ({IMAGE_SIZE}, {IMAGE_SIZE}), got {arr.shape}"
        )
    if not np.isfinite(arr).all():
        raise InvalidParameterError("scalar map contains non-finite values")
    return arr


def validate_feature(vec, min_norm=1e-12) -> np.ndarray:
    """Check that ``vec`` is a finite 1-D feature vector with positive norm."""
    arr = np.asarray(vec, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidParameterError(f"feature vector must be 1-D and non-empty, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise InvalidParameterError("feature vector contains non-finite values")
    if np.linalg.norm(arr) <= min_norm:
        raise InvalidParameterError("feature vector has (near-)zero norm")
    return arr


def validate_feature_matrix(F) -> np.ndarray:
    """Check a stack of feature vectors: 2-D, finite, every row non-degenerate."""
    arr = np.asarray(F, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise InvalidParameterError(f"feature matrix must be 2-D and non-empty, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise InvalidParameterError("feature matrix contains non-finite values")
    if (np.linalg.norm(arr, axis=1) <= 1e-12).any():
        raise InvalidParameterError("feature matrix contains a (near-)zero row")
    return arr
