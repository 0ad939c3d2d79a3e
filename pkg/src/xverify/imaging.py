"""Pixel-level primitives: grayscale, Gaussian blur, signed normalization,
the diverging red-green colormap, and vectorized HLS/HSV color conversions.

Everything here is a pure function over numpy arrays. Images are 112x112x3
uint8 RGB; scalar maps are 112x112 float64.
"""

import io

import numpy as np
from PIL import Image as PILImage
from scipy import ndimage

from .errors import InvalidParameterError
from .validation import validate_image

# ITU-R BT.601 luma weights.
GRAY_WEIGHTS = np.array([0.299, 0.587, 0.114])


def to_grayscale(img) -> np.ndarray:
    """Per-pixel luminance Y = 0.299 R + 0.587 G + 0.114 B, in [0, 255]."""
    arr = validate_image(img)
    return arr.astype(np.float64) @ GRAY_WEIGHTS


def gaussian_kernel_1d(kernel: int, sigma: float) -> np.ndarray:
    """1-D Gaussian weights for an odd-sized kernel, normalized to sum 1.

    Even requested sizes are rounded up to the next odd integer so the
    kernel has a center tap.
    """
    if kernel < 1:
        raise InvalidParameterError(f"kernel size must be >= 1, got {kernel}")
    if sigma <= 0:
        raise InvalidParameterError(f"sigma must be > 0, got {sigma}")
    kernel = int(kernel)
    if kernel % 2 == 0:
        kernel += 1
    half = kernel // 2
    offsets = np.arange(-half, half + 1, dtype=np.float64)
    w = np.exp(-0.5 * (offsets / float(sigma)) ** 2)
    return w / w.sum()


def gaussian_blur(m, kernel: int, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with edge replication at the borders."""
    arr = np.asarray(m, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise InvalidParameterError("map contains non-finite values")
    w = gaussian_kernel_1d(kernel, sigma)
    out = ndimage.correlate1d(arr, w, axis=0, mode="nearest")
    out = ndimage.correlate1d(out, w, axis=1, mode="nearest")
    return out


def normalize_signed(m) -> np.ndarray:
    """Scale a map by 1/max|value| so the extreme magnitude becomes +-1.

    Zero stays zero; an all-zero map is returned unchanged.
    """
    arr = np.asarray(m, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise InvalidParameterError("map contains non-finite values")
    peak = np.max(np.abs(arr))
    if peak == 0.0:
        return arr.copy()
    return arr / peak


def _round_half_up_u8(x: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(x + 0.5), 0, 255).astype(np.uint8)


def colormap_diverging(m) -> np.ndarray:
    """Render a signed map in [-1, 1] as an RGB image.

    +1 maps to pure green, -1 to pure red, 0 to white, with linear
    interpolation toward white on each side. Out-of-range values are
    clamped.
    """
    arr = np.clip(np.asarray(m, dtype=np.float64), -1.0, 1.0)
    r = 255.0 * (1.0 - np.maximum(arr, 0.0))
    g = 255.0 * (1.0 + np.minimum(arr, 0.0))
    b = 255.0 * (1.0 - np.abs(arr))
    return _round_half_up_u8(np.stack([r, g, b], axis=-1))


def rgb_to_hls(img) -> np.ndarray:
    """Hexcone RGB -> (hue, luminance, saturation), each channel in [0, 1].

    Matches the scalar ``colorsys.rgb_to_hls`` convention, vectorized.
    """
    rgb = validate_image(img).astype(np.float64) / 255.0
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    maxc = np.max(rgb, axis=-1)
    minc = np.min(rgb, axis=-1)
    sumc = maxc + minc
    rangec = maxc - minc
    l = sumc / 2.0

    achromatic = rangec == 0.0
    safe_range = np.where(achromatic, 1.0, rangec)
    denom = np.where(l <= 0.5, sumc, 2.0 - sumc)
    safe_denom = np.where(denom == 0.0, 1.0, denom)
    s = np.where(achromatic, 0.0, rangec / safe_denom)

    h = _hexcone_hue(r, g, b, maxc, safe_range)
    h = np.where(achromatic, 0.0, h)
    return np.stack([h, l, s], axis=-1)


def rgb_to_hsv(img) -> np.ndarray:
    """Hexcone RGB -> (hue, saturation, value), each channel in [0, 1]."""
    rgb = validate_image(img).astype(np.float64) / 255.0
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    maxc = np.max(rgb, axis=-1)
    minc = np.min(rgb, axis=-1)
    rangec = maxc - minc

    achromatic = rangec == 0.0
    safe_range = np.where(achromatic, 1.0, rangec)
    s = np.where(maxc == 0.0, 0.0, rangec / np.where(maxc == 0.0, 1.0, maxc))

    h = _hexcone_hue(r, g, b, maxc, safe_range)
    h = np.where(achromatic, 0.0, h)
    return np.stack([h, s, maxc], axis=-1)


def _hexcone_hue(r, g, b, maxc, safe_range):
    rc = (maxc - r) / safe_range
    gc = (maxc - g) / safe_range
    bc = (maxc - b) / safe_range
    h = np.where(r == maxc, bc - gc, np.where(g == maxc, 2.0 + rc - bc, 4.0 + gc - rc))
    return (h / 6.0) % 1.0


def hls_to_rgb(hls) -> np.ndarray:
    """Inverse of :func:`rgb_to_hls`; returns a uint8 RGB image."""
    arr = np.asarray(hls, dtype=np.float64)
    if arr.ndim < 1 or arr.shape[-1] != 3:
        raise InvalidParameterError(f"HLS array must have 3 channels last, got shape {arr.shape}")
    h, l, s = arr[..., 0], arr[..., 1], arr[..., 2]
    m2 = np.where(l <= 0.5, l * (1.0 + s), l + s - l * s)
    m1 = 2.0 * l - m2
    r = _hls_channel(m1, m2, h + 1.0 / 3.0)
    g = _hls_channel(m1, m2, h)
    b = _hls_channel(m1, m2, h - 1.0 / 3.0)
    return _round_half_up_u8(np.stack([r, g, b], axis=-1) * 255.0)


def _hls_channel(m1, m2, hue):
    hue = hue % 1.0
    return np.where(
        hue < 1.0 / 6.0,
        m1 + (m2 - m1) * hue * 6.0,
        np.where(
            hue < 0.5,
            m2,
            np.where(hue < 2.0 / 3.0, m1 + (m2 - m1) * (2.0 / 3.0 - hue) * 6.0, m1),
        ),
    )


def read_png(path) -> np.ndarray:
    """Read a PNG as a 112x112 RGB image; an alpha channel is dropped."""
    with PILImage.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    return validate_image(arr)


def decode_png(data: bytes) -> np.ndarray:
    """Decode in-memory PNG bytes the same way :func:`read_png` reads files."""
    with PILImage.open(io.BytesIO(data)) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    return validate_image(arr)


def write_png(path, img) -> None:
    PILImage.fromarray(validate_image(img), "RGB").save(path, format="PNG")
