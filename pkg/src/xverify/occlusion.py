"""Systematic image occlusion: slide a patch across a stride grid and
collect the occluded images plus their masks.

The grid is anchored at the top-left corner and traversed row-major
(y outer, x inner) with ``floor((112 - p) / s)`` positions per axis, so a
sweep yields exactly ``N = floor((112 - p) / s)**2`` entries in a stable
order that the distance-selection methods index into.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError
from .imaging import gaussian_blur
from .validation import IMAGE_SIZE, validate_image

FILL_COLORS = {
    "black": (0, 0, 0),
    "gray": (128, 128, 128),
    "white": (255, 255, 255),
}
FILLS = ("black", "gray", "white", "noise")
SHAPES = ("rect", "round")
DEFAULT_PATCH_SIZES = (7, 14, 28)
DEFAULT_STRIDE = 5


@dataclass(frozen=True)
class PatchSpec:
    """Parameters of one occlusion sweep.

    ``edge_blur`` is an optional ``(kernel, sigma)`` pair applied to the
    binary mask, giving patches a soft edge; the blurred mask is then used
    both for compositing and as the weight in the similarity map.
    """

    size: int = 7
    stride: int = DEFAULT_STRIDE
    shape: str = "rect"
    fill: str = "black"
    edge_blur: tuple | None = None
    noise_seed: int = 0

    def __post_init__(self):
        if not 1 <= self.size <= IMAGE_SIZE:
            raise InvalidParameterError(f"patch size must be in [1, {IMAGE_SIZE}], got {self.size}")
        if self.stride < 1:
            raise InvalidParameterError(f"stride must be >= 1, got {self.stride}")
        if self.shape not in SHAPES:
            raise InvalidParameterError(f"shape must be one of {SHAPES}, got {self.shape!r}")
        if self.fill not in FILLS:
            raise InvalidParameterError(f"fill must be one of {FILLS}, got {self.fill!r}")
        if self.edge_blur is not None:
            try:
                kernel, sigma = self.edge_blur
            except (TypeError, ValueError):
                raise InvalidParameterError(
                    f"edge_blur must be a (kernel, sigma) pair, got {self.edge_blur!r}"
                ) from None
            if int(kernel) < 1 or float(sigma) <= 0:
                raise InvalidParameterError(f"edge_blur needs kernel >= 1 and sigma > 0, got {self.edge_blur}")
            object.__setattr__(self, "edge_blur", (int(kernel), float(sigma)))

    @property
    def positions_per_axis(self) -> int:
        return (IMAGE_SIZE - self.size) // self.stride

    @property
    def count(self) -> int:
        return self.positions_per_axis ** 2

    def to_dict(self) -> dict:
        return {
            "size": self.size,
            "stride": self.stride,
            "shape": self.shape,
            "fill": self.fill,
            "edge_blur": list(self.edge_blur) if self.edge_blur else None,
            "noise_seed": self.noise_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PatchSpec":
        blur = d.get("edge_blur")
        return cls(
            size=int(d["size"]),
            stride=int(d["stride"]),
            shape=d.get("shape", "rect"),
            fill=d.get("fill", "black"),
            edge_blur=tuple(blur) if blur else None,
            noise_seed=int(d.get("noise_seed", 0)),
        )


@dataclass
class OcclusionSet:
    """Ordered occluded images and masks from one sweep."""

    occluded: np.ndarray  # (N, 112, 112, 3) uint8
    masks: np.ndarray  # (N, 112, 112) float32, in [0, 1]
    spec: PatchSpec
    count: int = field(init=False)

    def __post_init__(self):
        if len(self.occluded) != len(self.masks):
            raise InvalidParameterError("occluded images and masks must have equal length")
        self.count = len(self.masks)


def grid_positions(spec: PatchSpec) -> list:
    """Row-major (x, y) top-left patch positions for a sweep."""
    k = spec.positions_per_axis
    s = spec.stride
    return [(i * s, j * s) for j in range(k) for i in range(k)]


def patch_footprint(spec: PatchSpec) -> np.ndarray:
    """The p x p base mask: all ones for rect, an inscribed disk for round.

    A round pixel is included when its center lies within radius p/2 of the
    patch center.
    """
    p = spec.size
    if spec.shape == "rect":
        return np.ones((p, p), dtype=np.float64)
    c = (p - 1) / 2.0
    u = np.arange(p, dtype=np.float64)
    du2 = (u - c) ** 2
    return ((du2[:, None] + du2[None, :]) <= (p / 2.0) ** 2).astype(np.float64)


def _fill_pixels(img_shape, x: int, y: int, spec: PatchSpec) -> np.ndarray:
    if spec.fill == "noise":
        rng = np.random.default_rng(spec.noise_seed ^ (y * IMAGE_SIZE + x))
        return rng.integers(0, 256, size=img_shape, dtype=np.uint8).astype(np.float64)
    color = FILL_COLORS[spec.fill]
    return np.broadcast_to(np.array(color, dtype=np.float64), img_shape)


def apply_patch(img, x: int, y: int, spec: PatchSpec):
    """Occlude ``img`` with one patch at top-left position (x, y).

    Returns ``(occluded_image, mask)``; the mask is the (possibly blurred)
    patch weight in [0, 1], and the composite is
    ``(1 - m) * img + m * fill`` per pixel.
    """
    arr = validate_image(img)
    p = spec.size
    if x < 0 or y < 0 or x + p > IMAGE_SIZE or y + p > IMAGE_SIZE:
        raise InvalidParameterError(f"patch of size {p} at ({x}, {y}) exceeds the {IMAGE_SIZE}px image")

    mask = np.zeros((IMAGE_SIZE, IMAGE_SIZE), dtype=np.float64)
    mask[y:y + p, x:x + p] = patch_footprint(spec)
    if spec.edge_blur is not None:
        # Rounding in the blur can push weights a hair past 1; keep the
        # documented [0, 1] range so masks stay valid blend weights.
        mask = np.clip(gaussian_blur(mask, *spec.edge_blur), 0.0, 1.0)

    fill = _fill_pixels(arr.shape, x, y, spec)
    m3 = mask[:, :, None]
    out = np.floor((1.0 - m3) * arr.astype(np.float64) + m3 * fill + 0.5)
    return out.astype(np.uint8), mask


def iter_patches(img, spec: PatchSpec):
    """Yield ``(x, y, occluded, mask)`` over the sweep grid in row-major order."""
    validate_image(img)
    if spec.positions_per_axis < 1:
        raise InvalidParameterError(
            f"patch size {spec.size} with stride {spec.stride} yields an empty sweep"
        )
    for x, y in grid_positions(spec):
        occluded, mask = apply_patch(img, x, y, spec)
        yield x, y, occluded, mask


def occlude_sweep(img, spec: PatchSpec) -> OcclusionSet:
    """Run the full sweep, materializing all N occluded images and masks."""
    n = spec.count
    if n < 1:
        raise InvalidParameterError(
            f"patch size {spec.size} with stride {spec.stride} yields an empty sweep"
        )
    occluded = np.empty((n, IMAGE_SIZE, IMAGE_SIZE, 3), dtype=np.uint8)
    masks = np.empty((n, IMAGE_SIZE, IMAGE_SIZE), dtype=np.float32)
    for i, (_, _, occ, mask) in enumerate(iter_patches(img, spec)):
        occluded[i] = occ
        masks[i] = mask
    return OcclusionSet(occluded=occluded, masks=masks, spec=spec)
