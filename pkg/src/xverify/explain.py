"""Occlusion-based similarity explanations for image pairs.

Given an embedding backend and a pair of aligned face crops, each patch
position contributes its distance deviation (occluded distance minus the
unoccluded pair distance) weighted by the patch mask. Summed over all
positions this yields a signed similarity map per image: positive values
mark regions whose occlusion pushed the pair apart (the region supported
the match), negative values mark regions whose occlusion pulled the pair
together. Maps from several patch sizes are averaged with 1/p^2 weights,
blurred, normalized to [-1, 1], and blended over the source image for
display.

Three distance-selection strategies are supported:

* METHOD_I  - full cross product: D1/D2 are row/column means of the
  N x N distance matrix between the two occlusion sweeps.
* METHOD_II - occluded-vs-original: each occluded embedding is compared
  against the other image's unoccluded embedding.
* METHOD_III - aligned positions: occluded embeddings are compared
  pairwise, giving one shared map for both images.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from sklearn.base import BaseEstimator

from .embedding import (
    EmbeddingBackend,
    cosine_distance,
    cosine_distance_matrix,
    make_backend,
)
from .errors import InvalidParameterError
from .imaging import (
    colormap_diverging,
    gaussian_blur,
    hls_to_rgb,
    normalize_signed,
    rgb_to_hls,
    rgb_to_hsv,
)
from .occlusion import DEFAULT_PATCH_SIZES, DEFAULT_STRIDE, PatchSpec, occlude_sweep
from .validation import validate_image


class Method(str, Enum):
    """Distance-selection strategy for the occlusion sweeps of a pair."""

    I = "I"
    II = "II"
    III = "III"

    @classmethod
    def parse(cls, value) -> "Method":
        if isinstance(value, cls):
            return value
        name = str(value).strip().upper()
        if name.startswith("METHOD_"):
            name = name[len("METHOD_"):]
        try:
            return cls(name)
        except ValueError:
            raise InvalidParameterError(
                f"unknown method {value!r} (expected I, II, or III)"
            ) from None


METHOD_I = Method.I
METHOD_II = Method.II
METHOD_III = Method.III
METHODS = (Method.I, Method.II, Method.III)


def default_specs() -> tuple:
    return tuple(PatchSpec(size=p, stride=DEFAULT_STRIDE) for p in DEFAULT_PATCH_SIZES)


@dataclass
class PairExplainContext:
    """Shared state for explaining one image pair with one backend.

    Holds the unoccluded embeddings and pair distance, plus a cache of
    occlusion sweeps and their embeddings so that several methods can be
    rendered without re-running the (expensive) sweep.
    """

    img1: np.ndarray
    img2: np.ndarray
    backend: EmbeddingBackend
    f1: np.ndarray
    f2: np.ndarray
    d_orig: float
    specs: tuple
    _sweeps: dict = field(default_factory=dict, repr=False)

    @classmethod
    def create(cls, img1, img2, backend: EmbeddingBackend, specs=None) -> "PairExplainContext":
        img1 = validate_image(img1)
        img2 = validate_image(img2)
        specs = default_specs() if specs is None else tuple(specs)
        if not specs:
            raise InvalidParameterError("at least one patch spec is required")
        f1 = backend.embed(img1)
        f2 = backend.embed(img2)
        d_orig = float(cosine_distance(f1, f2))
        return cls(img1=img1, img2=img2, backend=backend, f1=f1, f2=f2,
                   d_orig=d_orig, specs=specs)

    def sweep(self, which: int, spec: PatchSpec):
        """(OcclusionSet, embeddings) for image 1 or 2 under ``spec``, cached."""
        if which not in (1, 2):
            raise InvalidParameterError(f"image selector must be 1 or 2, got {which}")
        key = (which, spec)
        if key not in self._sweeps:
            img = self.img1 if which == 1 else self.img2
            occ = occlude_sweep(img, spec)
            feats = np.asarray(self.backend.embed_batch(occ.occluded), dtype=np.float64)
            self._sweeps[key] = (occ, feats)
        return self._sweeps[key]


@dataclass
class XMapResult:
    """Everything produced for one pair under one method.

    ``maps`` are the merged, blurred, [-1, 1]-normalized similarity maps
    (one per image); ``blended`` the display renderings over the sources;
    ``per_scale`` the raw single-scale maps in spec order, kept for
    sensitivity inspection.
    """

    method: Method
    d_orig: float
    maps: tuple
    blended: tuple
    per_scale: tuple
    specs: tuple


def _rowwise_cosine_distance(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    na = np.linalg.norm(A, axis=1)
    nb = np.linalg.norm(B, axis=1)
    d = 1.0 - np.einsum("ij,ij->i", A, B) / (na * nb)
    # Exactly zero for identical rows (self-distance carries no rounding noise).
    d[(A == B).all(axis=1)] = 0.0
    return d


def select_distances(F1, F2, f1, f2, method) -> tuple:
    """Per-position distances (D1, D2) for each image under ``method``.

    ``F1``/``F2`` are the ordered occluded embeddings of the two images,
    ``f1``/``f2`` the unoccluded ones. For METHOD_III the returned arrays
    are one and the same object.
    """
    method = Method.parse(method)
    F1 = np.asarray(F1, dtype=np.float64)
    F2 = np.asarray(F2, dtype=np.float64)
    if F1.ndim != 2 or F2.ndim != 2 or F1.shape != F2.shape:
        raise InvalidParameterError(
            f"occluded feature lists must be equal-shaped 2-D arrays, "
            f"got {F1.shape} and {F2.shape}"
        )
    if len(F1) == 0:
        raise InvalidParameterError("occluded feature lists are empty")
    if method is Method.I:
        dm = cosine_distance_matrix(F1, F2)
        return dm.mean(axis=1), dm.mean(axis=0)
    if method is Method.II:
        D1 = cosine_distance_matrix(F1, np.asarray(f2, dtype=np.float64)[None, :])[:, 0]
        D2 = cosine_distance_matrix(F2, np.asarray(f1, dtype=np.float64)[None, :])[:, 0]
        return D1, D2
    D = _rowwise_cosine_distance(F1, F2)
    return D, D


def similarity_map(distances, masks, d_orig: float) -> np.ndarray:
    """Mean of mask-weighted distance deviations over all patch positions.

    ``masks`` may be a stacked (N, H, W) array or any iterable of (H, W)
    masks; the iterable form lets dense sweeps stream instead of
    materializing every mask at once.
    """
    d = np.asarray(distances, dtype=np.float64)
    if d.ndim != 1 or d.size == 0:
        raise InvalidParameterError("distances must be a non-empty 1-D sequence")
    dev = d - float(d_orig)
    if isinstance(masks, np.ndarray):
        if masks.ndim != 3 or len(masks) != d.size:
            raise InvalidParameterError(
                f"expected {d.size} stacked masks, got array of shape {masks.shape}"
            )
        acc = np.einsum("i,ijk->jk", dev, masks, dtype=np.float64)
    else:
        acc = None
        n = 0
        for m in masks:
            if n >= d.size:
                n += 1
                break
            m = np.asarray(m, dtype=np.float64)
            acc = dev[n] * m if acc is None else acc + dev[n] * m
            n += 1
        if n != d.size or acc is None:
            raise InvalidParameterError(f"expected {d.size} masks, got {n}")
    return acc / d.size


def merge_scales(maps, sizes) -> np.ndarray:
    """Average the per-scale maps with 1/p^2 patch-area weights."""
    maps = [np.asarray(m, dtype=np.float64) for m in maps]
    sizes = [int(p) for p in sizes]
    if not maps or len(maps) != len(sizes):
        raise InvalidParameterError(
            f"need one size per map, got {len(maps)} maps and {len(sizes)} sizes"
        )
    out = np.zeros_like(maps[0])
    for m, p in zip(maps, sizes):
        if m.shape != out.shape:
            raise InvalidParameterError("all maps must share one shape")
        out += m / float(p * p)
    return out / len(maps)


def postprocess(m, stride: int) -> np.ndarray:
    """Stride-compensating blur (kernel s, sigma s) followed by signed
    normalization to [-1, 1]."""
    s = int(stride)
    if s < 1:
        raise InvalidParameterError(f"stride must be >= 1, got {stride}")
    return normalize_signed(gaussian_blur(m, kernel=s, sigma=float(s)))


def blend(img, m) -> np.ndarray:
    """Render a [-1, 1] map over its source image.

    The map is colored through the diverging red/white/green colormap;
    the output takes its hue and saturation from that rendering and its
    luminance from the source image, so facial structure stays readable
    underneath the overlay.
    """
    img = validate_image(img)
    rendered = colormap_diverging(m)
    hue = rgb_to_hls(rendered)[..., 0]
    sat = rgb_to_hsv(rendered)[..., 1]
    lum = rgb_to_hls(img)[..., 1]
    return hls_to_rgb(np.stack([hue, lum, sat], axis=-1))


def explain_pair(ctx: PairExplainContext, method) -> XMapResult:
    """Full pipeline for one method: sweep, embed, map, merge, blend."""
    method = Method.parse(method)
    raw1, raw2 = [], []
    for spec in ctx.specs:
        occ1, F1 = ctx.sweep(1, spec)
        occ2, F2 = ctx.sweep(2, spec)
        D1, D2 = select_distances(F1, F2, ctx.f1, ctx.f2, method)
        s1 = similarity_map(D1, occ1.masks, ctx.d_orig)
        if method is Method.III:
            # The sweeps share one mask grid, so the maps coincide exactly;
            # reuse the array rather than recomputing it.
            s2 = s1
        else:
            s2 = similarity_map(D2, occ2.masks, ctx.d_orig)
        raw1.append(s1)
        raw2.append(s2)

    sizes = [spec.size for spec in ctx.specs]
    stride = max(spec.stride for spec in ctx.specs)
    merged1 = postprocess(merge_scales(raw1, sizes), stride)
    merged2 = merged1 if method is Method.III else postprocess(merge_scales(raw2, sizes), stride)
    return XMapResult(
        method=method,
        d_orig=ctx.d_orig,
        maps=(merged1, merged2),
        blended=(blend(ctx.img1, merged1), blend(ctx.img2, merged2)),
        per_scale=(raw1, raw2),
        specs=ctx.specs,
    )


def explain_pair_all(ctx: PairExplainContext, methods=METHODS) -> dict:
    """Explain one pair under several methods, sharing sweeps and embeddings."""
    return {Method.parse(m): explain_pair(ctx, m) for m in methods}


class PairExplainer(BaseEstimator):
    """Configurable pair explainer with estimator-style parameter handling.

    Parameters mirror the sweep configuration; ``backend`` may be an
    :class:`~xverify.embedding.EmbeddingBackend` instance or a backend
    spec string (``"reference"`` or ``"cmd:..."``).
    """

    def __init__(self, backend="reference", patch_sizes=DEFAULT_PATCH_SIZES,
                 stride=DEFAULT_STRIDE, shape="rect", fill="black",
                 edge_blur=None, noise_seed=0, method="III"):
        self.backend = backend
        self.patch_sizes = patch_sizes
        self.stride = stride
        self.shape = shape
        self.fill = fill
        self.edge_blur = edge_blur
        self.noise_seed = noise_seed
        self.method = method

    def build_specs(self) -> tuple:
        return tuple(
            PatchSpec(size=int(p), stride=int(self.stride), shape=self.shape,
                      fill=self.fill, edge_blur=self.edge_blur,
                      noise_seed=self.noise_seed)
            for p in self.patch_sizes
        )

    def resolve_backend(self) -> EmbeddingBackend:
        if isinstance(self.backend, EmbeddingBackend):
            return self.backend
        return make_backend(self.backend)

    def context(self, img1, img2) -> PairExplainContext:
        return PairExplainContext.create(img1, img2, self.resolve_backend(),
                                         self.build_specs())

    def explain(self, img1, img2, method=None) -> XMapResult:
        ctx = self.context(img1, img2)
        return explain_pair(ctx, self.method if method is None else method)

    def explain_all(self, img1, img2, methods=METHODS) -> dict:
        return explain_pair_all(self.context(img1, img2), methods)
