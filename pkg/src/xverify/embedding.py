"""Embedding backends and the cosine distance metric.

A backend is any deterministic function mapping an aligned face image to a
feature vector; the verification model is treated strictly as a black box.
The built-in :class:`ReferenceEmbedder` produces 196-dim block-mean features
so every result in this package is reproducible without model weights.
External models attach through :class:`CommandBackend`, a file-based
subprocess protocol.
"""

import os
import shlex
import subprocess
import tempfile
from abc import ABC, abstractmethod

import numpy as np

from .errors import BackendError, DegenerateImageError, InvalidParameterError, XVerifyError
from .imaging import to_grayscale, write_png
from .validation import validate_feature, validate_feature_matrix, validate_image

REFERENCE_BLOCK = 8
REFERENCE_GRID = 14  # 14 x 14 blocks of 8 x 8 pixels over a 112 x 112 crop


def cosine_distance(f1, f2) -> float:
    """1 - cos(f1, f2): 0 for identical directions, 1 for orthogonal, 2 for opposite."""
    a = validate_feature(f1)
    b = validate_feature(f2)
    if a.shape != b.shape:
        raise InvalidParameterError(f"feature dimensions differ: {a.shape[0]} vs {b.shape[0]}")
    if np.array_equal(a, b):
        # Exact for identical inputs, so self-comparisons carry no rounding
        # noise into downstream deviation maps.
        return 0.0
    return float(1.0 - np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))


def cosine_distance_matrix(F1, F2) -> np.ndarray:
    """All pairwise cosine distances between two feature stacks, shape (N, M)."""
    A = validate_feature_matrix(F1)
    B = validate_feature_matrix(F2)
    if A.shape[1] != B.shape[1]:
        raise InvalidParameterError(f"feature dimensions differ: {A.shape[1]} vs {B.shape[1]}")
    An = A / np.linalg.norm(A, axis=1, keepdims=True)
    Bn = B / np.linalg.norm(B, axis=1, keepdims=True)
    return 1.0 - An @ Bn.T


class EmbeddingBackend(ABC):
    """Deterministic Image -> FeatureVector function with a fixed dimension."""

    name: str = "backend"
    dimension: int = 0
    #: whether concurrent embed() calls are safe; serial backends are queued
    parallel_safe: bool = False

    @abstractmethod
    def embed(self, img) -> np.ndarray:
        """Embed a single 112x112 RGB image."""

    def embed_batch(self, imgs) -> np.ndarray:
        """Embed an ordered batch, returning a (N, dimension) stack."""
        out = []
        for i, img in enumerate(imgs):
            try:
                out.append(self.embed(img))
            except XVerifyError as exc:
                raise type(exc)(f"batch item {i}: {exc}") from exc
        if not out:
            return np.empty((0, self.dimension))
        return np.stack(out)


class ReferenceEmbedder(EmbeddingBackend):
    """Deterministic 196-dim embedding: grid of 8x8 block means, centered
    and L2-normalized.

    Sensitive to local occlusions (each block contributes one coordinate)
    and fully reproducible, which is what the test and demo pipelines need.
    """

    name = "reference"
    dimension = REFERENCE_GRID * REFERENCE_GRID
    parallel_safe = True

    def block_means(self, img) -> np.ndarray:
        """Raw per-block mean luminances, before centering and normalization."""
        gray = to_grayscale(validate_image(img))
        blocks = gray.reshape(REFERENCE_GRID, REFERENCE_BLOCK, REFERENCE_GRID, REFERENCE_BLOCK)
        return blocks.mean(axis=(1, 3)).reshape(-1)

    def embed(self, img) -> np.ndarray:
        v = self.block_means(img)
        v = v - v.mean()
        norm = np.linalg.norm(v)
        if norm < 1e-12:
            raise DegenerateImageError("constant image embeds to the zero vector")
        return v / norm

    def embed_batch(self, imgs) -> np.ndarray:
        stack = np.asarray(imgs)
        if stack.ndim != 4:
            return super().embed_batch(list(imgs))
        if stack.shape[1:] != (112, 112, 3) or stack.dtype != np.uint8:
            raise InvalidParameterError(f"batch must be (N, 112, 112, 3) uint8, got {stack.shape} {stack.dtype}")
        gray = stack.astype(np.float64) @ np.array([0.299, 0.587, 0.114])
        blocks = gray.reshape(-1, REFERENCE_GRID, REFERENCE_BLOCK, REFERENCE_GRID, REFERENCE_BLOCK)
        v = blocks.mean(axis=(2, 4)).reshape(len(stack), -1)
        v = v - v.mean(axis=1, keepdims=True)
        norms = np.linalg.norm(v, axis=1)
        bad = np.nonzero(norms < 1e-12)[0]
        if bad.size:
            raise DegenerateImageError(f"batch item {bad[0]}: constant image embeds to the zero vector")
        return v / norms[:, None]


class CommandBackend(EmbeddingBackend):
    """Bridge to an external embedding model via a subprocess protocol.

    For each batch the toolkit writes the images as PNG files plus a
    manifest with one ``index<TAB>path`` line per image, then invokes the
    configured command with two extra arguments: the manifest path and an
    output path. The command must write one ``index<TAB>floats`` line per
    image (floats space-separated) and exit 0.
    """

    parallel_safe = False

    def __init__(self, command: str, name: str = "external"):
        if not command or not command.strip():
            raise InvalidParameterError("backend command must be non-empty")
        self.command = command
        self.name = name
        self.dimension = 0  # learned from the first successful batch

    def embed(self, img) -> np.ndarray:
        return self.embed_batch([img])[0]

    def embed_batch(self, imgs) -> np.ndarray:
        imgs = list(imgs)
        if not imgs:
            return np.empty((0, self.dimension))
        with tempfile.TemporaryDirectory(prefix="xverify-backend-") as tmp:
            manifest = os.path.join(tmp, "manifest.tsv")
            out_path = os.path.join(tmp, "features.tsv")
            lines = []
            for i, img in enumerate(imgs):
                png = os.path.join(tmp, f"{i:06d}.png")
                write_png(png, img)
                lines.append(f"{i}\t{png}\n")
            with open(manifest, "w", encoding="utf-8") as fh:
                fh.writelines(lines)

            argv = shlex.split(self.command) + [manifest, out_path]
            try:
                proc = subprocess.run(argv, capture_output=True, text=True)
            except OSError as exc:
                raise BackendError(f"failed to launch backend command: {exc}") from exc
            if proc.returncode != 0:
                detail = proc.stderr.strip() or proc.stdout.strip()
                raise BackendError(
                    f"backend command exited with status {proc.returncode}: {detail}"
                )
            return self._parse_output(out_path, len(imgs))

    def _parse_output(self, out_path, expected: int) -> np.ndarray:
        try:
            with open(out_path, "r", encoding="utf-8") as fh:
                raw = fh.read()
        except OSError as exc:
            raise BackendError(f"backend produced no output file: {exc}") from exc

        rows: dict[int, np.ndarray] = {}
        for lineno, line in enumerate(raw.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                idx_text, vec_text = line.split("\t", 1)
                idx = int(idx_text)
                vec = np.array([float(x) for x in vec_text.split()], dtype=np.float64)
            except ValueError as exc:
                raise BackendError(f"unparseable backend output at line {lineno}") from exc
            rows[idx] = vec

        if sorted(rows) != list(range(expected)):
            raise BackendError(
                f"backend returned indices {sorted(rows)[:5]}..., expected 0..{expected - 1}"
            )
        dims = {v.size for v in rows.values()}
        if len(dims) != 1:
            raise BackendError(f"backend returned inconsistent feature dimensions {sorted(dims)}")
        dim = dims.pop()
        if self.dimension == 0:
            self.dimension = dim
        elif dim != self.dimension:
            raise BackendError(f"backend dimension changed from {self.dimension} to {dim}")
        out = np.stack([rows[i] for i in range(expected)])
        return validate_feature_matrix(out)


def make_backend(spec: str) -> EmbeddingBackend:
    """Build a backend from a CLI-style spec: ``reference`` or ``cmd:<command>``."""
    if spec == "reference":
        return ReferenceEmbedder()
    if spec.startswith("cmd:"):
        return CommandBackend(spec[len("cmd:"):])
    raise InvalidParameterError(f"unknown backend spec {spec!r} (use 'reference' or 'cmd:<command>')")
