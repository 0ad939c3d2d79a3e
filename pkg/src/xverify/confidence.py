"""Verification confidence: cross-validated thresholds, genuine-fraction
histograms, logistic-curve fitting, and the resulting correctness score.

The pipeline mirrors the standard 10-fold pairs protocol: per fold, a
distance threshold is chosen by maximizing accuracy on the other folds,
a 400-bin histogram of the training distances yields the per-bin fraction
of genuine pairs, and a logistic curve

    c(d) = L / (1 + exp(-k * (d - d0))) + b

is fitted to those fractions by bounded least squares. The score of a
decision at distance d is then c(d) clipped to [0, 1] on the genuine side
of the threshold and 1 - c(d) on the imposter side, read as a probability
that the decision is correct.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .errors import (
    DegenerateSplitError,
    InsufficientDataError,
    InvalidParameterError,
    PairsFormatError,
)
from .leastsq import least_squares_dogbox

GENUINE = "genuine"
IMPOSTER = "imposter"

N_BINS = 400
BIN_RANGE = (0.0, 2.0)

# Fit box: amplitude and midpoint within the distance range, steepness of
# either sign, small offset.
SIGMOID_LOWER = np.array([0.0, 0.0, -500.0, -1.0])
SIGMOID_UPPER = np.array([2.0, 2.0, 500.0, 1.0])


@dataclass(frozen=True)
class SigmoidParams:
    """Parameters of the logistic curve c(d) = L / (1 + e^{-k (d - d0)}) + b."""

    L: float
    d0: float
    k: float
    b: float

    def evaluate(self, d):
        d = np.asarray(d, dtype=np.float64)
        return self.L * expit(self.k * (d - self.d0)) + self.b

    def as_array(self) -> np.ndarray:
        return np.array([self.L, self.d0, self.k, self.b])


@dataclass
class RatioHistogram:
    """Per-bin genuine/imposter counts over the distance range.

    ``ratios`` holds genuine / (genuine + imposter) for non-empty bins and
    NaN for empty ones; empty bins are excluded from fitting.
    """

    edges: np.ndarray  # (n_bins + 1,)
    genuine_counts: np.ndarray  # (n_bins,) int
    imposter_counts: np.ndarray  # (n_bins,) int

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def totals(self) -> np.ndarray:
        return self.genuine_counts + self.imposter_counts

    @property
    def nonempty(self) -> np.ndarray:
        return self.totals > 0

    @property
    def ratios(self) -> np.ndarray:
        totals = self.totals
        out = np.full(totals.shape, np.nan)
        mask = totals > 0
        out[mask] = self.genuine_counts[mask] / totals[mask]
        return out


def _as_genuine_mask(labels) -> np.ndarray:
    """Coerce labels ('genuine'/'imposter', bools, or 0/1) to a boolean mask."""
    arr = np.asarray(labels)
    if arr.dtype.kind in ("U", "S", "O"):
        vals = np.asarray([str(v) for v in arr])
        bad = ~np.isin(vals, (GENUINE, IMPOSTER))
        if bad.any():
            raise InvalidParameterError(f"unknown label {vals[bad][0]!r}")
        return vals == GENUINE
    return arr.astype(bool)


def ratio_histogram(distances, labels, n_bins: int = N_BINS, d_range=BIN_RANGE) -> RatioHistogram:
    """Histogram genuine and imposter distances on a shared uniform grid."""
    d = np.asarray(distances, dtype=np.float64)
    if d.size == 0:
        raise InsufficientDataError("no distance samples to histogram")
    genuine = _as_genuine_mask(labels)
    if genuine.shape != d.shape:
        raise InvalidParameterError("distances and labels must have equal length")
    edges = np.linspace(d_range[0], d_range[1], n_bins + 1)
    g_counts, _ = np.histogram(d[genuine], bins=edges)
    i_counts, _ = np.histogram(d[~genuine], bins=edges)
    return RatioHistogram(edges=edges, genuine_counts=g_counts, imposter_counts=i_counts)


def candidate_thresholds(distances) -> np.ndarray:
    """Candidate cutoffs: midpoints between consecutive unique distances,
    plus one sentinel classifying everything imposter and one classifying
    everything genuine.

    Sentinels are the midpoints toward the distance-range edges so they
    stay inside [0, 2] whenever the data allows it.
    """
    u = np.unique(np.asarray(distances, dtype=np.float64))
    if u.size == 0:
        raise InsufficientDataError("no distances to derive thresholds from")
    low = 0.5 * u[0] if u[0] > 0 else u[0] - 1e-3
    high = 0.5 * (u[-1] + BIN_RANGE[1])
    mids = 0.5 * (u[:-1] + u[1:])
    return np.concatenate([[low], mids, [high]])


def threshold_accuracy(distances, labels, thresholds) -> np.ndarray:
    """Verification accuracy of ``d <= t -> genuine`` for each candidate t."""
    d = np.asarray(distances, dtype=np.float64)
    genuine = _as_genuine_mask(labels)
    t = np.atleast_1d(np.asarray(thresholds, dtype=np.float64))
    order = np.argsort(d, kind="stable")
    d_sorted = d[order]
    g_sorted = genuine[order]
    cum_genuine = np.concatenate([[0], np.cumsum(g_sorted)])
    cum_imposter = np.concatenate([[0], np.cumsum(~g_sorted)])
    idx = np.searchsorted(d_sorted, t, side="right")
    total_imposter = cum_imposter[-1]
    correct = cum_genuine[idx] + (total_imposter - cum_imposter[idx])
    return correct / d.size


def best_threshold(distances, labels):
    """The accuracy-maximizing candidate threshold (ties -> smallest)."""
    genuine = _as_genuine_mask(labels)
    if genuine.all() or (~genuine).all():
        raise DegenerateSplitError("training split contains a single label")
    cands = candidate_thresholds(distances)
    acc = threshold_accuracy(distances, labels, cands)
    i = int(np.argmax(acc))  # argmax returns the first (smallest) maximizer
    return float(cands[i]), float(acc[i])


def compute_thresholds_cv(distances, labels, folds):
    """Per-fold thresholds: each fold's cutoff maximizes accuracy on the
    remaining folds.

    Returns ``{fold: (threshold, training_accuracy)}``.
    """
    d = np.asarray(distances, dtype=np.float64)
    f = np.asarray(folds)
    if d.shape != f.shape:
        raise InvalidParameterError("distances and folds must have equal length")
    fold_ids = np.unique(f)
    if fold_ids.size < 2:
        raise DegenerateSplitError("cross-validation needs at least two folds")
    genuine = _as_genuine_mask(labels)
    out = {}
    for fold in fold_ids:
        train = f != fold
        if not train.any():
            raise DegenerateSplitError(f"fold {fold}: empty training split")
        try:
            out[int(fold)] = best_threshold(d[train], genuine[train])
        except DegenerateSplitError as exc:
            raise DegenerateSplitError(f"fold {fold}: {exc}") from exc
    return out


def _sigmoid_residual(x, d, y):
    L, d0, k, b = x
    return L * expit(k * (d - d0)) + b - y


def _sigmoid_jacobian(x, d, y):
    L, d0, k, b = x
    sig = expit(k * (d - d0))
    core = sig * (1.0 - sig)
    J = np.empty((d.size, 4))
    J[:, 0] = sig
    J[:, 1] = -L * k * core
    J[:, 2] = L * (d - d0) * core
    J[:, 3] = 1.0
    return J


def fit_sigmoid_points(centers, ratios, t: float, max_iter: int = 200):
    """Fit the logistic curve to (distance, genuine-fraction) points.

    Initialization places the midpoint at the threshold with a steep
    decreasing slope. Returns a :class:`~xverify.leastsq.LeastSquaresResult`
    whose ``x`` is (L, d0, k, b).
    """
    d = np.asarray(centers, dtype=np.float64)
    y = np.asarray(ratios, dtype=np.float64)
    if d.shape != y.shape or d.ndim != 1:
        raise InvalidParameterError("centers and ratios must be equal-length 1-D sequences")
    if d.size < 4:
        raise InsufficientDataError(f"sigmoid fit needs >= 4 points, got {d.size}")
    x0 = np.array([1.0, float(t), -50.0, 0.0])
    return least_squares_dogbox(
        lambda x: _sigmoid_residual(x, d, y),
        lambda x: _sigmoid_jacobian(x, d, y),
        x0,
        SIGMOID_LOWER,
        SIGMOID_UPPER,
        max_iter=max_iter,
    )


def fit_sigmoid(hist: RatioHistogram, t: float, max_iter: int = 200):
    """Fit the logistic curve to the non-empty histogram bins."""
    mask = hist.nonempty
    n_used = int(mask.sum())
    if n_used < 4:
        raise InsufficientDataError(f"sigmoid fit needs >= 4 non-empty bins, got {n_used}")
    return fit_sigmoid_points(hist.centers[mask], hist.ratios[mask], t, max_iter=max_iter)


def c_score(d, t: float, params: SigmoidParams):
    """Correctness score and predicted label for distance(s) d.

    The raw curve value is clipped to [0, 1]; below or at the threshold the
    score is c(d) with label genuine, above it 1 - c(d) with label imposter.
    """
    d = np.asarray(d, dtype=np.float64)
    c = np.clip(params.evaluate(d), 0.0, 1.0)
    genuine = d <= t
    score = np.where(genuine, c, 1.0 - c)
    labels = np.where(genuine, GENUINE, IMPOSTER)
    if score.ndim == 0:
        return float(score), str(labels)
    return score, labels


FORMAT_HEADER = "xverify-confidence v1"


class ConfidenceCalibrator(BaseEstimator):
    """Fold-wise threshold + logistic-curve confidence model.

    With ``folds`` given to :meth:`fit`, one entry is fitted per fold on
    the remaining folds' samples (the pairs-protocol convention). Without
    folds, a single pooled entry is fitted, the mode used when the model is
    derived once from a labeled validation set and then applied to
    unlabeled field pairs.
    """

    def __init__(self, n_bins: int = N_BINS, bin_range=BIN_RANGE, max_iter: int = 200):
        self.n_bins = n_bins
        self.bin_range = bin_range
        self.max_iter = max_iter

    # -- fitting ---------------------------------------------------------

    def fit(self, distances, labels, folds=None):
        d = np.asarray(distances, dtype=np.float64)
        genuine = _as_genuine_mask(labels)
        if d.shape != genuine.shape:
            raise InvalidParameterError("distances and labels must have equal length")

        entries = []
        if folds is None:
            t, acc = best_threshold(d, genuine)
            res = self._fit_fold(d, genuine, t)
            entries.append((-1, t, acc, res))
        else:
            f = np.asarray(folds)
            thresholds = compute_thresholds_cv(d, genuine, f)
            for fold, (t, acc) in sorted(thresholds.items()):
                train = f != fold
                res = self._fit_fold(d[train], genuine[train], t)
                entries.append((fold, t, acc, res))

        self.fold_ids_ = np.array([e[0] for e in entries])
        self.thresholds_ = np.array([e[1] for e in entries])
        self.train_accuracies_ = np.array([e[2] for e in entries])
        self.params_ = [SigmoidParams(*e[3].x) for e in entries]
        self.residuals_ = np.array([e[3].residual for e in entries])
        self.converged_ = np.array([e[3].converged for e in entries])
        return self

    def _fit_fold(self, d, genuine, t):
        hist = ratio_histogram(d, genuine, n_bins=self.n_bins, d_range=self.bin_range)
        return fit_sigmoid(hist, t, max_iter=self.max_iter)

    # -- scoring ---------------------------------------------------------

    def _check_fitted(self):
        if not hasattr(self, "thresholds_"):
            raise NotFittedError("ConfidenceCalibrator is not fitted")

    def entry(self, fold=None):
        """(threshold, params) for a fold; None selects the aggregate entry."""
        self._check_fitted()
        if fold is not None:
            hit = np.nonzero(self.fold_ids_ == fold)[0]
            if hit.size:
                i = int(hit[0])
                return float(self.thresholds_[i]), self.params_[i]
        if len(self.params_) == 1:
            return float(self.thresholds_[0]), self.params_[0]
        # element-wise mean of the fold entries, for foldless field data
        mean = np.mean([p.as_array() for p in self.params_], axis=0)
        return float(self.thresholds_.mean()), SigmoidParams(*mean)

    def score_pairs(self, distances, folds=None):
        """Per-sample (confidence, predicted label) arrays."""
        d = np.atleast_1d(np.asarray(distances, dtype=np.float64))
        if folds is None:
            fold_seq = [None] * d.size
        else:
            fold_seq = list(np.atleast_1d(np.asarray(folds)))
            if len(fold_seq) != d.size:
                raise InvalidParameterError("distances and folds must have equal length")
        scores = np.empty(d.size)
        labels = np.empty(d.size, dtype=object)
        for i, (di, fi) in enumerate(zip(d, fold_seq)):
            t, params = self.entry(None if fi is None else int(fi))
            scores[i], labels[i] = c_score(float(di), t, params)
        return scores, labels.astype(str)

    def confidence(self, distances, folds=None) -> np.ndarray:
        return self.score_pairs(distances, folds)[0]

    def predict(self, distances, folds=None) -> np.ndarray:
        return self.score_pairs(distances, folds)[1]

    # -- serialization ---------------------------------------------------

    def to_text(self) -> str:
        """The fitted model as a versioned text document."""
        self._check_fitted()
        lines = [FORMAT_HEADER]
        for i, fold in enumerate(self.fold_ids_):
            p = self.params_[i]
            fields = [self.thresholds_[i], p.L, p.d0, p.k, p.b, self.residuals_[i]]
            lines.append(f"{int(fold)} " + " ".join(repr(float(v)) for v in fields))
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path) -> "ConfidenceCalibrator":
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
        if not lines or lines[0] != FORMAT_HEADER:
            raise PairsFormatError(f"not a confidence model file (expected '{FORMAT_HEADER}' header)")
        model = cls()
        fold_ids, thresholds, params, residuals = [], [], [], []
        for lineno, line in enumerate(lines[1:], start=2):
            parts = line.split()
            if len(parts) != 7:
                raise PairsFormatError("expected 'fold t L d0 k b residual'", line=lineno)
            try:
                fold_ids.append(int(parts[0]))
                vals = [float(v) for v in parts[1:]]
            except ValueError as exc:
                raise PairsFormatError(f"unparseable number: {exc}", line=lineno) from exc
            thresholds.append(vals[0])
            params.append(SigmoidParams(*vals[1:5]))
            residuals.append(vals[5])
        if not params:
            raise PairsFormatError("confidence model has no fold records")
        model.fold_ids_ = np.array(fold_ids)
        model.thresholds_ = np.array(thresholds)
        model.train_accuracies_ = np.full(len(params), np.nan)
        model.params_ = params
        model.residuals_ = np.array(residuals)
        model.converged_ = np.full(len(params), True)
        return model
