"""Pairs ingestion, the batch pipeline, and the on-disk results store.

A store lives under one root directory::

    <root>/<dataset>/<model>/index.jsonl          one record per pair
    <root>/<dataset>/<model>/<pair_id>/meta.json  the same record, pretty
    <root>/<dataset>/<model>/<pair_id>/*.png      artifacts
    <root>/decisions.jsonl                        operator decision log

The index is replaced atomically (temp file + rename) so readers never see
a truncated file, and one lock file per (dataset, model) keeps concurrent
batch writers out. Re-running a batch with identical inputs reuses the
existing records byte-for-byte, including their timestamps.
"""

import csv
import hashlib
import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .confidence import GENUINE, IMPOSTER, ConfidenceCalibrator, c_score
from .embedding import EmbeddingBackend, cosine_distance, make_backend
from .errors import (
    InvalidParameterError,
    NotFoundError,
    PairsFormatError,
    StoreLockedError,
    XVerifyError,
)
from .explain import METHODS, Method, PairExplainContext, default_specs, explain_pair_all
from .imaging import colormap_diverging, read_png, write_png
from .occlusion import PatchSpec

UNKNOWN = "unknown"
LABELS = (GENUINE, IMPOSTER, UNKNOWN)
VERDICTS = (GENUINE, IMPOSTER, "unsure")
PAIRS_FIELDS = ["pair_id", "path1", "path2", "label", "fold"]

INDEX_NAME = "index.jsonl"
DECISIONS_NAME = "decisions.jsonl"
LOCK_NAME = ".lock"


def utc_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


# ---------------------------------------------------------------------------
# pairs files


@dataclass
class PairRecord:
    pair_id: str
    path1: str
    path2: str
    label: str  # genuine | imposter | unknown
    fold: int
    dataset: str


def load_pairs(path, dataset: str = None, allow_unknown: bool = True) -> list:
    """Parse a pairs CSV (``pair_id,path1,path2,label,fold``).

    Relative image paths are resolved against the CSV's directory. The
    dataset name defaults to the file's stem. Missing image files are not
    checked here; they surface as failed records at batch time.
    """
    path = Path(path)
    if dataset is None:
        dataset = path.stem
    base = path.parent
    records = []
    seen = set()
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PairsFormatError("empty pairs file") from None
        if [h.strip() for h in header] != PAIRS_FIELDS:
            raise PairsFormatError(
                f"expected header {','.join(PAIRS_FIELDS)!r}, got {','.join(header)!r}", line=1
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(PAIRS_FIELDS):
                raise PairsFormatError(
                    f"expected {len(PAIRS_FIELDS)} fields, got {len(row)}", line=lineno
                )
            pair_id, p1, p2, label, fold_s = (v.strip() for v in row)
            if not pair_id:
                raise PairsFormatError("empty pair_id", line=lineno)
            if pair_id in seen:
                raise PairsFormatError(f"duplicate pair_id {pair_id!r}", line=lineno)
            if label not in LABELS:
                raise PairsFormatError(
                    f"label must be one of {', '.join(LABELS)}; got {label!r}", line=lineno
                )
            if label == UNKNOWN and not allow_unknown:
                raise PairsFormatError(
                    "label 'unknown' is only allowed in field-data mode", line=lineno
                )
            try:
                fold = int(fold_s)
            except ValueError:
                raise PairsFormatError(f"fold must be an integer, got {fold_s!r}", line=lineno) from None
            if not 0 <= fold <= 9:
                raise PairsFormatError("fold out of range [0,9]", line=lineno)
            seen.add(pair_id)
            records.append(PairRecord(
                pair_id=pair_id,
                path1=str(p1 if os.path.isabs(p1) else base / p1),
                path2=str(p2 if os.path.isabs(p2) else base / p2),
                label=label,
                fold=fold,
                dataset=dataset,
            ))
    return records


# ---------------------------------------------------------------------------
# result + decision records

RESULT_KEYS = [
    "pair_id", "dataset", "model", "label", "fold", "path1", "path2",
    "status", "error", "d_orig", "threshold", "prediction", "c_score",
    "methods", "parameters", "artifacts", "image_quality", "created_at",
    "fingerprint",
]


@dataclass
class ResultRecord:
    pair_id: str
    dataset: str
    model: str
    label: str = UNKNOWN
    fold: int = -1
    path1: str = ""
    path2: str = ""
    status: str = "ok"  # ok | failed
    error: str = None
    d_orig: float = None
    threshold: float = None
    prediction: str = None
    c_score: float = None
    methods: list = field(default_factory=list)
    parameters: list = field(default_factory=list)
    artifacts: dict = field(default_factory=dict)
    image_quality: float = None  # reserved; never filled by this pipeline
    created_at: str = ""
    fingerprint: str = ""
    raw_line: str = field(default=None, repr=False, compare=False)

    def to_json_dict(self) -> dict:
        return {k: getattr(self, k) for k in RESULT_KEYS}

    def to_line(self) -> str:
        if self.raw_line is not None:
            return self.raw_line
        return json.dumps(self.to_json_dict(), separators=(",", ":"), ensure_ascii=False)

    @classmethod
    def from_json_dict(cls, d: dict, raw_line: str = None) -> "ResultRecord":
        kwargs = {k: d[k] for k in RESULT_KEYS if k in d}
        return cls(raw_line=raw_line, **kwargs)

    @property
    def correct(self):
        """True/False when both label and prediction are known, else None."""
        if self.label in (GENUINE, IMPOSTER) and self.prediction in (GENUINE, IMPOSTER):
            return self.label == self.prediction
        return None


DECISION_KEYS = ["pair_id", "dataset", "model", "operator", "verdict", "note", "created_at"]


@dataclass
class DecisionRecord:
    pair_id: str
    dataset: str
    model: str
    operator: str
    verdict: str  # genuine | imposter | unsure
    note: str = ""
    created_at: str = ""

    def to_json_dict(self) -> dict:
        return {k: getattr(self, k) for k in DECISION_KEYS}

    @classmethod
    def from_json_dict(cls, d: dict) -> "DecisionRecord":
        return cls(**{k: d.get(k) for k in DECISION_KEYS})


# ---------------------------------------------------------------------------
# store


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(f"{path.name}.tmp.{os.getpid()}")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


class ResultsStore:
    """Read/query view over a store root, plus the decision log writer."""

    def __init__(self, root):
        self.root = Path(root)
        if not self.root.is_dir():
            raise NotFoundError(f"store root {self.root} does not exist")

    # -- layout helpers ----------------------------------------------------

    def index_path(self, dataset: str, model: str) -> Path:
        return self.root / dataset / model / INDEX_NAME

    def pair_dir(self, dataset: str, model: str, pair_id: str) -> Path:
        return self.root / dataset / model / pair_id

    def _index_paths(self):
        return sorted(self.root.glob(f"*/*/{INDEX_NAME}"))

    def datasets(self) -> list:
        return sorted({p.parent.parent.name for p in self._index_paths()})

    def models(self, dataset: str = None) -> list:
        paths = self._index_paths()
        if dataset is not None:
            paths = [p for p in paths if p.parent.parent.name == dataset]
        return sorted({p.parent.name for p in paths})

    # -- records -------------------------------------------------------------

    def records(self, dataset: str = None, model: str = None) -> list:
        out = []
        for path in self._index_paths():
            ds, mdl = path.parent.parent.name, path.parent.name
            if dataset is not None and ds != dataset:
                continue
            if model is not None and mdl != model:
                continue
            with open(path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.rstrip("\n")
                    if line:
                        out.append(ResultRecord.from_json_dict(json.loads(line), raw_line=line))
        return out

    def read_result(self, pair_id: str, dataset: str = None, model: str = None) -> ResultRecord:
        hits = [r for r in self.records(dataset, model) if r.pair_id == pair_id]
        if not hits:
            raise NotFoundError(f"no result for pair {pair_id!r}")
        if len(hits) > 1:
            raise InvalidParameterError(
                f"pair {pair_id!r} is ambiguous across datasets/models; "
                "pass dataset and model"
            )
        return hits[0]

    def list_results(self, dataset: str = None, model: str = None, label: str = None,
                     prediction: str = None, correctness: str = None,
                     c_min: float = None, c_max: float = None,
                     d_min: float = None, d_max: float = None,
                     sort: str = "pair_id", order: str = "asc",
                     page: int = 1, per_page: int = 50):
        """Filtered, sorted, paginated records; returns (items, total)."""
        recs = self.records(dataset, model)
        if label is not None:
            if label not in LABELS:
                raise InvalidParameterError(f"label must be one of {', '.join(LABELS)}")
            recs = [r for r in recs if r.label == label]
        if prediction is not None:
            if prediction not in (GENUINE, IMPOSTER):
                raise InvalidParameterError("prediction must be genuine or imposter")
            recs = [r for r in recs if r.prediction == prediction]
        if correctness is not None:
            if correctness not in ("correct", "wrong"):
                raise InvalidParameterError("correctness must be 'correct' or 'wrong'")
            want = correctness == "correct"
            recs = [r for r in recs if r.correct is want]
        if c_min is not None:
            recs = [r for r in recs if r.c_score is not None and r.c_score >= c_min]
        if c_max is not None:
            recs = [r for r in recs if r.c_score is not None and r.c_score <= c_max]
        if d_min is not None:
            recs = [r for r in recs if r.d_orig is not None and r.d_orig >= d_min]
        if d_max is not None:
            recs = [r for r in recs if r.d_orig is not None and r.d_orig <= d_max]

        if sort not in ("pair_id", "distance", "c"):
            raise InvalidParameterError("sort must be one of pair_id, distance, c")
        if order not in ("asc", "desc"):
            raise InvalidParameterError("order must be 'asc' or 'desc'")

        def key(r):
            if sort == "distance":
                v = r.d_orig
            elif sort == "c":
                v = r.c_score
            else:
                v = None
            primary = (v is None, v) if sort != "pair_id" else ()
            return primary + ((r.dataset, r.model, r.pair_id),)

        recs.sort(key=key, reverse=(order == "desc"))

        total = len(recs)
        if page < 1 or per_page < 1:
            raise InvalidParameterError("page and per_page must be >= 1")
        start = (page - 1) * per_page
        return recs[start:start + per_page], total

    # -- artifacts ---------------------------------------------------------

    def artifact_path(self, record: ResultRecord, kind: str, which, method=None) -> Path:
        if kind not in ("xmap", "smap", "source"):
            raise InvalidParameterError("kind must be xmap, smap, or source")
        which = str(which)
        if which not in ("1", "2"):
            raise InvalidParameterError("which must be 1 or 2")
        if kind == "source":
            key = f"source_{which}"
        else:
            if method is None:
                raise InvalidParameterError(f"kind={kind} requires a method")
            key = f"{kind}_{which}_{Method.parse(method).value}"
        rel = record.artifacts.get(key)
        if rel is None:
            raise NotFoundError(f"pair {record.pair_id!r} has no artifact {key!r}")
        path = self.root / rel
        if not path.is_file():
            raise NotFoundError(f"artifact file missing: {rel}")
        return path

    # -- decisions -----------------------------------------------------------

    @property
    def decisions_path(self) -> Path:
        return self.root / DECISIONS_NAME

    def append_decision(self, pair_id: str, operator: str, verdict: str,
                        note: str = "", dataset: str = None, model: str = None) -> DecisionRecord:
        if verdict not in VERDICTS:
            raise InvalidParameterError(f"verdict must be one of {', '.join(VERDICTS)}")
        if not operator:
            raise InvalidParameterError("operator is required")
        record = self.read_result(pair_id, dataset, model)  # raises NotFoundError
        decision = DecisionRecord(
            pair_id=pair_id, dataset=record.dataset, model=record.model,
            operator=operator, verdict=verdict, note=note or "", created_at=utc_now(),
        )
        line = json.dumps(decision.to_json_dict(), separators=(",", ":"), ensure_ascii=False)
        with open(self.decisions_path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
        return decision

    def decisions(self, pair_id: str = None, dataset: str = None) -> list:
        if not self.decisions_path.is_file():
            return []
        out = []
        with open(self.decisions_path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = DecisionRecord.from_json_dict(json.loads(line))
                if pair_id is not None and rec.pair_id != pair_id:
                    continue
                if dataset is not None and rec.dataset != dataset:
                    continue
                out.append(rec)
        return out


# ---------------------------------------------------------------------------
# batch pipeline


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    try:
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(65536), b""):
                h.update(chunk)
    except OSError:
        return "missing"
    return h.hexdigest()


def _fingerprint(pair: PairRecord, backend_name: str, methods, specs,
                 img_hashes, model_fp: str) -> str:
    obj = {
        "pair": {
            "pair_id": pair.pair_id, "path1": pair.path1, "path2": pair.path2,
            "label": pair.label, "fold": pair.fold, "dataset": pair.dataset,
        },
        "backend": backend_name,
        "methods": [m.value for m in methods],
        "specs": [s.to_dict() for s in specs],
        "images": list(img_hashes),
        "model": model_fp,
    }
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode("utf-8")).hexdigest()


class _Lock:
    """Exclusive-create lock file released on context exit."""

    def __init__(self, path: Path):
        self.path = path

    def __enter__(self):
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise StoreLockedError(
                f"store is locked by another batch writer ({self.path})"
            ) from None
        with os.fdopen(fd, "w") as fh:
            fh.write(f"{os.getpid()}\n")
        return self

    def __exit__(self, *exc):
        try:
            os.unlink(self.path)
        except OSError:
            pass
        return False


def _fit_batch_confidence(pairs, distances, max_iter: int = 200):
    """Fold-wise calibrator from the labeled pairs, or None when the data
    cannot support a fit (all one label, too few populated bins, ...)."""
    labeled = [(d, p.label, p.fold) for p, d in zip(pairs, distances)
               if d is not None and p.label in (GENUINE, IMPOSTER)]
    if not labeled:
        return None
    d = [v[0] for v in labeled]
    y = [v[1] for v in labeled]
    f = [v[2] for v in labeled]
    cal = ConfidenceCalibrator(max_iter=max_iter)
    try:
        if len(set(f)) >= 2:
            cal.fit(d, y, folds=f)
        else:
            cal.fit(d, y)
    except XVerifyError:
        return None
    return cal


def run_batch(pairs, backend, methods=METHODS, specs=None, out_root=".",
              confidence: ConfidenceCalibrator = None, dataset: str = None,
              model_name: str = None) -> ResultsStore:
    """Explain and score every pair, writing artifacts and an index.

    A confidence model is fitted fold-wise from the labeled pairs unless one
    is passed in. Per-pair failures (unreadable image, backend error) become
    failed records; the batch continues. Re-running with identical inputs
    reuses existing records unchanged.
    """
    pairs = list(pairs)
    if isinstance(backend, str):
        backend = make_backend(backend)
    if not isinstance(backend, EmbeddingBackend):
        raise InvalidParameterError("backend must be an EmbeddingBackend or a spec string")
    methods = tuple(m for m in METHODS if m in {Method.parse(x) for x in methods})
    if not methods:
        raise InvalidParameterError("at least one method is required")
    specs = default_specs() if specs is None else tuple(specs)
    if not specs:
        raise InvalidParameterError("at least one patch spec is required")

    datasets = {p.dataset for p in pairs}
    if len(datasets) > 1:
        raise InvalidParameterError(f"one batch handles one dataset, got {sorted(datasets)}")
    if dataset is None:
        dataset = datasets.pop() if datasets else "default"
    model = model_name or backend.name

    out_root = Path(out_root)
    store_dir = out_root / dataset / model
    store_dir.mkdir(parents=True, exist_ok=True)

    with _Lock(store_dir / LOCK_NAME):
        # previous index, for idempotent reuse
        existing = {}
        index_path = store_dir / INDEX_NAME
        if index_path.is_file():
            with open(index_path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.rstrip("\n")
                    if line:
                        rec = ResultRecord.from_json_dict(json.loads(line), raw_line=line)
                        existing[rec.pair_id] = rec

        # first pass: images, original embeddings, pair distances
        feat_cache = {}
        images = {}

        def load_and_embed(path):
            if path not in feat_cache:
                img = read_png(path)
                images[path] = img
                feat_cache[path] = backend.embed(img)
            return images[path], feat_cache[path]

        prepared = []  # (pair, img1, img2, f1, f2, d, hashes) or (pair, error, hashes)
        distances = []
        for pair in pairs:
            hashes = (_sha256_file(pair.path1), _sha256_file(pair.path2))
            try:
                img1, f1 = load_and_embed(pair.path1)
                img2, f2 = load_and_embed(pair.path2)
                d = float(cosine_distance(f1, f2))
                prepared.append((pair, (img1, img2, f1, f2, d), hashes))
                distances.append(d)
            except (OSError, XVerifyError) as exc:
                prepared.append((pair, exc, hashes))
                distances.append(None)

        calibrator = confidence if confidence is not None else _fit_batch_confidence(pairs, distances)
        model_fp = "none"
        if calibrator is not None:
            model_fp = hashlib.sha256(calibrator.to_text().encode("utf-8")).hexdigest()

        records = []
        for pair, payload, hashes in prepared:
            fp = _fingerprint(pair, backend.name, methods, specs, hashes, model_fp)
            prior = existing.get(pair.pair_id)
            if prior is not None and prior.fingerprint == fp:
                records.append(prior)
                continue
            if isinstance(payload, Exception):
                records.append(ResultRecord(
                    pair_id=pair.pair_id, dataset=dataset, model=model,
                    label=pair.label, fold=pair.fold, path1=pair.path1, path2=pair.path2,
                    status="failed", error=str(payload),
                    methods=[m.value for m in methods],
                    parameters=[s.to_dict() for s in specs],
                    created_at=utc_now(), fingerprint=fp,
                ))
                continue
            img1, img2, f1, f2, d = payload
            try:
                records.append(_explain_and_write(
                    pair, img1, img2, f1, f2, d, backend, methods, specs,
                    calibrator, out_root, store_dir, dataset, model, fp,
                ))
            except (OSError, XVerifyError) as exc:
                records.append(ResultRecord(
                    pair_id=pair.pair_id, dataset=dataset, model=model,
                    label=pair.label, fold=pair.fold, path1=pair.path1, path2=pair.path2,
                    status="failed", error=str(exc), d_orig=d,
                    methods=[m.value for m in methods],
                    parameters=[s.to_dict() for s in specs],
                    created_at=utc_now(), fingerprint=fp,
                ))

        _atomic_write_text(index_path, "".join(r.to_line() + "\n" for r in records))

    return ResultsStore(out_root)


def _explain_and_write(pair, img1, img2, f1, f2, d, backend, methods, specs,
                       calibrator, out_root, store_dir, dataset, model, fp) -> ResultRecord:
    ctx = PairExplainContext(img1=img1, img2=img2, backend=backend,
                             f1=f1, f2=f2, d_orig=d, specs=specs)
    results = explain_pair_all(ctx, methods)

    pair_dir = store_dir / pair.pair_id
    pair_dir.mkdir(parents=True, exist_ok=True)

    def rel(name):
        return (pair_dir / name).relative_to(out_root).as_posix()

    artifacts = {}
    write_png(pair_dir / "source_1.png", img1)
    write_png(pair_dir / "source_2.png", img2)
    artifacts["source_1"] = rel("source_1.png")
    artifacts["source_2"] = rel("source_2.png")
    for m, res in results.items():
        for which in (1, 2):
            xname = f"xmap_{which}_{m.value}.png"
            sname = f"smap_{which}_{m.value}.png"
            write_png(pair_dir / xname, res.blended[which - 1])
            write_png(pair_dir / sname, colormap_diverging(res.maps[which - 1]))
            artifacts[f"xmap_{which}_{m.value}"] = rel(xname)
            artifacts[f"smap_{which}_{m.value}"] = rel(sname)

    threshold = prediction = c = None
    if calibrator is not None:
        fold = pair.fold if pair.fold in set(int(v) for v in calibrator.fold_ids_) else None
        t, params = calibrator.entry(fold)
        c_val, pred = c_score(d, t, params)
        threshold, prediction, c = float(t), str(pred), float(c_val)

    record = ResultRecord(
        pair_id=pair.pair_id, dataset=dataset, model=model,
        label=pair.label, fold=pair.fold, path1=pair.path1, path2=pair.path2,
        status="ok", error=None, d_orig=d, threshold=threshold,
        prediction=prediction, c_score=c,
        methods=[m.value for m in methods],
        parameters=[s.to_dict() for s in specs],
        artifacts=artifacts, created_at=utc_now(), fingerprint=fp,
    )
    with open(pair_dir / "meta.json", "w", encoding="utf-8") as fh:
        json.dump(record.to_json_dict(), fh, indent=2, ensure_ascii=False)
        fh.write("\n")
    return record
