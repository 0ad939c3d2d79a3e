"""HTTP API over a results store, with optional live recompute.

The read side serves datasets, models, filtered/sorted/paginated pair
records, PNG artifacts, and the decision log of one store root. The write
side appends operator decisions and, when a backend is configured, runs
occlusion explanations on uploaded image pairs — synchronously for fast
in-process backends, as polled jobs for external command backends.

All errors are JSON ``{"error": <code>, "detail": <message>}`` with a
matching HTTP status.
"""

import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from tempfile import mkdtemp
from urllib.parse import urlencode

from fastapi import Body, FastAPI, File, Form, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from .confidence import ConfidenceCalibrator, c_score
from .datastore import ResultsStore
from .embedding import CommandBackend, make_backend
from .errors import (
    BackendError,
    InvalidParameterError,
    NotFoundError,
    PairsFormatError,
    StoreLockedError,
)
from .explain import Method, PairExplainContext, explain_pair_all
from .imaging import colormap_diverging, decode_png, write_png
from .occlusion import DEFAULT_PATCH_SIZES, DEFAULT_STRIDE, PatchSpec

DEFAULT_ADDR = "127.0.0.1:8000"
LOCALHOST_ORIGIN_REGEX = r"^https?://(localhost|127\.0\.0\.1)(:\d+)?$"


@dataclass
class ApiConfig:
    store_root: str
    addr: str = DEFAULT_ADDR
    confidence_path: str = None
    backend: str = None  # backend spec enabling live recompute; None disables it
    cors_origins: list = None  # explicit allow-list; default allows localhost
    static_dir: str = None  # optional built UI to serve at /
    max_workers: int = 4
    max_queue: int = 64


class JobManager:
    """Bounded in-memory job table over a thread pool.

    At most ``max_queue`` jobs may be waiting to start; submissions beyond
    that are rejected so CPU-heavy sweeps exert backpressure instead of
    accumulating unbounded latency.
    """

    def __init__(self, max_workers: int = 4, max_queue: int = 64):
        self.max_queue = max_queue
        self._pool = ThreadPoolExecutor(max_workers=max_workers)
        self._lock = threading.Lock()
        self._jobs = {}
        self._pending = 0

    def submit(self, job_id: str, fn):
        with self._lock:
            if self._pending >= self.max_queue:
                return False
            self._pending += 1
            self._jobs[job_id] = {"status": "queued"}

        def run():
            with self._lock:
                self._pending -= 1
                self._jobs[job_id]["status"] = "running"
            try:
                result = fn()
            except Exception as exc:  # job errors are data for the poller
                with self._lock:
                    self._jobs[job_id] = {"status": "failed", "error": str(exc)}
            else:
                with self._lock:
                    self._jobs[job_id] = {"status": "done", "result": result}

        self._pool.submit(run)
        return True

    def get(self, job_id: str) -> dict:
        with self._lock:
            job = self._jobs.get(job_id)
            if job is None:
                raise NotFoundError(f"no job {job_id!r}")
            return dict(job)


def _parse_int_list(text: str, name: str) -> tuple:
    try:
        values = tuple(int(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise InvalidParameterError(f"{name} must be comma-separated integers") from None
    if not values:
        raise InvalidParameterError(f"{name} must be non-empty")
    return values


def _parse_methods(text: str) -> tuple:
    return tuple(Method.parse(v) for v in str(text).split(",") if v.strip()) or (Method.III,)


def _parse_edge_blur(text: str):
    if text is None or not str(text).strip():
        return None
    parts = str(text).split(",")
    if len(parts) != 2:
        raise InvalidParameterError("edge_blur must be 'KERNEL,SIGMA'")
    try:
        return (int(parts[0]), float(parts[1]))
    except ValueError:
        raise InvalidParameterError("edge_blur must be 'KERNEL,SIGMA'") from None


def _parse_correct(value: str) -> str:
    norm = {"correct": "correct", "true": "correct", "1": "correct",
            "wrong": "wrong", "false": "wrong", "0": "wrong"}.get(str(value).lower())
    if norm is None:
        raise InvalidParameterError("correct must be one of correct, wrong, true, false")
    return norm


def _artifact_urls(record) -> dict:
    """API URLs (not store paths) for every artifact a record lists."""
    urls = {}
    for key in record.artifacts:
        parts = key.split("_")
        params = {"kind": parts[0], "which": parts[1]}
        if len(parts) == 3:
            params["method"] = parts[2]
        params.update({"dataset": record.dataset, "model": record.model})
        urls[key] = f"/api/pairs/{record.pair_id}/artifact?{urlencode(params)}"
    return urls


def _record_json(record) -> dict:
    doc = record.to_json_dict()
    doc.pop("fingerprint", None)
    doc["correct"] = record.correct
    doc["artifact_urls"] = _artifact_urls(record)
    return doc


def create_app(config: ApiConfig) -> FastAPI:
    store = ResultsStore(config.store_root)
    backend = make_backend(config.backend) if config.backend else None
    confidence = (ConfidenceCalibrator.load(config.confidence_path)
                  if config.confidence_path else None)
    jobs = JobManager(max_workers=config.max_workers, max_queue=config.max_queue)
    scratch_root = Path(mkdtemp(prefix="xverify-scratch-"))

    app = FastAPI(title="xverify", docs_url=None, redoc_url=None, openapi_url=None)
    app.state.store = store
    app.state.scratch_root = scratch_root

    if config.cors_origins:
        app.add_middleware(CORSMiddleware, allow_origins=list(config.cors_origins),
                           allow_methods=["*"], allow_headers=["*"])
    else:
        app.add_middleware(CORSMiddleware, allow_origin_regex=LOCALHOST_ORIGIN_REGEX,
                           allow_methods=["*"], allow_headers=["*"])

    def error_json(status: int, code: str, detail: str) -> JSONResponse:
        return JSONResponse(status_code=status, content={"error": code, "detail": detail})

    @app.exception_handler(NotFoundError)
    def _not_found(request: Request, exc: NotFoundError):
        return error_json(404, "not_found", str(exc))

    @app.exception_handler(InvalidParameterError)
    def _bad_param(request: Request, exc: InvalidParameterError):
        return error_json(400, "invalid_parameter", str(exc))

    @app.exception_handler(PairsFormatError)
    def _bad_format(request: Request, exc: PairsFormatError):
        return error_json(400, "invalid_parameter", str(exc))

    @app.exception_handler(RequestValidationError)
    def _bad_request(request: Request, exc: RequestValidationError):
        return error_json(400, "invalid_parameter", str(exc))

    @app.exception_handler(StoreLockedError)
    def _locked(request: Request, exc: StoreLockedError):
        return error_json(409, "store_locked", str(exc))

    @app.exception_handler(BackendError)
    def _backend_error(request: Request, exc: BackendError):
        return error_json(500, "backend_error", str(exc))

    # -- read API ----------------------------------------------------------

    @app.get("/api/datasets")
    def get_datasets():
        return {"datasets": store.datasets()}

    @app.get("/api/models")
    def get_models(dataset: str = None):
        return {"models": store.models(dataset)}

    @app.get("/api/pairs")
    def get_pairs(dataset: str = None, model: str = None, label: str = None,
                  prediction: str = None, correct: str = None,
                  c_min: float = None, c_max: float = None,
                  d_min: float = None, d_max: float = None,
                  sort: str = "pair_id", order: str = "asc",
                  page: int = 1, per_page: int = 50):
        correctness = _parse_correct(correct) if correct is not None else None
        items, total = store.list_results(
            dataset=dataset, model=model, label=label, prediction=prediction,
            correctness=correctness, c_min=c_min, c_max=c_max,
            d_min=d_min, d_max=d_max, sort=sort, order=order,
            page=page, per_page=per_page,
        )
        return {"items": [_record_json(r) for r in items], "total": total,
                "page": page, "per_page": per_page}

    @app.get("/api/pairs/{pair_id}")
    def get_pair(pair_id: str, dataset: str = None, model: str = None):
        return _record_json(store.read_result(pair_id, dataset, model))

    @app.get("/api/pairs/{pair_id}/artifact")
    def get_artifact(pair_id: str, kind: str, which: str, method: str = None,
                     dataset: str = None, model: str = None):
        record = store.read_result(pair_id, dataset, model)
        path = store.artifact_path(record, kind, which, method)
        return FileResponse(path, media_type="image/png")

    # -- decisions -----------------------------------------------------------

    @app.post("/api/pairs/{pair_id}/decision", status_code=201)
    def post_decision(pair_id: str, payload: dict = Body(...),
                      dataset: str = None, model: str = None):
        verdict = payload.get("verdict")
        operator = payload.get("operator")
        note = payload.get("note", "")
        if not verdict or not operator:
            raise InvalidParameterError("decision requires 'verdict' and 'operator'")
        try:
            decision = store.append_decision(pair_id, operator, verdict, note,
                                             dataset=dataset, model=model)
        except NotFoundError as exc:
            return error_json(409, "unknown_pair", str(exc))
        return decision.to_json_dict()

    @app.get("/api/pairs/{pair_id}/decisions")
    def get_decisions(pair_id: str, dataset: str = None):
        return {"decisions": [d.to_json_dict()
                              for d in store.decisions(pair_id, dataset)]}

    # -- live recompute ------------------------------------------------------

    def run_explain(job_id: str, img1, img2, methods, specs) -> dict:
        ctx = PairExplainContext.create(img1, img2, backend, specs)
        results = explain_pair_all(ctx, methods)
        scratch = scratch_root / job_id
        scratch.mkdir(parents=True, exist_ok=True)
        write_png(scratch / "source_1.png", img1)
        write_png(scratch / "source_2.png", img2)
        artifacts = {"source_1": "source_1.png", "source_2": "source_2.png"}
        for m, res in results.items():
            for which in (1, 2):
                xname = f"xmap_{which}_{m.value}.png"
                sname = f"smap_{which}_{m.value}.png"
                write_png(scratch / xname, res.blended[which - 1])
                write_png(scratch / sname, colormap_diverging(res.maps[which - 1]))
                artifacts[f"xmap_{which}_{m.value}"] = xname
                artifacts[f"smap_{which}_{m.value}"] = sname

        threshold = prediction = c_val = None
        if confidence is not None:
            t, params = confidence.entry()
            c_raw, pred = c_score(ctx.d_orig, t, params)
            threshold, prediction, c_val = float(t), str(pred), float(c_raw)
        return {
            "job_id": job_id,
            "d_orig": ctx.d_orig,
            "methods": [m.value for m in methods],
            "parameters": [s.to_dict() for s in specs],
            "threshold": threshold,
            "prediction": prediction,
            "c_score": c_val,
            "artifacts": {k: f"/api/scratch/{job_id}/{v}" for k, v in artifacts.items()},
        }

    @app.post("/api/explain")
    def post_explain(img1: UploadFile = File(...), img2: UploadFile = File(...),
                     method: str = Form("III"), patch_sizes: str = Form(None),
                     stride: int = Form(DEFAULT_STRIDE), fill: str = Form("black"),
                     shape: str = Form("rect"), edge_blur: str = Form(None),
                     seed: int = Form(0), mode: str = Form("auto")):
        if backend is None:
            return error_json(503, "no_backend",
                              "live recompute requires the service to be started with a backend")
        methods = _parse_methods(method)
        sizes = (_parse_int_list(patch_sizes, "patch_sizes")
                 if patch_sizes else DEFAULT_PATCH_SIZES)
        specs = tuple(PatchSpec(size=p, stride=stride, shape=shape, fill=fill,
                                edge_blur=_parse_edge_blur(edge_blur), noise_seed=seed)
                      for p in sizes)
        try:
            a = decode_png(img1.file.read())
            b = decode_png(img2.file.read())
        except OSError as exc:  # undecodable upload is a client error, not a crash
            raise InvalidParameterError(f"upload is not a decodable PNG: {exc}") from None

        if mode not in ("auto", "sync", "async"):
            raise InvalidParameterError("mode must be auto, sync, or async")
        # External command backends pay subprocess startup per batch; treat
        # them as slow and hand back a polled job instead of blocking.
        go_async = mode == "async" or (mode == "auto" and isinstance(backend, CommandBackend))
        job_id = uuid.uuid4().hex

        if not go_async:
            return run_explain(job_id, a, b, methods, specs)
        accepted = jobs.submit(job_id, lambda: run_explain(job_id, a, b, methods, specs))
        if not accepted:
            return error_json(429, "queue_full",
                              f"job queue is full ({jobs.max_queue} waiting)")
        return JSONResponse(status_code=202, content={"job_id": job_id, "status": "queued"})

    @app.get("/api/jobs/{job_id}")
    def get_job(job_id: str):
        return jobs.get(job_id)

    @app.get("/api/scratch/{job_id}/{name}")
    def get_scratch(job_id: str, name: str):
        if "/" in name or ".." in name or ".." in job_id or "/" in job_id:
            raise InvalidParameterError("invalid scratch path")
        path = scratch_root / job_id / name
        if not path.is_file():
            raise NotFoundError(f"no scratch artifact {job_id}/{name}")
        return FileResponse(path, media_type="image/png")

    if config.static_dir:
        app.mount("/", StaticFiles(directory=config.static_dir, html=True), name="ui")

    return app


def parse_addr(addr: str) -> tuple:
    """'HOST:PORT' -> (host, port)."""
    host, sep, port = addr.rpartition(":")
    if not sep or not host:
        raise InvalidParameterError(f"address must be HOST:PORT, got {addr!r}")
    try:
        return host, int(port)
    except ValueError:
        raise InvalidParameterError(f"port must be an integer, got {port!r}") from None
