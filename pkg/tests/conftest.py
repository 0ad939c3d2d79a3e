"""Shared fixtures: synthetic faces, pairs files, a prebuilt 60-pair store,
and a terminal summary that prints one line per end-to-end gate test."""

import time

import numpy as np
import pytest

from xverify import load_pairs, run_batch, write_png

# ---------------------------------------------------------------------------
# synthetic data


def synth_face(ident: int, variant: int = 0, noise: float = 25.0) -> np.ndarray:
    """A deterministic face-like 112x112 image.

    ``ident`` picks the coarse block structure (the "identity"); ``variant``
    reseeds only the additive pixel noise, so two variants of one ident look
    like two captures of the same subject.
    """
    r = np.random.default_rng(1_000_003 * ident + 17)
    base = r.integers(40, 216, (14, 14, 3)).astype(np.float64)
    img = np.kron(base, np.ones((8, 8, 1)))
    rv = np.random.default_rng(7_777_777 * ident + 101 * variant + 29)
    img = img + rv.normal(0.0, noise, (112, 112, 3))
    return np.clip(img, 0, 255).astype(np.uint8)


def write_pairs_csv(root, rows, name="pairs.csv"):
    path = root / name
    lines = ["pair_id,path1,path2,label,fold"] + rows
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def build_pair_images(root, n_folds=10, per_fold_genuine=3, per_fold_imposter=3):
    """Write images + a pairs CSV under ``root``; returns the CSV path."""
    imgdir = root / "imgs"
    imgdir.mkdir(parents=True, exist_ok=True)
    rows = []
    ident = 0
    for fold in range(n_folds):
        for _ in range(per_fold_genuine):
            a, b = synth_face(ident, 0), synth_face(ident, 1)
            write_png(imgdir / f"g{ident}_a.png", a)
            write_png(imgdir / f"g{ident}_b.png", b)
            rows.append(f"g{ident:03d},imgs/g{ident}_a.png,imgs/g{ident}_b.png,genuine,{fold}")
            ident += 1
        for _ in range(per_fold_imposter):
            a, b = synth_face(ident, 0), synth_face(10_000 + ident, 0)
            write_png(imgdir / f"i{ident}_a.png", a)
            write_png(imgdir / f"i{ident}_b.png", b)
            rows.append(f"i{ident:03d},imgs/i{ident}_a.png,imgs/i{ident}_b.png,imposter,{fold}")
            ident += 1
    return write_pairs_csv(root, rows)


@pytest.fixture
def face():
    return synth_face


@pytest.fixture
def rng():
    return np.random.default_rng(20260825)


class StoreBundle:
    def __init__(self, root, pairs_path, pairs, store, dataset, model,
                 build_seconds=0.0):
        self.root = root
        self.pairs_path = pairs_path
        self.pairs = pairs
        self.store = store
        self.dataset = dataset
        self.model = model
        self.build_seconds = build_seconds


@pytest.fixture(scope="session")
def sixty_pair_store(tmp_path_factory):
    """A complete 60-pair store (all three methods), built once per session."""
    base = tmp_path_factory.mktemp("store60")
    pairs_path = build_pair_images(base)
    pairs = load_pairs(pairs_path)
    assert len(pairs) == 60
    out_root = base / "store"
    t0 = time.perf_counter()
    store = run_batch(pairs, "reference", methods=["I", "II", "III"], out_root=out_root)
    return StoreBundle(out_root, pairs_path, pairs, store, "pairs", "reference",
                       build_seconds=time.perf_counter() - t0)


@pytest.fixture(scope="session")
def small_store(tmp_path_factory):
    """A 12-pair single-method store for cheap service/datastore tests."""
    base = tmp_path_factory.mktemp("store12")
    pairs_path = build_pair_images(base, n_folds=2, per_fold_genuine=3, per_fold_imposter=3)
    pairs = load_pairs(pairs_path)
    out_root = base / "store"
    store = run_batch(pairs, "reference", methods=["III"], out_root=out_root)
    return StoreBundle(out_root, pairs_path, pairs, store, "pairs", "reference")


# ---------------------------------------------------------------------------
# end-to-end gate reporting

GATE_FILE = "test_acceptance.py"
_gate_results = {}


def pytest_runtest_logreport(report):
    if GATE_FILE not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _gate_results[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _gate_results:
        return
    terminalreporter.section("end-to-end gates")
    for nodeid in sorted(_gate_results):
        name = nodeid.split("::")[-1]
        label = name
        if name.startswith("test_a") and name[6:8].isdigit():
            label = f"[{int(name[6:8])}] " + name[9:].replace("_", " ")
        outcome = _gate_results[nodeid].upper()
        marker = {"PASSED": "PASS", "FAILED": "FAIL", "SKIPPED": "SKIP"}.get(outcome, outcome)
        terminalreporter.write_line(f"{marker:4s}  {label}")
