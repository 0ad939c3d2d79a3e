"""Command-line entry points: fit, explain, batch, serve.

Exit codes: 0 success, 1 usage error, 2 data error (unreadable or
malformed inputs), 3 backend error.
"""

import json
import sys
from pathlib import Path

import click

from .confidence import GENUINE, IMPOSTER, ConfidenceCalibrator, c_score
from .datastore import load_pairs, run_batch
from .embedding import cosine_distance, make_backend
from .errors import BackendError, InsufficientDataError, XVerifyError
from .explain import Method, PairExplainContext, explain_pair
from .imaging import colormap_diverging, read_png, write_png
from .occlusion import DEFAULT_PATCH_SIZES, DEFAULT_STRIDE, PatchSpec


def _parse_sizes(_ctx, _param, value) -> tuple:
    try:
        sizes = tuple(int(v) for v in value.split(",") if v.strip())
    except ValueError:
        raise click.BadParameter("expected comma-separated integers") from None
    if not sizes:
        raise click.BadParameter("expected at least one patch size")
    return sizes


def _parse_edge_blur(_ctx, _param, value):
    if value is None:
        return None
    parts = value.split(",")
    try:
        if len(parts) != 2:
            raise ValueError
        return (int(parts[0]), float(parts[1]))
    except ValueError:
        raise click.BadParameter("expected KERNEL,SIGMA") from None


def _parse_methods(_ctx, _param, value) -> tuple:
    try:
        return tuple(Method.parse(v) for v in value.split(",") if v.strip())
    except XVerifyError as exc:
        raise click.BadParameter(str(exc)) from None


def _build_specs(patch_sizes, stride, fill, shape, edge_blur, seed) -> tuple:
    return tuple(
        PatchSpec(size=p, stride=stride, shape=shape, fill=fill,
                  edge_blur=edge_blur, noise_seed=seed)
        for p in patch_sizes
    )


@click.group()
def cli():
    """Explainable face verification: occlusion maps and confidence scores."""


@cli.command()
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--backend", "backend_spec", default="reference", show_default=True,
              help="'reference' or 'cmd:<command>' for an external embedder.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def fit(pairs_path, backend_spec, out_path):
    """Fit a confidence model from a labeled pairs file."""
    pairs = load_pairs(pairs_path)
    labeled = [p for p in pairs if p.label in (GENUINE, IMPOSTER)]
    if not labeled:
        raise InsufficientDataError("no labeled pairs to fit from")
    backend = make_backend(backend_spec)

    cache = {}

    def feat(path):
        if path not in cache:
            cache[path] = backend.embed(read_png(path))
        return cache[path]

    distances = [float(cosine_distance(feat(p.path1), feat(p.path2))) for p in labeled]
    labels = [p.label for p in labeled]
    folds = [p.fold for p in labeled]

    cal = ConfidenceCalibrator()
    if len(set(folds)) >= 2:
        cal.fit(distances, labels, folds=folds)
    else:
        cal.fit(distances, labels)
    cal.save(out_path)

    for i, fold in enumerate(cal.fold_ids_):
        p = cal.params_[i]
        click.echo(
            f"fold {int(fold)}: t={cal.thresholds_[i]:.6f} "
            f"L={p.L:.6f} d0={p.d0:.6f} k={p.k:.6f} b={p.b:.6f} "
            f"residual={cal.residuals_[i]:.3e}"
        )
    click.echo(f"wrote {out_path}")


@cli.command()
@click.option("--img1", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--img2", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--backend", "backend_spec", default="reference", show_default=True)
@click.option("--method", default="III", show_default=True,
              type=click.Choice(["I", "II", "III"]))
@click.option("--patch-sizes", default=",".join(str(p) for p in DEFAULT_PATCH_SIZES),
              show_default=True, callback=_parse_sizes)
@click.option("--stride", default=DEFAULT_STRIDE, show_default=True, type=int)
@click.option("--fill", default="black", show_default=True,
              type=click.Choice(["black", "gray", "white", "noise"]))
@click.option("--shape", default="rect", show_default=True,
              type=click.Choice(["rect", "round"]))
@click.option("--edge-blur", default=None, callback=_parse_edge_blur,
              help="KERNEL,SIGMA mask smoothing.")
@click.option("--seed", default=0, show_default=True, type=int,
              help="Seed for the noise fill.")
@click.option("--conf", "conf_path", default=None, type=click.Path(exists=True, dir_okay=False),
              help="Confidence model for scoring the pair.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def explain(img1, img2, backend_spec, method, patch_sizes, stride, fill, shape,
            edge_blur, seed, conf_path, out_dir):
    """Explain one image pair and write maps + blended PNGs."""
    specs = _build_specs(patch_sizes, stride, fill, shape, edge_blur, seed)
    backend = make_backend(backend_spec)
    ctx = PairExplainContext.create(read_png(img1), read_png(img2), backend, specs)
    result = explain_pair(ctx, method)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for which in (1, 2):
        write_png(out / f"xmap_{which}_{method}.png", result.blended[which - 1])
        write_png(out / f"smap_{which}_{method}.png",
                  colormap_diverging(result.maps[which - 1]))

    meta = {
        "img1": str(img1),
        "img2": str(img2),
        "backend": backend.name,
        "method": method,
        "parameters": [s.to_dict() for s in specs],
        "d_orig": result.d_orig,
        "threshold": None,
        "prediction": None,
        "c_score": None,
    }
    if conf_path:
        cal = ConfidenceCalibrator.load(conf_path)
        t, params = cal.entry()
        c, pred = c_score(result.d_orig, t, params)
        meta.update(threshold=float(t), prediction=str(pred), c_score=float(c))
    with open(out / "meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")

    click.echo(f"d_orig={result.d_orig:.6f}")
    if meta["c_score"] is not None:
        click.echo(f"prediction={meta['prediction']} c={meta['c_score']:.4f}")
    click.echo(f"wrote {out}")


@cli.command()
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--backend", "backend_spec", default="reference", show_default=True)
@click.option("--methods", default="I,II,III", show_default=True, callback=_parse_methods)
@click.option("--patch-sizes", default=",".join(str(p) for p in DEFAULT_PATCH_SIZES),
              show_default=True, callback=_parse_sizes)
@click.option("--stride", default=DEFAULT_STRIDE, show_default=True, type=int)
@click.option("--fill", default="black", show_default=True,
              type=click.Choice(["black", "gray", "white", "noise"]))
@click.option("--shape", default="rect", show_default=True,
              type=click.Choice(["rect", "round"]))
@click.option("--edge-blur", default=None, callback=_parse_edge_blur)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--conf", "conf_path", default=None, type=click.Path(exists=True, dir_okay=False),
              help="Use this confidence model instead of fitting from the pairs.")
@click.option("--dataset", default=None, help="Override the dataset name (default: pairs file stem).")
@click.option("--model-name", default=None, help="Override the model name (default: backend name).")
@click.option("--out", "out_root", required=True, type=click.Path(file_okay=False))
def batch(pairs_path, backend_spec, methods, patch_sizes, stride, fill, shape,
          edge_blur, seed, conf_path, dataset, model_name, out_root):
    """Run the full pipeline over a pairs file into a results store."""
    pairs = load_pairs(pairs_path, dataset=dataset)
    specs = _build_specs(patch_sizes, stride, fill, shape, edge_blur, seed)
    confidence = ConfidenceCalibrator.load(conf_path) if conf_path else None
    store = run_batch(pairs, backend_spec, methods=methods, specs=specs,
                      out_root=out_root, confidence=confidence,
                      dataset=dataset, model_name=model_name)
    records = store.records()
    failed = sum(1 for r in records if r.status == "failed")
    click.echo(f"wrote {len(records)} records ({failed} failed) under {out_root}")


@cli.command()
@click.option("--store", "store_root", required=True, envvar="XVERIFY_STORE",
              type=click.Path(exists=True, file_okay=False))
@click.option("--addr", default="127.0.0.1:8000", envvar="XVERIFY_ADDR", show_default=True)
@click.option("--backend", "backend_spec", default=None,
              help="Enable live recompute with this backend.")
@click.option("--conf", "conf_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--static", "static_dir", default=None, type=click.Path(file_okay=False),
              help="Serve a built web UI from this directory.")
def serve(store_root, addr, backend_spec, conf_path, static_dir):
    """Serve the HTTP API over a results store."""
    import uvicorn

    from .service import ApiConfig, create_app, parse_addr

    host, port = parse_addr(addr)
    app = create_app(ApiConfig(store_root=store_root, addr=addr,
                               confidence_path=conf_path, backend=backend_spec,
                               static_dir=static_dir))
    uvicorn.run(app, host=host, port=port)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="xverify", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except BackendError as exc:
        click.echo(f"backend error: {exc}", err=True)
        return 3
    except (XVerifyError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
