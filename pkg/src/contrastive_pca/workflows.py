"""Command implementations behind the service endpoints and the CLI.

Each function validates its parameters, loads input files, computes, and
writes any outputs, returning a plain dict summary. Errors are sorted
into three kinds so both the HTTP layer and the CLI can map them the same
way: ``usage`` (bad parameters), ``io`` (missing or unparseable files,
generator failures), and ``domain`` (the computation itself rejected the
data).
"""

import json
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import data as datamod
from . import svgplot
from .evaluation import (
    EvalReport,
    good_range_width,
    lda_accuracy,
    projector_alignment,
    sweep,
    symmetric_kl,
)
from .linalg import accumulate_moments
from .offline import ContrastConfig, SubspaceModel, fit, project
from .online import init_state, run_stream

OUT_DIR_ENV = "CPCA_OUT_DIR"


class UsageError(ValueError):
    """Bad parameter values; maps to exit code 1 / HTTP 400."""


class IoError(RuntimeError):
    """Missing or malformed input files; maps to exit code 2 / HTTP 404."""


def error_kind(exc):
    if isinstance(exc, UsageError):
        return "usage"
    if isinstance(exc, (IoError, OSError)):
        return "io"
    return "domain"


def resolve_out(path):
    """Resolve an output path against the CPCA_OUT_DIR environment variable."""
    p = Path(path)
    base = os.environ.get(OUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    if p.parent != Path("."):
        p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _load_dataset(path, label_column=None, tag_column=None, drop_columns=(), normalize="none"):
    path = Path(path)
    try:
        if path.suffix.lower() == ".csv":
            if not label_column:
                raise UsageError("CSV input needs a label column name")
            ds = datamod.load_csv(
                path, label_column, tag_column=tag_column, drop_columns=drop_columns
            )
        else:
            ds = datamod.LabeledDataset.load_jsonl(path)
    except UsageError:
        raise
    except (OSError, ValueError, json.JSONDecodeError) as e:
        raise IoError(f"cannot load dataset {path}: {e}") from e
    try:
        return datamod.normalized(ds, normalize)
    except ValueError as e:
        raise UsageError(str(e)) from e


def _load_model(path):
    try:
        return SubspaceModel.load(path)
    except (OSError, ValueError, json.JSONDecodeError) as e:
        raise IoError(f"cannot load model {path}: {e}") from e


GEN_KINDS = ("artificial", "synthetic-digits", "noisy-digits")


def run_gen(
    kind,
    out_path,
    seed=0,
    count=1000,
    n_pos=200,
    n_neg=200,
    mnist_images=None,
    mnist_labels=None,
    background_dir=None,
    noise_std=3.0,
    cluster_mean=3.0,
    cluster_std=1.0,
    signal_dims=10,
    dim=30,
):
    """Generate a dataset and write it as JSON lines with a metadata header."""
    if kind not in GEN_KINDS:
        raise UsageError(f"unknown generator {kind!r}, expected one of {GEN_KINDS}")
    try:
        if kind == "artificial":
            ds = datamod.gen_artificial(
                seed,
                n_pos=n_pos,
                n_neg=n_neg,
                d=dim,
                noise_std=noise_std,
                signal_dims=signal_dims,
                cluster_mean=cluster_mean,
                cluster_std=cluster_std,
            )
        elif kind == "synthetic-digits":
            ds = datamod.gen_synthetic_digits(count, seed=seed)
        else:
            if not (mnist_images and mnist_labels and background_dir):
                raise UsageError(
                    "noisy-digits needs mnist_images, mnist_labels, and background_dir"
                )
            ds = datamod.gen_noisy_digits(
                mnist_images, mnist_labels, background_dir, count, seed=seed
            )
    except UsageError:
        raise
    except (OSError, ValueError) as e:
        raise IoError(f"generator failed: {e}") from e
    out = resolve_out(out_path)
    ds.save_jsonl(out)
    return {"out_path": str(out), "n_pos": ds.n_pos, "n_neg": ds.n_neg, "d": ds.d}


def _separation_metrics(model, dataset):
    """LDA accuracy and symmetrized KL of projected positives, when tags allow."""
    if dataset.tags is None:
        return None
    tags = dataset.positive_tags()
    valid = tags[tags != datamod.UNTAGGED]
    if np.unique(valid).size != 2:
        return None
    proj = project(model, dataset.positives_matrix())
    keep = tags != datamod.UNTAGGED
    proj = proj[:, keep]
    tags = tags[keep]
    classes = np.unique(tags)
    return {
        "lda_accuracy": lda_accuracy(proj, tags),
        "sym_kl": symmetric_kl(proj[:, tags == classes[0]], proj[:, tags == classes[1]]),
    }


def run_fit(
    data_path,
    method,
    contrast,
    k,
    out_model_path,
    center=False,
    ridge=0.0,
    normalize="none",
    label_column=None,
    tag_column=None,
    drop_columns=(),
    projections_out=None,
):
    """Fit a contrastive subspace from a dataset file and write the model."""
    try:
        config = ContrastConfig(
            method=method, contrast=contrast, k=k, center=center, ridge=ridge
        )
    except ValueError as e:
        raise UsageError(str(e)) from e
    ds = _load_dataset(
        data_path,
        label_column=label_column,
        tag_column=tag_column,
        drop_columns=drop_columns,
        normalize=normalize,
    )
    moments = accumulate_moments(ds, center=center)
    model = fit(moments, config)
    out = resolve_out(out_model_path)
    model.save(out)

    result = {
        "out_model_path": str(out),
        "d": ds.d,
        "k": k,
        "n_pos": ds.n_pos,
        "n_neg": ds.n_neg,
        "values": [float(v) for v in model.values],
        "dropped_rows": ds.meta.get("dropped_rows", 0),
    }
    metrics = _separation_metrics(model, ds)
    if metrics:
        result.update(metrics)
    if projections_out:
        tags = (
            ds.positive_tags()
            if ds.tags is not None
            else np.full(ds.n_pos, datamod.UNTAGGED)
        )
        proj = project(model, ds.positives_matrix())
        ppath = resolve_out(projections_out)
        svgplot.save_projections(ppath, proj.T, tags, k)
        result["projections_out"] = str(ppath)
    return result


def _epoch_samples(dataset, epochs, rng):
    for _ in range(epochs):
        yield from dataset.shuffled(rng).samples()


def _one_stream(dataset, beta, k, eta, tau, epochs, seed, record_every, oracle):
    state = init_state(dataset.d, k, beta, eta, tau, seed)
    rng = np.random.default_rng(seed)
    samples = _epoch_samples(dataset, epochs, rng)
    _, trace = run_stream(state, samples, record_every=record_every, oracle=oracle)
    return trace


def run_stream_cmd(
    data_path,
    beta,
    k,
    eta,
    tau,
    epochs,
    seeds,
    oracle_model_path,
    out_report_path,
    record_every=200,
    normalize="none",
    label_column=None,
    tag_column=None,
    drop_columns=(),
    max_workers=None,
):
    """Run the streaming solver for several seeds and write the trajectories.

    The oracle model gives the reference subspace for the alignment
    trajectory; its dimensions must match the data and requested k.
    """
    if epochs < 0:
        raise UsageError(f"epochs must be >= 0, got {epochs}")
    if not seeds:
        raise UsageError("need at least one seed")
    ds = _load_dataset(
        data_path,
        label_column=label_column,
        tag_column=tag_column,
        drop_columns=drop_columns,
        normalize=normalize,
    )
    oracle = _load_model(oracle_model_path) if oracle_model_path else None
    warning = None
    if oracle is not None:
        if oracle.dim != ds.d or oracle.k != k:
            raise ValueError(
                f"oracle model is d={oracle.dim}, k={oracle.k}; "
                f"stream needs d={ds.d}, k={k}"
            )
        if oracle.config.method != "cpca" and abs(oracle.config.contrast - beta) > 1e-12:
            warning = (
                f"oracle contrast {oracle.config.contrast} differs from stream beta {beta}"
            )
    try:
        init_state(ds.d, k, beta, eta, tau, 0)
    except ValueError as e:
        raise UsageError(str(e)) from e

    def job(seed):
        return _one_stream(ds, beta, k, eta, tau, epochs, seed, record_every, oracle)

    if max_workers is not None and max_workers > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            traces = list(pool.map(job, seeds))
    else:
        traces = [job(s) for s in seeds]

    out = resolve_out(out_report_path)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("t," + ",".join(f"seed{s}" for s in seeds) + ",mean,std\n")
        if traces[0].steps.size:
            aligns = np.vstack([tr.alignments for tr in traces])
            for j, t in enumerate(traces[0].steps):
                col = aligns[:, j]
                cells = [str(int(t))] + [repr(float(v)) for v in col]
                cells.append(repr(float(np.mean(col))))
                cells.append(repr(float(np.std(col))))
                fh.write(",".join(cells) + "\n")

    finals = [float(tr.alignments[-1]) if tr.alignments.size else None for tr in traces]
    have = [f for f in finals if f is not None]
    result = {
        "out_report_path": str(out),
        "seeds": list(seeds),
        "final_alignments": finals,
        "mean_final_alignment": float(np.mean(have)) if have else None,
        "std_final_alignment": float(np.std(have)) if have else None,
        "steps": int(traces[0].steps[-1]) if traces[0].steps.size else 0,
    }
    if warning:
        result["warning"] = warning
    return result


def parse_grid_spec(spec):
    """Parse 'start:end:points' into a strictly increasing grid in [0, 1]."""
    parts = str(spec).split(":")
    if len(parts) != 3:
        raise UsageError(f"grid spec must be start:end:points, got {spec!r}")
    try:
        start, end = float(parts[0]), float(parts[1])
        points = int(parts[2])
    except ValueError:
        raise UsageError(f"grid spec must be start:end:points, got {spec!r}") from None
    if points < 1:
        raise UsageError(f"grid needs at least one point, got {points}")
    if not (0.0 <= start <= 1.0 and 0.0 <= end <= 1.0):
        raise UsageError("grid endpoints must lie in [0, 1]")
    if points > 1 and not end > start:
        raise UsageError("grid end must exceed start for multi-point grids")
    return np.linspace(start, end, points)


def run_sweep(
    data_path,
    method,
    grid_spec,
    k,
    metric,
    threshold,
    out_json,
    out_csv,
    center=False,
    normalize="none",
    label_column=None,
    tag_column=None,
    drop_columns=(),
    max_workers=None,
):
    """Score a method across a contrast grid; write report JSON and CSV."""
    grid = parse_grid_spec(grid_spec) if isinstance(grid_spec, str) else np.asarray(grid_spec)
    if method not in ("cpca", "cpca-star"):
        raise UsageError(f"unknown method {method!r}")
    ds = _load_dataset(
        data_path,
        label_column=label_column,
        tag_column=tag_column,
        drop_columns=drop_columns,
        normalize=normalize,
    )
    report = sweep(ds, method, grid, k, metric, center=center, max_workers=max_workers)
    width = good_range_width(report, threshold)
    ojson = resolve_out(out_json)
    ocsv = resolve_out(out_csv)
    report.save(ojson)
    report.save_csv(ocsv)
    return {
        "out_json": str(ojson),
        "out_csv": str(ocsv),
        "metric": metric,
        "method": method,
        "threshold": threshold,
        "good_range_width": width,
        "grid_points": int(report.grid.size),
    }


def run_eval(
    model_a,
    model_b=None,
    data_path=None,
    normalize="none",
    label_column=None,
    tag_column=None,
    drop_columns=(),
):
    """Compare two models (projector alignment) or score one model on tagged data."""
    if (model_b is None) == (data_path is None):
        raise UsageError("give either a second model or a dataset, not both")
    a = _load_model(model_a)
    if model_b is not None:
        b = _load_model(model_b)
        return {
            "metric_name": "projector_alignment",
            "alignment": projector_alignment(a, b),
            "k": a.k,
            "d": a.dim,
        }
    ds = _load_dataset(
        data_path,
        label_column=label_column,
        tag_column=tag_column,
        drop_columns=drop_columns,
        normalize=normalize,
    )
    if a.dim != ds.d:
        raise ValueError(f"model is d={a.dim}, dataset is d={ds.d}")
    metrics = _separation_metrics(a, ds)
    if metrics is None:
        raise ValueError("dataset has no two-class tags among positives")
    return {"metric_name": "projection_separation", "d": ds.d, "k": a.k, **metrics}


PLOT_KINDS = ("scatter", "curve", "barcode")


def run_plot(input_path, out_svg_path, kind, threshold=None):
    """Render a projections or report file to a standalone SVG."""
    if kind not in PLOT_KINDS:
        raise UsageError(f"unknown plot kind {kind!r}, expected one of {PLOT_KINDS}")
    try:
        with open(input_path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise IoError(f"cannot load {input_path}: {e}") from e
    fmt = doc.get("format")
    if kind == "scatter":
        if fmt != svgplot.PROJECTIONS_FORMAT:
            raise UsageError(f"scatter needs a projections file, got format {fmt!r}")
        text = svgplot.render_scatter(doc)
    else:
        if fmt != "cpca-report/1":
            raise UsageError(f"{kind} needs a report file, got format {fmt!r}")
        report = EvalReport.from_dict(doc)
        if kind == "curve":
            text = svgplot.render_curve(report)
        else:
            text = svgplot.render_barcode(report, threshold)
    out = resolve_out(out_svg_path)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(text)
    return {"out_svg_path": str(out), "kind": kind}
