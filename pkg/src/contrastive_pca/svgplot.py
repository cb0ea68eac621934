"""Minimal self-contained SVG renderers for projections and sweep reports.

Three kinds: ``scatter`` draws projected points colored by tag, ``curve``
draws score versus contrast from a report, ``barcode`` shades the grid
cells whose score clears a threshold. Output is deterministic (fixed
float formatting), so rendered files are diffable in tests.
"""

import json

import numpy as np

PROJECTIONS_FORMAT = "cpca-projections/1"

WIDTH, HEIGHT = 640, 480
MARGIN = 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
UNTAGGED_COLOR = "#999999"


def _fmt(v):
    return f"{v:.2f}"


def _header(height=HEIGHT):
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" '
        f'viewBox="0 0 {WIDTH} {height}">\n'
        f'<rect x="0" y="0" width="{WIDTH}" height="{height}" fill="white"/>\n'
    )


def _frame(height=HEIGHT):
    x1, y1 = MARGIN, MARGIN
    x2, y2 = WIDTH - MARGIN, height - MARGIN
    return (
        f'<rect x="{x1}" y="{y1}" width="{x2 - x1}" height="{y2 - y1}" '
        f'fill="none" stroke="#333333" stroke-width="1"/>\n'
    )


def _span(lo, hi):
    if hi - lo <= 0:
        return lo - 1.0, hi + 1.0
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _xmap(v, lo, hi):
    return MARGIN + (v - lo) / (hi - lo) * (WIDTH - 2 * MARGIN)


def _ymap(v, lo, hi, height=HEIGHT):
    return height - MARGIN - (v - lo) / (hi - lo) * (height - 2 * MARGIN)


def save_projections(path, coords, tags, k):
    """Write a projections-with-tags document consumable by the scatter plot."""
    doc = {
        "format": PROJECTIONS_FORMAT,
        "k": int(k),
        "coords": [[float(v) for v in row] for row in coords],
        "tags": [int(t) for t in tags],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_projections(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != PROJECTIONS_FORMAT:
        raise ValueError(f"not a projections document: format={doc.get('format')!r}")
    return doc


def render_scatter(doc):
    """Scatter of the first two projection coordinates, colored by tag."""
    coords = np.array(doc["coords"], dtype=float)
    tags = list(doc.get("tags", [-1] * len(coords)))
    if coords.ndim != 2 or coords.shape[0] == 0:
        raise ValueError("projections document has no points")
    xs = coords[:, 0]
    ys = coords[:, 1] if coords.shape[1] > 1 else np.zeros(len(coords))
    xlo, xhi = _span(xs.min(), xs.max())
    ylo, yhi = _span(ys.min(), ys.max())

    parts = [_header(), _frame()]
    for x, y, tag in zip(xs, ys, tags):
        color = UNTAGGED_COLOR if tag < 0 else PALETTE[tag % len(PALETTE)]
        parts.append(
            f'<circle cx="{_fmt(_xmap(x, xlo, xhi))}" cy="{_fmt(_ymap(y, ylo, yhi))}" '
            f'r="3" fill="{color}" fill-opacity="0.7"/>\n'
        )
    parts.append("</svg>\n")
    return "".join(parts)


def render_curve(report):
    """Score-versus-contrast polyline; NaN scores split the line."""
    grid = np.asarray(report.grid, dtype=float)
    scores = np.asarray(report.scores, dtype=float)
    finite = scores[np.isfinite(scores)]
    if finite.size == 0:
        raise ValueError("report has no finite scores to plot")
    xlo, xhi = _span(float(grid.min()), float(grid.max()))
    ylo, yhi = _span(float(finite.min()), float(finite.max()))

    parts = [_header(), _frame()]
    run = []
    runs = []
    for g, s in zip(grid, scores):
        if np.isfinite(s):
            run.append((g, s))
        elif run:
            runs.append(run)
            run = []
    if run:
        runs.append(run)
    for seg in runs:
        pts = " ".join(
            f"{_fmt(_xmap(g, xlo, xhi))},{_fmt(_ymap(s, ylo, yhi))}" for g, s in seg
        )
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="#1f77b4" stroke-width="2"/>\n'
        )
    parts.append(
        f'<text x="{WIDTH // 2}" y="{HEIGHT - 12}" text-anchor="middle" '
        f'font-size="13">{report.metric_name} vs contrast</text>\n'
    )
    parts.append("</svg>\n")
    return "".join(parts)


def render_barcode(report, threshold=None):
    """One cell per grid point, shaded when the score clears the threshold."""
    grid = np.asarray(report.grid, dtype=float)
    scores = np.asarray(report.scores, dtype=float)
    if threshold is None:
        threshold = report.threshold
    if threshold is None:
        raise ValueError("barcode needs a threshold (none stored in the report)")
    height = 160
    parts = [_header(height), _frame(height)]
    n = grid.size
    x1, x2 = MARGIN, WIDTH - MARGIN
    cell = (x2 - x1) / n
    for i, s in enumerate(scores):
        if np.isfinite(s) and s > threshold:
            parts.append(
                f'<rect x="{_fmt(x1 + i * cell)}" y="{MARGIN}" '
                f'width="{_fmt(cell)}" height="{height - 2 * MARGIN}" '
                f'fill="#1f77b4"/>\n'
            )
    parts.append(
        f'<text x="{WIDTH // 2}" y="{height - 12}" text-anchor="middle" '
        f'font-size="13">{report.metric_name} &gt; {threshold:g}</text>\n'
    )
    parts.append("</svg>\n")
    return "".join(parts)
