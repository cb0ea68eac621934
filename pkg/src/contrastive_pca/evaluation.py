"""Measurements for fitted subspaces and hyper-parameter sweeps.

Three scores: subspace alignment between two projectors, symmetrized KL
divergence between the per-tag distributions of projected positives (each
cloud fitted with a Gaussian; the estimator choice is recorded in the
report), and two-class linear discriminant accuracy on projections. The
sweep harness refits a method across a contrast grid and assembles an
EvalReport suitable for plotting or threshold ("good range") analysis.
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import SingularBackgroundError
from .linalg import accumulate_moments, subspace_alignment
from .offline import ContrastConfig, SubspaceModel, fit, project

REPORT_FORMAT = "cpca-report/1"


def _as_basis(obj):
    if isinstance(obj, SubspaceModel):
        return obj.basis
    return np.asarray(obj, dtype=float)


def projector_alignment(a, b):
    """tr(P_a P_b) / k for two k-dimensional subspaces, in [0, 1].

    Accepts SubspaceModel instances or (d, k) bases; inputs are
    orthonormalized internally, so non-orthonormal bases are fine.
    """
    qa = _as_basis(a)
    qb = _as_basis(b)
    if qa.ndim == 1:
        qa = qa[:, None]
    if qb.ndim == 1:
        qb = qb[:, None]
    if qa.shape != qb.shape:
        raise ValueError(f"basis shapes differ: {qa.shape} vs {qb.shape}")
    return subspace_alignment(qa, qb)


def _fit_gaussian(proj, ridge_scale=1e-9):
    k, n = proj.shape
    if n < k + 2:
        raise ValueError(f"need at least k+2={k + 2} points per cloud, got {n}")
    mu = proj.mean(axis=1)
    centered = proj - mu[:, None]
    cov = centered @ centered.T / n
    cov += (ridge_scale * np.trace(cov) / k) * np.eye(k)
    return mu, cov


def gaussian_sym_kl(mu_a, cov_a, mu_b, cov_b):
    """Closed-form symmetrized KL divergence between two Gaussians."""
    mu_a = np.asarray(mu_a, dtype=float).ravel()
    mu_b = np.asarray(mu_b, dtype=float).ravel()
    cov_a = np.atleast_2d(np.asarray(cov_a, dtype=float))
    cov_b = np.atleast_2d(np.asarray(cov_b, dtype=float))
    k = mu_a.shape[0]

    def kl(mu0, s0, mu1, s1):
        sign1, logdet1 = np.linalg.slogdet(s1)
        sign0, logdet0 = np.linalg.slogdet(s0)
        if sign0 <= 0 or sign1 <= 0:
            raise ValueError("degenerate covariance; cannot evaluate the divergence")
        diff = mu1 - mu0
        s1_inv_s0 = np.linalg.solve(s1, s0)
        maha = float(diff @ np.linalg.solve(s1, diff))
        return 0.5 * (np.trace(s1_inv_s0) + maha - k + logdet1 - logdet0)

    return float(kl(mu_a, cov_a, mu_b, cov_b) + kl(mu_b, cov_b, mu_a, cov_a))


def symmetric_kl(proj_a, proj_b):
    """Symmetrized KL between Gaussians fitted to two projection clouds (k, n)."""
    proj_a = np.atleast_2d(np.asarray(proj_a, dtype=float))
    proj_b = np.atleast_2d(np.asarray(proj_b, dtype=float))
    if proj_a.shape[0] != proj_b.shape[0]:
        raise ValueError(
            f"projection dimensions differ: {proj_a.shape[0]} vs {proj_b.shape[0]}"
        )
    mu_a, cov_a = _fit_gaussian(proj_a)
    mu_b, cov_b = _fit_gaussian(proj_b)
    return gaussian_sym_kl(mu_a, cov_a, mu_b, cov_b)


def lda_accuracy(projections, tags):
    """Training accuracy of two-class LDA on projected points (k, n).

    Shared within-class covariance with a small trace-scaled ridge;
    decision by the linear discriminant with class-prior offsets.
    """
    proj = np.atleast_2d(np.asarray(projections, dtype=float))
    tags = np.asarray(tags)
    k, n = proj.shape
    if tags.shape != (n,):
        raise ValueError(f"tags length {tags.shape} does not match {n} points")
    classes = np.unique(tags)
    if classes.size != 2:
        raise ValueError(f"need exactly two tag classes, got {classes.size}")

    mus = []
    pooled = np.zeros((k, k))
    counts = []
    for c in classes:
        pts = proj[:, tags == c]
        if pts.shape[1] == 0:
            raise ValueError(f"tag class {c} is empty")
        mu = pts.mean(axis=1)
        centered = pts - mu[:, None]
        pooled += centered @ centered.T
        mus.append(mu)
        counts.append(pts.shape[1])
    pooled /= n
    tr = np.trace(pooled)
    if tr > 0:
        pooled += (1e-9 * tr / k) * np.eye(k)
    else:
        pooled = np.eye(k)

    scores = np.empty((2, n))
    for i, (mu, cnt) in enumerate(zip(mus, counts)):
        w = np.linalg.solve(pooled, mu)
        scores[i] = w @ proj - 0.5 * float(mu @ w) + np.log(cnt / n)
    pred = classes[np.argmax(scores, axis=0)]
    return float(np.mean(pred == tags))


@dataclass
class EvalReport:
    """Scores over a contrast grid for one method and metric."""

    metric_name: str
    grid: np.ndarray
    scores: np.ndarray
    threshold: Optional[float] = None
    good_range_width: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "format": REPORT_FORMAT,
            "metric_name": self.metric_name,
            "grid": [float(g) for g in self.grid],
            "scores": [None if np.isnan(s) else float(s) for s in self.scores],
            "threshold": self.threshold,
            "good_range_width": self.good_range_width,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, doc):
        if doc.get("format") != REPORT_FORMAT:
            raise ValueError(f"not a report document: format={doc.get('format')!r}")
        scores = np.array(
            [np.nan if s is None else float(s) for s in doc["scores"]], dtype=float
        )
        return cls(
            metric_name=doc["metric_name"],
            grid=np.array(doc["grid"], dtype=float),
            scores=scores,
            threshold=doc.get("threshold"),
            good_range_width=doc.get("good_range_width"),
            meta=doc.get("meta", {}),
        )

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save_csv(self, path):
        """Two columns, contrast and score, one row per grid point, no header."""
        with open(path, "w", encoding="utf-8") as fh:
            for g, s in zip(self.grid, self.scores):
                fh.write(f"{float(g)!r},{'' if np.isnan(s) else repr(float(s))}\n")


METRICS = ("sym_kl", "lda")


def _score_projections(metric, projections, tags):
    classes = np.unique(tags)
    if classes.size != 2:
        raise ValueError(f"need exactly two tag classes among positives, got {classes.size}")
    if metric == "lda":
        return lda_accuracy(projections, tags)
    return symmetric_kl(
        projections[:, tags == classes[0]], projections[:, tags == classes[1]]
    )


def sweep(dataset, method, grid, k, metric, center=False, max_workers=None):
    """Refit across a contrast grid and score projected positives per point.

    A singular background (beta = 1 with rank-deficient negative moments)
    records a NaN score rather than aborting the sweep.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("grid must be nonempty")
    if np.any(grid < 0.0) or np.any(grid > 1.0):
        raise ValueError("grid values must lie in [0, 1]")
    if grid.size > 1 and np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}, expected one of {METRICS}")
    if dataset.tags is None:
        raise ValueError("dataset has no tags; sweep cannot score projections")

    moments = accumulate_moments(dataset, center=center)
    xpos = dataset.positives_matrix()
    tags = dataset.positive_tags()

    def one(contrast):
        config = ContrastConfig(method=method, contrast=float(contrast), k=k, center=center)
        try:
            model = fit(moments, config)
        except SingularBackgroundError:
            return float("nan")
        return _score_projections(metric, project(model, xpos), tags)

    if max_workers is not None and max_workers > 1 and grid.size > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            scores = list(pool.map(one, grid))
    else:
        scores = [one(g) for g in grid]
    return EvalReport(
        metric_name=metric,
        grid=grid,
        scores=np.array(scores, dtype=float),
        meta={
            "method": method,
            "k": int(k),
            "center": bool(center),
            "estimator": "gaussian" if metric == "sym_kl" else "lda-train",
        },
    )


def good_range_width(report, threshold):
    """Fraction of grid points whose score exceeds the threshold.

    Stores the threshold and the width back into the report and returns
    the width. NaN scores never count as above threshold.
    """
    scores = np.asarray(report.scores, dtype=float)
    with np.errstate(invalid="ignore"):
        width = float(np.sum(scores > threshold) / scores.size)
    report.threshold = float(threshold)
    report.good_range_width = width
    return width
