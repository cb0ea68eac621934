"""Dense symmetric linear algebra used by every solver in the package.

Covers second-moment accumulation over labeled samples, symmetric
eigendecomposition, Cholesky factorization, and generalized
symmetric-definite eigensolving by Cholesky whitening. Everything here is
a pure function of its inputs; eigenvectors follow a fixed sign convention
(largest-magnitude entry positive) so downstream serialization is
reproducible.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.linalg.lapack import dpotrf

from .errors import NotPositiveDefiniteError


def as_symmetric(a, name="matrix"):
    """Validate a square array (d >= 2, finite) and symmetrize it by averaging."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    if a.shape[0] < 2:
        raise ValueError(f"{name} must have dimension >= 2, got {a.shape[0]}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return 0.5 * (a + a.T)


@dataclass(frozen=True)
class MomentPair:
    """Conditional second-moment matrices of the positive and negative samples."""

    c_pos: np.ndarray
    c_neg: np.ndarray
    n_pos: int
    n_neg: int

    @property
    def d(self):
        return self.c_pos.shape[0]


@dataclass(frozen=True)
class EigPairs:
    """Top-k eigenpairs, eigenvalues descending, vectors[:, j] paired with values[j]."""

    values: np.ndarray
    vectors: np.ndarray

    @property
    def k(self):
        return self.values.shape[0]


def _fix_signs(vectors):
    """Flip each column so its largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def accumulate_moments(samples, center=False):
    """Accumulate per-class second moments from labeled samples.

    Parameters
    ----------
    samples : LabeledDataset or iterable of LabeledSample
        Anything exposing ``x`` (n, d) and ``delta`` (n,) arrays, or an
        iterable of objects with per-sample ``x`` and ``delta``.
    center : bool
        When True, subtract each class's mean before accumulation, giving
        the per-class covariance instead of the raw second moment.

    Returns
    -------
    MomentPair with symmetric PSD ``c_pos`` and ``c_neg``.
    """
    if hasattr(samples, "x") and hasattr(samples, "delta"):
        x = np.asarray(samples.x, dtype=float)
        delta = np.asarray(samples.delta)
    else:
        rows = []
        deltas = []
        d = None
        for i, s in enumerate(samples):
            xi = np.asarray(s.x, dtype=float).ravel()
            if d is None:
                d = xi.shape[0]
            elif xi.shape[0] != d:
                raise ValueError(
                    f"sample {i} has dimension {xi.shape[0]}, expected {d}"
                )
            rows.append(xi)
            deltas.append(int(s.delta))
        if not rows:
            raise ValueError("no samples given")
        x = np.array(rows)
        delta = np.array(deltas)
    if x.ndim != 2:
        raise ValueError(f"samples must be 2-d, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        bad = int(np.flatnonzero(~np.isfinite(x).all(axis=1))[0])
        raise ValueError(f"sample {bad} contains non-finite entries")

    pos = x[delta == 1]
    neg = x[delta == 0]
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError(
            "need at least one positive and one negative sample "
            f"(got {len(pos)} positive, {len(neg)} negative)"
        )
    if center:
        pos = pos - pos.mean(axis=0)
        neg = neg - neg.mean(axis=0)
    c_pos = pos.T @ pos / len(pos)
    c_neg = neg.T @ neg / len(neg)
    return MomentPair(
        c_pos=0.5 * (c_pos + c_pos.T),
        c_neg=0.5 * (c_neg + c_neg.T),
        n_pos=len(pos),
        n_neg=len(neg),
    )


def sym_eig(s, k):
    """Top-k eigenpairs of a symmetric matrix, by algebraic value, descending.

    The input may be indefinite. Vectors are orthonormal and sign-fixed.
    """
    s = as_symmetric(s)
    d = s.shape[0]
    if not 1 <= k <= d:
        raise ValueError(f"k must be in [1, {d}], got {k}")
    vals, vecs = np.linalg.eigh(s)
    values = vals[::-1][:k].copy()
    vectors = _fix_signs(vecs[:, ::-1][:, :k].copy())
    return EigPairs(values=values, vectors=vectors)


def cholesky(s):
    """Lower-triangular L with L L^T = S for symmetric positive definite S.

    Raises NotPositiveDefiniteError carrying the zero-based pivot index when
    a non-positive pivot is hit.
    """
    s = as_symmetric(s)
    c, info = dpotrf(s, lower=1, clean=1)
    if info > 0:
        raise NotPositiveDefiniteError(pivot=info - 1)
    if info < 0:
        raise ValueError(f"illegal value in argument {-info} of dpotrf")
    return c


def solve_gev(a, b, k):
    """Top-k eigenpairs of the generalized problem A v = lambda B v, B PD.

    Factors B = L L^T, solves the ordinary symmetric problem for
    L^-1 A L^-T, and maps vectors back by v = L^-T u, which makes the
    returned vectors B-orthonormal. Eigenvalues descend; vectors are
    sign-fixed.
    """
    a = as_symmetric(a, "A")
    b = as_symmetric(b, "B")
    if a.shape != b.shape:
        raise ValueError(f"A and B must have matching shapes, got {a.shape} vs {b.shape}")
    l = cholesky(b)
    y = solve_triangular(l, a, lower=True)
    c = solve_triangular(l, y.T, lower=True).T
    pairs = sym_eig(c, k)
    vectors = solve_triangular(l, pairs.vectors, trans="T", lower=True)
    return EigPairs(values=pairs.values, vectors=_fix_signs(vectors))


def orthonormalize(basis):
    """Orthonormal basis (d, k) spanning the columns of ``basis``.

    Raises ValueError when the columns are numerically rank deficient.
    """
    basis = np.asarray(basis, dtype=float)
    if basis.ndim == 1:
        basis = basis[:, None]
    sv = np.linalg.svd(basis, compute_uv=False)
    if sv[-1] <= 1e-10 * sv[0]:
        raise ValueError(
            f"basis is rank deficient (singular values {sv[0]:.3e} .. {sv[-1]:.3e})"
        )
    q, _ = np.linalg.qr(basis)
    return q


def subspace_alignment(qa, qb):
    """tr(P_a P_b) / k for projectors onto two k-dimensional subspaces.

    Inputs are orthonormalized first, so any bases for the subspaces work.
    1.0 means identical subspaces, 0.0 orthogonal ones.
    """
    qa = orthonormalize(qa)
    qb = orthonormalize(qb)
    if qa.shape != qb.shape:
        raise ValueError(f"subspace shapes differ: {qa.shape} vs {qb.shape}")
    return float(np.sum((qa.T @ qb) ** 2) / qa.shape[1])
