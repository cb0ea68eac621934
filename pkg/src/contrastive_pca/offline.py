"""Batch contrastive PCA in two formulations, plus a minimax subspace solver.

``cpca`` projects onto the top eigen-subspace of the weighted difference
(1-alpha)*C_pos - alpha*C_neg. ``cpca-star`` solves the generalized
eigenvalue problem C_pos v = lambda B v with background blend
B = (1-beta)*I + beta*C_neg. Both contrast parameters live in [0, 1] and
reduce to plain PCA of the positive samples at 0.

``offline_minimax_fit`` recovers the same cpca-star subspace by gradient
descent-ascent on a similarity-matching saddle objective; it is the batch
counterpart of the streaming solver in ``online.py`` and exists mainly to
validate it.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import __version__
from .errors import DivergenceError, NotPositiveDefiniteError, SingularBackgroundError
from .linalg import (
    as_symmetric,
    orthonormalize,
    solve_gev,
    subspace_alignment,
    sym_eig,
)

METHODS = ("cpca", "cpca-star")
MODEL_FORMAT = "cpca-model/1"


@dataclass(frozen=True)
class ContrastConfig:
    """Method, contrast weight in [0, 1], output dimension, preprocessing flags."""

    method: str
    contrast: float
    k: int
    center: bool = False
    ridge: float = 0.0

    def __post_init__(self):
        if self.method not in METHODS and self.method != "cpca-star-online":
            raise ValueError(f"unknown method {self.method!r}, expected one of {METHODS}")
        if not 0.0 <= self.contrast <= 1.0:
            raise ValueError(f"contrast must be in [0, 1], got {self.contrast}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.ridge < 0.0:
            raise ValueError(f"ridge must be >= 0, got {self.ridge}")


@dataclass(frozen=True)
class SubspaceModel:
    """A fitted k-dimensional subspace: basis columns plus eigenvalues.

    For cpca the basis columns are orthonormal; for cpca-star they are
    B-orthonormal in the blended background metric.
    """

    basis: np.ndarray
    values: np.ndarray
    config: ContrastConfig
    dim: int

    @property
    def k(self):
        return self.basis.shape[1]

    def to_dict(self):
        return {
            "format": MODEL_FORMAT,
            "method": self.config.method,
            "contrast": self.config.contrast,
            "k": int(self.k),
            "d": int(self.dim),
            "values": [float(v) for v in self.values],
            "basis": [[float(x) for x in self.basis[:, j]] for j in range(self.k)],
            "center": bool(self.config.center),
            "meta": {"generator": f"contrastive-pca {__version__}"},
        }

    @classmethod
    def from_dict(cls, doc):
        if doc.get("format") != MODEL_FORMAT:
            raise ValueError(f"not a subspace model document: format={doc.get('format')!r}")
        basis = np.array(doc["basis"], dtype=float).T
        config = ContrastConfig(
            method=doc["method"],
            contrast=float(doc["contrast"]),
            k=int(doc["k"]),
            center=bool(doc.get("center", False)),
        )
        return cls(
            basis=basis,
            values=np.array(doc["values"], dtype=float),
            config=config,
            dim=int(doc["d"]),
        )

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def build_a_alpha(moments, alpha):
    """Weighted covariance difference (1-alpha)*C_pos - alpha*C_neg (may be indefinite)."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    return as_symmetric((1.0 - alpha) * moments.c_pos - alpha * moments.c_neg)


def build_b_beta(moments, beta):
    """Blended background matrix (1-beta)*I + beta*C_neg (PD whenever beta < 1)."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must be in [0, 1], got {beta}")
    d = moments.d
    return as_symmetric((1.0 - beta) * np.eye(d) + beta * moments.c_neg)


def fit(moments, config):
    """Fit a contrastive subspace from class moments.

    cpca takes the top-k eigenpairs of the weighted difference matrix;
    cpca-star solves the generalized problem C_pos v = lambda B v. A
    singular background at beta = 1 raises SingularBackgroundError.
    """
    d = moments.d
    if not config.k < d:
        raise ValueError(f"k must be < d ({d}), got {config.k}")
    if config.method == "cpca":
        pairs = sym_eig(build_a_alpha(moments, config.contrast), config.k)
    else:
        b = build_b_beta(moments, config.contrast)
        if config.ridge > 0.0:
            b = b + config.ridge * np.eye(d)
        try:
            pairs = solve_gev(moments.c_pos, b, config.k)
        except NotPositiveDefiniteError as e:
            raise SingularBackgroundError(
                f"background matrix is singular at pivot {e.pivot} "
                f"(beta={config.contrast}); use beta < 1 or set a ridge > 0"
            ) from e
    return SubspaceModel(basis=pairs.vectors, values=pairs.values, config=config, dim=d)


def project(model, x):
    """Project columns of x (d, n) onto the model subspace, giving (k, n) scores."""
    x = np.asarray(x, dtype=float)
    vec = x.ndim == 1
    if vec:
        x = x[:, None]
    if x.shape[0] != model.dim:
        raise ValueError(f"x has row dimension {x.shape[0]}, model expects {model.dim}")
    out = model.basis.T @ x
    return out[:, 0] if vec else out


def snr_ratio(v, moments):
    """Signal-to-noise ratio v'(C_pos - C_neg)v / v'C_neg v for a unit vector v."""
    v = np.asarray(v, dtype=float).ravel()
    if abs(np.linalg.norm(v) - 1.0) > 1e-10:
        raise ValueError(f"v must be a unit vector, got norm {np.linalg.norm(v)}")
    noise = float(v @ moments.c_neg @ v)
    if noise <= 1e-14 * np.trace(moments.c_neg):
        raise ValueError("direction carries no background variance; ratio undefined")
    signal = float(v @ (moments.c_pos - moments.c_neg) @ v)
    return signal / noise


@dataclass
class MinimaxResult:
    """Final weights of the descent-ascent solver plus its alignment trajectory."""

    w: np.ndarray
    m: np.ndarray
    steps: np.ndarray
    alignments: np.ndarray
    n_iters: int
    converged: bool

    @property
    def basis(self):
        """Orthonormal basis for the learned projection row space."""
        return orthonormalize(np.linalg.solve(self.m, self.w).T)


def offline_minimax_fit(
    xpos,
    b_beta,
    k,
    eta,
    tau=1.0,
    iters=20000,
    seed=0,
    record_every=100,
    stop_tol=1e-9,
):
    """Solve the contrastive subspace problem by gradient descent-ascent.

    At each iteration the auxiliary output is resolved in closed form,
    Z = M^-1 W X, then W takes a descent step and M an ascent step:

        W <- W + 2*eta*((1/T) Z X' - W B)
        M <- M + (eta/tau)*((1/T) Z Z' - M)

    At a fixed point, M = (1/T) Z Z' and (1/T) Z X' = W B, and the row
    space of M^-1 W spans the top-k generalized eigen-subspace of
    ((1/T) X X', B). The trajectory records the alignment of that row
    space against the direct eigensolver every ``record_every`` steps.

    Parameters
    ----------
    xpos : (d, T) data matrix; negative samples enter as zero columns.
    b_beta : (d, d) symmetric positive definite background matrix.
    k : target subspace dimension.
    eta : step size, required to lie in (0, tau).
    tau : ratio between the W and M step sizes.
    iters : maximum iterations.
    seed : seed for the Gaussian initialization of W.
    record_every : trajectory recording stride.
    stop_tol : early stop when both update norms fall below this.
    """
    x = np.asarray(xpos, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"xpos must be (d, T), got shape {x.shape}")
    d, t_len = x.shape
    if not 1 <= k < d:
        raise ValueError(f"k must satisfy 1 <= k < d={d}, got {k}")
    if not 0.0 < eta < tau:
        raise ValueError(f"step size must satisfy 0 < eta < tau, got eta={eta}, tau={tau}")
    b = as_symmetric(b_beta, "b_beta")

    reference = solve_gev(x @ x.T / t_len, b, k).vectors
    rng = np.random.default_rng(seed)
    w = rng.normal(0.0, 1.0 / np.sqrt(d), size=(k, d))
    m = np.eye(k)

    def row_space_alignment():
        try:
            return subspace_alignment(np.linalg.solve(m, w).T, reference)
        except (ValueError, np.linalg.LinAlgError):
            return float("nan")

    steps = []
    aligns = []
    converged = False
    n_iters = iters
    for i in range(1, iters + 1):
        try:
            z = np.linalg.solve(m, w @ x)
        except np.linalg.LinAlgError as e:
            raise DivergenceError(f"M became singular at iteration {i}; reduce eta") from e
        with np.errstate(over="ignore", invalid="ignore"):
            dw = 2.0 * eta * (z @ x.T / t_len - w @ b)
            dm = (eta / tau) * (z @ z.T / t_len - m)
            w = w + dw
            m = m + dm
            m = 0.5 * (m + m.T)
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(m))):
            raise DivergenceError(f"non-finite weights at iteration {i}; reduce eta")
        if np.linalg.eigvalsh(m)[0] <= 1e-12:
            raise DivergenceError(f"M lost positive definiteness at iteration {i}; reduce eta")
        if i % record_every == 0 or i == iters:
            steps.append(i)
            aligns.append(row_space_alignment())
        if np.linalg.norm(dw) < stop_tol and np.linalg.norm(dm) < stop_tol:
            converged = True
            n_iters = i
            if steps[-1:] != [i]:
                steps.append(i)
                aligns.append(row_space_alignment())
            break
    return MinimaxResult(
        w=w,
        m=m,
        steps=np.array(steps, dtype=int),
        alignments=np.array(aligns, dtype=float),
        n_iters=n_iters,
        converged=converged,
    )
