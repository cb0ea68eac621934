"""Streaming contrastive PCA with local update rules.

The learner keeps feedforward weights W (k, d) and lateral weights M
(k, k, positive definite). For each labeled sample it resolves the output
in closed form, z = delta * M^-1 W x (the equilibrium of the recurrent
dynamics dz = delta*c - M z, with c = W x), then applies rank-1 updates:

    W <- W + 2*eta*(z - beta*((1-delta)/p)*c) x' - 2*eta*(1-beta)*W
    M <- M + (eta/tau)*(z z' - M)

where p is a running estimate of the negative-sample fraction. The
(1-delta)/p factor makes negative samples stand in for the background
second moment, so in expectation the updates match the batch descent-
ascent solver with B = (1-beta)*I + beta*C_neg. Only positive samples
produce a non-trivial output.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, StreamError
from .linalg import _fix_signs, subspace_alignment
from .offline import ContrastConfig, SubspaceModel

STATE_FORMAT = "cpca-state/1"


@dataclass
class OnlineState:
    """Mutable learner state; single writer per stream."""

    w: np.ndarray
    m: np.ndarray
    p: float
    t: int
    beta: float
    eta: float
    tau: float
    seed: int
    lr_decay: bool = False

    @property
    def d(self):
        return self.w.shape[1]

    @property
    def k(self):
        return self.w.shape[0]

    def to_dict(self):
        return {
            "format": STATE_FORMAT,
            "d": int(self.d),
            "k": int(self.k),
            "beta": self.beta,
            "eta": self.eta,
            "tau": self.tau,
            "p": self.p,
            "t": int(self.t),
            "w": [[float(v) for v in row] for row in self.w],
            "m": [[float(v) for v in row] for row in self.m],
            "seed": int(self.seed),
            "lr_decay": bool(self.lr_decay),
        }

    @classmethod
    def from_dict(cls, doc):
        if doc.get("format") != STATE_FORMAT:
            raise ValueError(f"not a state checkpoint: format={doc.get('format')!r}")
        return cls(
            w=np.array(doc["w"], dtype=float),
            m=np.array(doc["m"], dtype=float),
            p=float(doc["p"]),
            t=int(doc["t"]),
            beta=float(doc["beta"]),
            eta=float(doc["eta"]),
            tau=float(doc["tau"]),
            seed=int(doc["seed"]),
            lr_decay=bool(doc.get("lr_decay", False)),
        )

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class StepOutput:
    """Per-sample network output: z is zero exactly when the sample is negative."""

    z: np.ndarray
    c: np.ndarray
    accepted: bool


def init_state(d, k, beta, eta, tau, seed, lr_decay=False):
    """Fresh state: W ~ Gaussian(0, 1/d) entries, M = I, p = 0.5, t = 0."""
    if not 1 <= k < d:
        raise ValueError(f"k must satisfy 1 <= k < d={d}, got {k}")
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must be in [0, 1], got {beta}")
    if not 0.0 < eta < tau:
        raise ValueError(
            f"step size must lie in the open interval (0, tau): got eta={eta}, tau={tau}"
        )
    rng = np.random.default_rng(seed)
    w = rng.normal(0.0, 1.0 / np.sqrt(d), size=(k, d))
    return OnlineState(
        w=w, m=np.eye(k), p=0.5, t=0, beta=beta, eta=eta, tau=tau,
        seed=seed, lr_decay=lr_decay,
    )


def update_p(state, delta):
    """Advance the running negative-fraction estimate:

    p_t = p_{t-1} + (1/t) * (1 - delta_t - p_{t-1})
    """
    state.t += 1
    state.p += (1.0 - delta - state.p) / state.t
    return state


def output(state, x, delta):
    """Equilibrium response to one input: c = W x and z = delta * M^-1 c."""
    c = state.w @ x
    if delta:
        try:
            z = np.linalg.solve(state.m, c)
        except np.linalg.LinAlgError as e:
            raise DivergenceError(f"lateral weights are singular: {e}") from e
    else:
        z = np.zeros_like(c)
    return StepOutput(z=z, c=c, accepted=bool(delta))


def step(state, sample):
    """Consume one labeled sample: update p, compute the output, update weights."""
    x = np.asarray(sample.x, dtype=float)
    if x.shape != (state.d,):
        raise ValueError(f"sample has shape {x.shape}, state expects ({state.d},)")
    delta = int(sample.delta)

    update_p(state, delta)
    if delta == 0:
        # a negative sample contributes 1/t to p, so p > 0 here
        assert state.p > 0.0
    out = output(state, x, delta)

    eta = state.eta / state.t if state.lr_decay else state.eta
    if delta:
        coef = out.z
    else:
        coef = -(state.beta / state.p) * out.c
    state.w += 2.0 * eta * np.outer(coef, x) - (2.0 * eta * (1.0 - state.beta)) * state.w
    m = state.m + (eta / state.tau) * (np.outer(out.z, out.z) - state.m)
    state.m = 0.5 * (m + m.T)

    if not (np.all(np.isfinite(state.w)) and np.all(np.isfinite(state.m))):
        raise DivergenceError(f"non-finite weights at step {state.t}; reduce eta")
    if np.linalg.eigvalsh(state.m)[0] <= 1e-12:
        raise DivergenceError(
            f"lateral weights lost positive definiteness at step {state.t}; reduce eta"
        )
    return state, out


def extract_subspace(state):
    """Learned projection subspace: orthonormalized row space of F = M^-1 W.

    Positive samples map to z = F x, so the row space of F is the subspace
    the learner projects onto. Reported values are the singular values of
    F, descending.
    """
    if state.t < 1:
        raise ValueError("state has consumed no samples")
    f = np.linalg.solve(state.m, state.w)
    u, sv, vt = np.linalg.svd(f, full_matrices=False)
    if sv[-1] <= 1e-10 * sv[0]:
        raise ValueError(
            f"learned map is rank deficient (singular values {sv[0]:.3e} .. {sv[-1]:.3e})"
        )
    basis = _fix_signs(vt.T)
    config = ContrastConfig(
        method="cpca-star-online", contrast=state.beta, k=state.k,
    )
    return SubspaceModel(basis=basis, values=sv.copy(), config=config, dim=state.d)


@dataclass
class StreamTrace:
    """Recorded trajectory of a streaming run."""

    steps: np.ndarray
    alignments: np.ndarray
    p_values: np.ndarray


def run_stream(state, samples, record_every=100, oracle=None):
    """Feed samples through step() in order, recording an alignment trajectory.

    When ``oracle`` (a SubspaceModel) is given, the alignment of the
    learned subspace against it is recorded every ``record_every`` steps
    and at the final step; without an oracle the alignment slot is NaN.
    Step failures are re-raised as StreamError with the failing index.
    """
    oracle_basis = oracle.basis if oracle is not None else None
    steps = []
    aligns = []
    ps = []

    def record():
        steps.append(state.t)
        if oracle_basis is not None:
            aligns.append(subspace_alignment(extract_subspace(state).basis, oracle_basis))
        else:
            aligns.append(float("nan"))
        ps.append(state.p)

    for i, sample in enumerate(samples):
        try:
            step(state, sample)
        except Exception as e:
            raise StreamError(i, e) from e
        if state.t % record_every == 0:
            record()
    if state.t > 0 and (not steps or steps[-1] != state.t):
        record()
    return state, StreamTrace(
        steps=np.array(steps, dtype=int),
        alignments=np.array(aligns, dtype=float),
        p_values=np.array(ps, dtype=float),
    )
