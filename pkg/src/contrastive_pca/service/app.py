"""FastAPI service wrapping the package workflows.

File-centric endpoints mirror the CLI commands (the service reads and
writes paths on its own filesystem), and a small session API exposes the
streaming learner for long-running use: create a session, feed labeled
samples in batches, snapshot the learned subspace or a restorable
checkpoint at any point.
"""

import threading

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..data import LabeledSample
from ..online import OnlineState, extract_subspace, init_state, step
from ..workflows import (
    error_kind,
    run_eval,
    run_fit,
    run_gen,
    run_plot,
    run_stream_cmd,
    run_sweep,
)
from . import schemas

STATUS_BY_KIND = {"usage": 400, "io": 404, "domain": 409}


def _http_error(exc):
    kind = error_kind(exc)
    return HTTPException(
        status_code=STATUS_BY_KIND[kind], detail={"kind": kind, "message": str(exc)}
    )


class SessionStore:
    """In-memory streaming sessions; one lock per session (single writer)."""

    def __init__(self):
        self._lock = threading.Lock()
        self._sessions = {}
        self._counter = 0

    def create(self, state):
        with self._lock:
            self._counter += 1
            sid = f"s{self._counter}"
            self._sessions[sid] = (state, threading.Lock())
        return sid

    def get(self, sid):
        with self._lock:
            entry = self._sessions.get(sid)
        if entry is None:
            raise HTTPException(
                status_code=404,
                detail={"kind": "io", "message": f"no such session {sid!r}"},
            )
        return entry

    def delete(self, sid):
        with self._lock:
            if sid not in self._sessions:
                raise HTTPException(
                    status_code=404,
                    detail={"kind": "io", "message": f"no such session {sid!r}"},
                )
            del self._sessions[sid]


def _session_info(sid, state):
    return schemas.SessionInfo(
        session_id=sid,
        d=state.d,
        k=state.k,
        beta=state.beta,
        eta=state.eta,
        tau=state.tau,
        t=state.t,
        p=state.p,
    )


def create_app():
    app = FastAPI(title="contrastive-pca", version=__version__)
    store = SessionStore()

    @app.get("/healthz", response_model=schemas.HealthResponse)
    def healthz():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/gen", response_model=schemas.GenResponse)
    def gen(req: schemas.GenRequest):
        try:
            return schemas.GenResponse(**run_gen(**req.model_dump()))
        except Exception as e:
            raise _http_error(e) from e

    @app.post("/fit", response_model=schemas.FitResponse)
    def fit_cmd(req: schemas.FitRequest):
        try:
            return schemas.FitResponse(**run_fit(**req.model_dump()))
        except Exception as e:
            raise _http_error(e) from e

    @app.post("/stream", response_model=schemas.StreamResponse)
    def stream_cmd(req: schemas.StreamRequest):
        try:
            return schemas.StreamResponse(**run_stream_cmd(**req.model_dump()))
        except Exception as e:
            raise _http_error(e) from e

    @app.post("/sweep", response_model=schemas.SweepResponse)
    def sweep_cmd(req: schemas.SweepRequest):
        try:
            return schemas.SweepResponse(**run_sweep(**req.model_dump()))
        except Exception as e:
            raise _http_error(e) from e

    @app.post("/eval", response_model=schemas.EvalResponse)
    def eval_cmd(req: schemas.EvalRequest):
        try:
            return schemas.EvalResponse(**run_eval(**req.model_dump()))
        except Exception as e:
            raise _http_error(e) from e

    @app.post("/plot", response_model=schemas.PlotResponse)
    def plot_cmd(req: schemas.PlotRequest):
        try:
            return schemas.PlotResponse(**run_plot(**req.model_dump()))
        except Exception as e:
            raise _http_error(e) from e

    @app.post("/sessions", response_model=schemas.SessionInfo)
    def create_session(req: schemas.SessionCreateRequest):
        try:
            state = init_state(
                req.d, req.k, req.beta, req.eta, req.tau, req.seed, lr_decay=req.lr_decay
            )
        except ValueError as e:
            # bad hyper-parameters, not a data problem
            raise HTTPException(
                status_code=400, detail={"kind": "usage", "message": str(e)}
            ) from e
        except Exception as e:
            raise _http_error(e) from e
        sid = store.create(state)
        return _session_info(sid, state)

    @app.post("/sessions/restore", response_model=schemas.SessionInfo)
    def restore_session(checkpoint: dict):
        try:
            state = OnlineState.from_dict(checkpoint)
        except Exception as e:
            raise _http_error(e) from e
        sid = store.create(state)
        return _session_info(sid, state)

    @app.get("/sessions/{sid}", response_model=schemas.SessionInfo)
    def session_info(sid: str):
        state, _ = store.get(sid)
        return _session_info(sid, state)

    @app.post("/sessions/{sid}/samples", response_model=schemas.FeedResponse)
    def feed(sid: str, req: schemas.FeedRequest):
        state, lock = store.get(sid)
        if not req.samples:
            raise HTTPException(
                status_code=400,
                detail={"kind": "usage", "message": "need at least one sample"},
            )
        with lock:
            try:
                for s in req.samples:
                    _, out = step(state, LabeledSample(x=s.x, delta=s.delta))
            except Exception as e:
                raise _http_error(e) from e
            return schemas.FeedResponse(
                session_id=sid, t=state.t, p=state.p, last_z=[float(v) for v in out.z]
            )

    @app.get("/sessions/{sid}/subspace", response_model=schemas.SubspaceResponse)
    def subspace(sid: str):
        state, lock = store.get(sid)
        with lock:
            try:
                model = extract_subspace(state)
            except Exception as e:
                raise _http_error(e) from e
        return schemas.SubspaceResponse(
            method=model.config.method,
            contrast=model.config.contrast,
            d=model.dim,
            k=model.k,
            values=[float(v) for v in model.values],
            basis=[[float(x) for x in model.basis[:, j]] for j in range(model.k)],
        )

    @app.get("/sessions/{sid}/checkpoint")
    def checkpoint(sid: str):
        state, lock = store.get(sid)
        with lock:
            return state.to_dict()

    @app.delete("/sessions/{sid}")
    def delete_session(sid: str):
        store.delete(sid)
        return {"deleted": sid}

    return app


app = create_app()
