"""HTTP JSON API over the session service.

Endpoints:
  POST /sessions                          create (body: session config)
  GET  /sessions/{id}                     status view
  GET  /sessions/{id}/next                issue the next trial
  POST /sessions/{id}/observations        record {seq, token, t_ms}
  POST /sessions/{id}/finalize            final decision footer
  GET  /sessions/{id}/stats               live sequential state

Responses for unanswered trials never include the ground-truth stimulus.
"""

from __future__ import annotations

from typing import List, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .core import format_qualia, parse_qualia
from .errors import (
    CalibrationChannelConflict,
    CalibrationFailed,
    DuplicateObservation,
    ForbiddenRuleInSimulation,
    IncompleteSession,
    InvalidObservation,
    MalformedRule,
    ParseError,
    SessionComplete,
    UnknownSeq,
    UnknownSession,
)
from .session import Session, SessionConfig, SessionStore


class SessionRequest(BaseModel):
    experiment: str
    planned_n: int = Field(ge=1)
    alpha: float = 0.05
    stimulus_rate: float = 1.0
    mode: str = "SIMULATED"
    seed: int = 0
    rule_texts: List[str] = []
    lottery_k: int = 10
    calibration_tolerance: float = 0.005
    reader_history: List[str] = []


class ObservationRequest(BaseModel):
    seq: int
    token: str
    t_ms: int


_CLIENT_ERRORS = (
    ValueError,
    ParseError,
    MalformedRule,
    InvalidObservation,
    DuplicateObservation,
    UnknownSeq,
    SessionComplete,
    IncompleteSession,
    ForbiddenRuleInSimulation,
    CalibrationChannelConflict,
)


def create_app(store: Optional[SessionStore] = None) -> FastAPI:
    app = FastAPI(title="worldlines session service")
    app.state.store = store or SessionStore()

    def _get(session_id: str) -> Session:
        try:
            return app.state.store.get(session_id)
        except UnknownSession as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    @app.post("/sessions", status_code=201)
    def create_session(body: SessionRequest):
        try:
            config = SessionConfig(
                experiment=body.experiment,
                planned_n=body.planned_n,
                alpha=body.alpha,
                stimulus_rate=body.stimulus_rate,
                mode=body.mode,
                seed=body.seed,
                rule_texts=tuple(body.rule_texts),
                lottery_k=body.lottery_k,
                calibration_tolerance=body.calibration_tolerance,
                reader_history=tuple(parse_qualia(t) for t in body.reader_history),
            )
            session = app.state.store.create(config)
        except _CLIENT_ERRORS as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        except CalibrationFailed as exc:
            raise HTTPException(status_code=503, detail=str(exc))
        return {"session_id": session.id}

    @app.get("/sessions/{session_id}")
    def session_view(session_id: str):
        return _get(session_id).live_view()

    @app.get("/sessions/{session_id}/next")
    def next_trial(session_id: str):
        session = _get(session_id)
        try:
            record = session.next_stimulus()
        except (SessionComplete, ForbiddenRuleInSimulation) as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        # isolation contract: the ground-truth stimulus stays server-side;
        # the client gets only what the reader is meant to experience.
        return {
            "seq": record.seq,
            "scheduled_at_ms": record.scheduled_at_ms,
            "render_token": format_qualia(record.delivered_qualia),
            "prelude_tokens": [format_qualia(q) for q in record.prelude],
        }

    @app.post("/sessions/{session_id}/observations")
    def record_observation(session_id: str, body: ObservationRequest):
        session = _get(session_id)
        try:
            token = parse_qualia(body.token)
            return session.record_observation(body.seq, token, body.t_ms)
        except _CLIENT_ERRORS as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.post("/sessions/{session_id}/finalize")
    def finalize(session_id: str):
        session = _get(session_id)
        try:
            return session.finalize()
        except IncompleteSession as exc:
            raise HTTPException(status_code=409, detail=str(exc))

    @app.get("/sessions/{session_id}/stats")
    def live_stats(session_id: str):
        session = _get(session_id)
        seq_state = session.sequential
        return {
            "observed": seq_state.observed,
            "planned_n": seq_state.planned_n,
            "tally": {format_qualia(t): n for t, n in seq_state.counts.items()},
            "heads": seq_state.heads,
            "p_value": seq_state.p_value if seq_state.observed else None,
            "advisory": seq_state.advisory,
        }

    return app


app = create_app()
