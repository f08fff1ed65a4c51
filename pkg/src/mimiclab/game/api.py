"""HTTP and WebSocket surface of the imitation game.

Endpoints::

    GET  /api/health                        liveness probe
    GET  /api/config                        attempts per round, mode, countdown
    POST /api/sessions                      create a session (group policy)
    POST /api/sessions/{sid}/rounds         start the next round
    POST /api/rounds/{rid}/attempts         submit one captured frame
    GET  /api/sessions/{sid}/history        resume: everything scored so far
    GET  /api/targets                       operator: list catalog entries
    POST /api/targets                       operator: ingest a new target
    WS   /api/ws                            attempt submission, same payloads

Information hiding: player-facing payloads never carry a target AU set.  A
round-start payload holds only the target image and its emotion label; for
control sessions the attempt payload carries the score alone (empty
prescription and AU lists), matching a study protocol where that group
receives no corrective feedback.
"""

from __future__ import annotations

import base64
import binascii

from fastapi import FastAPI, Request, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from ..core import BadImage, BadLandmarks, Emotion, GrayImage, LandmarkSet, MimicLabError, au_codes
from .engine import (CONTROL, AttemptResult, CatalogError, EmptyTargetAuSet,
                     GameEngine, PipelineError, RoundExhausted, RoundState,
                     SessionComplete, UnknownRound, UnknownSession,
                     UnknownTarget)

_STATUS = {
    UnknownSession: 404,
    UnknownRound: 404,
    UnknownTarget: 404,
    SessionComplete: 409,
    RoundExhausted: 409,
    PipelineError: 422,
    EmptyTargetAuSet: 422,
    CatalogError: 409,
    BadLandmarks: 422,
    BadImage: 422,
}

_CODES = {
    UnknownSession: "unknown_session",
    UnknownRound: "unknown_round",
    UnknownTarget: "unknown_target",
    SessionComplete: "session_complete",
    RoundExhausted: "round_exhausted",
    PipelineError: "pipeline_error",
    EmptyTargetAuSet: "empty_target_au_set",
    CatalogError: "catalog_error",
    BadLandmarks: "bad_landmarks",
    BadImage: "bad_image",
}


def _error_payload(exc: MimicLabError) -> tuple[int, dict]:
    status = _STATUS.get(type(exc), 400)
    code = _CODES.get(type(exc), "bad_request")
    return status, {"error": code, "detail": str(exc)}


class CreateSessionBody(BaseModel):
    group_policy: str = "alternating"
    group: str | None = None
    player_meta: dict | None = None


class AttemptBody(BaseModel):
    frame: str = Field(description="base64-encoded image (PNG or JPEG)")
    landmarks: list[list[float]] = Field(description="68 [x, y] pairs")
    captured_at: str | None = None
    client_capture_ms: int | None = None


class IngestTargetBody(BaseModel):
    image: str = Field(description="base64-encoded image")
    landmarks: list[list[float]]
    emotion: str
    target_id: str | None = None


def _decode_b64(text: str, what: str) -> bytes:
    try:
        return base64.b64decode(text.encode("ascii"), validate=True)
    except (binascii.Error, UnicodeEncodeError) as exc:
        raise BadImage(f"{what}: invalid base64 payload") from exc


def _round_payload(state: RoundState, attempts_per_round: int, countdown: int) -> dict:
    return {
        "round_id": state.round_id,
        "round_index": state.round_index,
        "emotion": state.target.emotion.label,
        "target_image": base64.b64encode(state.target.image.to_png_bytes()).decode("ascii"),
        "attempts_remaining": attempts_per_round - len(state.attempts),
        "countdown_seconds": countdown,
    }


def _attempt_payload(result: AttemptResult, group: str) -> dict:
    """Wire form of an attempt outcome.

    Control sessions receive the score alone; the AU breakdown and the
    prescriptions are emptied so nothing about the target leaks to a group
    that is supposed to play unaided.
    """
    if group == CONTROL:
        correct, spurious, missing, prescriptions = [], [], [], []
    else:
        correct = au_codes(result.correct)
        spurious = au_codes(result.spurious)
        missing = au_codes(result.missing)
        prescriptions = [
            {"au": p.au.code, "polarity": p.polarity, "region": p.region, "text": p.text}
            for p in result.prescriptions
        ]
    return {
        "attempt_index": result.attempt_index,
        "score": result.score,
        "correct": correct,
        "spurious": spurious,
        "missing": missing,
        "prescriptions": prescriptions,
        "retry_allowed": result.retry_allowed,
        "attempts_remaining": result.attempts_remaining,
    }


def _run_attempt(engine: GameEngine, round_id: str, body: AttemptBody) -> dict:
    frame = GrayImage.from_bytes(_decode_b64(body.frame, "frame"))
    landmarks = LandmarkSet(body.landmarks)
    result = engine.submit_attempt(
        round_id,
        frame,
        landmarks,
        captured_at=body.captured_at,
        client_capture_ms=body.client_capture_ms,
    )
    group = engine.get_session(engine.get_round(round_id).session_id).group
    return _attempt_payload(result, group)


def create_app(engine: GameEngine, countdown_seconds: int = 5) -> FastAPI:
    app = FastAPI(title="mimiclab game service")

    @app.exception_handler(MimicLabError)
    async def _domain_error(request: Request, exc: MimicLabError):
        status, payload = _error_payload(exc)
        return JSONResponse(status_code=status, content=payload)

    @app.get("/api/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.get("/api/config")
    def config() -> dict:
        return {
            "mode": engine.mode,
            "attempts_per_round": engine.attempts_per_round,
            "countdown_seconds": countdown_seconds,
        }

    @app.post("/api/sessions")
    def create_session(body: CreateSessionBody) -> dict:
        session = engine.create_session(
            policy=body.group_policy, group=body.group, player_meta=body.player_meta)
        return {
            "session_id": session.session_id,
            "group": session.group,
            "mode": session.mode,
            "attempts_per_round": engine.attempts_per_round,
        }

    @app.post("/api/sessions/{session_id}/rounds")
    def start_round(session_id: str) -> dict:
        state = engine.start_round(session_id)
        return _round_payload(state, engine.attempts_per_round, countdown_seconds)

    @app.post("/api/rounds/{round_id}/attempts")
    def submit_attempt(round_id: str, body: AttemptBody) -> dict:
        return _run_attempt(engine, round_id, body)

    @app.get("/api/sessions/{session_id}/history")
    def history(session_id: str) -> dict:
        return engine.session_history(session_id)

    @app.get("/api/targets")
    def list_targets() -> list[dict]:
        return [t.summary() for t in engine.targets()]

    @app.post("/api/targets")
    def ingest_target(body: IngestTargetBody) -> dict:
        image = GrayImage.from_bytes(_decode_b64(body.image, "image"))
        landmarks = LandmarkSet(body.landmarks)
        entry = engine.ingest_target(
            image, landmarks, Emotion.from_label(body.emotion), target_id=body.target_id)
        return entry.summary()

    @app.websocket("/api/ws")
    async def websocket(ws: WebSocket):
        await ws.accept()
        try:
            while True:
                message = await ws.receive_json()
                action = message.get("action")
                if action == "ping":
                    await ws.send_json({"type": "pong"})
                    continue
                if action != "attempt":
                    await ws.send_json({"type": "error", "error": "bad_request",
                                        "detail": f"unknown action {action!r}"})
                    continue
                try:
                    body = AttemptBody(
                        frame=message.get("frame", ""),
                        landmarks=message.get("landmarks", []),
                        captured_at=message.get("captured_at"),
                        client_capture_ms=message.get("client_capture_ms"),
                    )
                    payload = _run_attempt(engine, message.get("round_id", ""), body)
                except MimicLabError as exc:
                    _, err = _error_payload(exc)
                    await ws.send_json({"type": "error", **err})
                    continue
                except Exception:
                    await ws.send_json({"type": "error", "error": "bad_request",
                                        "detail": "malformed attempt message"})
                    continue
                await ws.send_json({"type": "attempt_result", **payload})
        except WebSocketDisconnect:
            return

    return app
