"""Session, round, and attempt lifecycle for the imitation game.

A session belongs to a study group (control or treatment).  In experiment
mode it consists of exactly six rounds, one per emotion, in a seeded random
order fixed at session creation; each round allows up to a configured number
of scored attempts (five by default).  Control sessions only ever see their
score; treatment sessions additionally get prescriptions.

All state mutation is serialized behind one lock; the feature pipeline for an
attempt runs outside it, so concurrent attempts from different sessions
overlap.  Every event is appended to the store as it happens, and an engine
can rebuild its complete state from a store directory (``load_existing``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
import threading

import numpy as np

from ..core import (AuSet, Emotion, GrayImage, LandmarkSet, MimicLabError,
                    RoundRecord, TargetEntry, format_utc, parse_utc, utc_now)
from ..detector import AuModel, detect_aus
from ..explain import AuDictionary, Prescription, diff, prescribe, score
from ..features import extract_features
from .store import RecordStore

CONTROL = "control"
TREATMENT = "treatment"
GROUPS = (CONTROL, TREATMENT)

POLICIES = ("explicit", "alternating", "seeded-random")
MODES = ("experiment", "free")

OPEN = "open"
EXHAUSTED = "exhausted"
CLOSED = "closed"

EXPERIMENT_ROUNDS = len(Emotion)  # one round per emotion


class UnknownSession(MimicLabError):
    pass


class UnknownRound(MimicLabError):
    pass


class UnknownTarget(MimicLabError):
    pass


class SessionComplete(MimicLabError):
    """No further rounds may start in this session."""


class RoundExhausted(MimicLabError):
    """The round has used all of its attempts (or was closed)."""


class EmptyTargetAuSet(MimicLabError):
    """A target on which the detector finds nothing cannot be scored."""


class CatalogError(MimicLabError):
    """The target catalog cannot support the requested mode."""


class PipelineError(MimicLabError):
    """Feature extraction or detection failed; the attempt was not counted."""


@dataclass
class RoundState:
    round_id: str
    session_id: str
    round_index: int  # 1-based within the session
    target: TargetEntry
    started_at: datetime
    attempts: list[RoundRecord] = field(default_factory=list)
    status: str = OPEN

    def snapshot(self) -> dict:
        return {
            "round_id": self.round_id,
            "round_index": self.round_index,
            "target_id": self.target.target_id,
            "emotion": int(self.target.emotion),
            "emotion_label": self.target.emotion.label,
            "status": self.status,
            "attempts": [
                {
                    "attempt_index": r.attempt_index,
                    "score": r.score,
                    "captured_at": format_utc(r.captured_at),
                }
                for r in self.attempts
            ],
        }


@dataclass
class Session:
    session_id: str
    ordinal: int
    group: str
    policy: str
    mode: str
    created_at: datetime
    emotion_order: tuple[Emotion, ...] | None  # experiment mode only
    player_meta: dict | None = None
    rounds: list[RoundState] = field(default_factory=list)


@dataclass(frozen=True)
class AttemptResult:
    """Outcome of one scored attempt.

    ``prescriptions`` is empty exactly when the session is in the control
    group or the player already matches the target.  ``retry_allowed`` only
    depends on remaining attempt capacity, never on the score.
    """

    record: RoundRecord
    attempt_index: int
    score: float
    correct: AuSet
    spurious: AuSet
    missing: AuSet
    prescriptions: tuple[Prescription, ...]
    retry_allowed: bool
    attempts_remaining: int


class GameEngine:
    def __init__(
        self,
        model: AuModel,
        dictionary: AuDictionary,
        store: RecordStore,
        attempts_per_round: int = 5,
        mode: str = "experiment",
        seed: int = 0,
        out_size: int = 112,
        keep_frames: bool = True,
    ):
        if mode not in MODES:
            raise MimicLabError(f"unknown mode {mode!r}")
        if attempts_per_round < 1:
            raise MimicLabError("attempts_per_round must be at least 1")
        self.model = model
        self.dictionary = dictionary
        self.store = store
        self.attempts_per_round = attempts_per_round
        self.mode = mode
        self.seed = seed
        self.out_size = out_size
        self.keep_frames = keep_frames

        self._lock = threading.RLock()
        self._targets: dict[str, TargetEntry] = {}
        self._sessions: dict[str, Session] = {}
        self._rounds: dict[str, RoundState] = {}
        self._session_count = 0

    # -- targets ----------------------------------------------------------

    def add_target(self, entry: TargetEntry) -> None:
        with self._lock:
            if entry.target_id in self._targets:
                raise MimicLabError(f"duplicate target id {entry.target_id!r}")
            if not entry.au_set:
                raise EmptyTargetAuSet(f"target {entry.target_id!r} has an empty AU set")
            self._targets[entry.target_id] = entry

    def ingest_target(
        self,
        image: GrayImage,
        landmarks: LandmarkSet,
        emotion: Emotion,
        target_id: str | None = None,
        color_ref: str | None = None,
    ) -> TargetEntry:
        """Detect the AU set on a candidate target and add it to the catalog.

        Targets whose detected AU set is empty are rejected: they could never
        be scored against.
        """
        features = extract_features(image, landmarks, out_size=self.out_size)
        aus = detect_aus(self.model, features)
        if not aus:
            raise EmptyTargetAuSet("no action units detected on the candidate target")
        with self._lock:
            tid = target_id or f"target-{len(self._targets):04d}"
            entry = TargetEntry(tid, emotion, aus, image, landmarks, color_ref)
            self.add_target(entry)
        return entry

    def targets(self) -> list[TargetEntry]:
        with self._lock:
            return [self._targets[k] for k in sorted(self._targets)]

    def get_target(self, target_id: str) -> TargetEntry:
        with self._lock:
            try:
                return self._targets[target_id]
            except KeyError:
                raise UnknownTarget(f"unknown target {target_id!r}") from None

    def validate_experiment_catalog(self) -> None:
        covered = {t.emotion for t in self._targets.values()}
        missing = [e.label for e in Emotion if e not in covered]
        if missing:
            raise CatalogError(f"experiment mode needs a target per emotion; "
                               f"missing {missing}")

    # -- sessions ---------------------------------------------------------

    def _assign_group(self, policy: str, group: str | None, ordinal: int) -> str:
        if policy == "explicit":
            if group not in GROUPS:
                raise MimicLabError("explicit policy requires group "
                                    f"'{CONTROL}' or '{TREATMENT}'")
            return group
        if group is not None:
            raise MimicLabError(f"policy {policy!r} does not accept an explicit group")
        if policy == "alternating":
            return GROUPS[ordinal % 2]
        if policy == "seeded-random":
            rng = np.random.Generator(np.random.PCG64(
                np.random.SeedSequence((self.seed, ordinal, 1))))
            return GROUPS[int(rng.integers(2))]
        raise MimicLabError(f"unknown group policy {policy!r}")

    def _emotion_order(self, ordinal: int) -> tuple[Emotion, ...]:
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence((self.seed, ordinal, 2))))
        return tuple(Emotion(int(i)) for i in rng.permutation(len(Emotion)))

    def create_session(
        self,
        policy: str = "alternating",
        group: str | None = None,
        player_meta: dict | None = None,
    ) -> Session:
        if policy not in POLICIES:
            raise MimicLabError(f"unknown group policy {policy!r}")
        with self._lock:
            ordinal = self._session_count
            assigned = self._assign_group(policy, group, ordinal)
            order = self._emotion_order(ordinal) if self.mode == "experiment" else None
            session = Session(
                session_id=f"s{ordinal:06d}",
                ordinal=ordinal,
                group=assigned,
                policy=policy,
                mode=self.mode,
                created_at=utc_now(),
                emotion_order=order,
                player_meta=player_meta,
            )
            self._session_count += 1
            self._sessions[session.session_id] = session
            self.store.append_session({
                "session_id": session.session_id,
                "ordinal": ordinal,
                "group": assigned,
                "policy": policy,
                "mode": self.mode,
                "created_at": format_utc(session.created_at),
                "emotion_order": [int(e) for e in order] if order else None,
                "player_meta": player_meta,
            })
            return session

    def get_session(self, session_id: str) -> Session:
        with self._lock:
            try:
                return self._sessions[session_id]
            except KeyError:
                raise UnknownSession(f"unknown session {session_id!r}") from None

    # -- rounds -----------------------------------------------------------

    def _pick_target(self, session: Session) -> TargetEntry:
        round_ordinal = len(session.rounds)  # 0-based index of the new round
        ids = sorted(self._targets)
        if not ids:
            raise CatalogError("target catalog is empty")
        if session.mode == "experiment":
            emotion = session.emotion_order[round_ordinal]
            pool = [i for i in ids if self._targets[i].emotion == emotion]
            if not pool:
                raise CatalogError(f"no target for emotion {emotion.label!r}")
            return self._targets[pool[session.ordinal % len(pool)]]
        return self._targets[ids[round_ordinal % len(ids)]]

    def start_round(self, session_id: str) -> RoundState:
        """Open the next round; any still-open previous round is closed."""
        with self._lock:
            session = self.get_session(session_id)
            if session.mode == "experiment" and len(session.rounds) >= EXPERIMENT_ROUNDS:
                raise SessionComplete(
                    f"session {session_id} already played its "
                    f"{EXPERIMENT_ROUNDS} rounds")
            if session.rounds and session.rounds[-1].status == OPEN:
                session.rounds[-1].status = CLOSED
            target = self._pick_target(session)
            index = len(session.rounds) + 1
            state = RoundState(
                round_id=f"{session_id}-r{index}",
                session_id=session_id,
                round_index=index,
                target=target,
                started_at=utc_now(),
            )
            session.rounds.append(state)
            self._rounds[state.round_id] = state
            self.store.append_round({
                "round_id": state.round_id,
                "session_id": session_id,
                "round_index": index,
                "target_id": target.target_id,
                "emotion": int(target.emotion),
                "started_at": format_utc(state.started_at),
            })
            return state

    def get_round(self, round_id: str) -> RoundState:
        with self._lock:
            try:
                return self._rounds[round_id]
            except KeyError:
                raise UnknownRound(f"unknown round {round_id!r}") from None

    # -- attempts ---------------------------------------------------------

    def submit_attempt(
        self,
        round_id: str,
        frame: GrayImage,
        landmarks: LandmarkSet,
        captured_at: datetime | str | None = None,
        client_capture_ms: int | None = None,
    ) -> AttemptResult:
        """Score one captured frame against the round's target.

        Runs the feature pipeline outside the engine lock, then records the
        attempt.  Pipeline failures are logged and raised as PipelineError
        without consuming an attempt.  Client timestamps are stored verbatim
        but never affect acceptance or scoring.
        """
        state = self.get_round(round_id)  # raises UnknownRound early
        session = self.get_session(state.session_id)
        try:
            features = extract_features(frame, landmarks, out_size=self.out_size)
            player_aus = detect_aus(self.model, features)
        except MimicLabError as exc:
            self.store.append_error({
                "type": "pipeline_error",
                "round_id": round_id,
                "session_id": state.session_id,
                "error": type(exc).__name__,
                "detail": str(exc),
                "at": format_utc(utc_now()),
            })
            raise PipelineError(f"attempt not counted: {exc}") from exc

        received = utc_now()
        if captured_at is None:
            captured = received
        elif isinstance(captured_at, str):
            captured = parse_utc(captured_at)
        else:
            captured = captured_at

        with self._lock:
            if state.status != OPEN:
                raise RoundExhausted(f"round {round_id} is {state.status}")
            if len(state.attempts) >= self.attempts_per_round:
                raise RoundExhausted(f"round {round_id} already used its "
                                     f"{self.attempts_per_round} attempts")
            target_aus = state.target.au_set
            attempt_score = score(player_aus, target_aus)
            d = diff(player_aus, target_aus)
            if session.group == TREATMENT:
                plist = tuple(prescribe(player_aus, target_aus, self.dictionary))
            else:
                plist = ()
            attempt_index = len(state.attempts) + 1
            record_id = f"{round_id}-a{attempt_index}"
            frame_ref = f"frames/{record_id}.png" if self.keep_frames else None
            record = RoundRecord(
                record_id=record_id,
                session_id=state.session_id,
                round_id=round_id,
                target_id=state.target.target_id,
                group=session.group,
                emotion=state.target.emotion,
                attempt_index=attempt_index,
                player_aus=player_aus,
                target_aus=target_aus,
                score=attempt_score,
                prescriptions_shown=bool(plist),
                frame_ref=frame_ref,
                captured_at=captured,
                received_at=received,
                client_capture_ms=client_capture_ms,
            )
            self.store.append_record(
                record, frame.to_png_bytes() if self.keep_frames else None)
            state.attempts.append(record)
            if len(state.attempts) >= self.attempts_per_round:
                state.status = EXHAUSTED
            remaining = self.attempts_per_round - len(state.attempts)
            return AttemptResult(
                record=record,
                attempt_index=attempt_index,
                score=attempt_score,
                correct=d.correct,
                spurious=d.spurious,
                missing=d.missing,
                prescriptions=plist,
                retry_allowed=remaining > 0,
                attempts_remaining=remaining,
            )

    # -- history & recovery -----------------------------------------------

    def session_history(self, session_id: str) -> dict:
        with self._lock:
            session = self.get_session(session_id)
            return {
                "session_id": session.session_id,
                "group": session.group,
                "mode": session.mode,
                "created_at": format_utc(session.created_at),
                "rounds": [r.snapshot() for r in session.rounds],
            }

    def load_existing(self) -> int:
        """Rebuild sessions, rounds, and attempts from the store.

        Targets are not persisted in the store and must be registered before
        calling this.  Returns the number of sessions restored.
        """
        with self._lock:
            for s in self.store.iter_sessions():
                order = s.get("emotion_order")
                session = Session(
                    session_id=s["session_id"],
                    ordinal=int(s["ordinal"]),
                    group=s["group"],
                    policy=s["policy"],
                    mode=s["mode"],
                    created_at=parse_utc(s["created_at"]),
                    emotion_order=tuple(Emotion(i) for i in order) if order else None,
                    player_meta=s.get("player_meta"),
                )
                self._sessions[session.session_id] = session
                self._session_count = max(self._session_count, session.ordinal + 1)
            for r in self.store.iter_rounds():
                session = self._sessions[r["session_id"]]
                state = RoundState(
                    round_id=r["round_id"],
                    session_id=r["session_id"],
                    round_index=int(r["round_index"]),
                    target=self.get_target(r["target_id"]),
                    started_at=parse_utc(r["started_at"]),
                )
                session.rounds.append(state)
                self._rounds[state.round_id] = state
            for record in self.store.iter_records():
                self._rounds[record.round_id].attempts.append(record)
            for session in self._sessions.values():
                session.rounds.sort(key=lambda r: r.round_index)
                for i, state in enumerate(session.rounds):
                    state.attempts.sort(key=lambda a: a.attempt_index)
                    last = i == len(session.rounds) - 1
                    if len(state.attempts) >= self.attempts_per_round:
                        state.status = EXHAUSTED
                    elif not last:
                        state.status = CLOSED
                    else:
                        state.status = OPEN
            return len(self._sessions)
