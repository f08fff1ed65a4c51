from .engine import (CONTROL, TREATMENT, AttemptResult, CatalogError,
                     EmptyTargetAuSet, GameEngine, PipelineError,
                     RoundExhausted, RoundState, Session, SessionComplete,
                     UnknownRound, UnknownSession, UnknownTarget)
from .store import RecordStore, load_records
from .api import create_app

__all__ = [
    "CONTROL", "TREATMENT", "AttemptResult", "CatalogError",
    "EmptyTargetAuSet", "GameEngine", "PipelineError", "RoundExhausted",
    "RoundState", "Session", "SessionComplete", "UnknownRound",
    "UnknownSession", "UnknownTarget", "RecordStore", "load_records",
    "create_app",
]
