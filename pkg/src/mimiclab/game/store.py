"""Append-only persistence for sessions, rounds, and attempt records.

Layout of a store directory::

    sessions.jsonl   one line per created session
    rounds.jsonl     one line per started round
    records.jsonl    one line per scored attempt (RoundRecord.to_dict order)
    errors.jsonl     one line per recorded pipeline failure
    frames/          stored attempt frames, PNG, named by record id

Every event is one JSON object per line, appended and flushed under a single
writer lock; nothing is ever rewritten in place, so a crash can at worst lose
the line being written.  Readers parse whatever complete lines exist.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Iterator

from ..core import RoundRecord


class RecordStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.frames_dir = self.root / "frames"
        self.frames_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _append(self, name: str, payload: dict) -> None:
        line = json.dumps(payload, separators=(",", ":"))
        with self._lock:
            with (self.root / name).open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")
                fh.flush()

    def append_session(self, payload: dict) -> None:
        self._append("sessions.jsonl", payload)

    def append_round(self, payload: dict) -> None:
        self._append("rounds.jsonl", payload)

    def append_record(self, record: RoundRecord, frame_png: bytes | None = None) -> None:
        if frame_png is not None and record.frame_ref:
            path = self.root / record.frame_ref
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(frame_png)
        self._append("records.jsonl", record.to_dict())

    def append_error(self, payload: dict) -> None:
        self._append("errors.jsonl", payload)

    def _read_lines(self, name: str) -> Iterator[dict]:
        path = self.root / name
        if not path.exists():
            return
        with path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    yield json.loads(line)

    def iter_sessions(self) -> list[dict]:
        return list(self._read_lines("sessions.jsonl"))

    def iter_rounds(self) -> list[dict]:
        return list(self._read_lines("rounds.jsonl"))

    def iter_records(self) -> list[RoundRecord]:
        return [RoundRecord.from_dict(d) for d in self._read_lines("records.jsonl")]

    def iter_errors(self) -> list[dict]:
        return list(self._read_lines("errors.jsonl"))

    def frame_path(self, record: RoundRecord) -> Path | None:
        return self.root / record.frame_ref if record.frame_ref else None


def load_records(store_dir: str | Path) -> list[RoundRecord]:
    """Read every attempt record from a store directory."""
    return RecordStore(store_dir).iter_records()
