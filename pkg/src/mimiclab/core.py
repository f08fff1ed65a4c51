"""Shared domain vocabulary: action units, emotions, landmarks, images, records.

Everything downstream (feature extraction, detection, the game service, the
analysis tools) speaks in terms of the types defined here, so the invariants
are enforced once, at construction time.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np
from PIL import Image


class MimicLabError(Exception):
    """Base class for every error raised by this package."""


class UnknownAuCode(MimicLabError):
    """An integer code outside the supported action-unit catalog."""


class BadLandmarks(MimicLabError):
    """A landmark array with the wrong shape or non-finite coordinates."""


class BadImage(MimicLabError):
    """Pixel data that cannot be interpreted as a grayscale image."""


# The 20 facial action units the platform tracks, with their conventional
# descriptive names.  Codes are sparse on purpose: they follow the standard
# numbering, which skips values.
AU_NAMES: dict[int, str] = {
    1: "Inner Brow Raiser",
    2: "Outer Brow Raiser",
    4: "Brow Lowerer",
    5: "Upper Lid Raiser",
    6: "Cheek Raiser",
    7: "Lid Tightener",
    9: "Nose Wrinkler",
    10: "Upper Lip Raiser",
    11: "Nasolabial Deepener",
    12: "Lip Corner Puller",
    14: "Dimpler",
    15: "Lip Corner Depressor",
    17: "Chin Raiser",
    20: "Lip Stretcher",
    23: "Lip Tightener",
    24: "Lip Pressor",
    25: "Lips Part",
    26: "Jaw Drop",
    28: "Lip Suck",
    43: "Eyes Closed",
}


class ActionUnit(IntEnum):
    """One trackable facial action, identified by its numeric code."""

    AU1 = 1
    AU2 = 2
    AU4 = 4
    AU5 = 5
    AU6 = 6
    AU7 = 7
    AU9 = 9
    AU10 = 10
    AU11 = 11
    AU12 = 12
    AU14 = 14
    AU15 = 15
    AU17 = 17
    AU20 = 20
    AU23 = 23
    AU24 = 24
    AU25 = 25
    AU26 = 26
    AU28 = 28
    AU43 = 43

    @property
    def code(self) -> int:
        return int(self.value)

    @property
    def label(self) -> str:
        return AU_NAMES[self.value]

    @classmethod
    def from_code(cls, code: int) -> "ActionUnit":
        try:
            return cls(code)
        except ValueError:
            raise UnknownAuCode(f"unknown action unit code {code!r}") from None


# A detected or prescribed combination of action units.  Plain frozensets keep
# the set algebra native and hashable.
AuSet = frozenset  # frozenset[ActionUnit]

ALL_AUS: AuSet = frozenset(ActionUnit)
EMPTY_AU_SET: AuSet = frozenset()


def au_set_from_codes(codes: Iterable[int]) -> AuSet:
    """Build an AuSet from integer codes, rejecting unknown ones.

    Duplicates collapse; an empty iterable yields the empty set.
    """
    return frozenset(ActionUnit.from_code(c) for c in codes)


def au_codes(aus: Iterable[ActionUnit]) -> list[int]:
    """Sorted integer codes for an AU collection (the export form of AuSet)."""
    return sorted(int(a) for a in aus)


class Emotion(IntEnum):
    """The six basic emotion categories.

    Integer values are fixed by alphabetical order of the English label and
    are the stable encoding used in every export and record file.
    """

    ANGER = 0
    DISGUST = 1
    FEAR = 2
    HAPPINESS = 3
    SADNESS = 4
    SURPRISE = 5

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "Emotion":
        try:
            return cls[label.strip().upper()]
        except KeyError:
            raise MimicLabError(f"unknown emotion label {label!r}") from None


N_LANDMARKS = 68


class LandmarkSet:
    """68 facial landmark points in image pixel coordinates.

    The backing array is (68, 2) float64, ordered (x, y), and is frozen after
    construction.
    """

    __slots__ = ("points",)

    def __init__(self, points: np.ndarray | Sequence[Sequence[float]]):
        arr = np.asarray(points, dtype=np.float64)
        if arr.shape != (N_LANDMARKS, 2):
            raise BadLandmarks(f"expected ({N_LANDMARKS}, 2) points, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise BadLandmarks("landmark coordinates must be finite")
        arr = arr.copy()
        arr.setflags(write=False)
        self.points = arr

    def flatten(self) -> np.ndarray:
        """Interleaved (x0, y0, x1, y1, ...) copy of length 136."""
        return self.points.reshape(-1).copy()

    def translated(self, dx: float, dy: float) -> "LandmarkSet":
        return LandmarkSet(self.points + np.array([dx, dy]))

    def to_list(self) -> list[list[float]]:
        return [[float(x), float(y)] for x, y in self.points]

    def __eq__(self, other: object) -> bool:
        return isinstance(other, LandmarkSet) and np.array_equal(self.points, other.points)

    def __repr__(self) -> str:
        return f"LandmarkSet({self.points.shape})"


class GrayImage:
    """A grayscale image with float64 pixels in [0, 1].

    Pixel storage is (height, width) row-major and read-only.  Color input is
    reduced with the fixed luma weights 0.299 / 0.587 / 0.114.
    """

    __slots__ = ("pixels",)

    def __init__(self, pixels: np.ndarray):
        arr = np.asarray(pixels, dtype=np.float64)
        if arr.ndim != 2 or arr.size == 0:
            raise BadImage(f"expected a 2-d pixel array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise BadImage("pixel values must be finite")
        arr = np.clip(arr, 0.0, 1.0)
        arr.setflags(write=False)
        self.pixels = arr

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @classmethod
    def from_uint8(cls, arr: np.ndarray) -> "GrayImage":
        """From 8-bit grayscale (h, w) or color (h, w, 3) arrays."""
        a = np.asarray(arr)
        if a.ndim == 3:
            if a.shape[2] < 3:
                raise BadImage(f"expected 3 color channels, got {a.shape[2]}")
            rgb = a[:, :, :3].astype(np.float64)
            gray = 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
        elif a.ndim == 2:
            gray = a.astype(np.float64)
        else:
            raise BadImage(f"expected 2-d or 3-d array, got shape {a.shape}")
        return cls(gray / 255.0)

    @classmethod
    def from_bytes(cls, data: bytes) -> "GrayImage":
        """Decode an encoded image (PNG, JPEG, ...) into a grayscale image.

        Single-band sources stay on the exact 8-bit grayscale path (so the
        PNG export form round-trips bit-for-bit); color sources are reduced
        with the luma weights.
        """
        try:
            with Image.open(io.BytesIO(data)) as im:
                if im.mode in ("1", "L", "I", "I;16", "F"):
                    arr = np.asarray(im.convert("L"), dtype=np.uint8)
                else:
                    arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
        except Exception as exc:
            raise BadImage(f"could not decode image bytes: {exc}") from exc
        return cls.from_uint8(arr)

    def to_uint8(self) -> np.ndarray:
        return np.clip(np.round(self.pixels * 255.0), 0, 255).astype(np.uint8)

    def to_png_bytes(self) -> bytes:
        buf = io.BytesIO()
        Image.fromarray(self.to_uint8(), mode="L").save(buf, format="PNG")
        return buf.getvalue()

    def __eq__(self, other: object) -> bool:
        return isinstance(other, GrayImage) and np.array_equal(self.pixels, other.pixels)

    def __repr__(self) -> str:
        return f"GrayImage({self.height}x{self.width})"


@dataclass(frozen=True)
class TargetEntry:
    """One imitation target: the image a player tries to reproduce."""

    target_id: str
    emotion: Emotion
    au_set: AuSet
    image: GrayImage
    landmarks: LandmarkSet
    color_ref: str | None = None  # optional path to the original color asset

    def summary(self) -> dict:
        return {
            "target_id": self.target_id,
            "emotion": int(self.emotion),
            "emotion_label": self.emotion.label,
            "aus": au_codes(self.au_set),
        }


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


def format_utc(ts: datetime) -> str:
    """ISO 8601 with explicit offset; naive datetimes are taken as UTC."""
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).isoformat()


def parse_utc(text: str) -> datetime:
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


# Field order of the record-log line format.  This order is stable: new fields
# may be appended, existing ones never move or change meaning.
RECORD_FIELDS = (
    "record_id",
    "session_id",
    "round_id",
    "target_id",
    "group",
    "emotion",
    "attempt_index",
    "player_aus",
    "target_aus",
    "score",
    "prescriptions_shown",
    "frame_ref",
    "captured_at",
    "received_at",
    "client_capture_ms",
)


@dataclass(frozen=True)
class RoundRecord:
    """One scored imitation attempt, as persisted to the record log.

    ``player_aus`` and ``target_aus`` are both stored so the score can be
    recomputed from the record alone.  ``attempt_index`` starts at 1 and is
    dense within a round.  ``captured_at`` is the client capture time when
    supplied, otherwise the server receive time; ``received_at`` is always the
    server clock.  Timestamps never affect scoring.
    """

    record_id: str
    session_id: str
    round_id: str
    target_id: str
    group: str  # "control" | "treatment"
    emotion: Emotion
    attempt_index: int
    player_aus: AuSet
    target_aus: AuSet
    score: float
    prescriptions_shown: bool
    frame_ref: str | None
    captured_at: datetime
    received_at: datetime
    client_capture_ms: int | None = None

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "session_id": self.session_id,
            "round_id": self.round_id,
            "target_id": self.target_id,
            "group": self.group,
            "emotion": int(self.emotion),
            "attempt_index": self.attempt_index,
            "player_aus": au_codes(self.player_aus),
            "target_aus": au_codes(self.target_aus),
            "score": self.score,
            "prescriptions_shown": self.prescriptions_shown,
            "frame_ref": self.frame_ref,
            "captured_at": format_utc(self.captured_at),
            "received_at": format_utc(self.received_at),
            "client_capture_ms": self.client_capture_ms,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RoundRecord":
        return cls(
            record_id=d["record_id"],
            session_id=d["session_id"],
            round_id=d["round_id"],
            target_id=d["target_id"],
            group=d["group"],
            emotion=Emotion(d["emotion"]),
            attempt_index=int(d["attempt_index"]),
            player_aus=au_set_from_codes(d["player_aus"]),
            target_aus=au_set_from_codes(d["target_aus"]),
            score=float(d["score"]),
            prescriptions_shown=bool(d["prescriptions_shown"]),
            frame_ref=d.get("frame_ref"),
            captured_at=parse_utc(d["captured_at"]),
            received_at=parse_utc(d["received_at"]),
            client_capture_ms=d.get("client_capture_ms"),
        )
