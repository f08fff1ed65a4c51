"""Turns the attempt log into research data.

Filtering keeps attempts whose score reaches a quality threshold (boundary
inclusive), export writes the kept frames plus a manifest with a class
histogram, and the co-occurrence matrix counts which action units players
showed per target emotion.
"""

from __future__ import annotations

import json
import shutil
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .core import ActionUnit, Emotion, MimicLabError, RoundRecord, au_codes
from .detector import AUS_IN_ORDER

DEFAULT_THRESHOLD = 1.0 / 3.0

# Manifest entry field order (one JSON object per line, after the header):
MANIFEST_FIELDS = ("frame_ref", "emotion", "emotion_label", "aus", "score",
                   "session_id", "attempt_index")


def filter_records(records: list[RoundRecord], threshold: float = DEFAULT_THRESHOLD,
                   ) -> list[RoundRecord]:
    """Keep attempts with score >= threshold; order is preserved."""
    return [r for r in records if r.score >= threshold]


@dataclass
class ExportManifest:
    threshold: float
    entries: list[dict]
    histogram: dict[str, int]
    missing_frames: list[str] = field(default_factory=list)
    out_dir: Path | None = None


def class_histogram(records: list[RoundRecord]) -> dict[str, int]:
    """Counts per emotion label, keyed in encoding order (all six present)."""
    hist = {e.label: 0 for e in Emotion}
    for r in records:
        hist[r.emotion.label] += 1
    return hist


def export_dataset(
    records: list[RoundRecord],
    out_dir: str | Path,
    store_root: str | Path | None = None,
    threshold: float = DEFAULT_THRESHOLD,
) -> ExportManifest:
    """Write kept frames and a ``manifest.jsonl`` into ``out_dir``.

    The manifest starts with one header line (``type: "header"`` with the
    threshold, totals, class histogram, and any missing frames), followed by
    one line per record with the fields in MANIFEST_FIELDS order.  A record
    whose stored frame cannot be found is listed under ``missing_frames`` and
    skipped, but the export continues.
    """
    kept = filter_records(records, threshold)
    out = Path(out_dir)
    frames_out = out / "frames"
    frames_out.mkdir(parents=True, exist_ok=True)
    root = Path(store_root) if store_root is not None else None

    entries: list[dict] = []
    exported: list[RoundRecord] = []
    missing: list[str] = []
    for r in kept:
        src = None
        if r.frame_ref:
            src = (root / r.frame_ref) if root is not None else Path(r.frame_ref)
        if src is None or not src.exists():
            missing.append(r.record_id)
            continue
        frame_ref = f"frames/{Path(r.frame_ref).name}"
        shutil.copyfile(src, out / frame_ref)
        exported.append(r)
        entries.append({
            "frame_ref": frame_ref,
            "emotion": int(r.emotion),
            "emotion_label": r.emotion.label,
            "aus": au_codes(r.player_aus),
            "score": r.score,
            "session_id": r.session_id,
            "attempt_index": r.attempt_index,
        })

    histogram = class_histogram(exported)
    manifest = ExportManifest(threshold, entries, histogram, missing, out)
    with (out / "manifest.jsonl").open("w", encoding="utf-8") as fh:
        fh.write(json.dumps({
            "type": "header",
            "threshold": threshold,
            "records_kept": len(entries),
            "histogram": histogram,
            "missing_frames": missing,
        }) + "\n")
        for entry in entries:
            fh.write(json.dumps(entry) + "\n")
    return manifest


def read_manifest(path: str | Path) -> ExportManifest:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise MimicLabError(f"{path}: empty manifest")
    header = json.loads(lines[0])
    if header.get("type") != "header":
        raise MimicLabError(f"{path}: first line must be the header")
    entries = [json.loads(line) for line in lines[1:] if line.strip()]
    return ExportManifest(
        threshold=header["threshold"],
        entries=entries,
        histogram=header["histogram"],
        missing_frames=header["missing_frames"],
        out_dir=Path(path).parent,
    )


@dataclass(frozen=True)
class CooccurrenceMatrix:
    """counts[e, a]: kept attempts with target emotion ``e`` whose player AU
    set contains the ``a``-th supported AU (AU-code order)."""

    counts: np.ndarray  # (6, 20) int64
    threshold: float
    records_used: int

    def cell(self, emotion: Emotion, au: ActionUnit) -> int:
        return int(self.counts[int(emotion), AUS_IN_ORDER.index(au)])


def cooccurrence(records: list[RoundRecord], threshold: float = DEFAULT_THRESHOLD,
                 ) -> CooccurrenceMatrix:
    kept = filter_records(records, threshold)
    counts = np.zeros((len(Emotion), len(AUS_IN_ORDER)), dtype=np.int64)
    index = {au: i for i, au in enumerate(AUS_IN_ORDER)}
    for r in kept:
        for au in r.player_aus:
            counts[int(r.emotion), index[au]] += 1
    return CooccurrenceMatrix(counts, threshold, len(kept))


def render_heatmap(matrix: CooccurrenceMatrix, out_txt: str | Path,
                   out_png: str | Path | None = None) -> str:
    """Deterministic renderings of the matrix: an annotated text grid, and
    optionally a simple grayscale raster (brighter = more co-occurrences).

    Identical inputs produce byte-identical outputs.
    """
    width = max(5, len(str(int(matrix.counts.max(initial=0)))) + 1)
    header = "emotion".ljust(12) + "".join(f"AU{au.code}".rjust(width)
                                           for au in AUS_IN_ORDER)
    lines = [header]
    for emotion in Emotion:
        row = emotion.label.ljust(12) + "".join(
            str(int(c)).rjust(width) for c in matrix.counts[int(emotion)])
        lines.append(row)
    lines.append("")
    lines.append(f"records_used: {matrix.records_used}  threshold: {matrix.threshold!r}")
    text = "\n".join(lines) + "\n"
    Path(out_txt).write_text(text, encoding="utf-8")

    if out_png is not None:
        cell = 24
        peak = matrix.counts.max(initial=0)
        scaled = (matrix.counts / peak * 255.0) if peak > 0 else matrix.counts * 0.0
        raster = np.repeat(np.repeat(scaled.astype(np.uint8), cell, axis=0), cell, axis=1)
        raster[::cell, :] = 64
        raster[:, ::cell] = 64
        Image.fromarray(raster, mode="L").save(Path(out_png), format="PNG")
    return text
