"""Synthetic faces and datasets for tests, demos, and desk-scale runs.

The platform's detectors are trained on whatever labeled data an operator
supplies.  For development that data comes from here: a procedural face
renderer whose action units are painted as localized, high-contrast texture
patches (plus small landmark motions), and a glyph-based emotion image
generator for the classifier harness.  Both are deterministic given a seed.

The renderer draws everything in a canonical face frame (origin at the face
center, x right, y down, face half-axes 52 x 66, eyes at (+-22, -16)) and
then pushes coordinates through a per-sample similarity jitter, so alignment
has real work to do.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (ActionUnit, AuSet, Emotion, GrayImage, LandmarkSet,
                   au_codes, au_set_from_codes)
from .detector import AUS_IN_ORDER, AuModel, AuTrainingSet, train
from .features import extract_features

FACE_RX, FACE_RY = 52.0, 66.0
EYE_Y = -16.0
EYE_DX = 22.0
MOUTH_Y = 30.0
CANVAS = 176

# Per-AU patch anchors: one center anchor plus two concentric rings laid out
# on an ellipse well inside the landmark hull.  Patches are 12x12 squares in
# canonical units, so anchor spacing stays above 12.
_RING_CX, _RING_CY = 0.0, 10.0
_RING_RX, _RING_RY = 38.0, 44.0


def _au_anchors() -> dict[ActionUnit, tuple[float, float]]:
    spots: list[tuple[float, float]] = [(_RING_CX, _RING_CY)]
    for j in range(7):
        phi = -math.pi / 2 + 2 * math.pi * j / 7
        spots.append((_RING_CX + 0.45 * _RING_RX * math.cos(phi),
                      _RING_CY + 0.45 * _RING_RY * math.sin(phi)))
    for j in range(12):
        phi = -math.pi / 2 + 2 * math.pi * j / 12
        spots.append((_RING_CX + 0.8 * _RING_RX * math.cos(phi),
                      _RING_CY + 0.8 * _RING_RY * math.sin(phi)))
    return {au: spots[i] for i, au in enumerate(AUS_IN_ORDER)}


AU_ANCHORS = _au_anchors()
PATCH_HALF = 6.0


def au_pattern(au: ActionUnit) -> np.ndarray:
    """Deterministic 6x6 binary texture unique to the action unit."""
    rng = np.random.Generator(np.random.PCG64(1000 + au.code))
    return rng.random((6, 6)) > 0.5


def _canonical_landmarks(aus: AuSet) -> np.ndarray:
    pts = np.zeros((68, 2))
    # jaw 0..16 along the lower face ellipse, image-left to image-right
    for i in range(17):
        t = math.pi * i / 16
        pts[i] = (-FACE_RX * math.cos(t), FACE_RY * math.sin(t))

    brow_y = -30.0
    if ActionUnit.AU4 in aus:
        brow_y += 3.0
    if ActionUnit.AU1 in aus or ActionUnit.AU2 in aus:
        brow_y -= 2.0
    pts[17:22, 0] = np.linspace(-38, -12, 5)
    pts[17:22, 1] = brow_y
    pts[22:27, 0] = np.linspace(12, 38, 5)
    pts[22:27, 1] = brow_y

    pts[27:31, 0] = 0.0
    pts[27:31, 1] = (-16, -10, -4, 2)
    nose_y = 6.0 if ActionUnit.AU9 in aus else 8.0
    pts[31:36, 0] = (-8, -4, 0, 4, 8)
    pts[31:36, 1] = nose_y

    eye_off = np.array([(-9, 0), (-4, -3.5), (4, -3.5), (9, 0), (4, 3.5), (-4, 3.5)],
                       dtype=np.float64)
    if ActionUnit.AU43 in aus:
        eye_off = eye_off * np.array([1.0, 0.4])
    pts[36:42] = np.array([-EYE_DX, EYE_Y]) + eye_off
    pts[42:48] = np.array([EYE_DX, EYE_Y]) + eye_off

    opening = 0.0
    if ActionUnit.AU25 in aus:
        opening = 4.0
    if ActionUnit.AU26 in aus:
        opening = 9.0
    rx_outer = 18.0 + (3.0 if ActionUnit.AU20 in aus else 0.0)
    ry_outer = 4.0 + opening
    for j in range(12):
        phi = math.pi + 2 * math.pi * j / 12
        pts[48 + j] = (rx_outer * math.cos(phi), MOUTH_Y + ry_outer * math.sin(phi))
    ry_inner = 1.0 + 0.8 * opening
    for j in range(8):
        phi = math.pi + 2 * math.pi * j / 8
        pts[60 + j] = (12.0 * math.cos(phi), MOUTH_Y + ry_inner * math.sin(phi))

    corner_dy = (-3.0 if ActionUnit.AU12 in aus else 0.0) + \
                (3.0 if ActionUnit.AU15 in aus else 0.0)
    for corner in (48, 54, 60, 64):
        pts[corner, 1] += corner_dy

    if ActionUnit.AU17 in aus:
        pts[7:10, 1] -= 3.0
    if ActionUnit.AU26 in aus:
        pts[7:10, 1] += 5.0
    return pts


def render_face(
    aus: AuSet,
    rng: np.random.Generator | None = None,
    size: int = CANVAS,
    jitter: bool = True,
    noise: float = 0.02,
) -> tuple[GrayImage, LandmarkSet]:
    """Draw a schematic face showing the given AUs; returns image + landmarks.

    With ``jitter`` the face gets a random similarity pose (rotation up to
    ~14 degrees, scale 0.9..1.1, translation up to 8 px) and the landmarks
    small positional noise, mimicking an imperfect upstream detector.
    """
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(0))
    if jitter:
        alpha = rng.uniform(-0.25, 0.25)
        scale = rng.uniform(0.9, 1.1)
        tx, ty = rng.uniform(-8, 8, size=2)
    else:
        alpha, scale, tx, ty = 0.0, 1.0, 0.0, 0.0
    cx0, cy0 = size / 2 + tx, size / 2 + ty
    cos_a, sin_a = math.cos(alpha), math.sin(alpha)

    # canonical coordinates of every pixel center (pull-back through the pose)
    xs, ys = np.meshgrid(np.arange(size, dtype=np.float64),
                         np.arange(size, dtype=np.float64))
    dx, dy = xs - cx0, ys - cy0
    ux = (cos_a * dx + sin_a * dy) / scale
    uy = (-sin_a * dx + cos_a * dy) / scale

    img = np.full((size, size), 0.12)
    face = (ux / FACE_RX) ** 2 + (uy / FACE_RY) ** 2 <= 1.0
    img[face] = 0.72

    brow_y = -30.0
    if ActionUnit.AU4 in aus:
        brow_y += 3.0
    if ActionUnit.AU1 in aus or ActionUnit.AU2 in aus:
        brow_y -= 2.0
    brows = (np.abs(uy - brow_y) <= 2.5) & (np.abs(ux) >= 12) & (np.abs(ux) <= 38)
    img[brows & face] = 0.25

    eye_ry = 1.8 if ActionUnit.AU43 in aus else 5.0
    for ex in (-EYE_DX, EYE_DX):
        eye = ((ux - ex) / 9.0) ** 2 + ((uy - EYE_Y) / eye_ry) ** 2 <= 1.0
        img[eye] = 0.2

    nose = (np.abs(ux) <= 1.8) & (uy >= -10) & (uy <= 10)
    img[nose & face] = 0.45

    opening = 0.0
    if ActionUnit.AU25 in aus:
        opening = 4.0
    if ActionUnit.AU26 in aus:
        opening = 9.0
    mouth_rx = 18.0 + (3.0 if ActionUnit.AU20 in aus else 0.0)
    mouth = (ux / mouth_rx) ** 2 + ((uy - MOUTH_Y) / (2.5 + opening)) ** 2 <= 1.0
    img[mouth & face] = 0.3

    for au in sorted(aus):
        ax, ay = AU_ANCHORS[au]
        pattern = au_pattern(au)
        in_patch = (np.abs(ux - ax) <= PATCH_HALF) & (np.abs(uy - ay) <= PATCH_HALF)
        if not np.any(in_patch):
            continue
        pu = np.clip(((ux - ax + PATCH_HALF) / (2 * PATCH_HALF) * 6).astype(int), 0, 5)
        pv = np.clip(((uy - ay + PATCH_HALF) / (2 * PATCH_HALF) * 6).astype(int), 0, 5)
        vals = np.where(pattern[pv, pu], 0.95, 0.15)
        img[in_patch] = vals[in_patch]

    if noise > 0:
        img = img + rng.normal(0.0, noise, img.shape)

    pts = _canonical_landmarks(aus)
    rot = np.array([[cos_a, -sin_a], [sin_a, cos_a]])
    moved = (scale * pts) @ rot.T + np.array([cx0, cy0])
    if jitter:
        moved = moved + rng.normal(0.0, 0.3, moved.shape)
    return GrayImage(np.clip(img, 0.0, 1.0)), LandmarkSet(moved)


def random_au_set(rng: np.random.Generator, p_active: float = 0.3) -> AuSet:
    return frozenset(au for au in AUS_IN_ORDER if rng.random() < p_active)


@dataclass
class AuSample:
    image: GrayImage
    landmarks: LandmarkSet
    aus: AuSet


def make_au_samples(n: int, seed: int = 0, p_active: float = 0.3) -> list[AuSample]:
    """Random AU subsets rendered as jittered faces."""
    out = []
    for i in range(n):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, i))))
        aus = random_au_set(rng, p_active)
        image, landmarks = render_face(aus, rng)
        out.append(AuSample(image, landmarks, aus))
    return out


def samples_to_training_set(samples: list[AuSample]) -> AuTrainingSet:
    features = np.stack([extract_features(s.image, s.landmarks) for s in samples])
    labels = np.array([[au in s.aus for au in AUS_IN_ORDER] for s in samples])
    return AuTrainingSet(features, labels)


def train_reference_model(
    n: int = 600, seed: int = 7, l2: float = 1e-3, lr: float = 0.5, epochs: int = 400,
) -> tuple[AuModel, np.ndarray]:
    """A detector trained on rendered fixtures; the development stand-in for a
    model trained on real annotated footage."""
    data = samples_to_training_set(make_au_samples(n, seed))
    return train(data, l2=l2, lr=lr, epochs=epochs, seed=seed)


# Plausible AU signatures used for demo imitation targets, one per emotion.
TARGET_SIGNATURES: dict[Emotion, tuple[int, ...]] = {
    Emotion.ANGER: (4, 5, 7, 23),
    Emotion.DISGUST: (9, 10, 17),
    Emotion.FEAR: (1, 4, 20, 25),
    Emotion.HAPPINESS: (6, 12),
    Emotion.SADNESS: (1, 15, 17),
    Emotion.SURPRISE: (2, 5, 25, 26),
}


@dataclass
class TargetFixture:
    target_id: str
    emotion: Emotion
    aus: AuSet
    image: GrayImage
    landmarks: LandmarkSet


def make_target_fixtures(seed: int = 100) -> list[TargetFixture]:
    """One clean-pose target face per emotion."""
    out = []
    for emotion in Emotion:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, int(emotion)))))
        aus = au_set_from_codes(TARGET_SIGNATURES[emotion])
        image, landmarks = render_face(aus, rng, jitter=False, noise=0.005)
        out.append(TargetFixture(f"target-{emotion.label}", emotion, aus, image, landmarks))
    return out


def converging_attempt_sets(target: AuSet, attempts: int = 5) -> list[AuSet]:
    """Player AU sets for one round that approach the target monotonically.

    Early attempts show only part of the target plus one spurious AU, later
    ones drop the spurious AU and complete the set; the final attempt matches
    the target exactly, so the designed score sequence never decreases.
    """
    ordered = sorted(target)
    spurious = next(au for au in AUS_IN_ORDER if au not in target)
    sets = []
    for k in range(1, attempts + 1):
        keep = max(1, round(len(ordered) * k / attempts))
        partial = set(ordered[:keep])
        if k <= attempts // 2:
            partial.add(spurious)
        sets.append(frozenset(partial))
    sets[-1] = frozenset(target)
    return sets


def write_targets_dir(path: str | Path, seed: int = 100) -> Path:
    """Write demo targets as PNGs plus a ``targets.jsonl`` manifest.

    Manifest lines: ``{"target_id", "emotion", "image", "landmarks"}`` with
    image paths relative to the manifest location.  AU sets are not stored;
    the server detects them at ingestion time.
    """
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    manifest = root / "targets.jsonl"
    with manifest.open("w", encoding="utf-8") as fh:
        for fx in make_target_fixtures(seed):
            name = f"{fx.target_id}.png"
            (root / name).write_bytes(fx.image.to_png_bytes())
            fh.write(json.dumps({
                "target_id": fx.target_id,
                "emotion": fx.emotion.label,
                "image": name,
                "landmarks": fx.landmarks.to_list(),
            }) + "\n")
    return manifest


def write_au_manifest(path: str | Path, n: int = 600, seed: int = 7) -> Path:
    """Write an AU training manifest: PNG frames plus ``au_train.jsonl``.

    Manifest lines: ``{"image", "landmarks", "aus"}``; paths relative to
    the manifest location.
    """
    root = Path(path)
    (root / "frames").mkdir(parents=True, exist_ok=True)
    manifest = root / "au_train.jsonl"
    with manifest.open("w", encoding="utf-8") as fh:
        for i, sample in enumerate(make_au_samples(n, seed)):
            name = f"frames/au_{i:04d}.png"
            (root / name).write_bytes(sample.image.to_png_bytes())
            fh.write(json.dumps({
                "image": name,
                "landmarks": sample.landmarks.to_list(),
                "aus": au_codes(sample.aus),
            }) + "\n")
    return manifest


def class_glyph(emotion: Emotion) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(7700 + int(emotion)))
    return rng.random((8, 8)) > 0.5


def make_emotion_images(
    n_per_class: int,
    seed: int = 0,
    size: int = 16,
    noise: float = 0.35,
    contrast: float = 0.3,
) -> tuple[np.ndarray, np.ndarray]:
    """Glyph-coded class images: (images (N, size, size), labels (N,)).

    Each class has a fixed 8x8 binary glyph drawn near the center with the
    given contrast, under heavy pixel noise and a random +-2 px offset, so
    small training samples leave visible headroom for more data.
    """
    images = []
    labels = []
    for emotion in Emotion:
        glyph = class_glyph(emotion)
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, int(emotion)))))
        for _ in range(n_per_class):
            canvas = rng.normal(0.5, noise, (size, size))
            oy, ox = rng.integers(-2, 3, size=2)
            y0 = size // 2 - 4 + oy
            x0 = size // 2 - 4 + ox
            canvas[y0:y0 + 8, x0:x0 + 8] += np.where(glyph, contrast, -contrast)
            images.append(np.clip(canvas, 0.0, 1.0))
            labels.append(int(emotion))
    order = np.random.Generator(np.random.PCG64((seed, 999))).permutation(len(images))
    return np.stack(images)[order], np.array(labels)[order]
