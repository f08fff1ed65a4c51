"""Labeled image collections for the classifier harness and their on-disk
layout.

A dataset directory holds one PNG per image and a ``labels.csv`` with lines
``filename,emotion_label`` (an optional ``filename,label`` header is
skipped).  Images are 8-bit grayscale; color files are reduced with the
standard luma weights on load.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from ..core import Emotion, GrayImage, MimicLabError


@dataclass
class LabeledImageSet:
    """images: (N, H, W) float64 in [0, 1]; labels: (N,) ints in 0..5."""

    images: np.ndarray
    labels: np.ndarray
    name: str = ""

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 3:
            raise MimicLabError(f"images must be (N, H, W), got {self.images.shape}")
        if self.labels.shape != (self.images.shape[0],):
            raise MimicLabError("labels must align with images")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= len(Emotion)):
            raise MimicLabError("labels must be emotion codes 0..5")

    def __len__(self) -> int:
        return self.images.shape[0]

    @property
    def image_size(self) -> int:
        return self.images.shape[1]

    def class_counts(self) -> dict[int, int]:
        return {int(e): int(np.sum(self.labels == int(e))) for e in Emotion}

    def subset(self, indices) -> "LabeledImageSet":
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledImageSet(self.images[idx], self.labels[idx], self.name)

    def concat(self, other: "LabeledImageSet") -> "LabeledImageSet":
        if len(other) == 0:
            return LabeledImageSet(self.images, self.labels, self.name)
        if other.images.shape[1:] != self.images.shape[1:]:
            raise MimicLabError(
                f"image shapes differ: {self.images.shape[1:]} vs {other.images.shape[1:]}")
        return LabeledImageSet(
            np.concatenate([self.images, other.images]),
            np.concatenate([self.labels, other.labels]),
            self.name,
        )


def empty_set(size: int) -> LabeledImageSet:
    return LabeledImageSet(np.zeros((0, size, size)), np.zeros(0, dtype=np.int64))


def load_image_dir(path: str | Path) -> LabeledImageSet:
    root = Path(path)
    labels_file = root / "labels.csv"
    if not labels_file.exists():
        raise MimicLabError(f"{root}: missing labels.csv")
    images: list[np.ndarray] = []
    labels: list[int] = []
    with labels_file.open(newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().lower() == "filename":
                continue
            if len(row) != 2:
                raise MimicLabError(f"{labels_file}: expected 'filename,label' rows")
            name, label = row[0].strip(), row[1].strip()
            with Image.open(root / name) as im:
                gray = GrayImage.from_uint8(np.asarray(im.convert("RGB"), dtype=np.uint8))
            images.append(gray.pixels)
            labels.append(int(Emotion.from_label(label)))
    if not images:
        raise MimicLabError(f"{root}: labels.csv lists no images")
    shapes = {img.shape for img in images}
    if len(shapes) != 1:
        raise MimicLabError(f"{root}: images disagree on shape: {sorted(shapes)}")
    return LabeledImageSet(np.stack(images), np.array(labels), name=root.name)


def save_image_dir(dataset: LabeledImageSet, path: str | Path) -> Path:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    rows = []
    for i in range(len(dataset)):
        name = f"img_{i:05d}.png"
        GrayImage(dataset.images[i])  # validates range
        arr = np.clip(np.round(dataset.images[i] * 255.0), 0, 255).astype(np.uint8)
        Image.fromarray(arr, mode="L").save(root / name)
        rows.append((name, Emotion(int(dataset.labels[i])).label))
    with (root / "labels.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("filename", "label"))
        writer.writerows(rows)
    return root
