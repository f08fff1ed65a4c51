"""Seeded balanced sampling for classifier runs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import Emotion, MimicLabError
from .data import LabeledImageSet


class InsufficientClassData(MimicLabError):
    """A class lacks the images requested for train + test."""


@dataclass(frozen=True)
class SamplePair:
    train: LabeledImageSet
    test: LabeledImageSet
    seed: int


def balanced_sample(
    data: LabeledImageSet,
    n_train: int = 200,
    n_test: int = 50,
    seed: int = 0,
) -> SamplePair:
    """Draw n_train + n_test images per class, without replacement.

    Train and test are disjoint by construction.  The defaults give the usual
    desk protocol of 200/50 per class, 1200/300 in total.  Deterministic for
    a fixed seed.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    train_idx: list[np.ndarray] = []
    test_idx: list[np.ndarray] = []
    need = n_train + n_test
    for emotion in Emotion:
        pool = np.flatnonzero(data.labels == int(emotion))
        if len(pool) < need:
            raise InsufficientClassData(
                f"class {emotion.label!r} has {len(pool)} images, needs {need}")
        drawn = rng.permutation(pool)[:need]
        train_idx.append(drawn[:n_train])
        test_idx.append(drawn[n_train:])
    return SamplePair(
        train=data.subset(np.concatenate(train_idx)),
        test=data.subset(np.concatenate(test_idx)),
        seed=seed,
    )
