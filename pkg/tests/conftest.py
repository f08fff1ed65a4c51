"""Shared fixtures: one reference detector bundle per test session.

Training the fixture detector takes a few seconds, so it happens once and is
reused by every test that needs real detection (engine, API, replay,
end-to-end).  The bundle also carries the saved model file and a rendered
target directory for subprocess-level tests.
"""

from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

from mimiclab import fixtures
from mimiclab.core import ActionUnit, GrayImage, LandmarkSet
from mimiclab.detector import AuModel, save_model
from mimiclab.explain import AuDictionary
from mimiclab.game import GameEngine, RecordStore


@dataclass
class ReferenceBundle:
    model: AuModel
    model_path: Path
    targets: list[fixtures.TargetFixture]
    targets_dir: Path
    dictionary: AuDictionary


@pytest.fixture(scope="session")
def ref(tmp_path_factory) -> ReferenceBundle:
    root = tmp_path_factory.mktemp("reference")
    model, _ = fixtures.train_reference_model()
    model_path = root / "au_model.json"
    save_model(model, model_path)
    targets_dir = root / "targets"
    fixtures.write_targets_dir(targets_dir)
    return ReferenceBundle(
        model=model,
        model_path=model_path,
        targets=fixtures.make_target_fixtures(),
        targets_dir=targets_dir,
        dictionary=AuDictionary.default(),
    )


def make_engine(ref: ReferenceBundle, store_dir: Path, **kwargs) -> GameEngine:
    """Engine with the six fixture targets ingested through the real detector.

    Asserts that detection on the clean target renders recovers each design
    AU set exactly, so downstream score expectations are trustworthy.
    """
    engine = GameEngine(
        model=ref.model,
        dictionary=ref.dictionary,
        store=RecordStore(store_dir),
        **kwargs,
    )
    for fx in ref.targets:
        entry = engine.ingest_target(fx.image, fx.landmarks, fx.emotion,
                                     target_id=fx.target_id)
        assert entry.au_set == fx.aus, (
            f"detector drift: {fx.target_id} detected {sorted(entry.au_set)}")
    return engine


def attempt_frame(aus, seed_key) -> tuple[GrayImage, LandmarkSet]:
    """A jittered rendered face showing ``aus``, deterministic per seed_key.

    ``aus`` may hold ActionUnit members or plain integer codes.
    """
    normalized = frozenset(
        au if isinstance(au, ActionUnit) else ActionUnit.from_code(au) for au in aus
    )
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed_key)))
    return fixtures.render_face(normalized, rng)


# -- acceptance criterion bookkeeping -----------------------------------------

ACCEPTANCE_RESULTS: list[tuple[str, str, float]] = []


@contextmanager
def criterion(name: str):
    """Times a criterion body and records PASS/FAIL for the summary block."""
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        ACCEPTANCE_RESULTS.append((name, "FAIL", time.perf_counter() - start))
        raise
    ACCEPTANCE_RESULTS.append((name, "PASS", time.perf_counter() - start))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, status, elapsed in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{status}  {name}  ({elapsed:.2f}s)")
