"""Command-line entry points.

One console script, ``mimiclab``, multiplexes the operational commands:

* ``train-au``   fit the linear AU detector from an annotated frame manifest
* ``serve``      run the game HTTP/WebSocket service
* ``export``     filter the attempt log into a labeled image dataset
* ``cooccur``    emotion x AU co-occurrence matrix from the attempt log
* ``stats``      first-vs-rest score trajectory report
* ``train-fer``  train the small expression CNN on a labeled image directory
* ``experiment`` paired data-enrichment comparison for the CNN
* ``synth``      generate synthetic development data (targets, AU frames,
                 glyph-coded expression images)
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from .core import Emotion, GrayImage, LandmarkSet, MimicLabError, au_set_from_codes
from .detector import AuTrainingSet, AUS_IN_ORDER, load_model, save_model, train
from .explain import AuDictionary
from .features import extract_features
from . import fixtures
from .forge import cooccurrence, export_dataset, render_heatmap
from .game import GameEngine, RecordStore, create_app
from .game.store import load_records
from .stats import analysis_report


def _fraction(text: str) -> float:
    """Parse a threshold that may be a decimal ("0.3333") or a ratio ("1/3")."""
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc


def _seed_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            f"seeds must be comma-separated integers, got {text!r}") from exc


def load_au_training_manifest(path: str | Path) -> AuTrainingSet:
    """Read an AU training manifest (JSONL) into a feature/label matrix.

    Each line holds ``{"image": <png path relative to the manifest>,
    "landmarks": [[x, y] * 68], "aus": [codes]}``.
    """
    manifest = Path(path)
    if not manifest.exists():
        raise MimicLabError(f"{manifest}: no such training manifest")
    root = manifest.parent
    features = []
    labels = []
    with manifest.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                image = GrayImage.from_bytes((root / doc["image"]).read_bytes())
                landmarks = LandmarkSet(doc["landmarks"])
                aus = au_set_from_codes(doc["aus"])
            except (KeyError, ValueError, OSError, json.JSONDecodeError) as exc:
                raise MimicLabError(f"{manifest}:{lineno}: bad training row ({exc})") from exc
            features.append(extract_features(image, landmarks))
            labels.append([au in aus for au in AUS_IN_ORDER])
    if not features:
        raise MimicLabError(f"{manifest}: no training rows")
    return AuTrainingSet(np.stack(features), np.array(labels))


def _cmd_train_au(args: argparse.Namespace) -> int:
    data = load_au_training_manifest(args.data)
    model, losses = train(data, l2=args.l2, lr=args.lr, epochs=args.epochs, seed=args.seed)
    save_model(model, args.out)
    print(f"trained {len(AUS_IN_ORDER)} AU heads on {data.features.shape[0]} frames; "
          f"mean final loss {float(np.mean(losses)):.4f}")
    print(f"wrote {args.out}")
    return 0


def _load_targets(engine: GameEngine, targets_dir: Path) -> int:
    """Register every target from a ``targets.jsonl`` manifest directory."""
    manifest = targets_dir / "targets.jsonl"
    if not manifest.exists():
        raise MimicLabError(f"{targets_dir}: missing targets.jsonl")
    count = 0
    with manifest.open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            doc = json.loads(line)
            image = GrayImage.from_bytes((targets_dir / doc["image"]).read_bytes())
            engine.ingest_target(
                image,
                LandmarkSet(doc["landmarks"]),
                Emotion.from_label(doc["emotion"]),
                target_id=doc["target_id"],
            )
            count += 1
    return count


def build_engine(
    model_path: str | Path,
    targets_dir: str | Path,
    store_dir: str | Path,
    attempts: int = 5,
    mode: str = "experiment",
    seed: int = 0,
) -> GameEngine:
    """Assemble a ready-to-serve engine: model + dictionary + targets + store."""
    engine = GameEngine(
        model=load_model(model_path),
        dictionary=AuDictionary.default(),
        store=RecordStore(store_dir),
        attempts_per_round=attempts,
        mode=mode,
        seed=seed,
    )
    n_targets = _load_targets(engine, Path(targets_dir))
    if mode == "experiment":
        engine.validate_experiment_catalog()
    restored = engine.load_existing()
    print(f"loaded {n_targets} targets; restored {restored} sessions", file=sys.stderr)
    return engine


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    engine = build_engine(args.model, args.targets, args.store,
                          attempts=args.attempts, mode=args.mode, seed=args.seed)
    app = create_app(engine, countdown_seconds=args.countdown)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _cmd_export(args: argparse.Namespace) -> int:
    records = load_records(args.store)
    manifest = export_dataset(records, args.out, store_root=args.store,
                              threshold=args.threshold)
    print(f"kept {len(manifest.entries)} of {len(records)} records "
          f"(threshold {args.threshold:g}); wrote {Path(args.out) / 'manifest.jsonl'}")
    if manifest.missing_frames:
        print(f"warning: {len(manifest.missing_frames)} records had missing frames",
              file=sys.stderr)
    return 0


def _cmd_cooccur(args: argparse.Namespace) -> int:
    records = load_records(args.store)
    matrix = cooccurrence(records, threshold=args.threshold)
    render_heatmap(matrix, args.out, out_png=args.png)
    print(f"co-occurrence over {int(matrix.counts.sum())} AU activations; wrote {args.out}")
    return 0


def _cmd_stats(args: argparse.Namespace) -> int:
    records = load_records(args.store)
    report = analysis_report(records, attempts_per_round=args.attempts)
    Path(args.out).write_text(report, encoding="utf-8")
    print(f"analyzed {len(records)} records; wrote {args.out}")
    return 0


def _cmd_train_fer(args: argparse.Namespace) -> int:
    from .fer import CnnModel, load_image_dir, save_cnn, train_cnn

    data = load_image_dir(args.data)
    model = CnnModel.build(input_size=data.images.shape[1], seed=args.seed)
    history = train_cnn(model, data.images, data.labels, epochs=args.epochs,
                        lr=args.lr, batch_size=args.batch_size, seed=args.seed)
    save_cnn(model, args.out)
    print(f"trained on {len(data.images)} images for {args.epochs} epochs; "
          f"final loss {history.losses[-1]:.4f}, "
          f"train accuracy {history.accuracies[-1]:.3f}")
    print(f"wrote {args.out}")
    return 0


def _cmd_experiment(args: argparse.Namespace) -> int:
    from .fer import load_image_dir, run_enrichment_experiment

    base = load_image_dir(args.base)
    extra = load_image_dir(args.extra) if args.extra else None
    report = run_enrichment_experiment(
        base, extra, k=args.k, seeds=args.seeds,
        n_train=args.n_train, n_test=args.n_test,
        epochs=args.epochs, lr=args.lr, batch_size=args.batch_size)
    text = report.format_text()
    Path(args.out).write_text(text, encoding="utf-8")
    print(text, end="")
    print(f"wrote {args.out}")
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    from .fer import LabeledImageSet, save_image_dir

    out = Path(args.out)
    if args.kind == "targets":
        manifest = fixtures.write_targets_dir(out, seed=args.seed)
        print(f"wrote {manifest}")
    elif args.kind == "au-data":
        manifest = fixtures.write_au_manifest(out, n=args.n, seed=args.seed)
        print(f"wrote {manifest}")
    elif args.kind == "emotions":
        images, labels = fixtures.make_emotion_images(args.n, seed=args.seed)
        save_image_dir(LabeledImageSet(images, labels), out)
        print(f"wrote {len(images)} images to {out}")
    else:  # unreachable; argparse restricts choices
        raise MimicLabError(f"unknown synth kind {args.kind!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mimiclab",
        description="expression-imitation game: detector training, serving, "
                    "dataset export, and analysis",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-au", help="train the linear AU detector")
    p.add_argument("--data", required=True, help="JSONL training manifest")
    p.add_argument("--l2", type=float, default=1e-3)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="model file to write")
    p.set_defaults(func=_cmd_train_au)

    p = sub.add_parser("serve", help="run the game service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--targets", required=True, help="directory with targets.jsonl")
    p.add_argument("--model", required=True, help="AU detector model file")
    p.add_argument("--store", required=True, help="append-only record store directory")
    p.add_argument("--attempts", type=int, default=5)
    p.add_argument("--mode", choices=("experiment", "free"), default="experiment")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--countdown", type=int, default=5)
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("export", help="export scored frames as a labeled dataset")
    p.add_argument("--store", required=True)
    p.add_argument("--threshold", type=_fraction, default=1.0 / 3.0,
                   help="keep records with score >= threshold (accepts 1/3)")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.set_defaults(func=_cmd_export)

    p = sub.add_parser("cooccur", help="emotion x AU co-occurrence matrix")
    p.add_argument("--store", required=True)
    p.add_argument("--threshold", type=_fraction, default=1.0 / 3.0,
                   help="keep records with score >= threshold (accepts 1/3)")
    p.add_argument("--out", required=True, help="text matrix file to write")
    p.add_argument("--png", default=None, help="optional raster heatmap file")
    p.set_defaults(func=_cmd_cooccur)

    p = sub.add_parser("stats", help="score trajectory analysis report")
    p.add_argument("--store", required=True)
    p.add_argument("--attempts", type=int, default=5)
    p.add_argument("--out", required=True, help="report file to write")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("train-fer", help="train the expression CNN")
    p.add_argument("--data", required=True, help="image directory with labels.csv")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="model file to write")
    p.set_defaults(func=_cmd_train_fer)

    p = sub.add_parser("experiment", help="paired data-enrichment comparison")
    p.add_argument("--base", required=True, help="base image directory")
    p.add_argument("--extra", default=None, help="enrichment image directory")
    p.add_argument("--k", type=int, default=5, help="number of paired repetitions")
    p.add_argument("--seeds", type=_seed_list, default=None,
                   help="comma-separated seeds (default 1..k)")
    p.add_argument("--n-train", type=int, default=200)
    p.add_argument("--n-test", type=int, default=50)
    p.add_argument("--epochs", type=int, default=4)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--out", required=True, help="report file to write")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("synth", help="generate synthetic development data")
    p.add_argument("kind", choices=("targets", "au-data", "emotions"))
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=600,
                   help="frame count (au-data) or per-class count (emotions)")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_synth)

    return parser


_SYNTH_SEEDS = {"targets": 100, "au-data": 7, "emotions": 0}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "synth" and args.seed is None:
        args.seed = _SYNTH_SEEDS[args.kind]
    try:
        return args.func(args)
    except MimicLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
