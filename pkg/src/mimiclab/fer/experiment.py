"""Paired data-enrichment runs: does adding extra images help a classifier?

For each seed, a balanced sample is drawn from the base dataset and two
models with identical initialization are trained, one on the sampled training
images alone and one on those images plus the extra set.  Both are evaluated
on the same held-out test split, giving a paired accuracy comparison.  With
an empty extra set the two runs are identical by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .cnn import DEFAULT_FILTERS, DEFAULT_HIDDEN, CnnModel, accuracy, train_cnn
from .data import LabeledImageSet, empty_set
from .sampling import balanced_sample


@dataclass(frozen=True)
class EnrichmentRow:
    sample: int  # 1-based row number
    seed: int
    acc_base: float
    acc_enriched: float


@dataclass
class EnrichmentReport:
    rows: list[EnrichmentRow]
    mean_base: float
    mean_enriched: float
    n_train: int
    n_test: int
    n_extra: int
    epochs: int
    lr: float
    batch_size: int

    def format_text(self) -> str:
        lines = [
            f"enrichment experiment: {len(self.rows)} balanced samples "
            f"({self.n_train} train / {self.n_test} test per class, "
            f"{self.n_extra} extra images)",
            f"training: epochs={self.epochs} lr={self.lr} batch={self.batch_size}",
            "",
            "sample  seed  base    enriched",
        ]
        for row in self.rows:
            lines.append(f"{row.sample:<7d} {row.seed:<5d} "
                         f"{row.acc_base:.4f}  {row.acc_enriched:.4f}")
        lines.append(f"mean          {self.mean_base:.4f}  {self.mean_enriched:.4f}")
        return "\n".join(lines) + "\n"


def run_enrichment_experiment(
    base: LabeledImageSet,
    extra: LabeledImageSet | None = None,
    k: int = 5,
    seeds: Sequence[int] | None = None,
    n_train: int = 200,
    n_test: int = 50,
    epochs: int = 4,
    lr: float = 0.05,
    batch_size: int = 32,
    filters: tuple[int, int, int, int] = DEFAULT_FILTERS,
    hidden: int = DEFAULT_HIDDEN,
) -> EnrichmentReport:
    """Paired with/without-extra accuracies over k seeded balanced samples."""
    if seeds is None:
        seeds = list(range(k))
    seeds = list(seeds)
    if extra is None:
        extra = empty_set(base.image_size)

    rows: list[EnrichmentRow] = []
    for i, seed in enumerate(seeds, start=1):
        pair = balanced_sample(base, n_train=n_train, n_test=n_test, seed=seed)
        accs = []
        for train_set in (pair.train, pair.train.concat(extra)):
            model = CnnModel.build(input_size=base.image_size, seed=seed,
                                   filters=filters, hidden=hidden)
            train_cnn(model, train_set.images, train_set.labels,
                      epochs=epochs, lr=lr, batch_size=batch_size, seed=seed)
            accs.append(accuracy(model, pair.test.images, pair.test.labels))
        rows.append(EnrichmentRow(i, seed, accs[0], accs[1]))

    mean_base = sum(r.acc_base for r in rows) / len(rows)
    mean_enriched = sum(r.acc_enriched for r in rows) / len(rows)
    return EnrichmentReport(
        rows=rows,
        mean_base=mean_base,
        mean_enriched=mean_enriched,
        n_train=n_train,
        n_test=n_test,
        n_extra=len(extra),
        epochs=epochs,
        lr=lr,
        batch_size=batch_size,
    )
