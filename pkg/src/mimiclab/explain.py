"""Overlap scoring, AU set differences, and dictionary-backed coaching text.

The score for an attempt is the Jaccard index between the player's detected
AU set and the target's AU set.  The difference between the two sets drives
short natural-language prescriptions ("lower your eyebrows.", "do not part
your lips.") drawn from a dictionary file shipped with the package.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable

from .core import ActionUnit, AuSet, MimicLabError, au_set_from_codes


class EmptyUniverse(MimicLabError):
    """Score is undefined when both AU sets are empty."""


class DictionaryError(MimicLabError):
    """The AU dictionary file is missing entries or malformed."""


# The face-region categories a dictionary entry may belong to.  Their relative
# order in a given dictionary file (order of first appearance) decides the
# order in which prescriptions are presented.
REGIONS = (
    "cheeks",
    "eyebrows",
    "eyelids",
    "lips",
    "chin-and-nose",
    "mouth",
    "horizontal",
    "oblique",
    "orbital",
)

ADD = "add"
REMOVE = "remove"


def score(player: AuSet, target: AuSet) -> float:
    """Jaccard overlap |P ∩ T| / |P ∪ T| in [0, 1].

    Raises EmptyUniverse when both sets are empty (0/0 has no meaning).
    """
    union = player | target
    if not union:
        raise EmptyUniverse("cannot score two empty AU sets")
    return len(player & target) / len(union)


@dataclass(frozen=True)
class AuDiff:
    """Partition of P ∪ T into matched, extra, and absent action units."""

    correct: AuSet   # P ∩ T: matched
    spurious: AuSet  # P - T: shown by the player but not asked for
    missing: AuSet   # T - P: asked for but not shown


def diff(player: AuSet, target: AuSet) -> AuDiff:
    return AuDiff(
        correct=frozenset(player & target),
        spurious=frozenset(player - target),
        missing=frozenset(target - player),
    )


@dataclass(frozen=True)
class DictEntry:
    au: ActionUnit
    region: str
    description: str      # declarative clause, e.g. "eyebrows are lowered."
    prescribe_pos: str    # imperative to add the AU
    prescribe_neg: str    # imperative to stop showing the AU


@dataclass(frozen=True)
class Prescription:
    au: ActionUnit
    polarity: str  # ADD (missing AU) or REMOVE (spurious AU)
    region: str
    text: str


class AuDictionary:
    """Maps every supported AU to a region and its three text templates.

    File format: UTF-8 text, one entry per line, five tab-separated fields::

        au <TAB> region <TAB> description <TAB> prescribe_pos <TAB> prescribe_neg

    Lines starting with ``#`` and blank lines are ignored.  The ``au`` field
    is normally a single integer code; a reserved extension allows several
    codes joined with ``+`` (a combination entry).  Combination entries are
    parsed and kept but take no part in prescription rendering yet.

    The file must define exactly one entry for every supported AU, regions
    must come from the known category list, and the order in which regions
    first appear fixes the presentation order of prescriptions.
    """

    def __init__(
        self,
        entries: dict[ActionUnit, DictEntry],
        region_rank: dict[str, int],
        combinations: tuple[tuple[AuSet, DictEntry], ...] = (),
    ):
        missing = [au.code for au in ActionUnit if au not in entries]
        if missing:
            raise DictionaryError(f"dictionary lacks entries for AU codes {missing}")
        self.entries = dict(entries)
        self.region_rank = dict(region_rank)
        self.combinations = combinations

    @classmethod
    def loads(cls, text: str, source: str = "<string>") -> "AuDictionary":
        entries: dict[ActionUnit, DictEntry] = {}
        region_rank: dict[str, int] = {}
        combinations: list[tuple[AuSet, DictEntry]] = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 5:
                raise DictionaryError(
                    f"{source}:{lineno}: expected 5 tab-separated fields, got {len(parts)}"
                )
            au_field, region, description, pos, neg = (p.strip() for p in parts)
            if region not in REGIONS:
                raise DictionaryError(f"{source}:{lineno}: unknown region {region!r}")
            if not description or not pos or not neg:
                raise DictionaryError(f"{source}:{lineno}: empty text field")
            try:
                codes = [int(c) for c in au_field.split("+")]
            except ValueError:
                raise DictionaryError(
                    f"{source}:{lineno}: bad AU code field {au_field!r}"
                ) from None
            if region not in region_rank:
                region_rank[region] = len(region_rank)
            if len(codes) == 1:
                au = ActionUnit.from_code(codes[0])
                if au in entries:
                    raise DictionaryError(f"{source}:{lineno}: duplicate entry for AU{au.code}")
                entries[au] = DictEntry(au, region, description, pos, neg)
            else:
                combo = au_set_from_codes(codes)
                entry = DictEntry(min(combo), region, description, pos, neg)
                combinations.append((combo, entry))
        return cls(entries, region_rank, tuple(combinations))

    @classmethod
    def load(cls, path: str | Path) -> "AuDictionary":
        p = Path(path)
        return cls.loads(p.read_text(encoding="utf-8"), source=str(p))

    @classmethod
    def default(cls) -> "AuDictionary":
        text = resources.files("mimiclab").joinpath("data/au_dictionary.tsv").read_text("utf-8")
        return cls.loads(text, source="au_dictionary.tsv")

    def sort_key(self, au: ActionUnit) -> tuple[int, int]:
        return (self.region_rank[self.entries[au].region], au.code)


def prescribe(player: AuSet, target: AuSet, dictionary: AuDictionary) -> list[Prescription]:
    """Coaching sentences that would turn the player's set into the target's.

    Missing AUs yield positive imperatives, spurious AUs negative ones.  The
    list is ordered by the dictionary's region order, then ascending AU code;
    it is empty exactly when the player already matches the target.
    """
    d = diff(player, target)
    out: list[Prescription] = []
    for au in d.missing:
        e = dictionary.entries[au]
        out.append(Prescription(au, ADD, e.region, e.prescribe_pos))
    for au in d.spurious:
        e = dictionary.entries[au]
        out.append(Prescription(au, REMOVE, e.region, e.prescribe_neg))
    out.sort(key=lambda p: dictionary.sort_key(p.au))
    return out


def describe(aus: AuSet, dictionary: AuDictionary) -> list[str]:
    """Declarative descriptions of the given AUs, in presentation order."""
    ordered = sorted(aus, key=dictionary.sort_key)
    return [dictionary.entries[au].description for au in ordered]
