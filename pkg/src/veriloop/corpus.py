"""Verification-pair corpus: race labels, pair manifests, stratified balancing.

A manifest is an ordered collection of image pairs, each tagged with a
canonical race label and a ground-truth match/non-match answer. Pairs are
referenced by opaque identifiers; this system never stores or decodes
image bytes.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, NamedTuple

from .errors import EngineError
from .jsonl import ParseError, dumps_record, read_records, require_fields

DEFAULT_LABELS = ("African", "Asian", "Caucasian", "Indian")

MANIFEST_FIELDS = ("pair_id", "image_a", "image_b", "race", "truth")


class UnknownLabel(EngineError):
    def __init__(self, text: str):
        super().__init__(f"unknown race label: {text!r}")
        self.text = text


class DuplicatePairId(EngineError):
    def __init__(self, pair_id: str):
        super().__init__(f"duplicate pair id: {pair_id!r}")
        self.pair_id = pair_id


class EmptyStratum(EngineError):
    def __init__(self, label: str):
        super().__init__(f"stratum {label!r} has no pairs")
        self.label = label


class UnknownPair(EngineError):
    def __init__(self, pair_id: str):
        super().__init__(f"pair id not in manifest: {pair_id!r}")
        self.pair_id = pair_id


class GroundTruth(Enum):
    """Whether the two images of a pair depict the same person."""

    MATCH = "match"
    NON_MATCH = "non_match"

    def flipped(self) -> "GroundTruth":
        return GroundTruth.NON_MATCH if self is GroundTruth.MATCH else GroundTruth.MATCH

    @classmethod
    def parse(cls, text: str) -> "GroundTruth":
        for member in cls:
            if member.value == text:
                return member
        raise ValueError(f"unknown truth value: {text!r}")


@dataclass(frozen=True, slots=True)
class Unmapped:
    """A self-identified race that no coding-table pattern matched.

    Retains the verbatim source text; never a member of any label set.
    """

    text: str


# A race is either canonical label text (validated against a LabelSet) or
# an Unmapped wrapper around the original free text.
RaceLabel = str | Unmapped


class LabelSet:
    """The configured set of canonical race labels, order significant."""

    __slots__ = ("labels", "_members")

    def __init__(self, labels: Iterable[str] = DEFAULT_LABELS):
        labels = tuple(labels)
        if not labels:
            raise EngineError("label set must not be empty")
        if len(set(labels)) != len(labels):
            raise EngineError("label set contains duplicates")
        self.labels = labels
        self._members = frozenset(labels)

    def __contains__(self, text: object) -> bool:
        return text in self._members

    def __iter__(self):
        return iter(self.labels)

    def __len__(self) -> int:
        return len(self.labels)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, LabelSet) and self.labels == other.labels

    def __hash__(self) -> int:
        return hash(self.labels)

    def __repr__(self) -> str:
        return f"LabelSet({list(self.labels)!r})"

    def require(self, text: str) -> str:
        if text not in self._members:
            raise UnknownLabel(text)
        return text


class ImagePair(NamedTuple):
    pair_id: str
    image_a: str
    image_b: str
    race: str
    truth: GroundTruth


class PairManifest:
    """Validated, immutable collection of image pairs with per-race indexes.

    `by_id` and `by_race` are read-only lookup indexes built once at
    construction. Equality compares the pair sequence and label set only;
    bookkeeping fields (source name, load time) are ignored so that a
    serialize/load round trip yields an equal manifest.
    """

    __slots__ = ("pairs", "label_set", "source_name", "loaded_at", "by_id", "by_race")

    def __init__(
        self,
        pairs: Iterable[ImagePair],
        label_set: LabelSet | None = None,
        source_name: str = "",
        loaded_at: float | None = None,
    ):
        self.pairs = tuple(pairs)
        self.label_set = label_set or LabelSet()
        self.source_name = source_name
        self.loaded_at = time.time() if loaded_at is None else loaded_at

        by_id: dict[str, ImagePair] = {}
        by_race: dict[str, list[ImagePair]] = {label: [] for label in self.label_set}
        for pair in self.pairs:
            if not pair.pair_id:
                raise EngineError("pair id must be non-empty")
            if not pair.image_a or not pair.image_b:
                raise EngineError(f"pair {pair.pair_id!r} has an empty image reference")
            if pair.race not in self.label_set:
                raise UnknownLabel(pair.race)
            if pair.pair_id in by_id:
                raise DuplicatePairId(pair.pair_id)
            by_id[pair.pair_id] = pair
            by_race[pair.race].append(pair)
        self.by_id = by_id
        self.by_race = by_race

    def __len__(self) -> int:
        return len(self.pairs)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PairManifest):
            return NotImplemented
        return self.pairs == other.pairs and self.label_set == other.label_set

    def __hash__(self) -> int:
        return hash((self.pairs, self.label_set))

    def get(self, pair_id: str) -> ImagePair | None:
        return self.by_id.get(pair_id)

    def require(self, pair_id: str) -> ImagePair:
        pair = self.by_id.get(pair_id)
        if pair is None:
            raise UnknownPair(pair_id)
        return pair

    def stratum_sizes(self) -> dict[str, int]:
        return {label: len(self.by_race[label]) for label in self.label_set}

    def without(self, pair_ids: Iterable[str]) -> "PairManifest":
        """A new manifest with the given pair ids removed, order preserved."""
        drop = set(pair_ids)
        return PairManifest(
            (p for p in self.pairs if p.pair_id not in drop),
            self.label_set,
            source_name=self.source_name,
            loaded_at=self.loaded_at,
        )


def stratum(manifest: PairManifest, race: str) -> list[ImagePair]:
    """All pairs of the given canonical race, in manifest order."""
    manifest.label_set.require(race)
    return list(manifest.by_race[race])


def load_manifest(
    path: str,
    label_set: LabelSet | None = None,
    source_name: str | None = None,
) -> PairManifest:
    """Load and validate a manifest file (one JSON record per line).

    Rejects duplicate pair ids, race strings outside the label set, and
    truth strings other than "match"/"non_match".
    """
    label_set = label_set or LabelSet()
    pairs: list[ImagePair] = []
    seen: set[str] = set()
    for line_no, record in read_records(path):
        require_fields(line_no, record, MANIFEST_FIELDS)
        pair_id = str(record["pair_id"])
        if not pair_id:
            raise ParseError(line_no, "empty pair_id")
        if pair_id in seen:
            raise DuplicatePairId(pair_id)
        seen.add(pair_id)
        race = label_set.require(str(record["race"]))
        try:
            truth = GroundTruth.parse(str(record["truth"]))
        except ValueError as exc:
            raise ParseError(line_no, str(exc)) from exc
        image_a = str(record["image_a"])
        image_b = str(record["image_b"])
        if not image_a or not image_b:
            raise ParseError(line_no, "empty image reference")
        pairs.append(ImagePair(pair_id, image_a, image_b, race, truth))
    return PairManifest(pairs, label_set, source_name=source_name or path)


def save_manifest(manifest: PairManifest, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pair in manifest.pairs:
            fh.write(
                dumps_record(
                    {
                        "pair_id": pair.pair_id,
                        "image_a": pair.image_a,
                        "image_b": pair.image_b,
                        "race": pair.race,
                        "truth": pair.truth.value,
                    }
                )
            )
            fh.write("\n")


def balance_strata(manifest: PairManifest, seed: int) -> PairManifest:
    """Downsample every race stratum to the smallest stratum's size.

    Selection within each stratum is a uniformly random, seeded subset
    (shuffled index prefix); the surviving pairs keep their original
    manifest order, which makes the operation idempotent for a fixed seed.
    """
    sizes = manifest.stratum_sizes()
    for label in manifest.label_set:
        if sizes[label] == 0:
            raise EmptyStratum(label)
    floor = min(sizes.values())
    rng = random.Random(seed)
    keep: set[str] = set()
    for label in manifest.label_set:
        pairs = manifest.by_race[label]
        indexes = list(range(len(pairs)))
        rng.shuffle(indexes)
        keep.update(pairs[i].pair_id for i in indexes[:floor])
    return PairManifest(
        (p for p in manifest.pairs if p.pair_id in keep),
        manifest.label_set,
        source_name=manifest.source_name,
        loaded_at=manifest.loaded_at,
    )
