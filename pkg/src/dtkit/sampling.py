"""Pools and splits: the prediction pool, the year-balanced annotation pool,
and stratified train/test/validation assignment."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import Sentence
from .lexicon import KeywordHit

log = logging.getLogger(__name__)

POOL_PREDICTION = "PREDICTION"
POOL_ANNOTATION = "ANNOTATION"

SPLIT_TRAIN = "TRAIN"
SPLIT_TEST = "TEST"
SPLIT_VALIDATION = "VALIDATION"
SPLIT_ORDER = (SPLIT_TRAIN, SPLIT_TEST, SPLIT_VALIDATION)


@dataclass(frozen=True)
class SentencePool:
    purpose: str
    members: tuple[str, ...]
    seed: int | None = None

    def __post_init__(self):
        if len(set(self.members)) != len(self.members):
            raise ValueError("pool contains duplicate sentence ids")

    def __contains__(self, sentence_id: str) -> bool:
        return sentence_id in set(self.members)

    def __len__(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class SplitAssignment:
    assignment: Mapping[str, str]
    ratios: tuple[int, int, int]
    seed: int
    flagged_classes: tuple[str, ...] = field(default=())

    def ids_for(self, split: str) -> list[str]:
        return [sid for sid, s in self.assignment.items() if s == split]


def make_prediction_pool(sentences: Sequence[Sentence]) -> SentencePool:
    """Every segmented sentence, in corpus order."""
    return SentencePool(POOL_PREDICTION, tuple(s.sentence_id for s in sentences))


def build_annotation_pool(
    sentences: Sequence[Sentence],
    hits: Iterable[KeywordHit],
    per_year_quota: int,
    seed: int,
) -> SentencePool:
    """Keyword-hit sentences plus an equal per-year random sample of the rest.

    Every sentence with at least one keyword hit is included. Non-hit
    sentences are grouped by year and sampled uniformly without replacement,
    min(per_year_quota, available) from each year, with a generator seeded by
    `seed` so the pool is reproducible. Members keep corpus order.
    """
    if per_year_quota < 0:
        raise ValueError("per_year_quota must be >= 0")
    hit_ids = {h.sentence_id for h in hits}
    order = {s.sentence_id: i for i, s in enumerate(sentences)}
    chosen = {s.sentence_id for s in sentences if s.sentence_id in hit_ids}
    by_year: dict[int, list[str]] = {}
    for s in sentences:
        if s.sentence_id not in hit_ids:
            by_year.setdefault(s.year, []).append(s.sentence_id)
    rng = np.random.default_rng(seed)
    for year in sorted(by_year):
        candidates = by_year[year]
        k = min(per_year_quota, len(candidates))
        if k < per_year_quota:
            log.warning(
                "year %d has only %d non-hit sentences (quota %d); taking all",
                year,
                len(candidates),
                per_year_quota,
            )
        if k:
            picks = rng.choice(len(candidates), size=k, replace=False)
            chosen.update(candidates[i] for i in picks)
    members = tuple(sorted(chosen, key=order.__getitem__))
    return SentencePool(POOL_ANNOTATION, members, seed)


def _largest_remainder(n: int, fractions: Sequence[float]) -> list[int]:
    raw = [n * f for f in fractions]
    base = [int(x) for x in raw]
    short = n - sum(base)
    remainders = sorted(range(len(raw)), key=lambda i: (-(raw[i] - base[i]), i))
    for i in remainders[:short]:
        base[i] += 1
    return base


def split_dataset(
    labeled: Sequence[tuple[str, str]],
    ratios: tuple[int, int, int] = (8, 1, 1),
    seed: int = 0,
) -> SplitAssignment:
    """Stratified train/test/validation split.

    Each label class is shuffled and partitioned so its counts match the
    ratios up to largest-remainder rounding. Classes with fewer than 3
    members still get split but are flagged.
    """
    if not labeled:
        raise ValueError("no labeled sentences to split")
    total = sum(ratios)
    fractions = [r / total for r in ratios]
    by_class: dict[str, list[str]] = {}
    for sid, label in labeled:
        by_class.setdefault(label, []).append(sid)
    rng = np.random.default_rng(seed)
    assignment: dict[str, str] = {}
    flagged: list[str] = []
    for label in sorted(by_class):
        ids = by_class[label]
        if len(ids) < 3:
            flagged.append(label)
            log.warning("label class %s has only %d members", label, len(ids))
        perm = rng.permutation(len(ids))
        counts = _largest_remainder(len(ids), fractions)
        cursor = 0
        for split, count in zip(SPLIT_ORDER, counts):
            for j in perm[cursor : cursor + count]:
                assignment[ids[j]] = split
            cursor += count
    return SplitAssignment(assignment, tuple(ratios), seed, tuple(flagged))
