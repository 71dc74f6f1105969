"""Digital-technology term list and multi-pattern keyword matching.

The lexicon is data, not code: a CSV of terms tagged with a technology
category and matching rules. Matching uses an Aho-Corasick automaton built
once per load, scanning each sentence in a single pass; word-boundary and
case constraints are checked per hit against the raw sentence text.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .corpus import Sentence

CATEGORIES = ("AI", "BD", "CC", "IOT", "BC", "MI", "GEN")
TECH_CATEGORIES = ("AI", "BD", "CC", "IOT", "BC", "MI")
MATCH_MODES = ("WORD_BOUNDARY", "SUBSTRING")

LEXICON_HEADER = ["term", "category", "match_mode", "case_sensitive"]


class LexiconError(ValueError):
    """Raised when a lexicon file fails validation."""


@dataclass(frozen=True)
class LexiconEntry:
    term: str
    category: str
    match_mode: str
    case_sensitive: bool


@dataclass(frozen=True)
class KeywordHit:
    sentence_id: str
    term: str
    category: str
    offset: int

    @property
    def end(self) -> int:
        return self.offset + len(self.term)


class _Automaton:
    """Aho-Corasick over lowercased pattern strings.

    Nodes are parallel lists; `out` holds entry indices whose lowered term
    ends at that node (failure-chain outputs are propagated at build time).
    """

    def __init__(self, patterns: list[str]):
        self._goto: list[dict[str, int]] = [{}]
        self._fail: list[int] = [0]
        self._out: list[list[int]] = [[]]
        for idx, pat in enumerate(patterns):
            self._insert(pat, idx)
        self._build_links()

    def _insert(self, pattern: str, idx: int) -> None:
        node = 0
        for ch in pattern:
            nxt = self._goto[node].get(ch)
            if nxt is None:
                nxt = len(self._goto)
                self._goto.append({})
                self._fail.append(0)
                self._out.append([])
                self._goto[node][ch] = nxt
            node = nxt
        self._out[node].append(idx)

    def _build_links(self) -> None:
        queue: deque[int] = deque()
        for child in self._goto[0].values():
            self._fail[child] = 0
            queue.append(child)
        while queue:
            node = queue.popleft()
            for ch, child in self._goto[node].items():
                fb = self._fail[node]
                while fb and ch not in self._goto[fb]:
                    fb = self._fail[fb]
                self._fail[child] = self._goto[fb].get(ch, 0)
                if self._fail[child] == child:
                    self._fail[child] = 0
                self._out[child] = self._out[child] + self._out[self._fail[child]]
                queue.append(child)

    def scan(self, text: str) -> Iterable[tuple[int, int]]:
        """Yield (end_index_inclusive, pattern_index) for every match."""
        node = 0
        for i, ch in enumerate(text):
            while node and ch not in self._goto[node]:
                node = self._fail[node]
            node = self._goto[node].get(ch, 0)
            for idx in self._out[node]:
                yield i, idx


class Lexicon:
    """Immutable entry set plus a compiled matcher; safe to share across threads."""

    def __init__(self, entries: list[LexiconEntry]):
        if not entries:
            raise LexiconError("lexicon has no entries")
        self.entries = tuple(entries)
        self._patterns = [e.term.lower() for e in entries]
        self._automaton = _Automaton(self._patterns)

    def __len__(self) -> int:
        return len(self.entries)

    def categories(self) -> set[str]:
        return {e.category for e in self.entries}

    def raw_hits(self, text: str) -> list[tuple[LexiconEntry, int]]:
        """All (entry, offset) matches honoring each entry's case and
        boundary rules, before overlap resolution."""
        lowered = text.lower()
        hits: list[tuple[LexiconEntry, int]] = []
        for end, idx in self._automaton.scan(lowered):
            entry = self.entries[idx]
            offset = end - len(self._patterns[idx]) + 1
            candidate = text[offset : end + 1]
            if entry.case_sensitive and candidate != entry.term:
                continue
            if entry.match_mode == "WORD_BOUNDARY":
                before = text[offset - 1] if offset > 0 else ""
                after = text[end + 1] if end + 1 < len(text) else ""
                if (before and before.isalnum()) or (after and after.isalnum()):
                    continue
            hits.append((entry, offset))
        return hits


def _parse_bool(value: str, rownum: int) -> bool:
    v = value.strip().lower()
    if v in ("true", "1", "yes"):
        return True
    if v in ("false", "0", "no"):
        return False
    raise LexiconError(f"row {rownum}: bad case_sensitive value {value!r}")


def load_lexicon(path: str | Path) -> Lexicon:
    """Load and validate the lexicon CSV (term,category,match_mode,case_sensitive)."""
    path = Path(path)
    entries: list[LexiconEntry] = []
    seen: set[tuple[str, str]] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise LexiconError(f"{path}: empty lexicon file")
        if [h.strip() for h in header] != LEXICON_HEADER:
            raise LexiconError(f"{path}: expected header {','.join(LEXICON_HEADER)}")
        for rownum, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise LexiconError(f"{path}: row {rownum} has {len(row)} fields")
            term, category, mode, case_s = (c.strip() for c in row)
            if not term:
                raise LexiconError(f"{path}: row {rownum} has empty term")
            if not 1 <= len(term.split()) <= 8:
                raise LexiconError(f"{path}: row {rownum} term must be 1..8 tokens")
            if category not in CATEGORIES:
                raise LexiconError(f"{path}: row {rownum} unknown category {category!r}")
            if mode not in MATCH_MODES:
                raise LexiconError(f"{path}: row {rownum} unknown match_mode {mode!r}")
            key = (term, category)
            if key in seen:
                raise LexiconError(f"{path}: duplicate (term, category) = {key}")
            seen.add(key)
            entries.append(LexiconEntry(term, category, mode, _parse_bool(case_s, rownum)))
    if not entries:
        raise LexiconError(f"{path}: lexicon has no entries")
    return Lexicon(entries)


def _resolve_overlaps(hits: list[tuple[LexiconEntry, int]]) -> list[tuple[LexiconEntry, int]]:
    """Within each category keep only the longest of any overlapping hits
    (ties broken toward the earlier offset). Categories never compete."""
    kept: list[tuple[LexiconEntry, int]] = []
    by_cat: dict[str, list[tuple[LexiconEntry, int]]] = {}
    for entry, off in hits:
        by_cat.setdefault(entry.category, []).append((entry, off))
    for cat in sorted(by_cat):
        chosen: list[tuple[int, int, LexiconEntry]] = []  # (start, end) intervals
        ranked = sorted(by_cat[cat], key=lambda h: (-len(h[0].term), h[1], h[0].term))
        for entry, off in ranked:
            end = off + len(entry.term)
            if any(off < c_end and c_off < end for c_off, c_end, _ in chosen):
                continue
            chosen.append((off, end, entry))
        kept.extend((entry, off) for off, _, entry in chosen)
    kept.sort(key=lambda h: (h[1], h[0].category, h[0].term))
    return kept


def match_sentence(sentence: Sentence, lexicon: Lexicon) -> list[KeywordHit]:
    """All keyword hits in one sentence after per-category overlap resolution,
    sorted by offset."""
    resolved = _resolve_overlaps(lexicon.raw_hits(sentence.text))
    return [
        KeywordHit(sentence.sentence_id, entry.term, entry.category, off)
        for entry, off in resolved
    ]


def hit_to_record(h: KeywordHit) -> dict:
    return {
        "sentence_id": h.sentence_id,
        "term": h.term,
        "category": h.category,
        "offset": h.offset,
    }


def hit_from_record(rec: dict) -> KeywordHit:
    return KeywordHit(rec["sentence_id"], rec["term"], rec["category"], int(rec["offset"]))
