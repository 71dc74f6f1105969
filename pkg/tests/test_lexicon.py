import string
from importlib import resources

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dtkit.corpus import Sentence
from dtkit.lexicon import (
    CATEGORIES,
    KeywordHit,
    Lexicon,
    LexiconEntry,
    LexiconError,
    load_lexicon,
    match_sentence,
)


def sent(text, sid="s1"):
    return Sentence(sid, "F1", 2015, "MDA", 0, text)


def lex(*entries):
    return Lexicon([LexiconEntry(*e) for e in entries])


def write_lexicon(tmp_path, rows, header="term,category,match_mode,case_sensitive"):
    p = tmp_path / "lex.csv"
    p.write_text("\n".join([header] + rows) + "\n", encoding="utf-8")
    return p


class TestLoadLexicon:
    def test_loads_entries(self, tmp_path):
        p = write_lexicon(
            tmp_path,
            ["blockchain,BC,WORD_BOUNDARY,false", "machine learning,AI,WORD_BOUNDARY,false"],
        )
        lx = load_lexicon(p)
        assert len(lx) == 2
        assert lx.categories() == {"BC", "AI"}

    def test_unknown_category_names_row(self, tmp_path):
        p = write_lexicon(tmp_path, ["blockchain,XX,WORD_BOUNDARY,false"])
        with pytest.raises(LexiconError, match="row 2.*XX"):
            load_lexicon(p)

    def test_duplicate_term_category(self, tmp_path):
        p = write_lexicon(
            tmp_path,
            ["blockchain,BC,WORD_BOUNDARY,false", "blockchain,BC,SUBSTRING,true"],
        )
        with pytest.raises(LexiconError, match="duplicate"):
            load_lexicon(p)

    def test_same_term_two_categories_allowed(self, tmp_path):
        p = write_lexicon(
            tmp_path,
            ["digital ledger,BC,WORD_BOUNDARY,false", "digital ledger,GEN,WORD_BOUNDARY,false"],
        )
        assert len(load_lexicon(p)) == 2

    def test_empty_file_rejected(self, tmp_path):
        p = tmp_path / "lex.csv"
        p.write_text("", encoding="utf-8")
        with pytest.raises(LexiconError, match="empty"):
            load_lexicon(p)

    def test_header_only_rejected(self, tmp_path):
        p = write_lexicon(tmp_path, [])
        with pytest.raises(LexiconError, match="no entries"):
            load_lexicon(p)

    def test_term_token_limit(self, tmp_path):
        p = write_lexicon(tmp_path, ["one two three four five six seven eight nine,AI,WORD_BOUNDARY,false"])
        with pytest.raises(LexiconError, match="1..8 tokens"):
            load_lexicon(p)

    def test_bundled_lexicon_loads_with_coverage(self):
        path = resources.files("dtkit.data") / "lexicon.csv"
        lx = load_lexicon(str(path))
        assert len(lx) >= 150
        assert lx.categories() == set(CATEGORIES)
        # "mining" must never appear as a bare blockchain keyword
        for e in lx.entries:
            if e.category == "BC" and "mining" in e.term:
                assert e.term != "mining"


class TestMatchSentence:
    def test_single_hit_with_offset(self):
        lx = lex(("blockchain", "BC", "WORD_BOUNDARY", False))
        hits = match_sentence(sent("Our blockchain ledger scaled."), lx)
        assert hits == [KeywordHit("s1", "blockchain", "BC", 4)]

    def test_word_boundary_blocks_plural(self):
        lx = lex(("blockchain", "BC", "WORD_BOUNDARY", False))
        assert match_sentence(sent("blockchains"), lx) == []

    def test_substring_mode_matches_inside_words(self):
        lx = lex(("chain", "BC", "SUBSTRING", False))
        hits = match_sentence(sent("blockchains"), lx)
        assert [h.offset for h in hits] == [5]

    def test_case_insensitive_default(self):
        lx = lex(("blockchain", "BC", "WORD_BOUNDARY", False))
        assert len(match_sentence(sent("BLOCKCHAIN rollout"), lx)) == 1

    def test_case_sensitive_entry(self):
        lx = lex(("IoT", "IOT", "WORD_BOUNDARY", True))
        assert match_sentence(sent("iot devices"), lx) == []
        assert len(match_sentence(sent("IoT devices"), lx)) == 1

    def test_cross_category_overlap_retained(self):
        lx = lex(
            ("machine learning", "AI", "WORD_BOUNDARY", False),
            ("learning", "GEN", "WORD_BOUNDARY", False),
        )
        hits = match_sentence(sent("applied machine learning"), lx)
        assert {(h.category, h.term) for h in hits} == {
            ("AI", "machine learning"),
            ("GEN", "learning"),
        }

    def test_same_category_overlap_keeps_longest(self):
        lx = lex(
            ("machine learning", "AI", "WORD_BOUNDARY", False),
            ("learning", "AI", "WORD_BOUNDARY", False),
        )
        hits = match_sentence(sent("applied machine learning"), lx)
        assert [(h.term, h.category) for h in hits] == [("machine learning", "AI")]

    def test_multiple_hits_sorted_by_offset(self):
        lx = lex(
            ("blockchain", "BC", "WORD_BOUNDARY", False),
            ("cloud computing", "CC", "WORD_BOUNDARY", False),
        )
        hits = match_sentence(sent("cloud computing and blockchain together"), lx)
        assert [h.category for h in hits] == ["CC", "BC"]
        assert hits[0].offset < hits[1].offset

    def test_boundary_at_string_edges(self):
        lx = lex(("iot", "IOT", "WORD_BOUNDARY", False))
        assert len(match_sentence(sent("iot"), lx)) == 1
        assert len(match_sentence(sent("(iot)"), lx)) == 1
        assert match_sentence(sent("riots"), lx) == []


def brute_force_hits(text, entries):
    """Independent oracle: try every entry at every offset, then resolve
    same-category overlaps by longest term (pairwise elimination)."""
    raw = []
    for e in entries:
        hay = text if e.case_sensitive else text.lower()
        needle = e.term if e.case_sensitive else e.term.lower()
        for off in range(len(text) - len(needle) + 1):
            if hay[off : off + len(needle)] != needle:
                continue
            if e.match_mode == "WORD_BOUNDARY":
                if off > 0 and text[off - 1].isalnum():
                    continue
                end = off + len(needle)
                if end < len(text) and text[end].isalnum():
                    continue
            raw.append((e.term, e.category, off))
    kept = []
    ranked = sorted(raw, key=lambda h: (-len(h[0]), h[2], h[0], h[1]))
    for term, cat, off in ranked:
        end = off + len(term)
        clash = any(
            c == cat and off < ko + len(kt) and ko < end for kt, c, ko in kept
        )
        if not clash:
            kept.append((term, cat, off))
    return sorted(kept)


entry_terms = st.lists(
    st.text(alphabet="abc ", min_size=1, max_size=6).filter(lambda t: t.strip()),
    min_size=1,
    max_size=6,
    unique=True,
)


class TestOracleEquivalence:
    @given(
        terms=entry_terms,
        text=st.text(alphabet="abc ", min_size=0, max_size=40),
        mode=st.sampled_from(["WORD_BOUNDARY", "SUBSTRING"]),
    )
    @settings(max_examples=300, deadline=None)
    def test_matches_equal_brute_force(self, terms, text, mode):
        entries = [
            LexiconEntry(t.strip(), CATEGORIES[i % len(CATEGORIES)], mode, False)
            for i, t in enumerate(terms)
        ]
        lx = Lexicon(entries)
        got = sorted((h.term, h.category, h.offset) for h in match_sentence(sent(text), lx))
        assert got == brute_force_hits(text, entries)

    @given(text=st.text(alphabet=string.ascii_letters + " ", min_size=0, max_size=60))
    @settings(max_examples=200, deadline=None)
    def test_case_insensitive_equals_folded_scan(self, text):
        entries = [
            LexiconEntry("Cloud Computing", "CC", "WORD_BOUNDARY", False),
            LexiconEntry("cloud", "GEN", "WORD_BOUNDARY", False),
        ]
        lx = Lexicon(entries)
        got = sorted((h.term, h.category, h.offset) for h in match_sentence(sent(text), lx))
        assert got == brute_force_hits(text, entries)

    @given(
        terms=entry_terms,
        text=st.text(alphabet="abc ", min_size=0, max_size=40),
    )
    @settings(max_examples=200, deadline=None)
    def test_offsets_strictly_increase_per_category(self, terms, text):
        entries = [
            LexiconEntry(t.strip(), CATEGORIES[i % 3], "SUBSTRING", False)
            for i, t in enumerate(terms)
        ]
        hits = match_sentence(sent(text), Lexicon(entries))
        streams = {}
        for h in hits:
            streams.setdefault(h.category, []).append(h)
        for stream in streams.values():
            for a, b in zip(stream, stream[1:]):
                assert a.offset < b.offset
                assert a.end <= b.offset  # no overlap survives within a category
