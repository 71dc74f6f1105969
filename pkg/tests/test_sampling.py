import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dtkit.corpus import Sentence
from dtkit.lexicon import KeywordHit
from dtkit.sampling import (
    SPLIT_ORDER,
    SPLIT_TEST,
    SPLIT_TRAIN,
    SPLIT_VALIDATION,
    build_annotation_pool,
    make_prediction_pool,
    split_dataset,
)


def sentences_for(years, per_year):
    out = []
    for year in years:
        for i in range(per_year):
            out.append(Sentence(f"s{year}_{i}", "F1", year, "MDA", i, f"text {year} {i}"))
    return out


class TestAnnotationPool:
    def test_equal_quota_per_year(self):
        sents = sentences_for([2015, 2016, 2017], 10)
        pool = build_annotation_pool(sents, [], per_year_quota=5, seed=7)
        assert len(pool) == 15
        per_year = {}
        for sid in pool.members:
            year = int(sid.split("_")[0][1:])
            per_year[year] = per_year.get(year, 0) + 1
        assert per_year == {2015: 5, 2016: 5, 2017: 5}

    def test_scarce_year_takes_all(self, caplog):
        sents = sentences_for([2015], 3)
        with caplog.at_level("WARNING"):
            pool = build_annotation_pool(sents, [], per_year_quota=5, seed=7)
        assert len(pool) == 3
        assert any("quota" in r.message for r in caplog.records)

    def test_deterministic_given_seed(self):
        sents = sentences_for([2015, 2016], 50)
        a = build_annotation_pool(sents, [], 10, seed=42)
        b = build_annotation_pool(sents, [], 10, seed=42)
        assert a.members == b.members

    def test_different_seeds_differ(self):
        sents = sentences_for([2015], 1000)
        a = build_annotation_pool(sents, [], 20, seed=1)
        b = build_annotation_pool(sents, [], 20, seed=2)
        assert a.members != b.members

    def test_hit_sentences_always_included(self):
        sents = sentences_for([2015], 10)
        hits = [KeywordHit("s2015_3", "blockchain", "BC", 0)]
        pool = build_annotation_pool(sents, hits, per_year_quota=0, seed=0)
        assert pool.members == ("s2015_3",)

    def test_no_duplicates_with_hits_and_sample(self):
        sents = sentences_for([2015], 10)
        hits = [KeywordHit(f"s2015_{i}", "iot", "IOT", 0) for i in range(5)]
        pool = build_annotation_pool(sents, hits, per_year_quota=5, seed=0)
        assert len(pool.members) == len(set(pool.members)) == 10

    def test_annotation_pool_subset_of_prediction_pool(self):
        sents = sentences_for([2015, 2016], 20)
        pred = make_prediction_pool(sents)
        ann = build_annotation_pool(sents, [], 5, seed=3)
        assert set(ann.members) <= set(pred.members)

    def test_members_keep_corpus_order(self):
        sents = sentences_for([2016, 2015], 5)  # interleaved years across corpus order
        order = {s.sentence_id: i for i, s in enumerate(sents)}
        pool = build_annotation_pool(sents, [], 3, seed=0)
        ranks = [order[sid] for sid in pool.members]
        assert ranks == sorted(ranks)


class TestSplitDataset:
    def test_hundred_one_class(self):
        labeled = [(f"s{i}", "AI") for i in range(100)]
        split = split_dataset(labeled, seed=0)
        sizes = {k: len(split.ids_for(k)) for k in SPLIT_ORDER}
        assert sizes == {SPLIT_TRAIN: 80, SPLIT_TEST: 10, SPLIT_VALIDATION: 10}

    def test_ten_items_rounding(self):
        labeled = [(f"s{i}", "AI") for i in range(10)]
        split = split_dataset(labeled, seed=0)
        sizes = [len(split.ids_for(k)) for k in SPLIT_ORDER]
        assert sizes == [8, 1, 1]

    def test_two_classes_stratified(self):
        labeled = [(f"a{i}", "AI") for i in range(50)] + [(f"b{i}", "BD") for i in range(50)]
        split = split_dataset(labeled, seed=1)
        for prefix in ("a", "b"):
            train = [s for s in split.ids_for(SPLIT_TRAIN) if s.startswith(prefix)]
            test = [s for s in split.ids_for(SPLIT_TEST) if s.startswith(prefix)]
            val = [s for s in split.ids_for(SPLIT_VALIDATION) if s.startswith(prefix)]
            assert (len(train), len(test), len(val)) == (40, 5, 5)

    def test_small_class_flagged(self):
        labeled = [("s1", "AI"), ("s2", "AI"), ("x1", "BC")]
        split = split_dataset(labeled, seed=0)
        assert "BC" in split.flagged_classes and "AI" in split.flagged_classes

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            split_dataset([])

    def test_deterministic(self):
        labeled = [(f"s{i}", "AI" if i % 2 else "BD") for i in range(200)]
        a = split_dataset(labeled, seed=9)
        b = split_dataset(labeled, seed=9)
        assert a.assignment == b.assignment

    @given(
        n_a=st.integers(1, 120),
        n_b=st.integers(0, 120),
        seed=st.integers(0, 2**32 - 1),
    )
    @settings(max_examples=100, deadline=None)
    def test_partition_and_train_share(self, n_a, n_b, seed):
        labeled = [(f"a{i}", "AI") for i in range(n_a)] + [(f"b{i}", "BD") for i in range(n_b)]
        split = split_dataset(labeled, seed=seed)
        all_ids = {sid for sid, _ in labeled}
        parts = [set(split.ids_for(k)) for k in SPLIT_ORDER]
        assert parts[0] | parts[1] | parts[2] == all_ids
        assert not (parts[0] & parts[1] or parts[0] & parts[2] or parts[1] & parts[2])
        for prefix, n in (("a", n_a), ("b", n_b)):
            if n == 0:
                continue
            train_n = sum(1 for s in parts[0] if s.startswith(prefix))
            assert abs(train_n - 0.8 * n) < 1.0
