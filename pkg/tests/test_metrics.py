"""Unit tests for the accuracy metrics and the synonym machinery."""

from __future__ import annotations

import itertools

import pytest
from hypothesis import given, settings, strategies as st

from colexpand.metrics import (
    SynonymLexicon,
    TrigramEmbedder,
    canonicalize,
    embedding_f1,
    exact_match,
    gold_variations,
    make_embedder,
    normalize,
    synonym_aware_em,
    synonym_aware_embedding_f1,
    synonym_aware_word_f1,
    word_f1,
)


class TestNormalize:
    def test_collapses_whitespace(self):
        assert normalize("Employee  Salary ") == "employee salary"

    def test_strips_punctuation_without_spacing(self):
        # hyphen is removed, not turned into a space
        assert normalize("Day-Time Phone") == "daytime phone"

    def test_fixed_point(self):
        assert normalize("employee salary") == "employee salary"


class TestExactMatch:
    def test_equal(self):
        assert exact_match("employee salary", "employee salary") is True

    def test_near_miss_variants_do_not_match(self):
        assert exact_match("geography identifier", "geographical identifier") is False
        assert exact_match("picture credit", "photo credit") is False

    def test_case_and_spacing_insensitive(self):
        assert exact_match("Employee  Salary", "employee salary") is True


class TestWordF1:
    def test_identical(self):
        assert word_f1("employee salary", "employee salary") == 1.0

    def test_partial_overlap(self):
        # P = 1, R = 2/3 -> 2PR/(P+R) = 0.8
        assert word_f1("employee salary", "employee salary amount") == pytest.approx(0.8, abs=1e-12)

    def test_disjoint(self):
        assert word_f1("alpha beta", "gamma delta") == 0.0

    def test_both_empty_is_perfect(self):
        assert word_f1("", "") == 1.0
        assert word_f1("--", "!!") == 1.0  # both normalize to empty

    def test_one_empty_is_zero(self):
        assert word_f1("", "word") == 0.0

    @given(
        st.text(alphabet="ab c", max_size=12),
        st.text(alphabet="ab c", max_size=12),
    )
    def test_symmetric(self, x, g):
        assert word_f1(x, g) == word_f1(g, x)


class TestEmbeddingF1:
    def setup_method(self):
        self.embed = TrigramEmbedder()

    def test_identical(self):
        assert embedding_f1("employee salary", "employee salary", self.embed) == pytest.approx(1.0, abs=1e-9)

    def test_permutation_is_perfect(self):
        assert embedding_f1("salary employee", "employee salary", self.embed) == pytest.approx(1.0, abs=1e-9)

    def test_related_words_land_between_word_f1_and_one(self):
        wf1 = word_f1("photo credit", "picture credit")
        ef1 = embedding_f1("photo credit", "picture credit", self.embed)
        assert wf1 < ef1 < 1.0

    def test_in_unit_interval(self):
        for x, g in [("a", "b"), ("a b c", "c"), ("", "x"), ("x", "x")]:
            assert 0.0 <= embedding_f1(x, g, self.embed) <= 1.0

    def test_make_embedder_specs(self):
        assert isinstance(make_embedder("offline-trigram"), TrigramEmbedder)
        with pytest.raises(ValueError):
            make_embedder("nonsense")
        with pytest.raises(ValueError):
            make_embedder("remote:")


class TestSynonymLexicon:
    def test_single_pair(self):
        lex = SynonymLexicon.from_classes([["geography", "geographical"]])
        assert lex.classes == (frozenset({"geography", "geographical"}),)

    def test_transitive_merge(self):
        # union-find oracle: a=b and b=c collapse into one class
        lex = SynonymLexicon.from_classes([["a", "b"], ["b", "c"]])
        assert lex.classes == (frozenset({"a", "b", "c"}),)

    def test_singleton_class_rejected(self):
        with pytest.raises(ValueError):
            SynonymLexicon.from_classes([["photo"]])
        with pytest.raises(ValueError):
            SynonymLexicon.from_classes([["photo", "photo"]])

    def test_phrases_normalized(self):
        lex = SynonymLexicon.from_classes([["  Photo ", "PICTURE"]])
        assert lex.classes == (frozenset({"photo", "picture"}),)

    def test_disjoint_after_merge(self):
        lex = SynonymLexicon.from_classes([["a", "b"], ["c", "d"], ["b", "e"]])
        seen = set()
        for klass in lex.classes:
            assert not (seen & klass)
            seen |= klass


class TestGoldVariations:
    def test_paper_style_pair(self):
        lex = SynonymLexicon.from_classes([["geography", "geographical"]])
        variations = gold_variations("geographical location", lex)
        assert variations == {"geographical location", "geography location"}

    def test_empty_lexicon(self):
        assert gold_variations("some phrase", SynonymLexicon.empty()) == {"some phrase"}

    def test_cross_product_count(self):
        # brute-force oracle: 3 substitutable words, classes of size 2 -> 2^3
        lex = SynonymLexicon.from_classes([["a", "a2"], ["b", "b2"], ["c", "c2"]])
        variations = gold_variations("a b c", lex)
        oracle = {
            " ".join(combo)
            for combo in itertools.product(["a", "a2"], ["b", "b2"], ["c", "c2"])
        }
        assert variations == oracle

    def test_cap_limits_enumeration(self):
        lex = SynonymLexicon.from_classes([["a", "a2"], ["b", "b2"], ["c", "c2"]])
        assert len(gold_variations("a b c", lex, cap=4)) == 4

    def test_multiword_longest_match(self):
        lex = SynonymLexicon.from_classes([["day time", "daytime"]])
        variations = gold_variations("day time phone", lex)
        assert variations == {"day time phone", "daytime phone"}


class TestSynonymAwareEM:
    def test_synonym_swap_matches(self):
        lex = SynonymLexicon.from_classes([["geography", "geographical"]])
        assert synonym_aware_em("geography location", "geographical location", lex) is True

    def test_exact_match_implies_match(self):
        lex = SynonymLexicon.empty()
        assert synonym_aware_em("x y", "x y", lex) is True

    def test_photo_picture_pair(self):
        lex = SynonymLexicon.from_classes([["photo", "picture"]])
        assert synonym_aware_em("photo credit", "picture credit", lex) is True

    def test_cap_overflow_falls_back_to_canonical(self):
        classes = [[f"w{i}", f"w{i}x"] for i in range(12)]
        lex = SynonymLexicon.from_classes(classes)
        gold = " ".join(f"w{i}" for i in range(12))  # 2^12 variations > cap
        swapped = "w0x " + " ".join(f"w{i}" for i in range(1, 12))
        assert synonym_aware_em(swapped, gold, lex, cap=64) is True
        assert synonym_aware_em("unrelated", gold, lex, cap=64) is False


class TestCanonicalize:
    def test_representative_is_lexicographically_smallest(self):
        lex = SynonymLexicon.from_classes([["photo", "picture"]])
        assert canonicalize("picture credit", lex) == "photo credit"
        assert canonicalize("photo credit", lex) == "photo credit"

    def test_no_classes_is_identity(self):
        assert canonicalize("Some  Phrase", SynonymLexicon.empty()) == "some phrase"


class TestSynonymAwareF1:
    def test_canonical_forms_equal_gives_one(self):
        lex = SynonymLexicon.from_classes([["geography", "geographical"]])
        assert synonym_aware_word_f1("geography id", "geographical id", lex) == 1.0

    def test_no_applicable_classes_equals_base(self):
        lex = SynonymLexicon.from_classes([["photo", "picture"]])
        x, g = "employee salary", "employee salary amount"
        assert synonym_aware_word_f1(x, g, lex) == word_f1(x, g)

    def test_never_below_base_on_shared_class_words(self):
        # substitution alone would merge {a, b} on both sides and drop the
        # score below the plain metric; the floor keeps it monotone
        lex = SynonymLexicon.from_classes([["a", "b"]])
        x, g = "a b c", "a b z"
        assert word_f1(x, g) == pytest.approx(2 / 3)
        assert synonym_aware_word_f1(x, g, lex) >= word_f1(x, g)

    def test_embedding_variant_monotone(self):
        lex = SynonymLexicon.from_classes([["photo", "picture"]])
        embed = TrigramEmbedder()
        base = embedding_f1("photo credit", "picture credit", embed)
        syn = synonym_aware_embedding_f1("photo credit", "picture credit", lex, embed)
        assert syn >= base
        assert syn == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=200)
@given(
    x_words=st.lists(st.sampled_from(["a", "b", "c", "d", "e"]), max_size=5),
    g_words=st.lists(st.sampled_from(["a", "b", "c", "d", "e"]), max_size=5),
)
def test_synonym_metrics_never_below_plain(x_words, g_words):
    lex = SynonymLexicon.from_classes([["a", "b"], ["c", "d"]])
    x, g = " ".join(x_words), " ".join(g_words)
    assert synonym_aware_word_f1(x, g, lex) >= word_f1(x, g)
    if exact_match(x, g):
        assert synonym_aware_em(x, g, lex)
        assert word_f1(x, g) == 1.0
