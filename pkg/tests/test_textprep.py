import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sentiscore.textprep import (OOV_ID, PAD_ID, Vocabulary, VocabularyError, build_vocab, coverage_curve,
                                 denormalize, encode, min_vocab_for_coverage, normalize_label,
                                 pad_truncate, read_wordlist, remove_stopwords, segment)


def test_segment_prefers_longest_match():
    assert segment("充电桩很方便", {"充电", "充电桩", "很", "方便"}) == ["充电桩", "很", "方便"]


def test_segment_empty_dictionary_falls_back_to_characters():
    assert segment("好", set()) == ["好"]
    assert segment("好用", set()) == ["好", "用"]


def test_segment_greedy_scan():
    assert segment("abcd", {"ab", "cd"}) == ["ab", "cd"]


@given(st.text(alphabet="abc好用", max_size=30),
       st.sets(st.text(alphabet="abc好用", min_size=1, max_size=4), max_size=8))
def test_segment_concatenates_to_input(text, dictionary):
    assert "".join(segment(text, dictionary)) == text


def test_remove_stopwords():
    assert remove_stopwords(["充电桩", "是", "方便"], {"是", "的"}) == ["充电桩", "方便"]
    toks = ["a", "b"]
    assert remove_stopwords(toks, set()) == toks
    assert remove_stopwords(["的", "的"], {"的"}) == []


def test_preprocessor_splits_on_cleaned_spaces(toy_prep):
    assert toy_prep.tokenize("<p>充电桩是很方便!!!太慢</p>") == ["充电桩", "很", "方便", "太慢"]


def test_wordlist_skips_comments(tmp_path):
    p = tmp_path / "w.txt"
    p.write_text("# header\n的\n\n是\n", encoding="utf-8")
    assert read_wordlist(p) == {"的", "是"}


def _oracle_ids(corpus, max_tokens):
    # independent: count, then order by (-count, first position in the flattened corpus)
    flat = [t for doc in corpus for t in doc]
    first = {}
    for i, t in enumerate(flat):
        first.setdefault(t, i)
    counts = Counter(flat)
    order = sorted(counts, key=lambda t: (-counts[t], first[t]))[:max_tokens]
    return {t: i + 2 for i, t in enumerate(order)}


def test_build_vocab_truncates_by_frequency():
    corpus = [["好"] * 5, ["差"] * 3, ["慢"]]
    v = build_vocab(corpus, 2)
    assert v.index["好"] == 2 and v.index["差"] == 3
    assert "慢" not in v
    assert v.frequencies[2:] == [5, 3]


def test_build_vocab_single_token():
    assert build_vocab([["好"]], 5).tokens == ["<PAD>", "<OOV>", "好"]


def test_build_vocab_tie_break_first_occurrence():
    v = build_vocab([["乙", "甲"], ["甲", "乙"]], 5)
    assert v.index["乙"] == 2 and v.index["甲"] == 3


def test_build_vocab_empty_corpus():
    with pytest.raises(VocabularyError):
        build_vocab([], 3)
    with pytest.raises(VocabularyError):
        build_vocab([[]], 3)


@given(st.lists(st.lists(st.sampled_from(list("abcdefgh")), max_size=12), min_size=1, max_size=10),
       st.integers(1, 10))
def test_build_vocab_matches_count_sort_oracle(corpus, max_tokens):
    if not any(corpus):
        return
    v = build_vocab(corpus, max_tokens)
    assert {t: v.index[t] for t in v.tokens[2:]} == _oracle_ids(corpus, max_tokens)
    assert list(range(len(v))) == [v.index[t] for t in v.tokens]


def test_build_vocab_default_budget_uses_coverage():
    corpus = [["a"] * 5 + ["b"] * 3 + ["c", "d"]]
    assert len(build_vocab(corpus, None, 0.95)) == 2 + 4
    assert len(build_vocab(corpus, None, 0.8)) == 2 + 2


def test_vocab_file_round_trip(tmp_path):
    v = build_vocab([["好", "好", "差"]], 10)
    p = tmp_path / "vocab.tsv"
    v.save(p)
    lines = p.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "<PAD>\t0\t0" and lines[1] == "<OOV>\t1\t0" and lines[2] == "好\t2\t2"
    w = Vocabulary.load(p)
    assert w.tokens == v.tokens and w.frequencies == v.frequencies and w.digest() == v.digest()


def test_coverage_curve_examples():
    assert coverage_curve([5, 3, 1, 1]) == [(1, 0.5), (2, 0.8), (3, 0.9), (4, 1.0)]
    assert coverage_curve([7]) == [(1, 1.0)]
    with pytest.raises(ValueError):
        coverage_curve([])
    with pytest.raises(ValueError):
        coverage_curve([1, 3])


def test_min_vocab_for_coverage_examples():
    assert min_vocab_for_coverage([5, 3, 1, 1], 0.95) == 4
    assert min_vocab_for_coverage([5, 3, 1, 1], 0.5) == 1
    assert min_vocab_for_coverage([4, 4, 2, 1, 1], 1.0) == 5
    for bad in (0.0, 1.5, -0.1):
        with pytest.raises(ValueError):
            min_vocab_for_coverage([5, 3], bad)


@given(st.lists(st.integers(1, 50), min_size=1, max_size=40), st.floats(0.01, 1.0))
def test_coverage_properties(counts, threshold):
    counts = sorted(counts, reverse=True)
    curve = [c for _, c in coverage_curve(counts)]
    assert all(a <= b for a, b in zip(curve, curve[1:]))
    assert curve[-1] == 1.0
    k = min_vocab_for_coverage(counts, threshold)
    assert curve[k - 1] >= threshold
    assert k == 1 or curve[k - 2] < threshold


def test_encode():
    v = build_vocab([["好", "好", "差"]], 10)
    assert encode(["好", "差"], v) == [2, 3]
    assert encode(["新词"], v) == [OOV_ID]
    assert encode([], v) == []


def test_pad_truncate_examples():
    s = pad_truncate([5, 7], 4)
    assert s.ids.tolist() == [0, 0, 5, 7] and s.true_length == 2
    s = pad_truncate(list(range(1, 151)), 100)
    assert s.ids.tolist() == list(range(1, 101)) and s.true_length == 100
    s = pad_truncate(list(range(1, 101)), 100)
    assert s.ids.tolist() == list(range(1, 101))
    with pytest.raises(ValueError):
        pad_truncate([], 10)


@given(st.lists(st.integers(1, 99), min_size=1, max_size=150), st.integers(1, 120))
def test_pad_truncate_invariants(ids, length):
    s = pad_truncate(ids, length)
    assert s.ids.shape == (length,)
    assert s.true_length == min(len(ids), length)
    assert np.all(s.ids[:length - s.true_length] == PAD_ID)
    assert s.ids[length - s.true_length:].tolist() == ids[:s.true_length]


def test_label_normalization():
    assert normalize_label(4.5) == 0.9
    assert normalize_label(0) == 0.0 and normalize_label(5) == 1.0
    assert denormalize(1.2) == 5.0
    assert denormalize(-0.3) == 0.0
    with pytest.raises(ValueError):
        normalize_label(5.5)


@given(st.floats(0, 5))
def test_label_round_trip(r):
    assert math.isclose(denormalize(normalize_label(r)), r, abs_tol=1e-12)
