import io
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csdlm.analysis import (
    bucket_of,
    compare_sentence_ppl,
    freq_fraction_histogram,
    switch_bigram_stats,
    switch_bigrams,
    write_comparison,
    write_histogram,
    write_switch_stats,
)
from csdlm.corpus import derive_monolingual, tag_tokens, ExplicitSuffix
from csdlm.dlm import train_dlm, train_mixed
from csdlm.tokens import SW, Lang

from conftest import random_corpus


def test_toy_switch_stats(toy):
    stats = switch_bigram_stats(toy)
    assert switch_bigrams(toy) == {("a", "x"): 1, ("x", "a"): 1}
    assert stats.total_switch_bigram_types == 2
    assert stats.histogram == {1: 2}
    assert stats.fraction_singleton == 1.0
    assert stats.fraction_count_le[10] == 1.0


def test_monolingual_corpus_has_no_stats():
    corpus = [tag_tokens("a|L1 b|L1", ExplicitSuffix())]
    stats = switch_bigram_stats(corpus)
    assert stats.total_switch_bigram_types == 0
    assert stats.fraction_singleton is None and stats.fraction_count_le[10] is None
    buf = io.StringIO()
    write_switch_stats(stats, buf)
    assert "fraction_singleton\tNA\n" in buf.getvalue()


def test_switch_stats_fractions():
    lines = ["a|L1 x|L2"] * 3 + ["b|L1 x|L2", "x|L2 b|L1"]
    stats = switch_bigram_stats([tag_tokens(l, ExplicitSuffix()) for l in lines])
    assert stats.histogram == {1: 2, 3: 1}
    assert stats.fraction_singleton == pytest.approx(2 / 3)
    assert stats.fraction_count_le[2] == pytest.approx(2 / 3)
    assert sum(stats.histogram.values()) == stats.total_switch_bigram_types


@pytest.mark.parametrize("f, b", [(1, 1), (2, 1), (3, 2), (4, 2), (5, 3), (8, 3), (9, 4), (1024, 10), (1025, 11)])
def test_bucket_of(f, b):
    assert bucket_of(f) == b


def test_histogram_hand_counts():
    hist = freq_fraction_histogram([["a"] * 4 + ["b"]], order=1)
    assert hist.buckets == {1: 0.2, 2: 1.0}


def test_histogram_all_singletons():
    assert freq_fraction_histogram([["a", "b", "c"]]).buckets == {1: 1.0}


def test_histogram_trigrams():
    hist = freq_fraction_histogram(["a b c a b c", "a b c"], order=3)
    # a b c x3 (bucket 2), b c a x1, c a b x1 (bucket 1)
    assert hist.buckets == {1: 2 / 5, 2: 1.0}


def test_histogram_rejects_empty_and_bad_order():
    with pytest.raises(ValueError):
        freq_fraction_histogram([["a", "b"]], order=3)
    with pytest.raises(ValueError):
        freq_fraction_histogram([["a"]], order=2)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([1, 3]))
def test_histogram_monotone(seed, order):
    corpus = random_corpus(random.Random(seed))
    hist = freq_fraction_histogram(corpus, order)
    vals = list(hist.buckets.values())
    assert list(hist.buckets) == list(range(1, len(vals) + 1))
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    assert vals[-1] == 1.0 and all(0 <= v <= 1 for v in vals)


def test_switch_count_matches_derived_markers():
    rng = random.Random(2)
    for _ in range(50):
        corpus = random_corpus(rng)
        markers = sum(s.count(SW) for lang in (Lang.L1, Lang.L2) for s in derive_monolingual(corpus, lang))
        assert markers == sum(switch_bigrams(corpus).values()) + len(corpus)


def test_compare_toy(toy):
    d = train_dlm(toy, "mle")
    m = train_mixed(toy, "mle")
    rows = compare_sentence_ppl(m, d, [toy.utterances[1]])
    assert rows[0].sentence == "a x"
    assert rows[0].dlm_ppl == pytest.approx(9 ** (1 / 3), abs=1e-9)
    assert rows[0].dlm_ppl == pytest.approx(2.0801, abs=1e-4)


def test_compare_identity_when_probabilities_match(toy):
    # on a one-language corpus, the DLM and the mixed model agree transition by transition
    corpus = random_corpus(random.Random(6), n_sent=40)
    d = train_dlm(corpus, "mle")
    sents = [u for u in corpus if len({t.lang for t in u.tokens}) == 1 and u.tokens[0].lang is Lang.L1]
    rows = compare_sentence_ppl(d.lm1.inner, d, sents)
    assert rows and all(r.mixed_ppl == pytest.approx(r.dlm_ppl, rel=1e-12) for r in rows)


def test_writers_format(toy):
    d = train_dlm(toy, "mle")
    rows = compare_sentence_ppl(train_mixed(toy, "mle"), d, toy.utterances)
    buf = io.StringIO()
    write_comparison(rows, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "sentence\tmixed_ppl\tdlm_ppl"
    assert lines[2].split("\t")[2] == "2.080084"
    buf = io.StringIO()
    write_histogram(freq_fraction_histogram([["a"] * 4 + ["b"]]), buf)
    assert buf.getvalue() == "order\tbucket\tmax_freq\tcumulative_fraction\n1\t1\t2\t0.200000\n1\t2\t4\t1.000000\n"
