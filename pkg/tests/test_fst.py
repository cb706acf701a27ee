import itertools
import math
import random

import pytest

from csdlm.dlm import DualLM, MonolingualLM, score_mixed, score_sentence, train_dlm, train_mixed
from csdlm.fst import (
    FstError,
    export_dlm_fst,
    export_mixed_fst,
    read_att,
    score_path,
    stochasticity_residuals,
    write_att,
)
from csdlm.ngram import NgramError

from conftest import random_corpus


def _dlm_or_none(corpus, smoothing):
    try:
        return train_dlm(corpus, smoothing)
    except NgramError:
        return None


def test_toy_path_weight(toy):
    fst = export_dlm_fst(train_dlm(toy, "mle"))
    assert score_path(fst, "a x") == pytest.approx(-math.log(1 / 9), abs=1e-12)
    assert score_path(fst, "a x") == pytest.approx(2.1972, abs=1e-4)


def test_toy_state_count(toy):
    assert export_dlm_fst(train_dlm(toy, "mle")).num_states == 5


def test_not_accepted_cases(toy):
    fst = export_dlm_fst(train_dlm(toy, "mle"))
    assert score_path(fst, "") == math.inf
    assert score_path(fst, "a zz") == math.inf
    # MLE gives P[a|b] = 0, so no arc
    assert score_path(fst, "a b a") == math.inf
    assert not fst.accepts(["b"])


def test_no_bos_or_eos_labels(toy):
    fst = export_dlm_fst(train_dlm(toy, "kn"))
    labels = {a.label for a in fst.iter_arcs()}
    assert labels == {"a", "b", "x"}


def test_unenforced_dlm_rejected(toy):
    d = train_dlm(toy, "kn")
    raw = DualLM(MonolingualLM(d.lm1.inner, d.lm1.lang, False), d.lm2)
    with pytest.raises(FstError):
        export_dlm_fst(raw)


@pytest.mark.parametrize("smoothing", ["mle", "gt", "kn"])
def test_stochastic_and_deterministic(smoothing):
    rng = random.Random(5)
    done = 0
    while done < 10:
        corpus = random_corpus(rng)
        d = _dlm_or_none(corpus, smoothing)
        if d is None:
            continue
        for fst in (export_dlm_fst(d), export_mixed_fst(train_mixed(corpus, "mle"))):
            assert all(abs(r) <= 1e-6 for r in stochasticity_residuals(fst).values())
            for q, out in fst.arcs.items():
                assert all(a.src == q and a.label == lab for lab, a in out.items())
        done += 1


def _all_sentences(words, max_len):
    for n in range(0, max_len + 1):
        yield from itertools.product(words, repeat=n)


@pytest.mark.parametrize("smoothing", ["mle", "kn"])
def test_exhaustive_equivalence_small_vocab(smoothing):
    corpus = random_corpus(random.Random(12), n_words1=2, n_words2=2, n_sent=6)
    d = train_dlm(corpus, smoothing)
    mixed = train_mixed(corpus, smoothing)
    fst, mfst = export_dlm_fst(d), export_mixed_fst(mixed)
    words = d.targets[:-1]
    assert len(words) == 4
    for sent in _all_sentences(words, 4):
        for acc, lp in ((fst, lambda s: score_sentence(d, s).total_logprob), (mfst, lambda s: score_mixed(mixed, s).total_logprob)):
            w = score_path(acc, list(sent))
            if not sent:
                assert w == math.inf
                continue
            expected = lp(list(sent))
            if expected == -math.inf:
                assert w == math.inf, sent
            else:
                assert abs(w + expected) <= 1e-6, sent


def test_random_sentence_equivalence():
    rng = random.Random(31)
    corpus = random_corpus(rng, n_words1=10, n_words2=8, n_sent=120)
    d = train_dlm(corpus, "kn")
    fst = export_dlm_fst(d)
    words = d.targets[:-1]
    for _ in range(1000):
        sent = [rng.choice(words) for _ in range(rng.randint(1, 25))]
        assert abs(score_path(fst, sent) + score_sentence(d, sent).total_logprob) <= 1e-6


def test_att_round_trip(tmp_path, toy):
    d = train_dlm(toy, "kn")
    fst = export_dlm_fst(d)
    write_att(fst, tmp_path / "m.fst.txt", tmp_path / "m.syms")
    syms = (tmp_path / "m.syms").read_text(encoding="utf-8").splitlines()
    assert syms[0] == "<eps>\t0"
    lines = (tmp_path / "m.fst.txt").read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("0\t")
    assert all(len(l.split("\t")) in (2, 4) for l in lines)
    back = read_att(tmp_path / "m.fst.txt", tmp_path / "m.syms")
    assert back.num_states == fst.num_states and back.num_arcs == fst.num_arcs
    for sent in ("a", "a x", "x a b", "b b x x"):
        assert score_path(back, sent) == pytest.approx(score_path(fst, sent), abs=1e-8)


def test_att_rejects_bad_lines(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("0\t1\ta\n", encoding="utf-8")
    with pytest.raises(FstError, match=":1:"):
        read_att(p)
    p.write_text("0\t1\ta\t0.1\n0\t2\ta\t0.2\n", encoding="utf-8")
    with pytest.raises(FstError, match="second arc"):
        read_att(p)
