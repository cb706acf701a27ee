import json
import os
import random
import sys
import warnings

import pytest

from csdlm.corpus import Corpus, ExplicitSuffix, TaggedToken, Utterance, tag_tokens
from csdlm.tokens import BOS, EOS, Lang

HERE = os.path.dirname(os.path.abspath(__file__))
TOY_LINES = ["a|L1 b|L1", "a|L1 x|L2", "x|L2 a|L1"]


@pytest.fixture(autouse=True)
def _quiet_gt_fallbacks():
    # tiny corpora routinely trigger the Good-Turing MLE fallback warning
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*Good-Turing.*", category=UserWarning)
        yield


def make_toy():
    return Corpus.from_utterances(tag_tokens(line, ExplicitSuffix()) for line in TOY_LINES)


@pytest.fixture
def toy():
    return make_toy()


@pytest.fixture(scope="session")
def golden():
    with open(os.path.join(HERE, "golden", "toy_golden.json"), encoding="utf-8") as f:
        return json.load(f)


def random_corpus(rng: random.Random, n_words1=None, n_words2=None, n_sent=None, speakers=0):
    """Random tagged corpus that always contains both languages."""
    n_words1 = n_words1 or rng.randint(1, 14)
    n_words2 = n_words2 or rng.randint(1, 14)
    v1 = [f"p{i}" for i in range(n_words1)]
    v2 = [f"q{i}" for i in range(n_words2)]
    n_sent = n_sent or rng.randint(2, 60)
    utts = [
        Utterance((TaggedToken(v1[0], Lang.L1), TaggedToken(v2[0], Lang.L2)), "s0" if speakers else None),
        Utterance((TaggedToken(v2[-1], Lang.L2), TaggedToken(v1[-1], Lang.L1)), "s1" if speakers else None),
    ]
    switch = rng.uniform(0.05, 0.6)
    for i in range(n_sent):
        lang = rng.choice([Lang.L1, Lang.L2])
        toks = []
        for _ in range(rng.randint(1, 9)):
            if toks and rng.random() < switch:
                lang = lang.other
            toks.append(TaggedToken(rng.choice(v1 if lang is Lang.L1 else v2), lang))
        spk = f"s{rng.randrange(speakers)}" if speakers else None
        utts.append(Utterance(tuple(toks), spk))
    return Corpus.from_utterances(utts)


def markov_corpus(n_sent, seed):
    """Sentences from a random bigram chain: 4 frequent words plus 40 rare ones."""
    rng = random.Random(seed)
    words = ["a", "b", "c", "d"] + [f"rare{i}" for i in range(40)]
    trans = {w: [rng.random() for _ in range(4)] + [1e-4] * 40 + [rng.random()] for w in [BOS] + words}
    out = []
    for _ in range(n_sent):
        h, sent = BOS, []
        while True:
            weights = trans[h] if sent else trans[h][:-1]
            w = rng.choices(words + [EOS], weights=weights)[0] if sent else rng.choices(words, weights=weights)[0]
            if w == EOS:
                break
            sent.append(w)
            h = w
        out.append(sent)
    return out


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
