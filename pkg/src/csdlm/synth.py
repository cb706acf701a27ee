"""Synthetic code-switched corpora drawn from known dual models.

A ground-truth DLM is built directly from random per-history distributions
that satisfy the switching conditions by construction, then sampled
sentence by sentence.  Sentence ``i`` always uses the generator
``default_rng([seed, i])`` so corpora can be produced in any order or in
parallel and still come out identical.
"""

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .corpus import Corpus, Utterance, write_corpus
from .dlm import DLMError, DualLM, enforce_conditions, sample, validate
from .ngram import NEG_INF, BackoffBigramModel
from .tokens import BOS, EOS, SW

__all__ = [
    "GroundTruthSpec",
    "PRESETS",
    "preset",
    "make_ground_truth",
    "generate_corpus",
    "write_synthetic",
]


@dataclass(frozen=True)
class GroundTruthSpec:
    """Parameters of a random ground-truth DLM.

    Attributes
    ----------
    vocab1, vocab2 : int
        Vocabulary sizes.  Words are ``m0, m1, ...`` and ``e0, e1, ...``.
    switch_rate : (float, float)
        Range for ``P_i[<sw>|w]``, drawn uniformly per history word.
    end_rate : (float, float)
        Range for ``P_i[</s>|w]``, drawn uniformly per history word.
    start_switch : float
        ``P_1[<sw>|<s>]``, i.e. the probability that a sentence starts in L2.
    concentration : float
        Symmetric Dirichlet parameter for the word distributions of every
        row; small values give peaked rows and a long tail.
    seed : int
    """

    vocab1: int = 30
    vocab2: int = 30
    switch_rate: tuple = (0.05, 0.3)
    end_rate: tuple = (0.1, 0.2)
    start_switch: float = 0.4
    concentration: float = 0.5
    seed: int = 0

    def validate(self):
        if self.vocab1 < 1 or self.vocab2 < 1:
            raise DLMError("vocabulary sizes must be positive")
        for name in ("switch_rate", "end_rate"):
            lo, hi = getattr(self, name)
            if not 0 <= lo <= hi < 1:
                raise DLMError(f"{name} must satisfy 0 <= lo <= hi < 1")
        if self.switch_rate[1] + self.end_rate[1] >= 1:
            raise DLMError("switch_rate and end_rate upper bounds leave no word mass")
        if not 0 < self.start_switch < 1:
            raise DLMError("start_switch must be in (0, 1)")
        if self.concentration <= 0:
            raise DLMError("concentration must be positive")

    def to_dict(self):
        return asdict(self)


PRESETS = {
    "default": GroundTruthSpec(),
    # large vocabularies and rare switches: most switch bigrams are seen once
    "sparse-switch": GroundTruthSpec(
        vocab1=300,
        vocab2=300,
        switch_rate=(0.02, 0.1),
        end_rate=(0.08, 0.15),
        start_switch=0.4,
        concentration=0.1,
        seed=20,
    ),
}


def _dirichlet(rng, n, concentration):
    p = rng.dirichlet(np.full(n, concentration))
    # tiny concentrations can underflow to exact zeros; keep every word reachable
    p = np.maximum(p, 1e-12)
    return p / p.sum()


def _ln(p):
    return math.log(p) if p > 0 else NEG_INF


def _side(rng, words, start_switch, spec):
    n = len(words)
    rows = {}
    start = _dirichlet(rng, n, spec.concentration) * (1 - start_switch)
    rows[BOS] = dict(zip(words, start.tolist()))
    rows[BOS].update({SW: start_switch, EOS: 0.0})
    rows[SW] = dict(zip(words, _dirichlet(rng, n, spec.concentration).tolist()))
    rows[SW].update({SW: 0.0, EOS: 0.0})
    for w in words:
        sw = rng.uniform(*spec.switch_rate)
        end = rng.uniform(*spec.end_rate)
        p = _dirichlet(rng, n, spec.concentration) * (1 - sw - end)
        rows[w] = dict(zip(words, p.tolist()))
        rows[w].update({SW: sw, EOS: end})
    targets = list(words) + [SW, EOS]
    # the unigram only matters for out-of-vocabulary histories
    unigram = {t: math.log(1 / len(targets)) for t in targets}
    bigram = {h: {w: _ln(p) for w, p in row.items()} for h, row in rows.items()}
    backoff = {h: NEG_INF for h in rows}
    return BackoffBigramModel(set(targets) | {BOS}, unigram, bigram, backoff, "mle")


def make_ground_truth(spec: GroundTruthSpec) -> DualLM:
    """Random DLM satisfying the switching conditions, deterministic in ``spec.seed``."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    words1 = [f"m{i}" for i in range(spec.vocab1)]
    words2 = [f"e{i}" for i in range(spec.vocab2)]
    lm1 = _side(rng, words1, spec.start_switch, spec)
    lm2 = _side(rng, words2, 1 - spec.start_switch, spec)
    dlm = enforce_conditions(lm1, lm2)
    bad = validate(dlm)
    if bad:
        raise DLMError(f"ground truth failed validation: {bad[0]}")
    return dlm


def generate_corpus(dlm: DualLM, n_sentences: int, seed: int, speakers: int = 0, max_len: int = 100) -> Corpus:
    """Sample `n_sentences` tagged utterances.

    With ``speakers > 0`` utterance ``i`` is attributed to speaker
    ``spk{i % speakers}`` so the result can be split by speaker.
    """
    utts = []
    for i in range(n_sentences):
        s = sample(dlm, np.random.default_rng([seed, i]), max_len=max_len)
        utts.append(Utterance(tuple(s.tokens), f"spk{i % speakers}" if speakers else None))
    return Corpus.from_utterances(utts)


def write_synthetic(corpus: Corpus, path):
    """Write in the explicit-suffix corpus format."""
    write_corpus(corpus, path)


def preset(name: str, **overrides) -> GroundTruthSpec:
    try:
        spec = PRESETS[name]
    except KeyError:
        raise DLMError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
    return replace(spec, **overrides) if overrides else spec

