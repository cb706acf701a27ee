"""Dual language models: two monolingual bigram models joined by switching.

Each monolingual model predicts its own words plus ``<sw>``, which stands
for a span of the other language.  Given models that satisfy

1. ``P_i[</s>|<s>] = 0``
2. ``P_1[<sw>|<s>] + P_2[<sw>|<s>] = 1``
3. ``P_i[<sw>|<sw>] = 0``
4. ``P_i[</s>|<sw>] = 0``

the combined model over ``V1 | V2 | {</s>}`` is::

    P[w'|<s>] = P_i[w'|<s>]                    w' in V_i
    P[w'|w]   = P_i[w'|w]                      w in V_i, w' in V_i or </s>
    P[w'|w]   = P_i[<sw>|w] * P_j[w'|<sw>]     w in V_i, w' in V_j

and every row of it sums to one.  :func:`enforce_conditions` reweights
trained models so the four conditions hold.
"""

import bisect
import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from . import __version__
from .arpa import read_arpa, write_arpa
from .corpus import Corpus, TaggedToken, Utterance, derive_monolingual
from .ngram import NEG_INF, BackoffBigramModel, NgramError, count, estimate
from .tokens import BOS, EOS, SW, UNK, Lang

__all__ = [
    "MonolingualLM",
    "DualLM",
    "DLMError",
    "OOVError",
    "Violation",
    "Transition",
    "ScoreBreakdown",
    "EvalReport",
    "Sample",
    "MassTable",
    "enforce_conditions",
    "combined_prob",
    "score_sentence",
    "score_mixed",
    "perplexity",
    "sample",
    "enumerate_mass",
    "enumerate_sentences",
    "validate",
    "combined_row_sums",
    "train_monolingual",
    "estimate_monolingual",
    "train_mixed",
    "train_dlm",
    "flatten",
    "save_dlm",
    "load_dlm",
    "OOV_POLICIES",
]

TOL = 1e-9
OOV_POLICIES = ("skip", "closed")


class DLMError(ValueError):
    pass


class OOVError(DLMError, KeyError):
    pass


@dataclass(frozen=True)
class MonolingualLM:
    inner: BackoffBigramModel
    lang: Lang
    conditions_enforced: bool = False

    @cached_property
    def vocab(self) -> frozenset:
        return frozenset(self.inner.words)

    def prob(self, h, w):
        return self.inner.prob(h, w)

    def logprob(self, h, w):
        return self.inner.logprob(h, w)


@dataclass(frozen=True, eq=False)
class DualLM:
    lm1: MonolingualLM
    lm2: MonolingualLM

    def __post_init__(self):
        both = self.lm1.vocab & self.lm2.vocab
        if both:
            raise DLMError("monolingual vocabularies overlap: " + ", ".join(sorted(both)[:10]))

    @property
    def vocab1(self):
        return self.lm1.vocab

    @property
    def vocab2(self):
        return self.lm2.vocab

    @cached_property
    def targets(self) -> tuple:
        return tuple(sorted(self.vocab1)) + tuple(sorted(self.vocab2)) + (EOS,)

    @cached_property
    def histories(self) -> tuple:
        return (BOS,) + self.targets[:-1]

    @property
    def enforced(self) -> bool:
        return self.lm1.conditions_enforced and self.lm2.conditions_enforced

    def model(self, lang) -> MonolingualLM:
        return self.lm1 if Lang.parse(lang) is Lang.L1 else self.lm2

    def lang_of(self, word) -> Optional[Lang]:
        if word in self.lm1.vocab:
            return Lang.L1
        if word in self.lm2.vocab:
            return Lang.L2
        return None

    def _parts(self, history, word, history_lang):
        """Resolve a transition to ``(own model, other model, case)``."""
        if history == EOS:
            raise DLMError("no distribution after </s>")
        if history == BOS:
            lang = self.lang_of(word)
            if lang is None:
                if word == EOS:
                    return None, None, "zero"
                raise OOVError(word)
            m = self.model(lang)
            return m, None, "own"
        lang = self.lang_of(history) or (Lang.parse(history_lang) if history_lang else None)
        if lang is None:
            raise OOVError(f"history {history!r} is out of vocabulary and has no language")
        own, other = self.model(lang), self.model(lang.other)
        if word == EOS or word in own.vocab:
            return own, None, "own"
        if word in other.vocab:
            return own, other, "switch"
        raise OOVError(word)

    def prob(self, history, word, history_lang=None) -> float:
        own, other, case = self._parts(history, word, history_lang)
        if case == "zero":
            return 0.0
        if case == "own":
            return own.prob(history, word)
        return own.prob(history, SW) * other.prob(SW, word)

    def logprob(self, history, word, history_lang=None) -> float:
        own, other, case = self._parts(history, word, history_lang)
        if case == "zero":
            return NEG_INF
        if case == "own":
            return own.logprob(history, word)
        return own.logprob(history, SW) + other.logprob(SW, word)

    def row(self, history, history_lang=None) -> np.ndarray:
        """Combined distribution after `history` over :attr:`targets`."""
        cache = self._rows
        key = (history, history_lang)
        if key not in cache:
            cache[key] = np.array([self.prob(history, w, history_lang) for w in self.targets])
        return cache[key]

    @cached_property
    def _rows(self):
        return {}

    @cached_property
    def _cumulative(self):
        return {}


def combined_prob(dlm: DualLM, history, word, history_lang=None) -> float:
    return dlm.prob(history, word, history_lang)


# -- enforcing the conditions -----------------------------------------------

def _as_model(m):
    return m.inner if isinstance(m, MonolingualLM) else m


def _with_switch(model: BackoffBigramModel) -> BackoffBigramModel:
    if SW in model:
        return model
    return BackoffBigramModel(model.vocab + (SW,), model.unigram, model.bigram, model.backoff, model.smoothing)


def _materialized(model, history, zero=()):
    """Explicit row entries with `zero` words forced to exact zero."""
    explicit = dict(model.bigram.get(history, {}))
    for w in (SW, EOS):
        if w not in explicit:
            explicit[w] = model.logprob(history, w)
    for w in zero:
        explicit[w] = NEG_INF
    return explicit, model.backoff.get(history, 0.0)


def _backoff_mass(model, explicit, log_alpha):
    """Probability reaching words that have no explicit entry."""
    if log_alpha == NEG_INF:
        return []
    return [math.exp(log_alpha) * model.unigram_prob(w) for w in model.targets if w not in explicit]


def _in_vocab_mass(model, explicit, log_alpha):
    parts = [math.exp(lp) for w, lp in explicit.items() if w not in (SW, EOS)]
    return math.fsum(parts + _backoff_mass(model, explicit, log_alpha))


def _scaled(explicit, log_alpha, factor, keep=(SW, EOS)):
    if factor == 0:
        shifted = {w: (lp if w in keep else NEG_INF) for w, lp in explicit.items()}
        return shifted, NEG_INF
    shift = math.log(factor)
    out = {}
    for w, lp in explicit.items():
        out[w] = lp if (w in keep or lp == NEG_INF) else lp + shift
    return out, (log_alpha + shift if log_alpha > NEG_INF else log_alpha)


def _switch_row_ok(model):
    return (
        model.logprob(SW, SW) == NEG_INF
        and model.logprob(SW, EOS) == NEG_INF
        and abs(model.row_sum(SW) - 1) <= 1e-12
    )


def _fix_switch_row(model, lang):
    if _switch_row_ok(model):
        return model
    explicit, log_alpha = _materialized(model, SW, zero=(SW, EOS))
    remaining = _in_vocab_mass(model, explicit, log_alpha)
    if remaining <= 0:
        raise DLMError(f"{lang} model puts no mass on any word after <sw>; cannot reweight")
    explicit, log_alpha = _scaled(explicit, log_alpha, 1.0 / remaining)
    return model.replace_row(SW, explicit, log_alpha)


def enforce_conditions(lm1, lm2) -> DualLM:
    """Reweight two monolingual models so that conditions (1)-(4) hold.

    The ``<sw>`` row of each model loses its ``<sw>`` and ``</s>`` entries
    and is renormalized.  In the ``<s>`` row, ``</s>`` is zeroed, the two
    start-switch probabilities are rescaled to sum to one and the remaining
    word mass of each row is scaled to fill the rest.  Rows that already
    satisfy their conditions are left untouched, so enforcing twice is a
    no-op.
    """
    models = [_with_switch(_as_model(lm1)), _with_switch(_as_model(lm2))]
    langs = (Lang.L1, Lang.L2)
    models = [_fix_switch_row(m, lang) for m, lang in zip(models, langs)]

    s = [m.prob(BOS, SW) for m in models]
    start_ok = all(
        m.logprob(BOS, EOS) == NEG_INF and abs(m.row_sum(BOS) - 1) <= 1e-12 for m in models
    ) and abs(s[0] + s[1] - 1) <= 1e-12
    if not start_ok:
        if s[0] + s[1] <= 0:
            raise DLMError("neither model ever starts with <sw>; start probabilities undefined")
        s_hat = [x / (s[0] + s[1]) for x in s]
        fixed = []
        for m, sh, lang in zip(models, s_hat, langs):
            explicit, log_alpha = _materialized(m, BOS, zero=(EOS,))
            mass = _in_vocab_mass(m, explicit, log_alpha)
            if mass <= 0 and sh < 1:
                raise DLMError(f"{lang} model has no word mass after <s>; cannot reweight")
            explicit, log_alpha = _scaled(explicit, log_alpha, (1 - sh) / mass if mass > 0 else 0.0)
            explicit[SW] = math.log(sh) if sh > 0 else NEG_INF
            fixed.append(m.replace_row(BOS, explicit, log_alpha))
        models = fixed
    return DualLM(MonolingualLM(models[0], Lang.L1, True), MonolingualLM(models[1], Lang.L2, True))


# -- validation -------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    condition: str
    model: str
    history: str
    residual: float

    def __str__(self):
        return (
            f"condition={self.condition}\tmodel={self.model}\t"
            f"history={self.history}\tresidual={self.residual:.6e}"
        )


def validate(dlm: DualLM, tol: float = TOL) -> list:
    """All violated conditions and row normalizations, empty if none."""
    out = []
    for m in (dlm.lm1, dlm.lm2):
        name = m.lang.value
        inner = m.inner
        for cond, h, w in (("1", BOS, EOS), ("3", SW, SW), ("4", SW, EOS)):
            p = inner.prob(h, w)
            if p > tol:
                out.append(Violation(cond, name, h, abs(p)))
        uni = math.fsum(inner.unigram_prob(w) for w in inner.targets)
        if abs(uni - 1) > tol:
            out.append(Violation("normalization", name, "(unigram)", abs(uni - 1)))
        for h in inner.histories:
            r = inner.row_sum(h) - 1
            if abs(r) > tol:
                out.append(Violation("normalization", name, h, abs(r)))
    s = dlm.lm1.prob(BOS, SW) + dlm.lm2.prob(BOS, SW)
    if abs(s - 1) > tol:
        out.append(Violation("2", "both", BOS, abs(s - 1)))
    return out


def combined_row_sums(dlm: DualLM) -> dict:
    """``{history: sum of the combined row}`` over ``<s>`` and all words."""
    return {h: math.fsum(dlm.row(h)) for h in dlm.histories}


# -- scoring ----------------------------------------------------------------

@dataclass(frozen=True)
class Transition:
    history: str
    word: str
    logprob: float
    source: str


@dataclass
class ScoreBreakdown:
    total_logprob: float
    per_transition: list
    token_count: int
    oov_count: int = 0
    zero_transition: Optional[Transition] = None

    @property
    def ppl(self) -> float:
        if self.token_count == 0:
            return float("nan")
        return math.exp(-self.total_logprob / self.token_count)


def _split_token(tok):
    if isinstance(tok, TaggedToken):
        return tok.surface, tok.lang
    return tok, None


def _check_policy(oov_policy):
    if oov_policy not in OOV_POLICIES:
        raise DLMError(f"unknown OOV policy {oov_policy!r}")


def _score(tokens, known, logprob, source, oov_policy):
    _check_policy(oov_policy)
    tokens = list(tokens)
    if not tokens:
        raise DLMError("cannot score an empty sentence")
    transitions = []
    oov = 0
    zero = None
    prev, prev_lang = BOS, None
    for tok in list(tokens) + [EOS]:
        word, lang = _split_token(tok)
        if word != EOS and not known(word):
            if oov_policy == "closed":
                raise OOVError(f"out-of-vocabulary token {word!r}")
            oov += 1
            prev, prev_lang = word, lang
            continue
        lp = logprob(prev, word, prev_lang)
        t = Transition(prev, word, lp, source(prev, word, prev_lang))
        transitions.append(t)
        if lp == NEG_INF and zero is None:
            zero = t
        prev, prev_lang = word, lang
    total = NEG_INF if zero else math.fsum(t.logprob for t in transitions)
    return ScoreBreakdown(total, transitions, len(tokens) + 1 - oov, oov, zero)


def score_sentence(dlm: DualLM, sentence, oov_policy="skip") -> ScoreBreakdown:
    """Chain-rule score of ``<s> sentence </s>`` under the combined model.

    Tokens are :class:`TaggedToken` or plain strings; tags only matter for
    out-of-vocabulary tokens, whose row backs off to the unigram
    distribution of their language.
    """

    def known(w):
        return dlm.lang_of(w) is not None

    def source(h, w, h_lang):
        if h == BOS:
            return dlm.lang_of(w).value
        lang = dlm.lang_of(h) or Lang.parse(h_lang)
        if w == EOS or dlm.lang_of(w) is lang:
            return lang.value
        return "switch"

    def logprob(h, w, h_lang):
        if h != BOS and dlm.lang_of(h) is None and h_lang is None:
            raise OOVError(f"untagged out-of-vocabulary history {h!r}")
        return dlm.logprob(h, w, h_lang)

    words = sentence.tokens if isinstance(sentence, Utterance) else sentence
    return _score(words, known, logprob, source, oov_policy)


def score_mixed(model: BackoffBigramModel, sentence, oov_policy="skip") -> ScoreBreakdown:
    """Score under a single bigram model (the mixed baseline)."""
    words = sentence.tokens if isinstance(sentence, Utterance) else sentence

    def known(w):
        return w in model and w not in (BOS, SW)

    return _score(
        words, known, lambda h, w, _: model.logprob(h, w), lambda *_: "mixed", oov_policy
    )


def score(model, sentence, oov_policy="skip") -> ScoreBreakdown:
    if isinstance(model, DualLM):
        return score_sentence(model, sentence, oov_policy)
    return score_mixed(model, sentence, oov_policy)


# -- perplexity -------------------------------------------------------------

@dataclass
class EvalReport:
    model: str
    smoothing: str
    split: str
    ppl: float
    oov_count: int
    tokens: int
    sentences: int
    logprob: float
    oov_policy: str
    zero_prob_sentences: int = 0

    KEYS = (
        "model", "smoothing", "split", "ppl", "oov_count", "tokens",
        "sentences", "logprob", "oov_policy", "zero_prob_sentences",
    )

    def to_text(self) -> str:
        lines = []
        for key in self.KEYS:
            v = getattr(self, key)
            lines.append(f"{key}={v:.6f}" if isinstance(v, float) else f"{key}={v}")
        return "\n".join(lines) + "\n"


def _model_label(model):
    return "dlm" if isinstance(model, DualLM) else "mixed"


def _smoothing_of(model):
    if isinstance(model, DualLM):
        return model.lm1.inner.smoothing
    return model.smoothing


def perplexity(model, corpus, oov_policy="skip", split="eval", name=None) -> EvalReport:
    """Corpus perplexity ``exp(-sum logprob / sum tokens)``.

    Token counts include ``</s>`` but not ``<s>``; skipped OOV tokens are
    left out of both sums.
    """
    utterances = corpus.utterances if isinstance(corpus, Corpus) else list(corpus)
    if not utterances:
        raise DLMError("empty evaluation corpus")
    scores = [score(model, u, oov_policy) for u in utterances]
    tokens = sum(s.token_count for s in scores)
    oov = sum(s.oov_count for s in scores)
    zeros = sum(1 for s in scores if s.zero_transition is not None)
    total = NEG_INF if zeros else math.fsum(s.total_logprob for s in scores)
    if tokens == 0:
        raise DLMError("no scorable tokens in evaluation corpus")
    ppl = math.inf if zeros else math.exp(-total / tokens)
    return EvalReport(
        name or _model_label(model), _smoothing_of(model), split, ppl, oov, tokens,
        len(utterances), total, oov_policy, zeros,
    )


# -- sampling ---------------------------------------------------------------

@dataclass
class Sample:
    tokens: list
    truncated: bool = False

    @property
    def words(self):
        return [t.surface for t in self.tokens]


def _cumulative_row(dlm: DualLM, history):
    cache = dlm._cumulative
    if history not in cache:
        cum = np.cumsum(dlm.row(history))
        cache[history] = (cum.tolist(), float(cum[-1]))
    return cache[history]


def sample(dlm: DualLM, seed=None, max_len: int = 100) -> Sample:
    """Draw one sentence by ancestral sampling from the combined model.

    `seed` may be anything :func:`numpy.random.default_rng` accepts, or a
    Generator.  Stops at ``</s>`` or after `max_len` words (flagging the
    sample as truncated).
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    targets = dlm.targets
    out = []
    h = BOS
    while True:
        cum, total = _cumulative_row(dlm, h)
        i = bisect.bisect_right(cum, rng.random() * total)
        w = targets[min(i, len(targets) - 1)]
        if w == EOS:
            return Sample(out)
        if len(out) >= max_len:
            return Sample(out, truncated=True)
        out.append(TaggedToken(w, dlm.lang_of(w)))
        h = w


# -- exact enumeration ------------------------------------------------------

@dataclass
class MassTable:
    total: float
    per_length: list = field(default_factory=list)

    def cumulative(self):
        return list(np.cumsum(self.per_length))


def _word_matrix(dlm):
    words = dlm.targets[:-1]
    start = np.array([dlm.prob(BOS, w) for w in words])
    trans = np.array([[dlm.prob(h, w) for w in words] for h in words])
    stop = np.array([dlm.prob(h, EOS) for h in words])
    return start, trans, stop


def enumerate_mass(dlm: DualLM, max_len: int, max_vocab: int = 12) -> MassTable:
    """Exact total probability of all sentences with 1..`max_len` words.

    Summed length by length with a forward recursion over prefixes, so the
    cost is polynomial; `max_vocab` keeps the oracle on small models.
    """
    n = len(dlm.vocab1) + len(dlm.vocab2)
    if n > max_vocab:
        raise DLMError(f"vocabulary of {n} words exceeds enumeration limit {max_vocab}")
    start, trans, stop = _word_matrix(dlm)
    per_length = []
    prefix = start
    for _ in range(max_len):
        per_length.append(float(prefix @ stop))
        prefix = prefix @ trans
    return MassTable(math.fsum(per_length), per_length)


def enumerate_sentences(dlm: DualLM, max_len: int, min_prob: float = 0.0) -> dict:
    """``{tuple of words: probability}`` for every sentence up to `max_len`.

    Zero-probability branches are pruned, as are prefixes below `min_prob`.
    """
    out = {}
    words = dlm.targets[:-1]

    def walk(prefix, h, p):
        end = p * dlm.prob(h, EOS) if h != BOS else 0.0
        if end > 0:
            out[tuple(prefix)] = end
        if len(prefix) == max_len:
            return
        for w in words:
            q = p * dlm.prob(h, w)
            if q > min_prob:
                prefix.append(w)
                walk(prefix, w, q)
                prefix.pop()

    walk([], BOS, 1.0)
    return out


# -- training ---------------------------------------------------------------

def estimate_monolingual(sentences, smoothing="kn", **kw) -> BackoffBigramModel:
    """Estimate a monolingual model from an already derived ``<sw>`` corpus."""
    return _with_switch(estimate(count(sentences), smoothing, **kw))


def train_monolingual(corpus, keep, smoothing="kn", **kw) -> BackoffBigramModel:
    """Derive the marker corpus for `keep` and estimate a bigram model on it."""
    return estimate_monolingual(derive_monolingual(corpus, keep), smoothing, **kw)


def train_mixed(corpus, smoothing="kn", **kw) -> BackoffBigramModel:
    utterances = corpus.utterances if isinstance(corpus, Corpus) else corpus
    return estimate(count(u.words for u in utterances), smoothing, **kw)


def train_dlm(corpus, smoothing="kn", **kw) -> DualLM:
    return enforce_conditions(
        train_monolingual(corpus, Lang.L1, smoothing, **kw),
        train_monolingual(corpus, Lang.L2, smoothing, **kw),
    )


def flatten(dlm: DualLM) -> BackoffBigramModel:
    """Expand the combined model into one explicit bigram model.

    Every nonzero transition becomes an explicit entry and backoff is
    disabled.  The unigram is the average of the two backoff rows used for
    out-of-vocabulary histories.
    """
    targets = dlm.targets
    bigram, backoff = {}, {}
    for h in dlm.histories:
        row = dlm.row(h)
        bigram[h] = {w: math.log(p) for w, p in zip(targets, row) if p > 0}
        backoff[h] = NEG_INF
    oov1 = np.array([dlm.prob(UNK, w, Lang.L1) for w in targets])
    oov2 = np.array([dlm.prob(UNK, w, Lang.L2) for w in targets])
    uni = 0.5 * (oov1 + oov2)
    unigram = {w: (math.log(p) if p > 0 else NEG_INF) for w, p in zip(targets, uni)}
    return BackoffBigramModel(
        (BOS,) + targets, unigram, bigram, backoff, _smoothing_of(dlm)
    )


# -- persistence ------------------------------------------------------------

MANIFEST_KEYS = (
    "format", "tool_version", "lm1", "lm2", "lang1", "lang2", "enforced",
    "start_rescale", "oov_policy", "smoothing", "seed",
)


def save_dlm(dlm: DualLM, directory, oov_policy="skip", seed=None):
    """Write ``lm1.arpa``, ``lm2.arpa`` and a key=value ``manifest``."""
    _check_policy(oov_policy)
    os.makedirs(directory, exist_ok=True)
    write_arpa(dlm.lm1.inner, os.path.join(directory, "lm1.arpa"))
    write_arpa(dlm.lm2.inner, os.path.join(directory, "lm2.arpa"))
    manifest = {
        "format": "csdlm-dual",
        "tool_version": __version__,
        "lm1": "lm1.arpa",
        "lm2": "lm2.arpa",
        "lang1": Lang.L1.value,
        "lang2": Lang.L2.value,
        "enforced": "true" if dlm.enforced else "false",
        "start_rescale": "proportional",
        "oov_policy": oov_policy,
        "smoothing": _smoothing_of(dlm),
        "seed": "none" if seed is None else str(seed),
    }
    with open(os.path.join(directory, "manifest"), "w", encoding="utf-8") as f:
        for key in MANIFEST_KEYS:
            f.write(f"{key}={manifest[key]}\n")


def read_manifest(directory) -> dict:
    path = os.path.join(directory, "manifest")
    if not os.path.exists(path):
        raise DLMError(f"{directory}: no manifest; not a dual model directory")
    out = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line and "=" in line:
                k, v = line.split("=", 1)
                out[k.strip()] = v.strip()
    return out


def load_dlm(directory) -> DualLM:
    """Load a dual model directory written by :func:`save_dlm`."""
    manifest = read_manifest(directory)
    try:
        lm1 = read_arpa(os.path.join(directory, manifest.get("lm1", "lm1.arpa")))
        lm2 = read_arpa(os.path.join(directory, manifest.get("lm2", "lm2.arpa")))
    except (OSError, NgramError) as e:
        raise DLMError(f"{directory}: {e}") from e
    enforced = manifest.get("enforced") == "true"
    return DualLM(MonolingualLM(lm1, Lang.L1, enforced), MonolingualLM(lm2, Lang.L2, enforced))
