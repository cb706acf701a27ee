"""Bigram counting and smoothed backoff bigram models.

Three estimators produce a :class:`BackoffBigramModel`:

``estimate_mle``
    relative frequencies, no mass for unseen events.
``estimate_good_turing``
    Katz backoff with Good-Turing discounts below a cutoff ``k``.
``estimate_kneser_ney``
    interpolated Kneser-Ney with one absolute discount, stored in backoff
    form so it can be written as ARPA.

Probabilities are held as natural logs; an exact zero is ``-inf``.
"""

import math
import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .tokens import BOS, EOS, SW

__all__ = [
    "CountTable",
    "BackoffBigramModel",
    "NgramError",
    "count",
    "estimate",
    "estimate_mle",
    "estimate_good_turing",
    "estimate_kneser_ney",
    "good_turing_discounts",
    "gt_adjusted_count",
    "gt_unseen_mass",
    "SMOOTHINGS",
]

NEG_INF = float("-inf")
SMOOTHINGS = ("mle", "gt", "kn")


class NgramError(ValueError):
    pass


def _tokens(sentence):
    return sentence.split() if isinstance(sentence, str) else list(sentence)


@dataclass
class CountTable:
    """Unigram and bigram counts over ``<s> w1 .. wn </s>``-padded sentences.

    ``<s>`` is never a unigram target; ``</s>`` always is.
    """

    unigram: Counter = field(default_factory=Counter)
    bigram: Counter = field(default_factory=Counter)

    @property
    def total_tokens(self) -> int:
        return sum(self.unigram.values())

    @property
    def count_of_counts(self) -> dict:
        """``{(order, c): number of types seen exactly c times}``."""
        coc = Counter()
        for c in self.unigram.values():
            coc[1, c] += 1
        for c in self.bigram.values():
            coc[2, c] += 1
        return dict(coc)

    def coc(self, order: int) -> Counter:
        table = self.unigram if order == 1 else self.bigram
        return Counter(table.values())

    def vocab(self):
        return _ordered_vocab(set(self.unigram) | {BOS})

    def history_totals(self) -> Counter:
        totals = Counter()
        for (h, _), c in self.bigram.items():
            totals[h] += c
        return totals

    def successors(self) -> dict:
        rows = {}
        for (h, w), c in self.bigram.items():
            rows.setdefault(h, {})[w] = c
        return rows

    def add_sentence(self, sentence):
        words = _tokens(sentence)
        if not words:
            raise NgramError("empty sentence")
        padded = [BOS] + words + [EOS]
        self.unigram.update(padded[1:])
        self.bigram.update(zip(padded, padded[1:]))

    def merge(self, other: "CountTable") -> "CountTable":
        """Sum two tables; associative and commutative."""
        return CountTable(self.unigram + other.unigram, self.bigram + other.bigram)

    __add__ = merge


def count(corpus) -> CountTable:
    """Count unigrams and bigrams over `corpus` (strings or token lists)."""
    table = CountTable()
    for sentence in corpus:
        table.add_sentence(sentence)
    return table


def _ordered_vocab(words):
    markers = [m for m in (BOS, EOS, SW) if m in words]
    return tuple(markers + sorted(w for w in words if w not in (BOS, EOS, SW)))


def _ln(p):
    return math.log(p) if p > 0 else NEG_INF


class BackoffBigramModel:
    """Bigram model ``P[w|h]`` = explicit entry, else ``alpha(h) * P_uni(w)``.

    Parameters
    ----------
    vocab : iterable of str
        All words including ``<s>`` and ``</s>``.
    unigram : dict
        word -> natural-log probability.
    bigram : dict
        history -> {word -> natural-log probability}.
    backoff : dict
        history -> natural-log backoff weight.  Histories missing here back
        off with weight 1, which is also how unknown histories are scored.
    smoothing : str
        One of ``mle``, ``gt``, ``kn``; informational.
    """

    def __init__(self, vocab, unigram, bigram, backoff, smoothing="mle"):
        self.vocab = _ordered_vocab(set(vocab) | {BOS, EOS})
        self.unigram = dict(unigram)
        self.bigram = {h: dict(row) for h, row in bigram.items()}
        self.backoff = dict(backoff)
        self.smoothing = smoothing
        self.unigram.setdefault(BOS, NEG_INF)
        self._vocab_set = frozenset(self.vocab)

    def __repr__(self):
        return (
            f"BackoffBigramModel(smoothing={self.smoothing!r}, |V|={len(self.vocab)}, "
            f"bigrams={sum(len(r) for r in self.bigram.values())})"
        )

    def __contains__(self, word):
        return word in self._vocab_set

    @property
    def targets(self):
        """Words that can be predicted: the vocabulary without ``<s>``."""
        return tuple(w for w in self.vocab if w != BOS)

    @property
    def histories(self):
        """Words that can be conditioned on: the vocabulary without ``</s>``."""
        return tuple(w for w in self.vocab if w != EOS)

    @property
    def words(self):
        return tuple(w for w in self.vocab if w not in (BOS, EOS, SW))

    def logprob(self, history, word) -> float:
        if history == EOS:
            raise NgramError("no distribution after </s>")
        row = self.bigram.get(history)
        if row is not None and word in row:
            return row[word]
        lp = self.unigram.get(word, NEG_INF)
        if lp == NEG_INF:
            return NEG_INF
        return self.backoff.get(history, 0.0) + lp

    def prob(self, history, word) -> float:
        return math.exp(self.logprob(history, word))

    def row(self, history, targets=None) -> np.ndarray:
        targets = self.targets if targets is None else targets
        return np.array([self.prob(history, w) for w in targets])

    def row_sum(self, history) -> float:
        return math.fsum(self.prob(history, w) for w in self.targets)

    def unigram_prob(self, word) -> float:
        return math.exp(self.unigram.get(word, NEG_INF))

    def score(self, words) -> float:
        """Natural-log probability of ``<s> words </s>``."""
        padded = [BOS] + list(words) + [EOS]
        return math.fsum(self.logprob(h, w) for h, w in zip(padded, padded[1:]))

    def copy(self, smoothing=None) -> "BackoffBigramModel":
        return BackoffBigramModel(
            self.vocab, self.unigram, self.bigram, self.backoff,
            self.smoothing if smoothing is None else smoothing,
        )

    def replace_row(self, history, explicit, log_alpha) -> "BackoffBigramModel":
        """New model with the row of `history` swapped out."""
        m = self.copy()
        m.bigram[history] = {w: lp for w, lp in explicit.items()}
        m.backoff[history] = log_alpha
        return m

    def normalized(self) -> "BackoffBigramModel":
        """Rescale the unigram and every row to sum to one.

        Only meant to absorb rounding, e.g. after reading a model printed at
        limited precision.  Zero entries stay zero.
        """
        m = self.copy()
        targets = m.targets
        z = math.fsum(m.unigram_prob(w) for w in targets)
        if z > 0:
            m.unigram = {w: (lp - math.log(z) if lp > NEG_INF else lp) for w, lp in m.unigram.items()}
        for h in set(m.bigram) | set(m.backoff):
            if h == EOS:
                continue
            total = m.row_sum(h)
            if total <= 0:
                continue
            shift = -math.log(total)
            row = m.bigram.get(h, {})
            m.bigram[h] = {w: (lp + shift if lp > NEG_INF else lp) for w, lp in row.items()}
            a = m.backoff.get(h, 0.0)
            m.backoff[h] = a + shift if a > NEG_INF else a
        return m


# -- maximum likelihood -----------------------------------------------------

def estimate_mle(counts: CountTable) -> BackoffBigramModel:
    total = counts.total_tokens
    if total == 0:
        raise NgramError("no counts")
    unigram = {w: math.log(c / total) for w, c in counts.unigram.items()}
    totals = counts.history_totals()
    bigram, backoff = {}, {}
    for h, row in counts.successors().items():
        bigram[h] = {w: math.log(c / totals[h]) for w, c in row.items()}
        backoff[h] = NEG_INF
    return BackoffBigramModel(counts.vocab(), unigram, bigram, backoff, "mle")


# -- Good-Turing / Katz -----------------------------------------------------

def gt_adjusted_count(c: int, coc) -> float:
    """Raw Good-Turing adjusted count ``(c+1) N_{c+1} / N_c``."""
    n_c = coc.get(c, 0)
    if n_c == 0:
        raise NgramError(f"N_{c} = 0; adjusted count undefined")
    return (c + 1) * coc.get(c + 1, 0) / n_c


def gt_unseen_mass(coc, total: int) -> float:
    """Good-Turing estimate of the total probability of unseen events, N_1/N."""
    return coc.get(1, 0) / total


def _loglog_fit(coc):
    points = sorted((c, n) for c, n in coc.items() if c > 0 and n > 0)
    if len(points) < 2:
        return None
    x = np.log([c for c, _ in points])
    y = np.log([n for _, n in points])
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


def good_turing_discounts(coc, k: int = 7, order_name="n-gram"):
    """Discount ratios ``d_c = c*/c`` for ``1 <= c < k``.

    Raw count-of-counts are used when ``N_1 .. N_k`` are all positive and
    every raw ratio lies in (0, 1).  Otherwise ``N_c`` is replaced by a
    least-squares fit of ``log N_c`` on ``log c``, which gives
    ``d_c = ((c + 1) / c) ** (1 + slope)``.  Returns ``None`` when no valid
    discounting exists (no singletons, or a fit with slope >= -1); the
    caller then falls back to maximum likelihood.
    """
    coc = {c: n for c, n in coc.items() if n > 0}
    if coc.get(1, 0) == 0:
        warnings.warn(f"no singleton {order_name}s; Good-Turing falls back to MLE")
        return None
    raw_ok = all(coc.get(c, 0) > 0 for c in range(1, k + 1))
    if raw_ok:
        discounts = {c: gt_adjusted_count(c, coc) / c for c in range(1, k)}
        if all(0 < d < 1 for d in discounts.values()):
            return discounts
    fit = _loglog_fit(coc)
    if fit is None or fit[0] >= -1:
        warnings.warn(
            f"count-of-counts for {order_name}s admit no valid Good-Turing discount; "
            "falling back to MLE"
        )
        return None
    slope = fit[0]
    return {c: ((c + 1) / c) ** (1 + slope) for c in range(1, k)}


def _discount(c, discounts):
    if discounts is None:
        return 1.0
    return discounts.get(c, 1.0)


def estimate_good_turing(counts: CountTable, k: int = 7) -> BackoffBigramModel:
    """Katz backoff bigram model with Good-Turing discounts.

    Counts ``c < k`` are multiplied by their discount ratio; counts ``>= k``
    are kept.  The freed unigram mass is spread evenly over all unigram
    targets (the vocabulary is closed).  The freed mass of each bigram row
    goes to unseen successors in proportion to their unigram probability.
    """
    if not counts.bigram:
        raise NgramError("Good-Turing needs at least one bigram")
    total = counts.total_tokens
    targets = [w for w in counts.vocab() if w != BOS]

    d1 = good_turing_discounts(counts.coc(1), k, "unigram")
    freed = math.fsum(c * (1 - _discount(c, d1)) for c in counts.unigram.values()) / total
    share = freed / len(targets)
    uni_p = {
        w: _discount(counts.unigram.get(w, 0), d1) * counts.unigram.get(w, 0) / total + share
        for w in targets
    }
    unigram = {w: _ln(p) for w, p in uni_p.items()}

    d2 = good_turing_discounts(counts.coc(2), k, "bigram")
    totals = counts.history_totals()
    bigram, backoff = {}, {}
    for h, row in counts.successors().items():
        n = totals[h]
        p = {w: _discount(c, d2) * c / n for w, c in row.items()}
        leftover = math.fsum(c * (1 - _discount(c, d2)) for c in row.values()) / n
        denom = 1.0 - math.fsum(uni_p.get(w, 0.0) for w in row)
        if leftover <= 0:
            alpha = 0.0
        elif denom <= 1e-12:
            # every target already seen after h: renormalize the row instead
            z = math.fsum(p.values())
            p = {w: v / z for w, v in p.items()}
            alpha = 0.0
        else:
            alpha = leftover / denom
        bigram[h] = {w: _ln(v) for w, v in p.items()}
        backoff[h] = _ln(alpha)
    return BackoffBigramModel(counts.vocab(), unigram, bigram, backoff, "gt")


# -- Kneser-Ney -------------------------------------------------------------

def kneser_ney_discount(counts: CountTable) -> float:
    coc = counts.coc(2)
    n1, n2 = coc.get(1, 0), coc.get(2, 0)
    if n1 + 2 * n2 == 0:
        raise NgramError(
            "Kneser-Ney discount undefined: no bigram types seen once or twice; use MLE"
        )
    return n1 / (n1 + 2 * n2)


def estimate_kneser_ney(counts: CountTable) -> BackoffBigramModel:
    """Interpolated Kneser-Ney with discount ``D = n1 / (n1 + 2 n2)``.

    ``P[w|h] = max(c(h,w) - D, 0) / c(h) + lambda(h) P_cont(w)`` where
    ``lambda(h) = D * |{w: c(h,w) > 0}| / c(h)`` and ``P_cont(w)`` is the
    fraction of bigram types ending in ``w``.  Seen bigrams are stored with
    their full interpolated value and ``lambda(h)`` becomes the backoff
    weight, which reproduces the interpolated distribution exactly.
    """
    if not counts.bigram:
        raise NgramError("Kneser-Ney needs at least one bigram")
    D = kneser_ney_discount(counts)
    continuation = Counter(w for (_, w) in counts.bigram)
    n_types = len(counts.bigram)
    targets = [w for w in counts.vocab() if w != BOS]
    p_cont = {w: continuation.get(w, 0) / n_types for w in targets}
    unigram = {w: _ln(p) for w, p in p_cont.items()}

    totals = counts.history_totals()
    bigram, backoff = {}, {}
    for h, row in counts.successors().items():
        n = totals[h]
        lam = D * len(row) / n
        bigram[h] = {w: _ln(max(c - D, 0.0) / n + lam * p_cont[w]) for w, c in row.items()}
        backoff[h] = _ln(lam)
    return BackoffBigramModel(counts.vocab(), unigram, bigram, backoff, "kn")


def estimate(counts: CountTable, smoothing: str = "kn", **kw) -> BackoffBigramModel:
    if smoothing == "mle":
        return estimate_mle(counts)
    if smoothing == "gt":
        return estimate_good_turing(counts, **kw)
    if smoothing == "kn":
        return estimate_kneser_ney(counts)
    raise NgramError(f"unknown smoothing {smoothing!r}; choose from {', '.join(SMOOTHINGS)}")
