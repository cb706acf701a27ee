"""Corpus and model diagnostics.

Switch-boundary bigram statistics, cumulative frequency-vs-coverage
histograms for n-grams, and per-sentence perplexity comparisons between the
mixed baseline and a DLM.  Results are plain data; the ``write_*`` helpers
emit tab-separated text with a header row for external plotting.
"""

from collections import Counter
from dataclasses import dataclass
from typing import Optional

from .corpus import TaggedToken, Utterance
from .dlm import DualLM, score_mixed, score_sentence

__all__ = [
    "SwitchStats",
    "FreqFractionHistogram",
    "SentenceComparison",
    "switch_bigrams",
    "switch_bigram_stats",
    "bucket_of",
    "freq_fraction_histogram",
    "compare_sentence_ppl",
    "write_switch_stats",
    "write_histogram",
    "write_comparison",
]

DEFAULT_THRESHOLDS = (1, 2, 5, 10)


def _fmt(x) -> str:
    if x is None:
        return "NA"
    if isinstance(x, float):
        return f"{x:.6f}"
    return str(x)


@dataclass
class SwitchStats:
    """Type-level statistics of bigrams that straddle a language switch.

    Fractions are ``None`` when the corpus has no switches at all.
    ``fraction_singleton_le10`` is the share of singletons among the types
    seen at most ten times.
    """

    total_switch_bigram_types: int
    total_switch_bigram_tokens: int
    histogram: dict
    fraction_count_le: dict
    fraction_singleton: Optional[float]
    fraction_singleton_le10: Optional[float] = None


@dataclass
class FreqFractionHistogram:
    """``buckets[b]`` is the share of n-gram tokens whose type has frequency <= 2**b."""

    order: int
    buckets: dict
    total: int
    types: int
    cumulative: bool = True


@dataclass
class SentenceComparison:
    sentence: str
    mixed_ppl: float
    dlm_ppl: float


def _tokens(utt):
    return utt.tokens if isinstance(utt, Utterance) else utt


def switch_bigrams(corpus) -> Counter:
    """Counts of adjacent ``(w, w')`` pairs whose language tags differ."""
    out = Counter()
    for utt in corpus:
        toks = _tokens(utt)
        for a, b in zip(toks, toks[1:]):
            if a.lang is not b.lang:
                out[a.surface, b.surface] += 1
    return out


def switch_bigram_stats(corpus, thresholds=DEFAULT_THRESHOLDS) -> SwitchStats:
    counts = switch_bigrams(corpus)
    hist = Counter(counts.values())
    n = len(counts)
    if n == 0:
        return SwitchStats(0, 0, {}, {t: None for t in thresholds}, None, None)
    le = {t: sum(v for c, v in hist.items() if c <= t) / n for t in thresholds}
    le10 = sum(v for c, v in hist.items() if c <= 10)
    return SwitchStats(
        total_switch_bigram_types=n,
        total_switch_bigram_tokens=sum(counts.values()),
        histogram=dict(sorted(hist.items())),
        fraction_count_le=le,
        fraction_singleton=hist[1] / n,
        fraction_singleton_le10=hist[1] / le10 if le10 else None,
    )


def bucket_of(freq: int) -> int:
    """``max(1, ceil(log2 freq))``, computed exactly on integers."""
    if freq < 1:
        raise ValueError("frequency must be positive")
    return max(1, (freq - 1).bit_length())


def _words(sent):
    if isinstance(sent, str):
        return sent.split()
    return [t.surface if isinstance(t, TaggedToken) else t for t in _tokens(sent)]


def freq_fraction_histogram(corpus, order: int = 1) -> FreqFractionHistogram:
    """Cumulative coverage of corpus n-gram tokens by frequency bucket.

    N-grams are taken within sentences, without boundary padding.  Every
    bucket from 1 up to the largest one present is listed, so the result is
    nondecreasing and ends at exactly 1.
    """
    if order not in (1, 3):
        raise ValueError("order must be 1 or 3")
    counts = Counter()
    for sent in corpus:
        w = _words(sent)
        counts.update(zip(*(w[i:] for i in range(order))))
    total = sum(counts.values())
    if total == 0:
        raise ValueError(f"corpus has no {order}-grams")
    per_bucket = Counter()
    for f in counts.values():
        per_bucket[bucket_of(f)] += f
    buckets, running = {}, 0
    for b in range(1, max(per_bucket) + 1):
        running += per_bucket[b]
        buckets[b] = running / total
    buckets[max(buckets)] = 1.0
    return FreqFractionHistogram(order, buckets, total, len(counts))


def compare_sentence_ppl(mixed, dlm: DualLM, sentences, oov_policy="skip") -> list:
    """Per-sentence perplexity under both models, in input order."""
    out = []
    for sent in sentences:
        m = score_mixed(mixed, sent, oov_policy)
        d = score_sentence(dlm, sent, oov_policy)
        out.append(SentenceComparison(" ".join(_words(sent)), m.ppl, d.ppl))
    return out


def _write(rows, header, sink):
    text = "\t".join(header) + "\n" + "".join("\t".join(map(_fmt, r)) + "\n" for r in rows)
    if hasattr(sink, "write"):
        sink.write(text)
    else:
        with open(sink, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)


def write_switch_stats(stats: SwitchStats, sink):
    rows = [
        ("total_switch_bigram_types", stats.total_switch_bigram_types),
        ("total_switch_bigram_tokens", stats.total_switch_bigram_tokens),
        ("fraction_singleton", stats.fraction_singleton),
        ("fraction_singleton_le10", stats.fraction_singleton_le10),
    ]
    rows += [(f"fraction_count_le_{t}", v) for t, v in stats.fraction_count_le.items()]
    rows += [(f"types_with_count_{c}", n) for c, n in stats.histogram.items()]
    _write(rows, ("statistic", "value"), sink)


def write_histogram(hist: FreqFractionHistogram, sink):
    """Columns: order, bucket, max_freq (2**bucket), cumulative fraction."""
    rows = [(hist.order, b, 2**b, frac) for b, frac in hist.buckets.items()]
    _write(rows, ("order", "bucket", "max_freq", "cumulative_fraction"), sink)


def write_comparison(rows, sink):
    _write([(r.sentence, r.mixed_ppl, r.dlm_ppl) for r in rows], ("sentence", "mixed_ppl", "dlm_ppl"), sink)
