"""ARPA text format reader and writer for bigram models.

Log probabilities are written base 10 with 7 decimals.  Exact zeros are
written as -99 and read back as exact zeros.  A leading comment line
``# smoothing=<name>`` before ``\\data\\`` records the estimator.
"""

import math
import os

from .ngram import NEG_INF, BackoffBigramModel

__all__ = ["write_arpa", "read_arpa", "ArpaError", "ZERO_LOG10"]

ZERO_LOG10 = -99.0
LN10 = math.log(10.0)


class ArpaError(ValueError):
    def __init__(self, msg, lineno=None):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {msg}" if lineno is not None else msg)


def _fmt(ln_value):
    if ln_value == NEG_INF:
        return f"{ZERO_LOG10:.7f}"
    return f"{ln_value / LN10:.7f}"


def _parse(log10_text, lineno):
    try:
        v = float(log10_text)
    except ValueError:
        raise ArpaError(f"bad number {log10_text!r}", lineno) from None
    if v <= ZERO_LOG10:
        return NEG_INF
    return v * LN10


def write_arpa(model: BackoffBigramModel, sink):
    """Write `model` to a path or a text stream."""
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "w", encoding="utf-8") as f:
            return write_arpa(model, f)
    order = {w: i for i, w in enumerate(model.vocab)}
    bigrams = [
        (h, w, lp)
        for h in sorted(model.bigram, key=order.__getitem__)
        for w, lp in sorted(model.bigram[h].items(), key=lambda kv: order[kv[0]])
    ]
    sink.write(f"# smoothing={model.smoothing}\n\n")
    sink.write("\\data\\\n")
    sink.write(f"ngram 1={len(model.vocab)}\n")
    sink.write(f"ngram 2={len(bigrams)}\n\n")
    sink.write("\\1-grams:\n")
    for w in model.vocab:
        line = f"{_fmt(model.unigram.get(w, NEG_INF))}\t{w}"
        if w in model.backoff:
            line += f"\t{_fmt(model.backoff[w])}"
        sink.write(line + "\n")
    sink.write("\n\\2-grams:\n")
    for h, w, lp in bigrams:
        sink.write(f"{_fmt(lp)}\t{h} {w}\n")
    sink.write("\n\\end\\\n")


def read_arpa(source) -> BackoffBigramModel:
    """Parse an ARPA bigram (or unigram-only) model from a path or stream."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8") as f:
            return read_arpa(f)

    smoothing = "mle"
    declared = {}
    unigram, bigram, backoff = {}, {}, {}
    vocab = []
    section = None  # None (preamble), "data", 1, 2, "end"
    seen = {1: 0, 2: 0}
    visited = set()
    lineno = 0

    def close_section(at):
        if section in (1, 2) and seen[section] != declared.get(section, 0):
            raise ArpaError(
                f"\\{section}-grams: header declares {declared.get(section, 0)} entries, "
                f"found {seen[section]}",
                at,
            )

    for lineno, raw in enumerate(source, 1):
        line = raw.strip()
        if section == "end":
            continue
        if not line:
            continue
        if section is None:
            if line.startswith("#") and "smoothing=" in line:
                smoothing = line.split("smoothing=", 1)[1].strip() or smoothing
            elif line == "\\data\\":
                section = "data"
            continue
        if line == "\\end\\":
            close_section(lineno)
            section = "end"
            continue
        if line.startswith("\\") and line.endswith("-grams:"):
            close_section(lineno)
            try:
                n = int(line[1:].split("-", 1)[0])
            except ValueError:
                raise ArpaError(f"bad section header {line!r}", lineno) from None
            if n not in (1, 2):
                raise ArpaError(f"only unigram and bigram sections are supported, got {n}-grams", lineno)
            if n not in declared:
                raise ArpaError(f"section \\{n}-grams: not declared in \\data\\", lineno)
            section = n
            visited.add(n)
            continue
        if section == "data":
            if not line.startswith("ngram "):
                raise ArpaError(f"unexpected line in \\data\\: {line!r}", lineno)
            try:
                key, val = line[len("ngram "):].split("=")
                declared[int(key)] = int(val)
            except ValueError:
                raise ArpaError(f"bad ngram count line {line!r}", lineno) from None
            continue
        parts = line.split()
        if section == 1:
            if len(parts) not in (2, 3):
                raise ArpaError(f"bad unigram entry {line!r}", lineno)
            w = parts[1]
            unigram[w] = _parse(parts[0], lineno)
            vocab.append(w)
            if len(parts) == 3:
                backoff[w] = _parse(parts[2], lineno)
        elif section == 2:
            if len(parts) != 3:
                raise ArpaError(f"bad bigram entry {line!r}", lineno)
            h, w = parts[1], parts[2]
            bigram.setdefault(h, {})[w] = _parse(parts[0], lineno)
        seen[section] += 1

    if section is None:
        raise ArpaError("missing \\data\\ header")
    if section != "end":
        close_section(lineno + 1)
        raise ArpaError("missing \\end\\ marker", lineno + 1)
    if 1 not in declared:
        raise ArpaError("\\data\\ declares no unigrams")
    for n, expected in declared.items():
        if expected and n not in visited:
            raise ArpaError(f"\\data\\ declares {expected} {n}-grams but the section is missing")
    known = set(vocab)
    for h, row in bigram.items():
        for w in (h, *row):
            if w not in known:
                raise ArpaError(f"bigram word {w!r} has no unigram entry")
    return BackoffBigramModel(vocab, unigram, bigram, backoff, smoothing)
