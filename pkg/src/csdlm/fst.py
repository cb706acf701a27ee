"""Weighted finite-state acceptors for bigram models.

The encoding is the fully expanded exact one: a start state, one state per
word (the history it represents), and an end state.  Every nonzero bigram
``P[w'|h]`` becomes a single arc from ``h`` to ``w'`` labelled ``w'`` with
weight ``-ln P``, so backoff and the switch products are compiled straight
into arc weights and no epsilon arcs are needed.  ``</s>`` is a final weight
on the word states.  Weights follow the tropical convention: a path costs the
sum of its weights.
"""

import math
import os
from dataclasses import dataclass, field
from typing import Optional

from .corpus import TaggedToken
from .dlm import DualLM
from .ngram import NEG_INF, BackoffBigramModel
from .tokens import BOS, EOS, UNK

__all__ = [
    "EPSILON",
    "FstError",
    "Arc",
    "WeightedAcceptor",
    "export_dlm_fst",
    "export_mixed_fst",
    "score_path",
    "stochasticity_residuals",
    "write_att",
    "read_att",
]

EPSILON = "<eps>"
START_NAME = "<start>"
END_NAME = "<end>"
NOT_ACCEPTED = math.inf


class FstError(ValueError):
    pass


@dataclass(frozen=True)
class Arc:
    src: int
    dst: int
    label: str
    weight: float


@dataclass(frozen=True, eq=False)
class WeightedAcceptor:
    """Deterministic weighted acceptor.

    Attributes
    ----------
    start : int
    names : tuple of str
        ``names[q]`` is the history word a state stands for, or one of the
        ``<start>``/``<end>`` placeholders.
    arcs : dict
        state -> {label -> Arc}; at most one arc per (state, label).
    finals : dict
        state -> final weight.
    symbols : dict
        label -> integer id, ``<eps>`` is 0.
    """

    start: int
    names: tuple
    arcs: dict
    finals: dict
    symbols: dict = field(default_factory=dict)

    @property
    def num_states(self) -> int:
        return len(self.names)

    @property
    def num_arcs(self) -> int:
        return sum(len(out) for out in self.arcs.values())

    def iter_arcs(self):
        """Arcs sorted by source state then symbol id."""
        for q in range(self.num_states):
            out = self.arcs.get(q, {})
            for label in sorted(out, key=lambda lab: self.symbols.get(lab, 0)):
                yield out[label]

    def accepts(self, sentence) -> bool:
        return score_path(self, sentence) < NOT_ACCEPTED


def _build(histories, words, logprob):
    names = [START_NAME] + list(words) + [END_NAME]
    index = {w: i + 1 for i, w in enumerate(words)}
    index[BOS] = 0
    end = len(names) - 1
    arcs, finals = {}, {end: 0.0}
    for h in histories:
        q = index[h]
        out = {}
        for w in words:
            lp = logprob(h, w)
            if lp > NEG_INF:
                out[w] = Arc(q, index[w], w, -lp)
        if out:
            arcs[q] = out
        if h != BOS:
            lp = logprob(h, EOS)
            if lp > NEG_INF:
                finals[q] = -lp
    symbols = {EPSILON: 0}
    for w in words:
        symbols[w] = len(symbols)
    return WeightedAcceptor(0, tuple(names), arcs, finals, symbols)


def export_dlm_fst(dlm: DualLM) -> WeightedAcceptor:
    """Compile a DLM into an acceptor with ``|V1|+|V2|+2`` states.

    Arcs leaving a word of one language into a word of the other carry
    ``-ln(P_i[<sw>|w] * P_j[w'|<sw>])``; the ``<sw>`` context of each
    model is thereby split across every cross-language arc.
    """
    if not dlm.enforced:
        raise FstError("DLM conditions are not enforced; run enforce_conditions first")
    words = dlm.targets[:-1]
    return _build(dlm.histories, words, dlm.logprob)


def export_mixed_fst(model: BackoffBigramModel) -> WeightedAcceptor:
    """Same encoding for a single bigram model (markers other than ``</s>`` are not labels)."""
    words = tuple(w for w in model.words if w != UNK)
    return _build((BOS,) + words, words, model.logprob)


def _labels(sentence):
    if isinstance(sentence, str):
        return sentence.split()
    return [t.surface if isinstance(t, TaggedToken) else t for t in sentence]


def score_path(acceptor: WeightedAcceptor, sentence) -> float:
    """Weight of the accepting path for `sentence`, or ``inf`` if there is none.

    Unknown labels and the empty sentence are not accepted.
    """
    q = acceptor.start
    total = []
    for label in _labels(sentence):
        arc = acceptor.arcs.get(q, {}).get(label)
        if arc is None:
            return NOT_ACCEPTED
        total.append(arc.weight)
        q = arc.dst
    if q == acceptor.start or q not in acceptor.finals:
        return NOT_ACCEPTED
    total.append(acceptor.finals[q])
    return math.fsum(total)


def stochasticity_residuals(acceptor: WeightedAcceptor) -> dict:
    """Per state, ``sum(exp(-arc weights)) + exp(-final) - 1``.

    The end state (final, no arcs in or out) is skipped.
    """
    reached = {a.dst for out in acceptor.arcs.values() for a in out.values()}
    out = {}
    for q in range(acceptor.num_states):
        arcs = acceptor.arcs.get(q, {})
        if not arcs and q not in reached and q != acceptor.start:
            continue
        mass = [math.exp(-a.weight) for a in arcs.values()]
        if q in acceptor.finals:
            mass.append(math.exp(-acceptor.finals[q]))
        out[q] = math.fsum(mass) - 1.0
    return out


def _fmt(x):
    # a reloaded model can carry weights like -1e-12; don't print "-0.0..."
    return f"{x:.10f}" if abs(x) >= 5e-11 else "0.0000000000"


def write_att(acceptor: WeightedAcceptor, fst_path, symbols_path=None):
    """Write AT&T text: arc lines, then final lines, plus a symbol table."""
    with open(fst_path, "w", encoding="utf-8", newline="\n") as f:
        for arc in acceptor.iter_arcs():
            f.write(f"{arc.src}\t{arc.dst}\t{arc.label}\t{_fmt(arc.weight)}\n")
        for q in sorted(acceptor.finals):
            f.write(f"{q}\t{_fmt(acceptor.finals[q])}\n")
    if symbols_path is not None:
        with open(symbols_path, "w", encoding="utf-8", newline="\n") as f:
            for sym, i in sorted(acceptor.symbols.items(), key=lambda kv: kv[1]):
                f.write(f"{sym}\t{i}\n")


def read_att(fst_path, symbols_path=None) -> WeightedAcceptor:
    """Read an acceptor written by :func:`write_att`.

    The start state is the source of the first arc line (state 0 if there
    are no arcs).  State names are not stored in the format and come back
    as their numbers.
    """
    arcs, finals = {}, {}
    start: Optional[int] = None
    n_states = 0
    with open(fst_path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            parts = line.rstrip("\n").split("\t")
            if parts == [""]:
                continue
            try:
                if len(parts) == 4:
                    src, dst, label, w = int(parts[0]), int(parts[1]), parts[2], float(parts[3])
                    if start is None:
                        start = src
                    if label in arcs.setdefault(src, {}):
                        raise FstError(f"{fst_path}:{lineno}: second arc labelled {label!r} from state {src}")
                    arcs[src][label] = Arc(src, dst, label, w)
                    n_states = max(n_states, src + 1, dst + 1)
                elif len(parts) in (1, 2):
                    q = int(parts[0])
                    finals[q] = float(parts[1]) if len(parts) == 2 else 0.0
                    n_states = max(n_states, q + 1)
                else:
                    raise FstError(f"{fst_path}:{lineno}: expected 2 or 4 tab-separated fields")
            except ValueError as e:
                if isinstance(e, FstError):
                    raise
                raise FstError(f"{fst_path}:{lineno}: {e}") from None
    symbols = {EPSILON: 0}
    if symbols_path is not None and os.path.exists(symbols_path):
        symbols = {}
        with open(symbols_path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                if not line.strip():
                    continue
                try:
                    sym, i = line.rstrip("\n").split("\t")
                    symbols[sym] = int(i)
                except ValueError:
                    raise FstError(f"{symbols_path}:{lineno}: expected 'symbol<TAB>id'") from None
        if symbols.get(EPSILON) != 0:
            raise FstError(f"{symbols_path}: id 0 must be {EPSILON}")
        unknown = {lab for out in arcs.values() for lab in out} - set(symbols)
        if unknown:
            raise FstError(f"{fst_path}: labels missing from symbol table: {sorted(unknown)[:5]}")
    names = tuple(str(q) for q in range(n_states))
    return WeightedAcceptor(start or 0, names, arcs, finals, symbols)
