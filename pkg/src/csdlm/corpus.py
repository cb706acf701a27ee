"""Bilingual corpus loading, language tagging, filtering and splitting.

Corpus files hold one utterance per line, tokens separated by whitespace,
with an optional leading ``speaker_id<TAB>``.  Tokens get a language tag
through one of three policies:

* :class:`ExplicitSuffix` -- every token carries ``|L1`` or ``|L2``;
* :class:`ScriptHeuristic` -- tokens with CJK code points go to one
  language, everything else to the other;
* :class:`VocabLists` -- membership in one of two word lists.

:func:`derive_monolingual` turns a tagged corpus into the marker corpus used
to train one half of a dual model: every maximal run of other-language
tokens collapses to a single ``<sw>``.
"""

import random
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional, Sequence

from .tokens import RESERVED, SW, UNK, Lang

__all__ = [
    "TaggedToken",
    "Utterance",
    "RawUtterance",
    "Corpus",
    "ExplicitSuffix",
    "ScriptHeuristic",
    "VocabLists",
    "FilterConfig",
    "DropReport",
    "CorpusError",
    "tag_tokens",
    "parse_line",
    "read_raw",
    "read_corpus",
    "write_corpus",
    "write_raw",
    "filter_corpus",
    "split_by_speaker",
    "derive_monolingual",
    "reconstruct_runs",
    "language_runs",
    "has_cjk",
]


class CorpusError(ValueError):
    pass


class TaggedToken(NamedTuple):
    surface: str
    lang: Lang

    def __str__(self):
        return f"{self.surface}|{self.lang.value}"


@dataclass(frozen=True)
class Utterance:
    tokens: tuple
    speaker: Optional[str] = None

    def __post_init__(self):
        if not self.tokens:
            raise CorpusError("empty utterance")

    @property
    def words(self):
        return [t.surface for t in self.tokens]

    def __len__(self):
        return len(self.tokens)


@dataclass(frozen=True)
class RawUtterance:
    """An untagged line; filtering happens at this stage."""

    tokens: tuple
    speaker: Optional[str] = None


@dataclass(frozen=True)
class Corpus:
    utterances: tuple
    vocab1: frozenset
    vocab2: frozenset

    @classmethod
    def from_utterances(cls, utterances: Iterable[Utterance]) -> "Corpus":
        utterances = tuple(utterances)
        vocab = {Lang.L1: set(), Lang.L2: set()}
        for utt in utterances:
            for tok in utt.tokens:
                vocab[tok.lang].add(tok.surface)
        both = vocab[Lang.L1] & vocab[Lang.L2]
        if both:
            raise CorpusError(
                "tokens tagged with both languages: " + ", ".join(sorted(both)[:10])
            )
        return cls(utterances, frozenset(vocab[Lang.L1]), frozenset(vocab[Lang.L2]))

    def __len__(self):
        return len(self.utterances)

    def __iter__(self):
        return iter(self.utterances)

    def vocab(self, lang: Lang) -> frozenset:
        return self.vocab1 if Lang.parse(lang) is Lang.L1 else self.vocab2

    def speakers(self):
        return sorted({u.speaker for u in self.utterances if u.speaker is not None})

    def sentences(self):
        """Surface token lists, one per utterance."""
        return [u.words for u in self.utterances]

    def head(self, n: int) -> "Corpus":
        return Corpus.from_utterances(self.utterances[:n])


# -- tagging policies -------------------------------------------------------

_CJK_RANGES = (
    (0x2E80, 0x2FDF),  # radicals
    (0x3040, 0x30FF),  # kana
    (0x3100, 0x312F),  # bopomofo
    (0x3400, 0x4DBF),
    (0x4E00, 0x9FFF),
    (0xAC00, 0xD7AF),  # hangul syllables
    (0xF900, 0xFAFF),
    (0x20000, 0x2FA1F),
)


def _is_cjk(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _CJK_RANGES)


def has_cjk(token: str) -> bool:
    return any(_is_cjk(ch) for ch in token)


def _is_mixed_script(token: str) -> bool:
    cjk = latin = False
    for ch in token:
        if _is_cjk(ch):
            cjk = True
        elif ch.isascii() and ch.isalpha():
            latin = True
        if cjk and latin:
            return True
    return False


class ExplicitSuffix:
    """Tokens written as ``surface|L1`` or ``surface|L2``."""

    name = "explicit"

    def __call__(self, token: str) -> TaggedToken:
        surface, sep, tag = token.rpartition("|")
        if not sep or not surface:
            raise CorpusError(f"token {token!r} has no |L1 or |L2 suffix")
        try:
            lang = Lang.parse(tag)
        except ValueError:
            raise CorpusError(f"token {token!r} has bad language suffix {tag!r}") from None
        return TaggedToken(surface, lang)


class ScriptHeuristic:
    """CJK tokens get `cjk_lang`; all other tokens get the other language."""

    name = "script"

    def __init__(self, cjk_lang=Lang.L1):
        self.cjk_lang = Lang.parse(cjk_lang)

    def __call__(self, token: str) -> TaggedToken:
        lang = self.cjk_lang if has_cjk(token) else self.cjk_lang.other
        return TaggedToken(token, lang)


class VocabLists:
    """Tag by membership in two disjoint word lists."""

    name = "vocab"

    def __init__(self, vocab1: Iterable[str], vocab2: Iterable[str]):
        self.vocab1 = frozenset(vocab1)
        self.vocab2 = frozenset(vocab2)
        both = self.vocab1 & self.vocab2
        if both:
            raise CorpusError("word lists overlap: " + ", ".join(sorted(both)[:10]))

    @classmethod
    def from_files(cls, path1, path2) -> "VocabLists":
        return cls(_read_wordlist(path1), _read_wordlist(path2))

    def __call__(self, token: str) -> TaggedToken:
        if token in self.vocab1:
            return TaggedToken(token, Lang.L1)
        if token in self.vocab2:
            return TaggedToken(token, Lang.L2)
        raise CorpusError(f"untaggable token {token!r}: not in either word list")


def _read_wordlist(path):
    with open(path, encoding="utf-8") as f:
        return [line.strip() for line in f if line.strip()]


def tag_tokens(raw_line: str, policy, speaker: Optional[str] = None) -> Utterance:
    """Tag every whitespace-separated token of `raw_line` with `policy`."""
    tokens = []
    for tok in raw_line.split():
        tagged = policy(tok)
        if tagged.surface in RESERVED:
            raise CorpusError(f"reserved marker {tagged.surface!r} used as a token")
        tokens.append(tagged)
    if not tokens:
        raise CorpusError("empty utterance")
    return Utterance(tuple(tokens), speaker)


# -- file I/O ---------------------------------------------------------------

def parse_line(line: str):
    """Split ``speaker<TAB>tokens`` into ``(speaker-or-None, token text)``."""
    line = line.rstrip("\r\n")
    if "\t" in line:
        speaker, _, text = line.partition("\t")
        return (speaker.strip() or None), text
    return None, line


def read_raw(path) -> list:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            speaker, text = parse_line(line)
            tokens = tuple(text.split())
            if tokens:
                out.append(RawUtterance(tokens, speaker))
    return out


def read_corpus(path, policy=None) -> Corpus:
    """Load and tag a corpus file; blank lines are skipped."""
    policy = policy or ExplicitSuffix()
    utterances = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            speaker, text = parse_line(line)
            if not text.strip():
                continue
            try:
                utterances.append(tag_tokens(text, policy, speaker))
            except CorpusError as e:
                raise CorpusError(f"{path}:{lineno}: {e}") from None
    return Corpus.from_utterances(utterances)


def _format_line(tokens, speaker):
    text = " ".join(str(t) for t in tokens)
    return f"{speaker}\t{text}" if speaker is not None else text


def write_corpus(corpus: Corpus, path):
    """Write in the explicit-suffix format, keeping speaker prefixes."""
    with open(path, "w", encoding="utf-8") as f:
        for utt in corpus.utterances:
            f.write(_format_line(utt.tokens, utt.speaker) + "\n")


def write_raw(utterances, path):
    with open(path, "w", encoding="utf-8") as f:
        for utt in utterances:
            f.write(_format_line(utt.tokens, utt.speaker) + "\n")


# -- filtering --------------------------------------------------------------

# non-speech markers such as [laugh], (ppb), <noise>
DEFAULT_DROP_PATTERNS = (r"^\[[^\]]*\]$", r"^\([^)]*\)$", r"^<(?!unk>)[^<>]+>$")

DROP_REASONS = ("unk", "mixed_script", "incomplete", "pattern")


@dataclass
class FilterConfig:
    drop_patterns: list = field(default_factory=lambda: list(DEFAULT_DROP_PATTERNS))
    drop_mixed_script: bool = True
    drop_unk_marker: bool = True
    drop_incomplete_suffix: Optional[str] = "-"

    def compiled(self):
        return [re.compile(p) for p in self.drop_patterns]


@dataclass
class DropReport:
    kept: int = 0
    dropped: int = 0
    by_reason: dict = field(default_factory=lambda: dict.fromkeys(DROP_REASONS, 0))

    def to_text(self) -> str:
        lines = [f"kept={self.kept}", f"dropped={self.dropped}"]
        lines += [f"{reason}={self.by_reason[reason]}" for reason in DROP_REASONS]
        return "\n".join(lines) + "\n"


def _surface(tok):
    return tok.surface if isinstance(tok, TaggedToken) else tok


def _drop_reason(surfaces, cfg: FilterConfig, patterns) -> Optional[str]:
    if cfg.drop_unk_marker and any(s == UNK for s in surfaces):
        return "unk"
    if cfg.drop_mixed_script and any(_is_mixed_script(s) for s in surfaces):
        return "mixed_script"
    suffix = cfg.drop_incomplete_suffix
    if suffix and any(s.endswith(suffix) and s != suffix for s in surfaces):
        return "incomplete"
    if any(p.search(s) for p in patterns for s in surfaces):
        return "pattern"
    return None


def filter_corpus(corpus, cfg: Optional[FilterConfig] = None):
    """Drop every utterance that contains at least one matching token.

    `corpus` may be a :class:`Corpus` or a plain sequence of raw or tagged
    utterances; the result has the same kind.  Raw utterances are the usual
    input, since ``<unk>`` cannot survive tagging.
    """
    cfg = cfg or FilterConfig()
    patterns = cfg.compiled()
    report = DropReport()
    utterances = corpus.utterances if isinstance(corpus, Corpus) else corpus
    kept = []
    for utt in utterances:
        reason = _drop_reason([_surface(t) for t in utt.tokens], cfg, patterns)
        if reason is None:
            kept.append(utt)
        else:
            report.by_reason[reason] += 1
    report.kept = len(kept)
    report.dropped = len(utterances) - len(kept)
    if isinstance(corpus, Corpus):
        return Corpus.from_utterances(kept), report
    return kept, report


# -- speaker-disjoint split -------------------------------------------------

def split_by_speaker(corpus: Corpus, fractions=(0.6, 0.2, 0.2), seed: int = 0):
    """Partition utterances into train/dev/test with disjoint speaker sets.

    Speakers are shuffled with `seed` and then assigned one at a time to the
    split whose utterance count is furthest (relatively) below its target.
    Utterances keep their input order within each split.
    """
    fractions = tuple(float(x) for x in fractions)
    if len(fractions) != 3 or any(x <= 0 for x in fractions):
        raise CorpusError("fractions must be three positive numbers")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise CorpusError(f"fractions sum to {sum(fractions)}, not 1")
    per_speaker = Counter()
    for utt in corpus.utterances:
        if utt.speaker is None:
            raise CorpusError("utterance without speaker id; cannot split by speaker")
        per_speaker[utt.speaker] += 1
    if len(per_speaker) < 3:
        raise CorpusError(f"need at least 3 speakers to split, got {len(per_speaker)}")

    speakers = sorted(per_speaker)
    random.Random(seed).shuffle(speakers)
    total = sum(per_speaker.values())
    targets = [f * total for f in fractions]
    assigned = [0, 0, 0]
    which = {}
    for spk in speakers:
        deficits = [(targets[i] - assigned[i]) / targets[i] for i in range(3)]
        best = max(range(3), key=lambda i: (deficits[i], -i))
        which[spk] = best
        assigned[best] += per_speaker[spk]

    parts = defaultdict(list)
    for utt in corpus.utterances:
        parts[which[utt.speaker]].append(utt)
    return tuple(Corpus.from_utterances(parts[i]) for i in range(3))


# -- monolingual derivation -------------------------------------------------

def derive_monolingual(corpus, keep) -> list:
    """Replace every maximal run of other-language tokens with one ``<sw>``.

    Returns one token list per input utterance.  An utterance entirely in the
    other language becomes ``["<sw>"]``.
    """
    keep = Lang.parse(keep)
    utterances = corpus.utterances if isinstance(corpus, Corpus) else corpus
    out = []
    for utt in utterances:
        tokens = utt.tokens if isinstance(utt, Utterance) else utt
        seq = []
        for tok in tokens:
            if tok.lang is keep:
                seq.append(tok.surface)
            elif not seq or seq[-1] != SW:
                seq.append(SW)
        out.append(seq)
    return out


def language_runs(tokens) -> list:
    """``[(lang, [surfaces...]), ...]`` for the maximal same-language runs."""
    runs = []
    for tok in tokens:
        if runs and runs[-1][0] is tok.lang:
            runs[-1][1].append(tok.surface)
        else:
            runs.append((tok.lang, [tok.surface]))
    return runs


def _split_on_switch(seq):
    prefix_switch = bool(seq) and seq[0] == SW
    chunks, cur = [], []
    for w in seq:
        if w == SW:
            if cur:
                chunks.append(cur)
            cur = []
        else:
            cur.append(w)
    if cur:
        chunks.append(cur)
    return prefix_switch, chunks


def reconstruct_runs(seq1: Sequence[str], seq2: Sequence[str]) -> list:
    """Rebuild the language runs of an utterance from its two marker strings.

    Inverse of applying :func:`derive_monolingual` with both languages.
    Raises :class:`CorpusError` if the strings are not complementary.
    """
    starts_l2, runs1 = _split_on_switch(seq1)
    starts_l1, runs2 = _split_on_switch(seq2)
    if starts_l1 == starts_l2:
        raise CorpusError("marker strings disagree on the starting language")
    n_sw1 = sum(1 for w in seq1 if w == SW)
    n_sw2 = sum(1 for w in seq2 if w == SW)
    if n_sw1 != len(runs2) or n_sw2 != len(runs1):
        raise CorpusError("marker strings are not complementary")
    order = [(Lang.L2, runs2), (Lang.L1, runs1)] if starts_l2 else [(Lang.L1, runs1), (Lang.L2, runs2)]
    out = []
    i = 0
    while i < max(len(runs1), len(runs2)):
        for lang, runs in order:
            if i < len(runs):
                out.append((lang, list(runs[i])))
        i += 1
    if len(out) != len(runs1) + len(runs2) or any(
        a[0] is b[0] for a, b in zip(out, out[1:])
    ):
        raise CorpusError("marker strings are not complementary")
    return out

