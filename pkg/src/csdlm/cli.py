"""Command-line interface: ``csdlm <subcommand> ...``.

Every subcommand is a thin wrapper over one library call.  Exit status is
0 on success, 1 on a domain error (message on stderr) and 2 on a usage
error.  Commands that draw random numbers need ``--seed`` or the
``CSDLM_SEED`` environment variable; the flag wins when both are given.
"""

import argparse
import os
import sys

import numpy as np

from . import __version__
from .analysis import (
    compare_sentence_ppl,
    freq_fraction_histogram,
    switch_bigram_stats,
    write_comparison,
    write_histogram,
    write_switch_stats,
)
from .arpa import ArpaError, read_arpa, write_arpa
from .corpus import (
    CorpusError,
    ExplicitSuffix,
    FilterConfig,
    RawUtterance,
    ScriptHeuristic,
    VocabLists,
    derive_monolingual,
    filter_corpus,
    read_corpus,
    read_raw,
    split_by_speaker,
    tag_tokens,
    write_corpus,
)
from .corpus import DEFAULT_DROP_PATTERNS, Corpus
from .dlm import (
    DLMError,
    DualLM,
    enforce_conditions,
    estimate_monolingual,
    flatten,
    load_dlm,
    perplexity,
    sample,
    save_dlm,
    train_mixed,
    train_monolingual,
    validate,
)
from .fst import FstError, export_dlm_fst, export_mixed_fst, write_att
from .ngram import SMOOTHINGS, NgramError
from .synth import PRESETS, generate_corpus, make_ground_truth, preset
from .tokens import Lang

SEED_ENV = "CSDLM_SEED"
DOMAIN_ERRORS = (CorpusError, NgramError, DLMError, ArpaError, FstError, OSError)


class UsageError(Exception):
    pass


def _positive_int(text):
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _lang(text):
    try:
        return Lang.parse(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected L1 or L2, got {text!r}") from None


def _seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        raise UsageError(f"--seed is required (or set {SEED_ENV})")
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def _emit(text, out=None):
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _load_model(path):
    """A directory is a dual model; a file is a single ARPA model."""
    if os.path.isdir(path):
        return load_dlm(path)
    return read_arpa(path)


# -- subcommands ------------------------------------------------------------

def _tagger(args):
    if args.tagger == "suffix":
        return ExplicitSuffix()
    if args.tagger == "script":
        return ScriptHeuristic(args.cjk_lang)
    return VocabLists.from_files(args.vocab1, args.vocab2)


def cmd_preprocess(args):
    cfg = FilterConfig(
        drop_patterns=list(args.drop_pattern) if args.drop_pattern is not None else list(DEFAULT_DROP_PATTERNS),
        drop_mixed_script=not args.keep_mixed_script,
        drop_unk_marker=not args.keep_unk,
        drop_incomplete_suffix=args.incomplete_suffix or None,
    )
    policy = _tagger(args)
    raw = read_raw(args.input)
    if args.tagger == "suffix":
        # filter on the surfaces, not on the tag suffixes
        views = [RawUtterance(tuple(t.rpartition("|")[0] or t for t in u.tokens), u.speaker) for u in raw]
    else:
        views = raw
    kept_views, report = filter_corpus(views, cfg)
    keep = {id(v) for v in kept_views}
    utts = []
    for i, (u, v) in enumerate(zip(raw, views), 1):
        if id(v) not in keep:
            continue
        try:
            utts.append(tag_tokens(" ".join(u.tokens), policy, u.speaker))
        except CorpusError as e:
            raise CorpusError(f"{args.input}: utterance {i}: {e}") from None
    write_corpus(Corpus.from_utterances(utts), args.out)
    _emit(report.to_text(), args.report)


def cmd_split(args):
    fractions = tuple(args.fractions)
    if abs(sum(fractions) - 1) > 1e-9:
        raise UsageError("--fractions must sum to 1")
    seed = _seed(args)
    parts = split_by_speaker(read_corpus(args.input), fractions, seed=seed)
    os.makedirs(args.out_dir, exist_ok=True)
    lines = []
    for name, part in zip(("train", "dev", "test"), parts):
        write_corpus(part, os.path.join(args.out_dir, f"{name}.txt"))
        lines.append(f"{name}\tutterances={len(part)}\tspeakers={len(part.speakers())}\n")
    _emit("".join(lines))


def cmd_derive(args):
    sents = derive_monolingual(read_corpus(args.input), args.keep)
    _emit("".join(" ".join(s) + "\n" for s in sents), args.out)


def _read_derived(path):
    with open(path, encoding="utf-8") as f:
        return [line.split() for line in f if line.strip()]


def cmd_train_mono(args):
    if args.derived:
        model = estimate_monolingual(_read_derived(args.input), args.smoothing)
    else:
        model = train_monolingual(read_corpus(args.input), args.keep, args.smoothing)
    write_arpa(model, args.out)


def cmd_train_mixed(args):
    write_arpa(train_mixed(read_corpus(args.input), args.smoothing), args.out)


def cmd_combine(args):
    dlm = enforce_conditions(read_arpa(args.lm1), read_arpa(args.lm2))
    save_dlm(dlm, args.out, oov_policy=args.oov_policy, seed=args.seed)


def cmd_validate(args):
    model = _load_model(args.model)
    if not isinstance(model, DualLM):
        raise DLMError(f"{args.model}: validate needs a dual model directory")
    violations = validate(model, tol=args.tol)
    text = f"violations={len(violations)}\n" + "".join(f"{v}\n" for v in violations)
    _emit(text)
    return 1 if violations else 0


def cmd_ppl(args):
    model = _load_model(args.model)
    report = perplexity(model, read_corpus(args.eval), oov_policy=args.oov_policy, split=args.split)
    _emit(report.to_text(), args.out)


def cmd_compare(args):
    mixed = read_arpa(args.mixed)
    dlm = load_dlm(args.dlm)
    corpus = read_corpus(args.eval)
    if args.summary:
        text = "".join(
            perplexity(m, corpus, args.oov_policy, args.split).to_text() + "\n" for m in (mixed, dlm)
        )
        _emit(text, args.out)
        return 0
    rows = compare_sentence_ppl(mixed, dlm, corpus.utterances, args.oov_policy)
    if args.out:
        write_comparison(rows, args.out)
    else:
        write_comparison(rows, sys.stdout)


def cmd_sample(args):
    seed = _seed(args)
    dlm = load_dlm(args.model)
    lines, truncated = [], 0
    for i in range(args.n):
        s = sample(dlm, np.random.default_rng([seed, i]), max_len=args.max_len)
        truncated += s.truncated
        lines.append(" ".join(str(t) for t in s.tokens) + "\n")
    _emit("".join(lines), args.out)
    if truncated:
        print(f"csdlm: {truncated} of {args.n} samples truncated at {args.max_len} words", file=sys.stderr)


def cmd_export_fst(args):
    model = _load_model(args.model)
    fst = export_dlm_fst(model) if isinstance(model, DualLM) else export_mixed_fst(model)
    symbols = args.symbols or args.out + ".syms"
    write_att(fst, args.out, symbols)
    _emit(f"states={fst.num_states}\narcs={fst.num_arcs}\nfinals={len(fst.finals)}\n")


def cmd_export_arpa(args):
    model = _load_model(args.model)
    if not isinstance(model, DualLM):
        raise DLMError(f"{args.model}: export-arpa needs a dual model directory")
    write_arpa(flatten(model), args.out)


def cmd_analyze(args):
    if (args.mixed is None) != (args.dlm is None):
        raise UsageError("--mixed and --dlm must be given together")
    corpus = read_corpus(args.input)
    os.makedirs(args.out_dir, exist_ok=True)
    write_switch_stats(switch_bigram_stats(corpus), os.path.join(args.out_dir, "switch_stats.tsv"))
    for order in (1, 3):
        try:
            hist = freq_fraction_histogram(corpus, order)
        except ValueError:
            continue
        write_histogram(hist, os.path.join(args.out_dir, f"freq_fraction_order{order}.tsv"))
    if args.mixed:
        rows = compare_sentence_ppl(read_arpa(args.mixed), load_dlm(args.dlm), corpus.utterances, args.oov_policy)
        write_comparison(rows, os.path.join(args.out_dir, "sentence_ppl.tsv"))


def cmd_synth(args):
    seed = _seed(args)
    overrides = {}
    for key in ("vocab1", "vocab2", "start_switch", "concentration"):
        if getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    if args.truth_seed is not None:
        overrides["seed"] = args.truth_seed
    spec = preset(args.preset, **overrides)
    spec.validate()
    truth = make_ground_truth(spec)
    corpus = generate_corpus(truth, args.n, seed, speakers=args.speakers)
    write_corpus(corpus, args.out)
    if args.save_truth:
        save_dlm(truth, args.save_truth, seed=spec.seed)


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help=f"random seed (default: ${SEED_ENV})")
    common.add_argument("--smoothing", choices=SMOOTHINGS, default="kn")
    common.add_argument("--oov-policy", choices=("skip", "closed"), default="skip")

    p = argparse.ArgumentParser(prog="csdlm", description="Dual bigram language models for code-switched text.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", metavar="command")
    sub.required = True

    def add(name, func, help):
        sp = sub.add_parser(name, parents=[common], help=help, description=help)
        sp.set_defaults(func=func)
        return sp

    sp = add("preprocess", cmd_preprocess, "filter and language-tag a raw transcript")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--tagger", choices=("suffix", "script", "vocab"), default="suffix")
    sp.add_argument("--cjk-lang", type=_lang, default=Lang.L1)
    sp.add_argument("--vocab1")
    sp.add_argument("--vocab2")
    sp.add_argument("--drop-pattern", action="append", help="regex; repeat for several (replaces the defaults)")
    sp.add_argument("--incomplete-suffix", default="-")
    sp.add_argument("--keep-unk", action="store_true")
    sp.add_argument("--keep-mixed-script", action="store_true")
    sp.add_argument("--report", help="write the drop report here instead of stdout")

    sp = add("split", cmd_split, "speaker-disjoint train/dev/test split")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--fractions", type=_positive_float, nargs=3, default=(0.6, 0.2, 0.2))

    sp = add("derive", cmd_derive, "write the monolingual corpus with <sw> markers")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--keep", type=_lang, required=True)
    sp.add_argument("--out")

    sp = add("train-mono", cmd_train_mono, "train one monolingual model of a DLM")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--keep", type=_lang, required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--derived", action="store_true", help="input is already a derived <sw> corpus")

    sp = add("train-mixed", cmd_train_mixed, "train the mixed baseline bigram model")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out", required=True)

    sp = add("combine", cmd_combine, "enforce the switching conditions and save a DLM directory")
    sp.add_argument("--lm1", required=True)
    sp.add_argument("--lm2", required=True)
    sp.add_argument("--out", required=True)

    sp = add("validate", cmd_validate, "check the switching conditions and row sums")
    sp.add_argument("model")
    sp.add_argument("--tol", type=_positive_float, default=1e-6,
                    help="tolerance; the 1e-6 default absorbs ARPA's 7-digit rounding")

    sp = add("ppl", cmd_ppl, "perplexity of a model on a tagged corpus")
    sp.add_argument("--model", required=True, help="DLM directory or ARPA file")
    sp.add_argument("--eval", required=True)
    sp.add_argument("--split", default="eval")
    sp.add_argument("--out")

    sp = add("compare", cmd_compare, "mixed-vs-DLM perplexity per sentence")
    sp.add_argument("--mixed", required=True)
    sp.add_argument("--dlm", required=True)
    sp.add_argument("--eval", required=True)
    sp.add_argument("--split", default="eval")
    sp.add_argument("--summary", action="store_true", help="print the two corpus reports instead")
    sp.add_argument("--out")

    sp = add("sample", cmd_sample, "draw sentences from a DLM")
    sp.add_argument("--model", required=True)
    sp.add_argument("--n", type=_positive_int, default=10)
    sp.add_argument("--max-len", type=_positive_int, default=100)
    sp.add_argument("--out")

    sp = add("export-fst", cmd_export_fst, "write an AT&T text acceptor and symbol table")
    sp.add_argument("--model", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--symbols")

    sp = add("export-arpa", cmd_export_arpa, "write a DLM as one explicit bigram ARPA model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--out", required=True)

    sp = add("analyze", cmd_analyze, "switch statistics, frequency histograms, per-sentence ppl")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--mixed")
    sp.add_argument("--dlm")

    sp = add("synth", cmd_synth, "generate a synthetic corpus from a random ground-truth DLM")
    sp.add_argument("--preset", choices=sorted(PRESETS), default="default")
    sp.add_argument("--n", type=_positive_int, required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--speakers", type=int, default=0)
    sp.add_argument("--truth-seed", type=int)
    sp.add_argument("--vocab1", type=_positive_int)
    sp.add_argument("--vocab2", type=_positive_int)
    sp.add_argument("--start-switch", type=float)
    sp.add_argument("--concentration", type=_positive_float)
    sp.add_argument("--save-truth", help="also save the ground-truth DLM to this directory")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    if args.command == "preprocess" and args.tagger == "vocab" and not (args.vocab1 and args.vocab2):
        parser.error("--tagger vocab needs --vocab1 and --vocab2")
    try:
        rc = args.func(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"csdlm {args.command}: error: {e}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        # output piped into something like `head`; not an error
        sys.stdout = open(os.devnull, "w")
        return 0
    except DOMAIN_ERRORS as e:
        print(f"csdlm {args.command}: error: {e}", file=sys.stderr)
        return 1
    return rc or 0


if __name__ == "__main__":
    sys.exit(main())
