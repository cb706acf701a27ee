"""Dual bigram language models for code-switched text."""

__version__ = "0.1.0"

from .tokens import BOS, EOS, SW, UNK, Lang  # noqa: E402
from .corpus import (  # noqa: E402
    Corpus,
    ExplicitSuffix,
    FilterConfig,
    ScriptHeuristic,
    TaggedToken,
    Utterance,
    VocabLists,
    derive_monolingual,
    filter_corpus,
    read_corpus,
    split_by_speaker,
    tag_tokens,
)
from .ngram import (  # noqa: E402
    BackoffBigramModel,
    CountTable,
    count,
    estimate,
    estimate_good_turing,
    estimate_kneser_ney,
    estimate_mle,
)
from .arpa import read_arpa, write_arpa  # noqa: E402
from .dlm import (  # noqa: E402
    DualLM,
    MonolingualLM,
    combined_prob,
    enforce_conditions,
    enumerate_mass,
    load_dlm,
    perplexity,
    sample,
    save_dlm,
    score_sentence,
    train_dlm,
    train_mixed,
    train_monolingual,
    validate,
)
from .fst import WeightedAcceptor, export_dlm_fst, export_mixed_fst, read_att, score_path, write_att  # noqa: E402
from .analysis import compare_sentence_ppl, freq_fraction_histogram, switch_bigram_stats  # noqa: E402
from .synth import PRESETS, GroundTruthSpec, generate_corpus, make_ground_truth  # noqa: E402
