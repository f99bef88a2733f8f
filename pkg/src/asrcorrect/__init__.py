"""Zero-/1-shot ASR error correction over N-best lists with a chat LLM, plus scoring tools."""

__version__ = "0.1.0"

from .correction import (
    CorrectionOutcome,
    StrategyConfig,
    correct_closest,
    correct_select,
    correct_uncon,
    run_corpus,
)
from .llm import CachedBackend, ChatRequest, LiveBackend, LlmExchange, ReplayBackend, ResponseCache, batch_complete
from .metrics import (
    AlignmentResult,
    CorpusReport,
    align,
    corpus_wer,
    cross_wer,
    oracle_wer,
    split_by_selected,
    uniq_stat,
    werr,
)
from .nbest import Corpus, Hypothesis, NBestList, dedupe, load_corpus
from .normalize import Normalizer, normalize
from .prompting import PromptVariant, parse_select, parse_uncon, render
from .rover import build_wtn, vote

__all__ = [
    "AlignmentResult",
    "CachedBackend",
    "ChatRequest",
    "Corpus",
    "CorpusReport",
    "CorrectionOutcome",
    "Hypothesis",
    "LiveBackend",
    "LlmExchange",
    "NBestList",
    "Normalizer",
    "PromptVariant",
    "ReplayBackend",
    "ResponseCache",
    "StrategyConfig",
    "align",
    "batch_complete",
    "build_wtn",
    "correct_closest",
    "correct_select",
    "correct_uncon",
    "corpus_wer",
    "cross_wer",
    "dedupe",
    "load_corpus",
    "normalize",
    "oracle_wer",
    "parse_select",
    "parse_uncon",
    "render",
    "run_corpus",
    "split_by_selected",
    "uniq_stat",
    "vote",
    "werr",
]
