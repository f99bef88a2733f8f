"""Unconstrained, selective and closest-mapping correction over N-best lists."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional

from .llm import DEFAULT_MODEL, Backend, ChatRequest, LlmExchange, batch_complete
from .metrics import closest_rank
from .nbest import Corpus, NBestList
from .normalize import Normalizer
from .prompting import (
    EmptyOutput,
    PromptKind,
    TemplateSet,
    UnparseableSelection,
    default_templates,
    fuzzy_select,
    parse_select,
    parse_uncon,
    render,
)

STRATEGIES = ("uncon", "select", "closest")

TRUNCATED = "truncated"
FALLBACK = "fallback_to_onebest"
UNPARSEABLE = "unparseable_selection"
EMPTY = "empty_output"
LLM_ERROR = "llm_error"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class StrategyConfig:
    strategy: str = "uncon"
    shots: int = 0
    n_best: int = 5
    guard: bool = True
    min_length_ratio: float = 0.5
    model: str = DEFAULT_MODEL
    temperature: float = 0.0
    max_output_tokens: int = 256
    normalizer: str = "basic"
    distance_level: str = "word"

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.shots not in (0, 1):
            raise ConfigError(f"shots must be 0 or 1, got {self.shots}")
        if self.strategy == "select" and self.shots == 1:
            raise ConfigError("the selective approach is only defined zero-shot (select with shots=1 is rejected)")
        if self.n_best < 1:
            raise ConfigError(f"n_best must be positive, got {self.n_best}")
        if not 0 < self.min_length_ratio <= 1:
            raise ConfigError(f"min_length_ratio must be in (0, 1], got {self.min_length_ratio}")
        if self.distance_level not in ("word", "char"):
            raise ConfigError(f"distance_level must be 'word' or 'char', got {self.distance_level!r}")
        Normalizer(self.normalizer)

    @property
    def prompt_kind(self) -> PromptKind:
        if self.strategy == "select":
            return PromptKind.ZERO_SHOT_SELECT
        return PromptKind.ONE_SHOT_UNCON if self.shots == 1 else PromptKind.ZERO_SHOT_UNCON

    @property
    def label(self) -> str:
        return f"{self.shots}-shot {self.strategy}"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CorrectionOutcome:
    utterance_id: str
    corrected_text: str
    selected_rank: Optional[int] = None
    flags: frozenset = field(default_factory=frozenset)
    exchange_ref: Optional[str] = None

    def to_record(self) -> dict:
        return {
            "utterance_id": self.utterance_id,
            "corrected_text": self.corrected_text,
            "selected_rank": self.selected_rank,
            "flags": sorted(self.flags),
            "exchange_ref": self.exchange_ref,
        }

    @classmethod
    def from_record(cls, rec: Mapping) -> "CorrectionOutcome":
        return cls(
            utterance_id=rec["utterance_id"],
            corrected_text=rec["corrected_text"],
            selected_rank=rec.get("selected_rank"),
            flags=frozenset(rec.get("flags", ())),
            exchange_ref=rec.get("exchange_ref"),
        )


def build_request(nbest: NBestList, cfg: StrategyConfig, templates: Optional[TemplateSet] = None) -> ChatRequest:
    """The single chat request a strategy makes for one utterance.

    Closest mapping sends exactly the uncon request, so both share a cache key.
    """
    templates = templates or default_templates()
    prompt = render(nbest.truncate(cfg.n_best), templates.variant(cfg.prompt_kind), templates)
    return ChatRequest(
        model_name=cfg.model,
        system_text=prompt.system_text,
        user_text=prompt.user_text,
        temperature=cfg.temperature,
        max_output_tokens=cfg.max_output_tokens,
    )


def _uncon_text(nbest: NBestList, cfg: StrategyConfig, reply: LlmExchange | Exception) -> tuple[str, set]:
    hyp1 = nbest.hypotheses[0].text
    if isinstance(reply, Exception):
        return hyp1, {LLM_ERROR, FALLBACK}
    try:
        text = parse_uncon(reply.response_text)
    except EmptyOutput:
        return hyp1, {EMPTY, FALLBACK}
    if cfg.guard:
        norm = Normalizer(cfg.normalizer)
        if len(norm(text)) < cfg.min_length_ratio * len(norm(hyp1)):
            return hyp1, {TRUNCATED, FALLBACK}
    return text, set()


def _tokens(text: str, cfg: StrategyConfig) -> list[str]:
    toks = Normalizer(cfg.normalizer)(text)
    return list(" ".join(toks)) if cfg.distance_level == "char" else toks


def outcome_from_reply(
    nbest: NBestList, cfg: StrategyConfig, reply: LlmExchange | Exception
) -> CorrectionOutcome:
    """Turn one model reply (or the error raised fetching it) into an outcome."""
    nbest = nbest.truncate(cfg.n_best)
    uid = nbest.utterance_id
    ref = None if isinstance(reply, Exception) else reply.cache_key

    if cfg.strategy == "select":
        if isinstance(reply, Exception):
            return CorrectionOutcome(uid, nbest.hypotheses[0].text, 1, frozenset({LLM_ERROR, FALLBACK}), None)
        flags = set()
        try:
            rank = parse_select(reply.response_text, len(nbest))
        except UnparseableSelection:
            flags.add(UNPARSEABLE)
            rank = fuzzy_select(reply.response_text, nbest.texts, Normalizer(cfg.normalizer))
            if rank is None:
                rank = 1
                flags.add(FALLBACK)
        return CorrectionOutcome(uid, nbest.hyp(rank).text, rank, frozenset(flags), ref)

    text, flags = _uncon_text(nbest, cfg, reply)
    if cfg.strategy == "uncon":
        return CorrectionOutcome(uid, text, None, frozenset(flags), ref)

    rank, _ = closest_rank(_tokens(text, cfg), [_tokens(t, cfg) for t in nbest.texts])
    return CorrectionOutcome(uid, nbest.hyp(rank).text, rank, frozenset(flags), ref)


def _correct(nbest: NBestList, cfg: StrategyConfig, backend: Backend, templates: Optional[TemplateSet]):
    request = build_request(nbest, cfg, templates)
    try:
        reply: LlmExchange | Exception = backend.complete(request)
    except Exception as exc:
        reply = exc
    return outcome_from_reply(nbest, cfg, reply)


def correct_uncon(nbest, cfg: StrategyConfig, backend: Backend, templates=None) -> CorrectionOutcome:
    if cfg.strategy != "uncon":
        raise ConfigError(f"correct_uncon called with strategy {cfg.strategy!r}")
    return _correct(nbest, cfg, backend, templates)


def correct_select(nbest, cfg: StrategyConfig, backend: Backend, templates=None) -> CorrectionOutcome:
    if cfg.strategy != "select":
        raise ConfigError(f"correct_select called with strategy {cfg.strategy!r}")
    return _correct(nbest, cfg, backend, templates)


def correct_closest(nbest, cfg: StrategyConfig, backend: Backend, templates=None) -> CorrectionOutcome:
    if cfg.strategy != "closest":
        raise ConfigError(f"correct_closest called with strategy {cfg.strategy!r}")
    return _correct(nbest, cfg, backend, templates)


def run_corpus(
    corpus: Corpus,
    cfg: StrategyConfig,
    backend: Backend,
    parallelism: int = 1,
    templates: Optional[TemplateSet] = None,
) -> dict[str, CorrectionOutcome]:
    """Apply ``cfg`` to every utterance; keys follow corpus order."""
    requests = [build_request(u, cfg, templates) for u in corpus]
    replies = batch_complete(backend, requests, parallelism)
    return {u.utterance_id: outcome_from_reply(u, cfg, r) for u, r in zip(corpus, replies)}


def run_manifest(cfg: StrategyConfig, backend: Backend, templates: Optional[TemplateSet] = None) -> dict:
    templates = templates or default_templates()
    return {
        "strategy": cfg.to_dict(),
        "template_dir": str(templates.directory),
        "template_sha256": templates.digest,
        "backend": backend.name,
        "model": cfg.model,
    }


def write_outcomes(outcomes: Iterable[CorrectionOutcome], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for o in outcomes:
            f.write(json.dumps(o.to_record(), ensure_ascii=False, sort_keys=True) + "\n")


def read_outcomes(path: str | Path) -> dict[str, CorrectionOutcome]:
    out: dict[str, CorrectionOutcome] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                o = CorrectionOutcome.from_record(json.loads(line))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad outcome record ({exc})") from None
            if o.utterance_id in out:
                raise ValueError(f"{path}:{lineno}: duplicate utterance id {o.utterance_id!r}")
            out[o.utterance_id] = o
    return out


def flag_summary(outcomes: Iterable[CorrectionOutcome]) -> dict[str, int]:
    counts: dict[str, int] = {}
    for o in outcomes:
        for f in o.flags:
            counts[f] = counts.get(f, 0) + 1
    return dict(sorted(counts.items()))
