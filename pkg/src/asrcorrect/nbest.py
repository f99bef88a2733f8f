"""Utterance / N-best list types and JSONL corpus ingestion.

One record per line::

    {"id": "utt1", "reference": "...", "nbest": [{"text": "...", "score": -1.2}, ...]}

``reference`` and ``score`` are optional. Array order defines rank.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping, Optional

from .normalize import BASIC, NormalizerLike


class CorpusFormatError(ValueError):
    """A corpus line could not be parsed."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class CorpusValidationError(ValueError):
    pass


@dataclass(frozen=True)
class Hypothesis:
    text: str
    rank: int
    asr_score: Optional[float] = None

    def __post_init__(self) -> None:
        if self.text is None:
            raise CorpusValidationError("hypothesis text must not be absent")
        if self.rank < 1:
            raise CorpusValidationError(f"rank must be >= 1, got {self.rank}")


@dataclass(frozen=True)
class NBestList:
    utterance_id: str
    hypotheses: tuple[Hypothesis, ...]
    reference: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "hypotheses", tuple(self.hypotheses))
        hyps = self.hypotheses
        if not hyps:
            raise CorpusValidationError(f"utterance {self.utterance_id!r}: empty N-best list")
        ranks = [h.rank for h in hyps]
        if ranks != sorted(set(ranks)):
            raise CorpusValidationError(
                f"utterance {self.utterance_id!r}: ranks must be unique and ascending, got {ranks}"
            )
        scored = [h.asr_score is not None for h in hyps]
        if any(scored):
            if not all(scored):
                raise CorpusValidationError(
                    f"utterance {self.utterance_id!r}: asr score present on some hypotheses but not all"
                )
            scores = [h.asr_score for h in hyps]
            if any(b > a for a, b in zip(scores, scores[1:])):
                raise CorpusValidationError(
                    f"utterance {self.utterance_id!r}: asr scores must be non-increasing with rank"
                )

    @classmethod
    def from_texts(
        cls,
        utterance_id: str,
        texts: Iterable[str],
        reference: Optional[str] = None,
        scores: Optional[Iterable[float]] = None,
    ) -> "NBestList":
        texts = list(texts)
        score_list = list(scores) if scores is not None else [None] * len(texts)
        hyps = tuple(Hypothesis(t, i + 1, s) for i, (t, s) in enumerate(zip(texts, score_list)))
        return cls(utterance_id, hyps, reference)

    @property
    def texts(self) -> list[str]:
        return [h.text for h in self.hypotheses]

    def __len__(self) -> int:
        return len(self.hypotheses)

    def hyp(self, rank: int) -> Hypothesis:
        """Return the hypothesis at 1-based ``rank``."""
        if not 1 <= rank <= len(self.hypotheses):
            raise IndexError(f"utterance {self.utterance_id!r}: rank {rank} outside 1..{len(self.hypotheses)}")
        return self.hypotheses[rank - 1]

    def truncate(self, max_n: int) -> "NBestList":
        if max_n < 1:
            raise ValueError(f"max_n must be positive, got {max_n}")
        if len(self.hypotheses) <= max_n:
            return self
        return NBestList(self.utterance_id, self.hypotheses[:max_n], self.reference)


@dataclass(frozen=True)
class Corpus:
    name: str
    utterances: tuple[NBestList, ...]
    _index: Mapping[str, NBestList] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "utterances", tuple(self.utterances))
        index: dict[str, NBestList] = {}
        for utt in self.utterances:
            if utt.utterance_id in index:
                raise CorpusValidationError(f"duplicate utterance id {utt.utterance_id!r}")
            index[utt.utterance_id] = utt
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.utterances)

    def __iter__(self) -> Iterator[NBestList]:
        return iter(self.utterances)

    def __getitem__(self, utterance_id: str) -> NBestList:
        return self._index[utterance_id]

    def __contains__(self, utterance_id: object) -> bool:
        return utterance_id in self._index

    @property
    def ids(self) -> list[str]:
        return [u.utterance_id for u in self.utterances]

    def truncate(self, max_n: int) -> "Corpus":
        return Corpus(self.name, tuple(u.truncate(max_n) for u in self.utterances))


def _parse_record(obj: Any, lineno: int, max_n: int) -> NBestList:
    if not isinstance(obj, dict):
        raise CorpusFormatError("record must be a JSON object", lineno)
    utt_id = obj.get("id")
    if not isinstance(utt_id, str):
        raise CorpusFormatError("'id' must be a string", lineno)
    reference = obj.get("reference")
    if reference is not None and not isinstance(reference, str):
        raise CorpusFormatError("'reference' must be a string when present", lineno)
    nbest = obj.get("nbest")
    if not isinstance(nbest, list):
        raise CorpusFormatError("'nbest' must be an array", lineno)
    if not nbest:
        raise CorpusValidationError(f"line {lineno}: utterance {utt_id!r} has an empty 'nbest' array")

    hyps = []
    for rank, entry in enumerate(nbest[:max_n], start=1):
        if not isinstance(entry, dict) or not isinstance(entry.get("text"), str):
            raise CorpusFormatError(f"nbest entry {rank} must be an object with a string 'text'", lineno)
        score = entry.get("score")
        if score is not None and (isinstance(score, bool) or not isinstance(score, (int, float))):
            raise CorpusFormatError(f"nbest entry {rank}: 'score' must be a number", lineno)
        hyps.append(Hypothesis(entry["text"].lower(), rank, None if score is None else float(score)))

    try:
        return NBestList(utt_id, tuple(hyps), reference.lower() if reference is not None else None)
    except CorpusValidationError as exc:
        raise CorpusValidationError(f"line {lineno}: {exc}") from None


def iter_records(path: str | Path) -> Iterator[tuple[int, Any]]:
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"invalid JSON: {exc.msg}", lineno) from None


def load_corpus(path: str | Path, max_n: int = 5, name: str | None = None) -> Corpus:
    """Read a JSONL corpus, keeping the first ``max_n`` hypotheses per utterance.

    All hypothesis and reference text is lowercased on the way in.
    """
    if max_n < 1:
        raise ValueError(f"max_n must be positive, got {max_n}")
    path = Path(path)
    utterances = [_parse_record(obj, lineno, max_n) for lineno, obj in iter_records(path)]
    return Corpus(name or path.stem, tuple(utterances))


def list_to_record(utt: NBestList) -> dict[str, Any]:
    record: dict[str, Any] = {"id": utt.utterance_id}
    if utt.reference is not None:
        record["reference"] = utt.reference
    entries = []
    for h in utt.hypotheses:
        entry: dict[str, Any] = {"text": h.text}
        if h.asr_score is not None:
            entry["score"] = h.asr_score
        entries.append(entry)
    record["nbest"] = entries
    return record


def dump_corpus(corpus: Corpus, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for utt in corpus:
            f.write(json.dumps(list_to_record(utt), ensure_ascii=False) + "\n")


def dedupe(nbest: NBestList, normalizer: NormalizerLike = BASIC) -> NBestList:
    """Drop hypotheses whose normalised text already occurred earlier in the list.

    Survivors keep their original ranks, so ranks may have gaps afterwards.
    """
    seen: set[tuple[str, ...]] = set()
    kept = []
    for h in nbest.hypotheses:
        key = tuple(normalizer(h.text))
        if key in seen:
            continue
        seen.add(key)
        kept.append(h)
    if len(kept) == len(nbest.hypotheses):
        return nbest
    return NBestList(nbest.utterance_id, tuple(kept), nbest.reference)
