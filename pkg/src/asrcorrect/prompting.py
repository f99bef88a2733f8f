"""Prompt rendering for the correction strategies and parsing of model replies.

Prompt wording lives in plain-text template files (``templates/``), one per
prompt kind, with ``[system]`` and ``[user]`` sections and ``string.Template``
placeholders. The 1-shot exemplar is ``exemplar.json`` in the same directory.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from string import Template
from typing import Optional, Sequence

from .metrics import edit_distance
from .nbest import NBestList
from .normalize import BASIC, NormalizerLike

DEFAULT_TEMPLATE_DIR = Path(__file__).parent / "templates"


class PromptKind(str, Enum):
    ZERO_SHOT_UNCON = "zero_shot_uncon"
    ZERO_SHOT_SELECT = "zero_shot_select"
    ONE_SHOT_UNCON = "one_shot_uncon"


class EmptyOutput(ValueError):
    """The model reply contained no usable text."""


class UnparseableSelection(ValueError):
    """No valid option index could be read from the model reply."""


@dataclass(frozen=True)
class Exemplar:
    nbest_texts: tuple[str, ...]
    target_output: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "nbest_texts", tuple(self.nbest_texts))
        if not self.nbest_texts:
            raise ValueError("exemplar needs at least one hypothesis")


@dataclass(frozen=True)
class PromptVariant:
    kind: PromptKind
    exemplar: Optional[Exemplar] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", PromptKind(self.kind))
        needs = self.kind is PromptKind.ONE_SHOT_UNCON
        if needs and self.exemplar is None:
            raise ValueError(f"{self.kind.value} requires an exemplar")
        if not needs and self.exemplar is not None:
            raise ValueError(f"{self.kind.value} does not take an exemplar")


@dataclass(frozen=True)
class RenderedPrompt:
    system_text: str
    user_text: str


@dataclass(frozen=True)
class _Template:
    system: Template
    user: Template


def _parse_template(text: str, source: str) -> _Template:
    sections: dict[str, list[str]] = {}
    current = None
    for line in text.splitlines():
        header = line.strip().lower()
        if header in ("[system]", "[user]"):
            current = header[1:-1]
            sections[current] = []
        elif current is not None:
            sections[current].append(line)
    if set(sections) != {"system", "user"}:
        raise ValueError(f"{source}: template needs exactly one [system] and one [user] section")
    return _Template(
        system=Template("\n".join(sections["system"]).strip()),
        user=Template("\n".join(sections["user"]).strip()),
    )


class TemplateSet:
    """The prompt templates and default exemplar loaded from one directory."""

    def __init__(self, directory: str | Path = DEFAULT_TEMPLATE_DIR):
        self.directory = Path(directory)
        digest = hashlib.sha256()
        self._templates: dict[PromptKind, _Template] = {}
        for kind in PromptKind:
            path = self.directory / f"{kind.value}.txt"
            raw = path.read_text(encoding="utf-8")
            self._templates[kind] = _parse_template(raw, str(path))
            digest.update(path.name.encode() + b"\0" + raw.encode("utf-8") + b"\0")
        ex_path = self.directory / "exemplar.json"
        raw = ex_path.read_text(encoding="utf-8")
        digest.update(ex_path.name.encode() + b"\0" + raw.encode("utf-8") + b"\0")
        data = json.loads(raw)
        self.exemplar = Exemplar(tuple(t.lower() for t in data["nbest"]), data["output"].lower())
        self.digest = digest.hexdigest()

    def variant(self, kind: PromptKind | str) -> PromptVariant:
        kind = PromptKind(kind)
        return PromptVariant(kind, self.exemplar if kind is PromptKind.ONE_SHOT_UNCON else None)

    def __getitem__(self, kind: PromptKind) -> _Template:
        return self._templates[kind]


_default_templates: Optional[TemplateSet] = None


def default_templates() -> TemplateSet:
    global _default_templates
    if _default_templates is None:
        _default_templates = TemplateSet()
    return _default_templates


def tag_block(texts: Sequence[str], tag: str) -> str:
    return "\n".join(f"<{tag}{i}> {t} </{tag}{i}>" for i, t in enumerate(texts, start=1))


def render(nbest: NBestList, variant: PromptVariant, templates: Optional[TemplateSet] = None) -> RenderedPrompt:
    """Render the prompt for one N-best list.

    Hypotheses are listed in rank order (best ASR score first); scores
    themselves are not shown to the model.
    """
    templates = templates or default_templates()
    tpl = templates[variant.kind]
    texts = nbest.texts
    fields = {
        "hypotheses": tag_block(texts, "hypothesis"),
        "options": tag_block(texts, "option"),
        "n": str(len(texts)),
    }
    if variant.exemplar is not None:
        fields["exemplar_hypotheses"] = tag_block(variant.exemplar.nbest_texts, "hypothesis")
        fields["exemplar_output"] = variant.exemplar.target_output
    return RenderedPrompt(
        system_text=tpl.system.substitute(fields),
        user_text=tpl.user.substitute(fields),
    )


_TAG = re.compile(r"</?\s*[a-z_]+\s*[0-9?]*\s*>", re.IGNORECASE)
_LABEL = re.compile(
    r"^(?:corrected(?:\s+(?:transcription|hypothesis|text|sentence))?|output|answer|transcription)\s*:\s*",
    re.IGNORECASE,
)
_QUOTES = "\"'“”‘’`"


def parse_uncon(response: str) -> str:
    """Extract the corrected sentence from a free-form model reply.

    Tags, a leading ``Output:``-style label and surrounding quotes are
    removed. Blank lines separate paragraphs and only the first paragraph
    with content is kept; lines inside it are joined as one wrapped sentence.
    """
    paragraphs = re.split(r"\n\s*\n", response or "")
    for para in paragraphs:
        text = " ".join(line.strip() for line in para.splitlines())
        text = _TAG.sub(" ", text)
        text = " ".join(text.split())
        text = _LABEL.sub("", text)
        text = text.strip().strip(_QUOTES).strip()
        if text:
            return text
    raise EmptyOutput("model reply is empty after stripping markup")


_OPTION_TAG = re.compile(r"<\s*option\s*(\d+)\s*>", re.IGNORECASE)
_OPTION_WORD = re.compile(r"\boption\s*#?\s*(\d+)\b", re.IGNORECASE)


def parse_select(response: str, n: int) -> int:
    """Read the chosen option index (1..n) from a selection reply."""
    if n < 1:
        raise ValueError("n must be >= 1")
    text = response or ""
    match = _OPTION_TAG.search(text) or _OPTION_WORD.search(text)
    if match is None:
        raise UnparseableSelection(f"no option index in reply {text[:80]!r}")
    k = int(match.group(1))
    if not 1 <= k <= n:
        raise UnparseableSelection(f"option {k} outside 1..{n}")
    return k


def fuzzy_select(response: str, texts: Sequence[str], normalizer: NormalizerLike = BASIC) -> Optional[int]:
    """Match reply content against option texts by word edit distance.

    Returns the 1-based rank of the single closest option, or ``None`` when
    the reply is empty, shares nothing with any option, or is equally close
    to options with different text.
    """
    try:
        content = normalizer(parse_uncon(response))
    except EmptyOutput:
        return None
    scored = []
    for rank, text in enumerate(texts, start=1):
        toks = normalizer(text)
        scored.append((edit_distance(content, toks), rank, tuple(toks)))
    best = min(d for d, _, _ in scored)
    winners = [(rank, toks) for d, rank, toks in scored if d == best]
    if len({toks for _, toks in winners}) > 1:
        return None
    rank, toks = winners[0]
    if best >= max(len(content), len(toks)) and best > 0:
        return None
    return rank
