"""Text normalisation applied before alignment and scoring.

Two profiles ship with the package:

* ``basic``: lowercase, drop everything except letters, digits, whitespace
  and word-internal apostrophes, then split on whitespace.
* ``passthrough``: lowercase and split on whitespace only.

Anything callable as ``normalizer(text) -> list[str]`` can be used wherever a
:class:`Normalizer` is accepted, so a fuller English normaliser can be dropped
in without touching the scoring code.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Union

PROFILES = ("basic", "passthrough")

# curly quotes are folded to ASCII before the character filter runs
_APOSTROPHES = str.maketrans({"’": "'", "‘": "'", "ʼ": "'"})
# \w covers unicode letters and digits; underscore is not a letter
_DISALLOWED = re.compile(r"[^\w\s']|_")


def _basic(text: str) -> list[str]:
    text = text.lower().translate(_APOSTROPHES)
    text = _DISALLOWED.sub(" ", text)
    tokens = []
    for tok in text.split():
        tok = tok.strip("'")
        if tok:
            tokens.append(tok)
    return tokens


def _passthrough(text: str) -> list[str]:
    return text.lower().split()


_RULES: dict[str, Callable[[str], list[str]]] = {
    "basic": _basic,
    "passthrough": _passthrough,
}


@dataclass(frozen=True)
class Normalizer:
    profile: str = "basic"

    def __post_init__(self) -> None:
        if self.profile not in _RULES:
            raise ValueError(f"unknown normalizer profile {self.profile!r}; expected one of {PROFILES}")

    def __call__(self, text: str) -> list[str]:
        return _RULES[self.profile](text)


NormalizerLike = Union[Normalizer, Callable[[str], "list[str]"]]

BASIC = Normalizer("basic")
PASSTHROUGH = Normalizer("passthrough")


def get_normalizer(profile: str) -> Normalizer:
    return Normalizer(profile)


def normalize(text: str, profile: NormalizerLike | str = BASIC) -> list[str]:
    """Normalise ``text`` into a token list under ``profile``."""
    if isinstance(profile, str):
        profile = Normalizer(profile)
    return list(profile(text))
