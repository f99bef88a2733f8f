"""ROVER-style combination of an N-best list.

Hypotheses are folded into a word transition network in rank order, each new
hypothesis aligned against the network built so far, and the output is read
off by weighted voting per slot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .nbest import Corpus, NBestList
from .normalize import BASIC, NormalizerLike

EPS = None  # the epsilon (no word) entry of a slot
_REL_TOL = 1e-9


@dataclass
class Slot:
    weights: dict = field(default_factory=dict)
    first_rank: dict = field(default_factory=dict)

    def add(self, token: Optional[str], weight: float, rank: int) -> None:
        self.weights[token] = self.weights.get(token, 0.0) + weight
        self.first_rank.setdefault(token, rank)

    def tokens(self) -> set:
        return {t for t in self.weights if t is not EPS}


@dataclass
class WordTransitionNetwork:
    slots: list[Slot] = field(default_factory=list)
    paths: list[list[Optional[str]]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.slots)


def uniform_weights(n: int) -> list[float]:
    return [1.0] * n


def rank_decay_weights(n: int) -> list[float]:
    return [1.0 / r for r in range(1, n + 1)]


def _align_to_network(slots: Sequence[Slot], hyp: Sequence[str]) -> list[tuple[Optional[int], Optional[int]]]:
    """Edit alignment of ``hyp`` against the slots.

    A token matches a slot at no cost if the slot already holds it. Skipping
    a slot is free when the slot already carries an epsilon. Returns
    (slot index, token index) pairs with ``None`` for the gap side.
    """
    n, m = len(slots), len(hyp)
    cost = [[0] * (m + 1) for _ in range(n + 1)]
    skip = [0 if EPS in s.weights else 1 for s in slots]
    for i in range(1, n + 1):
        cost[i][0] = cost[i - 1][0] + skip[i - 1]
    for j in range(1, m + 1):
        cost[0][j] = j
    for i in range(1, n + 1):
        toks = slots[i - 1].tokens()
        for j in range(1, m + 1):
            cost[i][j] = min(
                cost[i - 1][j - 1] + (0 if hyp[j - 1] in toks else 1),
                cost[i - 1][j] + skip[i - 1],
                cost[i][j - 1] + 1,
            )
    pairs = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0:
            step = 0 if hyp[j - 1] in slots[i - 1].tokens() else 1
            if cost[i - 1][j - 1] + step == cost[i][j]:
                pairs.append((i - 1, j - 1))
                i, j = i - 1, j - 1
                continue
        if i > 0 and cost[i - 1][j] + skip[i - 1] == cost[i][j]:
            pairs.append((i - 1, None))
            i -= 1
            continue
        pairs.append((None, j - 1))
        j -= 1
    pairs.reverse()
    return pairs


def build_wtn(
    nbest: NBestList, weights: Optional[Sequence[float]] = None, normalizer: NormalizerLike = BASIC
) -> WordTransitionNetwork:
    hyps = nbest.hypotheses
    if not hyps:
        raise ValueError("cannot build a network from an empty list")
    if weights is None:
        weights = uniform_weights(len(hyps))
    if len(weights) != len(hyps):
        raise ValueError(f"got {len(weights)} weights for {len(hyps)} hypotheses")
    if any(not math.isfinite(w) or w < 0 for w in weights):
        raise ValueError("weights must be finite and non-negative")

    wtn = WordTransitionNetwork()
    seen_weight = 0.0
    for k, (h, w) in enumerate(zip(hyps, weights)):
        toks = normalizer(h.text)
        path: list[Optional[str]] = []
        new_slots: list[Slot] = []
        for slot_idx, tok_idx in _align_to_network(wtn.slots, toks):
            if slot_idx is None:
                slot = Slot()
                if k:
                    # earlier hypotheses pass through the new slot as epsilon
                    slot.add(EPS, seen_weight, hyps[0].rank)
                slot.add(toks[tok_idx], w, h.rank)
                new_slots.append(slot)
                path.append(toks[tok_idx])
                continue
            slot = wtn.slots[slot_idx]
            token = EPS if tok_idx is None else toks[tok_idx]
            slot.add(token, w, h.rank)
            new_slots.append(slot)
            path.append(token)
        _reorder_paths(wtn, new_slots)
        wtn.slots = new_slots
        wtn.paths.append(path)
        seen_weight += w
    return wtn


def _reorder_paths(wtn: WordTransitionNetwork, new_slots: list[Slot]) -> None:
    # earlier hypotheses read epsilon in every newly inserted slot
    old_index = {id(s): i for i, s in enumerate(wtn.slots)}
    for p in wtn.paths:
        p[:] = [p[old_index[id(s)]] if id(s) in old_index else EPS for s in new_slots]


def vote(wtn: WordTransitionNetwork) -> str:
    """Pick the heaviest entry per slot and join the non-epsilon winners.

    Weights within a relative 1e-9 of each other count as tied; ties prefer a
    real word over epsilon, then the entry first contributed by the
    best-ranked hypothesis.
    """
    words = []
    for slot in wtn.slots:
        top = max(slot.weights.values())
        tied = [t for t, w in slot.weights.items() if math.isclose(w, top, rel_tol=_REL_TOL)]
        winner = min(tied, key=lambda t: (t is EPS, slot.first_rank[t]))
        if winner is not EPS:
            words.append(winner)
    return " ".join(words)


def rover(nbest: NBestList, weights: Optional[Sequence[float]] = None, normalizer: NormalizerLike = BASIC) -> str:
    return vote(build_wtn(nbest, weights, normalizer))


def rover_corpus(
    corpus: Corpus, n_best: int = 5, scheme: str = "uniform", normalizer: NormalizerLike = BASIC
) -> dict[str, str]:
    schemes = {"uniform": uniform_weights, "rank-decay": rank_decay_weights}
    if scheme not in schemes:
        raise ValueError(f"unknown weighting scheme {scheme!r}; expected one of {sorted(schemes)}")
    out = {}
    for utt in corpus:
        utt = utt.truncate(n_best)
        out[utt.utterance_id] = rover(utt, schemes[scheme](len(utt)), normalizer)
    return out
