"""Independent reference implementations used only by the tests."""

from __future__ import annotations

import itertools
from functools import lru_cache


def recursive_edit_distance(a, b) -> int:
    """Levenshtein distance by top-down recursion over suffixes."""
    a, b = tuple(a), tuple(b)

    @lru_cache(maxsize=None)
    def go(i: int, j: int) -> int:
        if i == len(a):
            return len(b) - j
        if j == len(b):
            return len(a) - i
        return min(
            go(i + 1, j + 1) + (a[i] != b[j]),
            go(i + 1, j) + 1,
            go(i, j + 1) + 1,
        )

    return go(0, 0)


def all_alignment_counts(a, b):
    """Every (sub, del, ins) triple over all monotone alignments of b against a."""
    a, b = tuple(a), tuple(b)
    out = set()

    def walk(i, j, s, d, n):
        if i == len(a) and j == len(b):
            out.add((s, d, n))
            return
        if i < len(a) and j < len(b):
            walk(i + 1, j + 1, s + (a[i] != b[j]), d, n)
        if i < len(a):
            walk(i + 1, j, s, d + 1, n)
        if j < len(b):
            walk(i, j + 1, s, d, n + 1)

    walk(0, 0, 0, 0, 0)
    return out


def exhaustive_best_selection_wer(lists_refs):
    """Minimum pooled error count over every way to pick one hypothesis per utterance."""
    best = None
    for combo in itertools.product(*[range(len(h)) for h, _ in lists_refs]):
        errs = sum(recursive_edit_distance(ref, hyps[k]) for k, (hyps, ref) in zip(combo, lists_refs))
        best = errs if best is None else min(best, errs)
    return best
