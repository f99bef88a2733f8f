"""Word-level alignment and corpus metrics.

Everything here works on normalised token sequences: WER with a
sub/del/ins breakdown, WERR, oracle WER, Uniq, Cross WER, and the
per-selected-rank split used to analyse closest mapping.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Sequence

from .nbest import Corpus, NBestList, dedupe
from .normalize import BASIC, NormalizerLike


class Op(str, Enum):
    MATCH = "match"
    SUB = "sub"
    DEL = "del"
    INS = "ins"


@dataclass(frozen=True)
class AlignmentResult:
    substitutions: int
    deletions: int
    insertions: int
    ref_len: int
    ops: tuple[Op, ...] = ()

    @property
    def distance(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def matches(self) -> int:
        return self.ref_len - self.substitutions - self.deletions

    def to_dict(self) -> dict:
        return {
            "substitutions": self.substitutions,
            "deletions": self.deletions,
            "insertions": self.insertions,
            "ref_len": self.ref_len,
        }


def align(ref: Sequence, hyp: Sequence) -> AlignmentResult:
    """Minimum edit alignment of ``hyp`` against ``ref`` with unit costs.

    Among alignments with the fewest edits, one with the fewest
    insertions+deletions is chosen, so the sub/del/ins counts do not depend
    on which side is the reference (del(a, b) == ins(b, a)). Remaining ties
    in the backtrace go match/sub, then del, then ins.
    """
    n, m = len(ref), len(hyp)
    # edits * big + indels keeps the comparison lexicographic
    big = n + m + 1
    sub_cost = big
    gap_cost = big + 1

    prev = [j * gap_cost for j in range(m + 1)]
    rows = [prev]
    for i in range(1, n + 1):
        cur = [i * gap_cost] + [0] * m
        r = ref[i - 1]
        for j in range(1, m + 1):
            diag = prev[j - 1] + (0 if r == hyp[j - 1] else sub_cost)
            up = prev[j] + gap_cost
            left = cur[j - 1] + gap_cost
            cur[j] = min(diag, up, left)
        rows.append(cur)
        prev = cur

    ops: list[Op] = []
    subs = dels = ins = 0
    i, j = n, m
    while i > 0 or j > 0:
        here = rows[i][j]
        if i > 0 and j > 0:
            same = ref[i - 1] == hyp[j - 1]
            if rows[i - 1][j - 1] + (0 if same else sub_cost) == here:
                if same:
                    ops.append(Op.MATCH)
                else:
                    ops.append(Op.SUB)
                    subs += 1
                i -= 1
                j -= 1
                continue
        if i > 0 and rows[i - 1][j] + gap_cost == here:
            ops.append(Op.DEL)
            dels += 1
            i -= 1
            continue
        ops.append(Op.INS)
        ins += 1
        j -= 1
    ops.reverse()
    return AlignmentResult(subs, dels, ins, n, tuple(ops))


def edit_distance(a: Sequence, b: Sequence) -> int:
    return align(a, b).distance


@dataclass(frozen=True)
class CorpusReport:
    substitutions: int
    deletions: int
    insertions: int
    total_ref_tokens: int
    per_utterance: Mapping[str, AlignmentResult] = field(default_factory=dict)

    def _rate(self, count: int) -> float:
        if self.total_ref_tokens == 0:
            return 0.0 if count == 0 else float("inf")
        return count / self.total_ref_tokens

    @property
    def sub_rate(self) -> float:
        return self._rate(self.substitutions)

    @property
    def del_rate(self) -> float:
        return self._rate(self.deletions)

    @property
    def ins_rate(self) -> float:
        return self._rate(self.insertions)

    @property
    def wer(self) -> float:
        # defined as the sum so the breakdown is additive without rounding drift
        return self.sub_rate + self.del_rate + self.ins_rate

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    def to_dict(self, per_utterance: bool = True) -> dict:
        out = {
            "wer": self.wer,
            "sub_rate": self.sub_rate,
            "del_rate": self.del_rate,
            "ins_rate": self.ins_rate,
            "substitutions": self.substitutions,
            "deletions": self.deletions,
            "insertions": self.insertions,
            "total_ref_tokens": self.total_ref_tokens,
        }
        if per_utterance:
            out["per_utterance"] = {k: v.to_dict() for k, v in self.per_utterance.items()}
        return out


class MissingReferenceError(ValueError):
    pass


class MissingHypothesisError(KeyError):
    def __init__(self, ids: Sequence[str]):
        self.ids = list(ids)
        super().__init__(f"no hypothesis for utterance(s): {', '.join(self.ids)}")

    def __str__(self) -> str:
        return self.args[0]


def pool(results: Mapping[str, AlignmentResult]) -> CorpusReport:
    s = d = i = n = 0
    for res in results.values():
        s += res.substitutions
        d += res.deletions
        i += res.insertions
        n += res.ref_len
    return CorpusReport(s, d, i, n, dict(results))


def _check_refs(corpus: Corpus, allow_missing_ref: bool) -> list[NBestList]:
    usable = []
    missing = []
    for utt in corpus:
        if utt.reference is None:
            missing.append(utt.utterance_id)
        else:
            usable.append(utt)
    if missing and not allow_missing_ref:
        raise MissingReferenceError(
            f"{len(missing)} utterance(s) lack a reference, e.g. {missing[0]!r} "
            "(use allow_missing_ref to skip them)"
        )
    return usable


def corpus_wer(
    corpus: Corpus,
    hyp_for: Mapping[str, str],
    normalizer: NormalizerLike = BASIC,
    allow_missing_ref: bool = False,
) -> CorpusReport:
    """Corpus-pooled WER: total errors over total reference tokens."""
    utts = _check_refs(corpus, allow_missing_ref)
    missing = [u.utterance_id for u in utts if u.utterance_id not in hyp_for]
    if missing:
        raise MissingHypothesisError(missing)
    results = {
        u.utterance_id: align(normalizer(u.reference), normalizer(hyp_for[u.utterance_id])) for u in utts
    }
    return pool(results)


def onebest(corpus: Corpus) -> dict[str, str]:
    return {u.utterance_id: u.hypotheses[0].text for u in corpus}


def werr(baseline_wer: float, system_wer: float) -> float:
    """Relative WER reduction of ``system_wer`` against ``baseline_wer``."""
    if baseline_wer <= 0:
        raise ValueError(f"WERR undefined for baseline WER {baseline_wer}")
    return (baseline_wer - system_wer) / baseline_wer


def oracle_selections(
    corpus: Corpus, normalizer: NormalizerLike = BASIC, allow_missing_ref: bool = False
) -> dict[str, int]:
    """Rank of the hypothesis closest to the reference, lowest rank on ties."""
    picks = {}
    for utt in _check_refs(corpus, allow_missing_ref):
        ref = normalizer(utt.reference)
        best_rank, best_dist = None, None
        for h in utt.hypotheses:
            d = edit_distance(ref, normalizer(h.text))
            if best_dist is None or d < best_dist:
                best_rank, best_dist = h.rank, d
        picks[utt.utterance_id] = best_rank
    return picks


def oracle_wer(
    corpus: Corpus, normalizer: NormalizerLike = BASIC, allow_missing_ref: bool = False
) -> CorpusReport:
    picks = oracle_selections(corpus, normalizer, allow_missing_ref)
    hyps = {uid: corpus[uid].hyp(rank).text for uid, rank in picks.items()}
    return corpus_wer(corpus, hyps, normalizer, allow_missing_ref)


def uniq_stat(corpus: Corpus, normalizer: NormalizerLike = BASIC) -> float:
    """Mean number of distinct (normalised) hypotheses per N-best list."""
    if len(corpus) == 0:
        raise ValueError("Uniq is undefined on an empty corpus")
    return sum(len(dedupe(u, normalizer)) for u in corpus) / len(corpus)


@dataclass(frozen=True)
class ErrorBreakdown:
    all: float
    sub: float
    dels: float
    ins: float
    substitutions: int = 0
    deletions: int = 0
    insertions: int = 0
    ref_tokens: int = 0
    pairs: int = 0

    def to_dict(self) -> dict:
        return {
            "all": self.all,
            "sub": self.sub,
            "del": self.dels,
            "ins": self.ins,
            "substitutions": self.substitutions,
            "deletions": self.deletions,
            "insertions": self.insertions,
            "ref_tokens": self.ref_tokens,
            "pairs": self.pairs,
        }


def cross_wer(corpus: Corpus, normalizer: NormalizerLike = BASIC) -> ErrorBreakdown:
    """Pooled WER over every ordered pair of distinct hypotheses within each list."""
    if len(corpus) == 0:
        raise ValueError("Cross WER is undefined on an empty corpus")
    s = d = i = n = pairs = 0
    for utt in corpus:
        toks = [normalizer(h.text) for h in dedupe(utt, normalizer).hypotheses]
        for a_idx, a in enumerate(toks):
            for b_idx, b in enumerate(toks):
                if a_idx == b_idx:
                    continue
                res = align(a, b)
                s += res.substitutions
                d += res.deletions
                i += res.insertions
                n += res.ref_len
                pairs += 1
    report = CorpusReport(s, d, i, n)
    return ErrorBreakdown(report.wer, report.sub_rate, report.del_rate, report.ins_rate, s, d, i, n, pairs)


@dataclass(frozen=True)
class SplitRow:
    rank: int
    count: int
    proportion: float
    baseline: CorpusReport
    corrected: CorpusReport

    @property
    def baseline_wer(self) -> float:
        return self.baseline.wer

    @property
    def corrected_wer(self) -> float:
        return self.corrected.wer

    def to_dict(self) -> dict:
        return {
            "rank": self.rank,
            "count": self.count,
            "proportion": self.proportion,
            "baseline_wer": self.baseline_wer,
            "corrected_wer": self.corrected_wer,
            "baseline": self.baseline.to_dict(per_utterance=False),
            "corrected": self.corrected.to_dict(per_utterance=False),
        }


def split_by_selected(
    corpus: Corpus,
    selections: Mapping[str, int],
    corrected: Mapping[str, str],
    normalizer: NormalizerLike = BASIC,
) -> list[SplitRow]:
    """Partition utterances by selected rank and score each partition.

    Only non-empty partitions are returned, ordered by rank.
    """
    missing = [uid for uid in corpus.ids if uid not in selections]
    if missing:
        raise MissingHypothesisError(missing)
    groups: dict[int, list[NBestList]] = {}
    for utt in corpus:
        rank = selections[utt.utterance_id]
        if rank is None or not 1 <= rank <= len(utt):
            raise ValueError(
                f"utterance {utt.utterance_id!r}: selected rank {rank} outside 1..{len(utt)}"
            )
        groups.setdefault(rank, []).append(utt)

    total = len(corpus)
    rows = []
    for rank in sorted(groups):
        sub = Corpus(corpus.name, tuple(groups[rank]))
        rows.append(
            SplitRow(
                rank=rank,
                count=len(sub),
                proportion=len(sub) / total,
                baseline=corpus_wer(sub, onebest(sub), normalizer),
                corrected=corpus_wer(sub, corrected, normalizer),
            )
        )
    return rows


def closest_rank(target: Sequence, candidates: Sequence[Sequence]) -> tuple[int, int]:
    """Return (1-based index, distance) of the candidate nearest ``target``; earliest wins ties."""
    best: Optional[tuple[int, int]] = None
    for idx, cand in enumerate(candidates, start=1):
        d = edit_distance(target, cand)
        if best is None or d < best[1]:
            best = (idx, d)
    if best is None:
        raise ValueError("no candidates to choose from")
    return best
