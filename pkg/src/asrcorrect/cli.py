"""Command-line entry point.

Commands:
    asrcorrect correct   run a correction strategy over a corpus
    asrcorrect score     WER breakdown, WERR against the 1-best and oracle WER
    asrcorrect stats     Uniq and Cross WER of the N-best lists
    asrcorrect ablate    one strategy over several N-best sizes
    asrcorrect split     per-selected-rank analysis of a closest run
    asrcorrect rover     ROVER baseline

Examples:
    asrcorrect correct --strategy closest --shots 1 --nbest 5 \\
        --backend replay --cache tests/data/replay_cache.jsonl \\
        --in tests/data/corpus20.jsonl --out closest.jsonl
    asrcorrect score --in tests/data/corpus20.jsonl --outcomes closest.jsonl
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import shlex
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .correction import (
    ConfigError,
    CorrectionOutcome,
    StrategyConfig,
    flag_summary,
    read_outcomes,
    run_corpus,
    run_manifest,
    write_outcomes,
)
from .llm import (
    DEFAULT_ENDPOINT,
    DEFAULT_MODEL,
    CachedBackend,
    LiveBackend,
    LlmError,
    ReplayBackend,
    ResponseCache,
)
from .metrics import (
    CorpusReport,
    MissingHypothesisError,
    MissingReferenceError,
    corpus_wer,
    cross_wer,
    onebest,
    oracle_wer,
    split_by_selected,
    uniq_stat,
    werr,
)
from .nbest import Corpus, CorpusFormatError, CorpusValidationError, load_corpus
from .normalize import PROFILES, Normalizer
from .prompting import TemplateSet
from .rover import rover_corpus

log = logging.getLogger("asrcorrect")


class CliError(Exception):
    def __init__(self, message: str, code: int = 1):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# helpers


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _manifest_path(artifact: Path) -> Path:
    return artifact.with_name(artifact.name + ".manifest.json")


def _write_manifest(artifact: Path, args: argparse.Namespace, argv: Sequence[str], extra: dict) -> Path:
    manifest = {
        "tool": "asrcorrect",
        "version": __version__,
        "command_line": "asrcorrect " + " ".join(shlex.quote(a) for a in argv),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "artifact": artifact.name,
        "normalizer": args.normalizer,
    }
    corpus_path = getattr(args, "input", None)
    if corpus_path is not None:
        paths = corpus_path if isinstance(corpus_path, list) else [corpus_path]
        manifest["corpus"] = [{"path": str(p), "sha256": _sha256_file(Path(p))} for p in paths]
    manifest.update(extra)
    path = _manifest_path(artifact)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _write_json(path: Path, obj: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


def _load(path: Path, max_n: int) -> Corpus:
    if not path.is_file():
        raise CliError(f"corpus file not found: {path}")
    return load_corpus(path, max_n=max_n)


def _load_outcomes(path: Path) -> dict[str, CorrectionOutcome]:
    if not path.is_file():
        raise CliError(f"outcomes file not found: {path}")
    return read_outcomes(path)


def _check_ids(corpus: Corpus, outcomes: dict, label: str) -> None:
    missing = [uid for uid in corpus.ids if uid not in outcomes]
    extra = [uid for uid in outcomes if uid not in corpus]
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"missing from {label}: {', '.join(missing)}")
        if extra:
            parts.append(f"not in corpus: {', '.join(extra)}")
        raise CliError("utterance id mismatch between corpus and " + label + "; " + "; ".join(parts))


def _pct(x: float, places: int = 2) -> str:
    return f"{100 * x:.{places}f}"


def _make_backend(args: argparse.Namespace):
    if args.backend in ("replay", "cache-only"):
        if args.cache is None:
            raise CliError(f"--backend {args.backend} needs --cache <path>", 2)
        if not Path(args.cache).is_file():
            raise CliError(f"cache file not found: {args.cache}")
        return ReplayBackend(args.cache, source="replay" if args.backend == "replay" else "cache")
    try:
        live = LiveBackend(endpoint=args.endpoint)
    except LlmError as exc:
        raise CliError(str(exc), 2) from None
    if args.cache is not None:
        return CachedBackend(live, ResponseCache(args.cache))
    return live


def _strategy_config(args: argparse.Namespace, n_best: int) -> StrategyConfig:
    try:
        return StrategyConfig(
            strategy=args.strategy,
            shots=args.shots,
            n_best=n_best,
            guard=args.guard == "on",
            min_length_ratio=args.min_length_ratio,
            model=args.model,
            temperature=args.temperature,
            max_output_tokens=args.max_tokens,
            normalizer=args.normalizer,
            distance_level=args.distance_level,
        )
    except ConfigError as exc:
        raise CliError(f"invalid configuration: {exc}", 2) from None


def _breakdown_row(report: CorpusReport) -> dict:
    return report.to_dict(per_utterance=False)


def _table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(str(r[i])) for r in [header, *rows]) for i in range(len(header))]
    lines = []
    for row in [header, *rows]:
        cells = [str(c).ljust(widths[0]) if i == 0 else str(c).rjust(widths[i]) for i, c in enumerate(row)]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines)


def _wer_cells(report: CorpusReport) -> list[str]:
    return [_pct(report.wer), _pct(report.sub_rate), _pct(report.del_rate), _pct(report.ins_rate)]


# ---------------------------------------------------------------------------
# commands


def cmd_correct(args: argparse.Namespace, argv: Sequence[str]) -> int:
    cfg = _strategy_config(args, args.nbest)
    templates = TemplateSet(args.templates) if args.templates else TemplateSet()
    corpus = _load(args.input, args.nbest)
    backend = _make_backend(args)
    outcomes = run_corpus(corpus, cfg, backend, args.parallelism, templates)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_outcomes(outcomes.values(), out)
    summary = flag_summary(outcomes.values())
    _write_manifest(out, args, argv, {
        "run": run_manifest(cfg, backend, templates),
        "parallelism": args.parallelism,
        "summary": {"utterances": len(outcomes), "flags": summary},
    })
    flags = ", ".join(f"{k}={v}" for k, v in summary.items()) or "none"
    print(f"{cfg.label}: {len(outcomes)} utterances written to {out} (flags: {flags})")
    return 0


def cmd_score(args: argparse.Namespace, argv: Sequence[str]) -> int:
    norm = Normalizer(args.normalizer)
    corpus = _load(args.input, args.nbest)
    outcomes = _load_outcomes(args.outcomes)
    _check_ids(corpus, outcomes, "outcomes")
    allow = args.allow_missing_ref

    system = corpus_wer(corpus, {k: o.corrected_text for k, o in outcomes.items()}, norm, allow)
    if args.baseline:
        base_outcomes = _load_outcomes(args.baseline)
        _check_ids(corpus, base_outcomes, "baseline")
        baseline = corpus_wer(corpus, {k: o.corrected_text for k, o in base_outcomes.items()}, norm, allow)
    else:
        baseline = corpus_wer(corpus, onebest(corpus), norm, allow)
    oracle = oracle_wer(corpus, norm, allow)
    relative = werr(baseline.wer, system.wer) if baseline.wer > 0 else None

    rows = [
        ["baseline", *_wer_cells(baseline), "-"],
        ["system", *_wer_cells(system), "-" if relative is None else _pct(relative, 1)],
        [f"oracle ({args.nbest}-best)", *_wer_cells(oracle), "-"],
    ]
    print(_table(["", "WER", "Sub", "Del", "Ins", "WERR"], rows))

    if args.report:
        report = Path(args.report)
        _write_json(report, {
            "manifest": _manifest_path(report).name,
            "normalizer": args.normalizer,
            "system": system.to_dict(),
            "baseline": _breakdown_row(baseline),
            "oracle": _breakdown_row(oracle),
            "werr": relative,
            "utterances": len(system.per_utterance),
        })
        _write_manifest(report, args, argv, {
            "outcomes": str(args.outcomes),
            "baseline": str(args.baseline) if args.baseline else None,
        })
    return 0


def cmd_stats(args: argparse.Namespace, argv: Sequence[str]) -> int:
    norm = Normalizer(args.normalizer)
    results = []
    for path in args.input:
        corpus = _load(path, args.nbest)
        results.append((corpus.name, uniq_stat(corpus, norm), cross_wer(corpus, norm)))
    rows = [
        [name, f"{uniq:.1f}", _pct(cw.all, 1), _pct(cw.sub, 1), _pct(cw.dels, 1), _pct(cw.ins, 1)]
        for name, uniq, cw in results
    ]
    print(_table(["corpus", "Uniq", "Cross WER", "Sub", "Del", "Ins"], rows))
    if args.report:
        report = Path(args.report)
        _write_json(report, {
            "manifest": _manifest_path(report).name,
            "nbest": args.nbest,
            "corpora": [{"name": n, "uniq": u, "cross_wer": cw.to_dict()} for n, u, cw in results],
        })
        _write_manifest(report, args, argv, {})
    return 0


def cmd_ablate(args: argparse.Namespace, argv: Sequence[str]) -> int:
    sizes = args.sizes
    cfgs = [_strategy_config(args, n) for n in sizes]
    norm = Normalizer(args.normalizer)
    templates = TemplateSet(args.templates) if args.templates else TemplateSet()
    corpus = _load(args.input, max(sizes))
    backend = _make_backend(args)

    baseline = corpus_wer(corpus, onebest(corpus), norm, args.allow_missing_ref)
    rows = []
    for n, cfg in zip(sizes, cfgs):
        outcomes = run_corpus(corpus, cfg, backend, args.parallelism, templates)
        if args.out_dir:
            out_dir = Path(args.out_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            write_outcomes(outcomes.values(), out_dir / f"{cfg.strategy}_{cfg.shots}shot_n{n}.jsonl")
        report = corpus_wer(corpus, {k: o.corrected_text for k, o in outcomes.items()}, norm, args.allow_missing_ref)
        rows.append((n, report, flag_summary(outcomes.values())))

    label = cfgs[0].label
    table = [["ASR baseline", "-", *_wer_cells(baseline)]]
    table += [[label, f"{n}-best", *_wer_cells(r)] for n, r, _ in rows]
    print(_table(["method", "input", "WER", "Sub", "Del", "Ins"], table))
    if args.report:
        report_path = Path(args.report)
        _write_json(report_path, {
            "manifest": _manifest_path(report_path).name,
            "strategy": label,
            "baseline": _breakdown_row(baseline),
            "rows": [{"n_best": n, "flags": f, **_breakdown_row(r)} for n, r, f in rows],
        })
        _write_manifest(report_path, args, argv, {
            "runs": [run_manifest(c, backend, templates) for c in cfgs],
            "parallelism": args.parallelism,
        })
    return 0


def cmd_split(args: argparse.Namespace, argv: Sequence[str]) -> int:
    norm = Normalizer(args.normalizer)
    corpus = _load(args.input, args.nbest)
    outcomes = _load_outcomes(args.outcomes)
    _check_ids(corpus, outcomes, "outcomes")
    lacking = [k for k, o in outcomes.items() if o.selected_rank is None]
    if lacking:
        raise CliError(
            f"{len(lacking)} outcome(s) have no selected_rank (e.g. {lacking[0]!r}); "
            "split needs outcomes from a closest (or select) run"
        )
    try:
        rows = split_by_selected(
            corpus,
            {k: o.selected_rank for k, o in outcomes.items()},
            {k: o.corrected_text for k, o in outcomes.items()},
            norm,
        )
    except ValueError as exc:
        raise CliError(str(exc)) from None
    table = [[f"hyp-{r.rank}", str(r.count), _pct(r.proportion, 1), _pct(r.baseline_wer), _pct(r.corrected_wer)]
             for r in rows]
    print(_table(["selected", "utts", "share%", "baseline", "corrected"], table))
    if args.report:
        report = Path(args.report)
        _write_json(report, {"manifest": _manifest_path(report).name, "rows": [r.to_dict() for r in rows]})
        _write_manifest(report, args, argv, {"outcomes": str(args.outcomes)})
    return 0


def cmd_rover(args: argparse.Namespace, argv: Sequence[str]) -> int:
    norm = Normalizer(args.normalizer)
    corpus = _load(args.input, args.nbest)
    texts = rover_corpus(corpus, args.nbest, args.weights, norm)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_outcomes((CorrectionOutcome(uid, t) for uid, t in texts.items()), out)
    _write_manifest(out, args, argv, {"rover": {"nbest": args.nbest, "weights": args.weights}})
    print(f"rover ({args.weights}): {len(texts)} utterances written to {out}")
    return 0


# ---------------------------------------------------------------------------
# parser


def _sizes(text: str) -> list[int]:
    try:
        sizes = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not sizes or any(n < 1 for n in sizes):
        raise argparse.ArgumentTypeError("sizes must be positive integers")
    return sizes


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--normalizer", choices=PROFILES, default="basic", help="text normalisation profile")
    common.add_argument("--backend", choices=("live", "replay", "cache-only"), default="live")
    common.add_argument("--cache", type=Path, help="response cache / replay fixture (JSONL)")
    common.add_argument("--parallelism", type=_positive, default=1, help="max concurrent LLM requests")
    common.add_argument("--model", default=DEFAULT_MODEL)
    common.add_argument("--endpoint", default=DEFAULT_ENDPOINT, help="base URL of an OpenAI-compatible API")
    common.add_argument("-v", "--verbose", action="store_true")

    strategy = argparse.ArgumentParser(add_help=False)
    strategy.add_argument("--strategy", choices=("uncon", "select", "closest"), required=True)
    strategy.add_argument("--shots", type=int, choices=(0, 1), default=0)
    strategy.add_argument("--guard", choices=("on", "off"), default="on", help="truncation guard")
    strategy.add_argument("--min-length-ratio", type=float, default=0.5)
    strategy.add_argument("--temperature", type=float, default=0.0)
    strategy.add_argument("--max-tokens", type=_positive, default=256)
    strategy.add_argument("--distance-level", choices=("word", "char"), default="word")
    strategy.add_argument("--templates", type=Path, help="directory of prompt templates")

    parser = argparse.ArgumentParser(prog="asrcorrect", description="LLM N-best ASR error correction and scoring")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("correct", parents=[common, strategy], help="run a correction strategy")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--nbest", type=_positive, default=5)
    p.set_defaults(func=cmd_correct)

    p = sub.add_parser("score", parents=[common], help="score outcomes against references")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--outcomes", type=Path, required=True)
    p.add_argument("--baseline", type=Path, help="outcomes file to use as baseline (default: corpus 1-best)")
    p.add_argument("--nbest", type=_positive, default=5, help="list size for oracle WER")
    p.add_argument("--report", type=Path)
    p.add_argument("--allow-missing-ref", action="store_true")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("stats", parents=[common], help="Uniq and Cross WER of N-best lists")
    p.add_argument("--in", dest="input", type=Path, action="append", required=True)
    p.add_argument("--nbest", type=_positive, default=5)
    p.add_argument("--report", type=Path)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("ablate", parents=[common, strategy], help="vary the N-best size")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--sizes", type=_sizes, default=[1, 3, 5, 10])
    p.add_argument("--report", type=Path)
    p.add_argument("--out-dir", type=Path)
    p.add_argument("--allow-missing-ref", action="store_true")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("split", parents=[common], help="WER split by selected hypothesis rank")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--outcomes", type=Path, required=True)
    p.add_argument("--nbest", type=_positive, default=5)
    p.add_argument("--report", type=Path)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("rover", parents=[common], help="ROVER baseline over the N-best list")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--nbest", type=_positive, default=5)
    p.add_argument("--weights", choices=("uniform", "rank-decay"), default="uniform")
    p.set_defaults(func=cmd_rover)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args, argv)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (CorpusFormatError, CorpusValidationError, MissingReferenceError, MissingHypothesisError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
