"""Command line: ``topk-eval {validate,rank,grade,analyze}``.

Exit codes: 0 success, 1 validation or judge failures, 2 usage or I/O errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import analysis
from .dataset import Part, dump_part, load_part, validate_collection
from .errors import TopKEvalError
from .judge import ChatClient, JudgeConfig, MockJudge
from .metrics import NdcgMode
from .pipeline import AnalysisSettings, analyze, grade_ranked, rank_embedded, write_report
from .ranker import load_vectors

log = logging.getLogger("topk_eval")

EXIT_OK, EXIT_FAILURES, EXIT_USAGE = 0, 1, 2

_METHOD_CHOICES = ("spearman", "pearson", "kendall-b", "kendall-c")


class UsageError(Exception):
    pass


def _parse_floats(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from exc
    if not values or any(not 0 <= v <= 1 for v in values):
        raise argparse.ArgumentTypeError("alpha values must lie in [0, 1]")
    return values


def _parse_ks(text: str) -> list[int]:
    """``"2-15"`` or ``"1,2,5"`` or a mix like ``"1,4-6"``."""
    ks: set[int] = set()
    try:
        for part in text.split(","):
            part = part.strip()
            if "-" in part:
                lo, hi = part.split("-", 1)
                ks.update(range(int(lo), int(hi) + 1))
            elif part:
                ks.add(int(part))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad cutoff list {text!r}") from exc
    if not ks or min(ks) < 1:
        raise argparse.ArgumentTypeError("cutoffs must be positive integers")
    return sorted(ks)


def _parse_methods(text: str) -> list[str]:
    methods = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in methods if m not in _METHOD_CHOICES]
    if bad or not methods:
        raise argparse.ArgumentTypeError(f"methods must be among {', '.join(_METHOD_CHOICES)}")
    return methods


def _read(path: str | None, part: Part, flag: str, required: bool = True):
    if path is None:
        if required:
            raise UsageError(f"{flag} is required")
        return None
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"cannot read {flag} file: {path}")
    return load_part(p, part)


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_validate(args) -> int:
    query_texts = _read(args.query_texts, Part.QUERY_TEXTS, "--query-texts", required=False)
    ranked = _read(args.ranked, Part.RANKED, "--ranked", required=False)
    graded = _read(args.graded, Part.GRADED, "--graded", required=False)
    if query_texts is None and ranked is None and graded is None:
        raise UsageError("give at least one of --query-texts, --ranked, --graded")
    reports = validate_collection(query_texts, ranked, graded)
    failing = [r for r in reports if not r.ok]
    out = _out_dir(args) / "validation_report.json"
    summary = {
        "checked": len(reports),
        "failed": len(failing),
        "by_part": {
            part: sum(1 for r in reports if r.part == part)
            for part in ("query_texts", "ranked", "graded")
        },
    }
    with open(out, "w", encoding="utf-8") as fh:
        json.dump({"summary": summary, "failures": [r.to_dict() for r in failing]}, fh, indent=2)
        fh.write("\n")
    print(f"validated {len(reports)} samples, {len(failing)} with failures -> {out}")
    return EXIT_FAILURES if failing else EXIT_OK


def cmd_rank(args) -> int:
    query_texts = _read(args.query_texts, Part.QUERY_TEXTS, "--query-texts")
    if args.vectors is None or not Path(args.vectors).is_file():
        raise UsageError(f"cannot read --vectors file: {args.vectors}")
    ranked = rank_embedded(load_vectors(args.vectors), query_texts, args.ks)
    out = _out_dir(args) / "ranked.jsonl"
    dump_part(ranked, out)
    print(f"wrote {len(ranked)} ranked samples -> {out}")
    return EXIT_OK


def _make_judge(args):
    live = args.judge_url is not None
    mock = args.mock_seed is not None
    if live == mock:
        raise UsageError("configure exactly one of --judge-url (with --judge-model) or --mock-seed")
    if mock:
        return MockJudge(args.mock_seed), args.max_in_flight
    if not args.judge_model:
        raise UsageError("--judge-model is required with --judge-url")
    cfg = JudgeConfig(
        endpoint_url=args.judge_url,
        model_name=args.judge_model,
        api_key_env=args.api_key_env,
        max_attempts=args.max_attempts,
        backoff_base=args.backoff_base,
        max_in_flight=args.max_in_flight,
        audit_path=args.audit_log,
    )
    return ChatClient(cfg), cfg.max_in_flight


def cmd_grade(args) -> int:
    query_texts = _read(args.query_texts, Part.QUERY_TEXTS, "--query-texts")
    ranked = _read(args.ranked, Part.RANKED, "--ranked")
    judge, in_flight = _make_judge(args)
    try:
        graded, failures = grade_ranked(ranked, query_texts, judge, in_flight)
    finally:
        if hasattr(judge, "close"):
            judge.close()
    out_dir = _out_dir(args)
    dump_part(graded, out_dir / "graded.jsonl")
    if failures:
        with open(out_dir / "grade_failures.json", "w", encoding="utf-8") as fh:
            json.dump([f.to_dict() for f in failures], fh, indent=2)
            fh.write("\n")
    print(f"wrote {len(graded)} graded samples ({len(failures)} skipped) -> {out_dir / 'graded.jsonl'}")
    return EXIT_FAILURES if failures else EXIT_OK


def cmd_analyze(args) -> int:
    graded = _read(args.graded, Part.GRADED, "--graded")
    ranked = _read(args.ranked, Part.RANKED, "--ranked", required=False)
    settings = AnalysisSettings(
        alpha_grid=args.alpha_grid,
        min_count=args.min_count,
        ndcg_mode=NdcgMode(args.ndcg_mode),
        rounding=args.rounding,
        methods=args.methods,
    )
    report = analyze(graded, ranked, settings)
    written = write_report(report, _out_dir(args))
    if report.empty:
        print(f"warning: no segment has at least {args.min_count} samples; empty report", file=sys.stderr)
    print(f"{len(report.segments)} segments, {len(report.correlations)} correlations, "
          f"{len(written)} files -> {args.out_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="topk-eval", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, *flags):
        for flag in flags:
            p.add_argument(flag, default=None)
        p.add_argument("--out-dir", default=".")

    p = sub.add_parser("validate", help="check dataset parts against each other")
    common(p, "--query-texts", "--ranked", "--graded")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("rank", help="rank candidates from an embedding-vectors file")
    common(p, "--query-texts", "--vectors")
    p.add_argument("--ks", type=_parse_ks, default=_parse_ks("2-15"),
                   help="cutoffs, e.g. 2-15 or 1,2,5 (default 2-15)")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("grade", help="generate and score answers for every (ranked sample, K)")
    common(p, "--query-texts", "--ranked")
    p.add_argument("--judge-url")
    p.add_argument("--judge-model")
    p.add_argument("--api-key-env", default="OPENAI_API_KEY")
    p.add_argument("--mock-seed", type=int)
    p.add_argument("--max-attempts", type=int, default=3)
    p.add_argument("--backoff-base", type=float, default=1.0)
    p.add_argument("--max-in-flight", type=int, default=4)
    p.add_argument("--audit-log", default=None, help="append requests and raw replies as JSON Lines")
    p.set_defaults(func=cmd_grade)

    p = sub.add_parser("analyze", help="segment, correlate and write heatmap matrices")
    common(p, "--graded", "--ranked")
    p.add_argument("--alpha-grid", type=_parse_floats, default=list(analysis.DEFAULT_ALPHA_GRID))
    p.add_argument("--min-count", type=int, default=analysis.DEFAULT_MIN_COUNT)
    p.add_argument("--ndcg-mode", choices=[m.value for m in NdcgMode], default="observed")
    p.add_argument("--rounding", choices=["decimal", "significant"], default="decimal")
    p.add_argument("--methods", type=_parse_methods, default=list(_METHOD_CHOICES))
    p.set_defaults(func=cmd_analyze)
    return ap


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TopKEvalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURES


if __name__ == "__main__":
    sys.exit(main())
