"""Command-line entry point: ``gap-reranker {mine,rerank,evaluate,synth,bench}``.

Exit codes: 0 success, 1 input or parse error, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .bench import bench_rerank
from .core import ConfigurationError, Profile
from .formats import (
    ProfileFile,
    format_profile,
    parse_sweep,
    read_profile,
    read_sessions,
    write_sessions,
)
from .metrics import compare_rankers
from .mining import (
    DEFAULT_WINDOW_DAYS,
    ParseError,
    UnsupportedVersionError,
    aggregate_shares,
    load_store,
    read_log,
    save_store,
)
from .pipeline import rerank_all
from .report import write_gap_curve_csv, write_report_csv, write_report_table, format_report_table
from .synth import WorkloadConfig, generate_workload, measure_baseline

EXIT_OK, EXIT_INPUT, EXIT_CONFIG = 0, 1, 2
DEFAULT_SWEEP = (1.0, 0.8, 0.5, 0.2)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigurationError(message)


def _load_profile(args) -> ProfileFile | None:
    return read_profile(args.profile) if getattr(args, "profile", None) else None


def _path(args, pf: ProfileFile | None, key: str, required: bool = True) -> Path | None:
    value = getattr(args, key, None)
    if value is not None:
        return Path(value)
    if pf is not None and key in pf.paths:
        return pf.paths[key]
    if required:
        raise ConfigurationError(f"no --{key} given and the profile does not name one")
    return None


def _require_profile(pf: ProfileFile | None) -> ProfileFile:
    if pf is None:
        raise ConfigurationError("--profile is required")
    return pf


def cmd_mine(args) -> int:
    pf = _load_profile(args)
    if args.aspects:
        aspects = [a.strip() for a in args.aspects.split(",") if a.strip()]
    elif pf is not None:
        aspects = list(pf.profile.aspects)
    else:
        raise ConfigurationError("give --aspects or a --profile listing aspects")
    if not aspects:
        raise ConfigurationError("aspect list is empty")
    if args.smoothing < 0:
        raise ConfigurationError(f"--smoothing must be non-negative, got {args.smoothing}")
    out = _path(args, None, "out")
    events, skipped = read_log(args.log, skip_bad=args.skip_bad)
    store = aggregate_shares(events, aspects, args.smoothing,
                             alpha=args.alpha, window_days=args.window_days)
    save_store(store, out)
    print(f"queries: {len(store)}  events: {len(events)}  skipped lines: {skipped}")
    return EXIT_OK


def cmd_rerank(args) -> int:
    pf = _require_profile(_load_profile(args))
    profile = pf.profile
    if args.alpha is not None:
        profile = replace(profile, alpha_override=parse_sweep(args.alpha)[0])
    sessions_path = _path(args, pf, "sessions")
    store = load_store(_path(args, pf, "model"))
    out = _path(args, pf, "out")
    if out.is_dir():
        out = out / "reranked.jsonl"
    sessions = read_sessions(sessions_path)
    reranked = rerank_all(sessions, store, profile)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_sessions(reranked, out)
    print(f"reranked {len(reranked)} sessions -> {out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    pf = _require_profile(_load_profile(args))
    sweep = parse_sweep(args.sweep) if args.sweep else (pf.sweep or DEFAULT_SWEEP)
    sessions = read_sessions(_path(args, pf, "sessions"))
    if not sessions:
        print("error: session file is empty", file=sys.stderr)
        return EXIT_INPUT
    store = load_store(_path(args, pf, "model"))
    out = _path(args, pf, "out")
    out.mkdir(parents=True, exist_ok=True)

    reports = []
    for alpha in sweep:
        reranked = rerank_all(sessions, store, pf.profile, alpha)
        reports.append(compare_rankers(sessions, store, pf.profile, alpha,
                                       resamples=args.resamples, seed=args.seed,
                                       reranked=reranked))
    write_report_csv(reports, out / "report.csv")
    write_report_table(reports, out / "report.txt")
    write_gap_curve_csv(reports, out / "gap_curve.csv")
    print(format_report_table(reports), end="")
    if any(r.degenerate_baseline for r in reports):
        print("note: baseline gap is zero; gap difference reported as 0")
    print(f"wrote {out / 'report.csv'}, {out / 'report.txt'}, {out / 'gap_curve.csv'}")
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"config is not valid JSON ({exc.msg})", exc.lineno) from None
        if not isinstance(data, dict):
            raise ConfigurationError("config must be a JSON object")
        config = WorkloadConfig.from_dict(data)
    else:
        config = WorkloadConfig()
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    workload = generate_workload(config)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "purchases.jsonl").write_text(
        "".join(line + "\n" for line in workload.log_lines), encoding="utf-8")
    write_sessions(workload.sessions, out / "sessions.jsonl")
    save_store(workload.truth, out / "truth.json")
    profile = Profile(args.k, config.pool_size, tuple(config.true_shares))
    (out / "profile.txt").write_text(
        format_profile(profile, DEFAULT_SWEEP, model="model.json",
                       sessions="sessions.jsonl", out="results"),
        encoding="utf-8")

    summary = measure_baseline(workload, args.k)
    print(f"queries: {config.num_queries}  sessions: {len(workload.sessions)}  "
          f"log events: {len(workload.log_lines)}")
    print(f"baseline gap @k={args.k}: mean {summary.mean_gap:.4f}, "
          f"queries with gap {summary.fraction_with_gap:.2%}")
    return EXIT_OK


def cmd_bench(args) -> int:
    pf = _require_profile(_load_profile(args))
    if args.iterations < 1:
        raise ConfigurationError("--iterations must be at least 1")
    sessions = read_sessions(_path(args, pf, "sessions"))
    if not sessions:
        print("error: session file is empty", file=sys.stderr)
        return EXIT_INPUT
    store = load_store(_path(args, pf, "model"))
    alphas = [None] if args.alpha is None else list(parse_sweep(args.alpha))
    for alpha in alphas:
        print(bench_rerank(sessions, store, pf.profile, args.iterations, alpha).format())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gap-reranker", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("mine", help="aggregate a purchase log into a model store")
    p.add_argument("log")
    p.add_argument("--aspects", help="comma-separated aspects (default: from --profile)")
    p.add_argument("--profile")
    p.add_argument("--smoothing", type=float, default=0.0)
    p.add_argument("--skip-bad", action="store_true", help="skip malformed lines instead of failing")
    p.add_argument("--alpha", type=float, default=0.5, help="alpha stored with every query model")
    p.add_argument("--window-days", type=int, default=DEFAULT_WINDOW_DAYS)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("rerank", help="rerank a session file")
    p.add_argument("--profile", required=True)
    p.add_argument("--sessions")
    p.add_argument("--model")
    p.add_argument("--alpha", help="override the profile alpha")
    p.add_argument("--out", help="output session file (or directory)")
    p.set_defaults(func=cmd_rerank)

    p = sub.add_parser("evaluate", help="sweep alpha and report gap and MRR shifts")
    p.add_argument("--profile", required=True)
    p.add_argument("--sessions")
    p.add_argument("--model")
    p.add_argument("--sweep", help="comma-separated alpha values")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, default=0, help="permutation test seed")
    p.add_argument("--resamples", type=int, default=10_000)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="generate a synthetic workload")
    p.add_argument("--config", help="JSON workload config (default: built-in)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--k", type=int, default=20, help="prefix length for the baseline summary")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="time per-session reranking")
    p.add_argument("--profile", required=True)
    p.add_argument("--sessions")
    p.add_argument("--model")
    p.add_argument("--iterations", type=int, default=10_000)
    p.add_argument("--alpha", help="comma-separated alpha values to time separately")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, UnsupportedVersionError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
