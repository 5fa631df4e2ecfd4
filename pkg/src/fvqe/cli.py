"""Command-line entry point: ``fvqe-bench`` / ``python -m fvqe``.

Exit codes: 0 success, 2 validation error, 3 run failures present.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .bench import (PRESETS, FixtureMismatchError, RunConfig, emit_plots, generate_instances,
                    load_traces, run_ensemble, summarize, verify_paper_instance, write_summary)
from .filters import FilterDomainError
from .problem import ValidationError

EXIT_OK, EXIT_INVALID, EXIT_FAILURES = 0, 2, 3


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="RunConfig JSON file")
    p.add_argument("--preset", choices=sorted(PRESETS), help="named configuration")
    p.add_argument("--exact", action="store_true", help="exact expectations instead of shots")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--force", action="store_true", help="rerun completed runs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fvqe-bench",
                                     description="Filtering VQE benchmark runner for weighted MaxCut")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("generate", "write the instance graphs"),
                        ("run", "run every algorithm on every instance"),
                        ("summarize", "recompute summary.json from persisted traces"),
                        ("plot", "render plots with CSV sidecars")):
        _add_common(sub.add_parser(name, help=help_))
    v = sub.add_parser("verify-paper-instance",
                       help="check the 9-qubit experiment instance and rerun its F-VQE settings")
    _add_common(v)
    v.add_argument("--shots", type=int, default=500)
    v.add_argument("--no-run", action="store_true", help="only check the optimum")
    return parser


def resolve_config(args) -> RunConfig:
    if args.config is not None:
        cfg = RunConfig.load(args.config)
    else:
        cfg = PRESETS[args.preset or "desk"]()
    upd = {}
    if args.exact:
        upd["exact"] = True
    if args.seed is not None:
        upd["seed"] = args.seed
    if args.out is not None:
        upd["out"] = str(args.out)
    return dataclasses.replace(cfg, **upd) if upd else cfg


def _dispatch(args) -> int:
    if args.command == "verify-paper-instance":
        seed = 0 if args.seed is None else args.seed
        shots = None if args.exact else args.shots
        report = verify_paper_instance(shots=shots, seed=seed, run_fvqe=not args.no_run)
        trace = report.pop("trace", None)
        if args.out is not None:
            args.out.mkdir(parents=True, exist_ok=True)
            (args.out / "paper_instance.json").write_text(
                json.dumps(report, indent=2, sort_keys=True) + "\n")
            if trace is not None:
                (args.out / "paper_instance_trace.csv").write_text(trace)
        print(json.dumps(report, indent=2, sort_keys=True))
        return EXIT_OK if report.get("error") is None else EXIT_FAILURES

    cfg = resolve_config(args)
    out = Path(cfg.out)
    if args.command == "generate":
        paths = generate_instances(cfg, out)
        (out / "config.json").write_text(cfg.to_json() + "\n")
        print(f"{len(paths)} instances in {out / 'instances'}")
        return EXIT_OK
    if args.command == "run":
        summary = run_ensemble(cfg, force=args.force, out=out)
        print(f"{len(summary.outcomes)} runs, {summary.failures} failed; summary in {out / 'summary.json'}")
        return EXIT_FAILURES if summary.failures else EXIT_OK
    if args.command == "summarize":
        summary = summarize(out, cfg)
        write_summary(summary, out)
        print(summary.to_json(), end="")
        return EXIT_FAILURES if summary.failures else EXIT_OK
    if args.command == "plot":
        summary = summarize(out, cfg)
        files = emit_plots(summary, load_traces(out), out / "plots")
        print(f"{len(files)} files in {out / 'plots'}")
        return EXIT_OK
    raise AssertionError(args.command)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except (ValidationError, FilterDomainError, json.JSONDecodeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except FixtureMismatchError as exc:
        print(f"fixture mismatch: {exc}", file=sys.stderr)
        return EXIT_FAILURES


if __name__ == "__main__":
    sys.exit(main())
