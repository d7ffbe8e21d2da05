"""Command-line front end.

Exit status: 0 success, 1 input error (nothing written), 2 when a theorem
check fails beyond tolerance.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from .report import make_report, to_csv, to_json
from .runner import run_file
from .scenarios import ScenarioError, builtin_config, builtin_names, load_scenario_file, parse_config
from .sweep import run_sweep, sweep_csv

EXIT_OK, EXIT_INPUT, EXIT_CHECK = 0, 1, 2
LOG_LEVELS = {"off": logging.CRITICAL + 1, "info": logging.INFO, "debug": logging.DEBUG}

log = logging.getLogger("demon_engine")


def _configure_logging() -> None:
    level = os.environ.get("DEMON_ENGINE_LOG", "off").lower()
    if level not in LOG_LEVELS:
        print(f"warning: DEMON_ENGINE_LOG={level!r} not one of off|info|debug; using off", file=sys.stderr)
        level = "off"
    logging.basicConfig(level=LOG_LEVELS[level], format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if level == "off":
        logging.getLogger("demon_engine").setLevel(LOG_LEVELS["off"])


def _parse_dims(text: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected four comma-separated integers, got {text!r}") from None
    if len(dims) != 4 or min(dims) < 0 or min(dims[0], dims[2], dims[3]) < 1:
        raise argparse.ArgumentTypeError(f"expected S,R,A,B caps with S,A,B >= 1 and R >= 0, got {text!r}")
    return dims


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _sweep(count: int, seed: int, dims, jobs: int, u2: str, out: str | None, fmt: str,
           name: str = "sweep", kB: float = 1.0) -> int:
    start = time.perf_counter()
    rows, summary = run_sweep(count, seed, dims, jobs, u2)
    if fmt == "json":
        results = {"count": summary.count, "violations": summary.violations,
                   "worst_margin": summary.worst_margin, "worst_check": summary.worst_check,
                   "conditional_failures": summary.conditional_failures, "rows": rows}
        caps = dict(zip(("S", "R", "A", "B"), dims))
        caps = {k: v for k, v in caps.items() if v > 0}
        report = make_report("sweep", name, seed, kB, caps, time.perf_counter() - start, results, [])
        if summary.violations:
            report["metadata"]["status"] = "check_failed"
        _emit(to_json(report), out)
    else:
        _emit(sweep_csv(rows), out)
    print(summary.line(), file=sys.stderr)
    return EXIT_CHECK if summary.violations else EXIT_OK


def _run_config(sf, out: str | None, fmt: str | None) -> int:
    fmt = fmt or sf.output.get("format", "json")
    out = out or sf.output.get("path")
    if sf.mode == "sweep":
        sw = sf.sweep
        return _sweep(sw["count"], sw.get("seed", sf.seed), tuple(sw.get("dims", (2, 2, 2, 2))),
                      sw.get("jobs", 1), sw.get("u2", "haar"), out, fmt, sf.name, sf.kB)
    report = run_file(sf)
    _emit(to_json(report) if fmt == "json" else to_csv(report), out)
    failed = [c["name"] for c in report["checks"] if c["theorem"] and not c["ok"]]
    if failed:
        print(f"error: checks failed beyond tolerance: {', '.join(failed)}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="demon-engine",
                                     description="Quantum measurement-feedback engine with quantum memory.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario file")
    p.add_argument("file")
    p.add_argument("--out", help="report path (default: stdout or the file's output.path)")
    p.add_argument("--format", choices=("json", "csv"))

    p = sub.add_parser("sweep", help="check all bounds on random scenarios")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--dims", type=_parse_dims, default=(2, 2, 2, 2), help="S,R,A,B dimension caps (R may be 0)")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--u2", choices=("haar", "controlled"), default="haar",
                   help="haar: unrestricted U2; controlled: U2 conditioned on A in the measured basis")
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("builtin", help="run a built-in scenario")
    p.add_argument("name")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "csv"))
    p.add_argument("--dump", action="store_true", help="print the scenario file instead of running it")

    sub.add_parser("list-builtins", help="list built-in scenario names")
    return parser


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        if args.command == "list-builtins":
            print("\n".join(builtin_names()))
            return EXIT_OK
        if args.command == "sweep":
            if args.count < 1:
                raise ScenarioError("--count", f"must be >= 1, got {args.count}")
            if args.jobs < 1:
                raise ScenarioError("--jobs", f"must be >= 1, got {args.jobs}")
            return _sweep(args.count, args.seed, args.dims, args.jobs, args.u2, args.out, args.format)
        if args.command == "builtin":
            config = builtin_config(args.name, args.seed)
            if args.dump:
                _emit(json.dumps(config, indent=2) + "\n", args.out)
                return EXIT_OK
            return _run_config(parse_config(config), args.out, args.format)
        return _run_config(load_scenario_file(args.file), args.out, args.format)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
