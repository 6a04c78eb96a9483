"""Command-line entry point: ``proxtd run | sweep | check-bounds | report``."""
from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from . import harness
from .domains import DOMAINS

EXIT_AUDIT = 2


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with ExperimentConfig / LearnerConfig keys")
    p.add_argument("--domain", choices=DOMAINS)
    p.add_argument("--algo", action="append", dest="algorithms", metavar="ALGO",
                   choices=harness.EVAL_ALGORITHMS + harness.CONTROL_ALGORITHMS,
                   help="algorithm to run (repeatable)")
    p.add_argument("--steps", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--jobs", type=int, dest="n_jobs")
    p.add_argument("--out", default="results", help="output directory (default: results)")


def _config(args) -> harness.ExperimentConfig:
    overrides = {k: getattr(args, k, None) for k in
                 ("domain", "algorithms", "steps", "runs", "seed", "alpha", "n_jobs")}
    return harness.load_config(args.config or {}, **overrides)


def _cmd_run(args) -> int:
    cfg = _config(args)
    results = harness.run_experiment(cfg)
    summary = harness.summarize_steady_state(results, cfg.window) if results else None
    paths = harness.emit_artifacts(results, summary, args.out, config=cfg)
    failures = sum(r.audit_failures for r in results)
    print(harness.report(args.out))
    print(f"wrote {', '.join(str(p) for p in paths)}")
    if failures:
        print(f"invariant audit failed at {failures} logged point(s)", file=sys.stderr)
        return EXIT_AUDIT
    return 0


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _cmd_sweep(args) -> int:
    cfg = _config(args)
    values = [_parse_value(v) for v in args.values]
    rows = harness.sweep(cfg, args.param, values)
    path = harness.write_sweep(rows, args.out)
    for r in rows:
        print(", ".join(f"{k}={v}" for k, v in r.items()))
    print(f"wrote {path}")
    return EXIT_AUDIT if any(r.get("audit_failures", 0) for r in rows) else 0


def _cmd_check_bounds(args) -> int:
    table = harness.check_bounds(args.domain, args.n, args.delta, args.mode, sigma_method=args.sigma,
                                 seed=args.seed)
    harness.emit_artifacts(None, None, args.out, bounds=table)
    print(harness.report(args.out))
    return 0 if table["normA_ok"] and table["normB_ok"] else EXIT_AUDIT


def _cmd_report(args) -> int:
    try:
        print(harness.report(args.input))
    except FileNotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="proxtd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment suite and write CSV artifacts")
    _add_common(run)
    run.set_defaults(func=_cmd_run)

    sw = sub.add_parser("sweep", help="repeat a suite over values of one parameter")
    _add_common(sw)
    sw.add_argument("--param", default="alpha")
    sw.add_argument("--values", nargs="+", required=True)
    sw.set_defaults(func=_cmd_sweep)

    cb = sub.add_parser("check-bounds", help="tabulate the closed-form bounds for a domain")
    cb.add_argument("--domain", choices=DOMAINS, required=True)
    cb.add_argument("--n", type=int, required=True)
    cb.add_argument("--delta", type=float, default=0.05)
    cb.add_argument("--mode", choices=("identity", "covariance"), default="identity")
    cb.add_argument("--sigma", choices=("pilot", "exact"), default="pilot")
    cb.add_argument("--seed", type=int, default=0)
    cb.add_argument("--out", default="results")
    cb.set_defaults(func=_cmd_check_bounds)

    rp = sub.add_parser("report", help="print the tables stored in an output directory")
    rp.add_argument("--in", dest="input", required=True)
    rp.set_defaults(func=_cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
