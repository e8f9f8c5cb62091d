"""Command-line entry point: run/validate scenario configs, emit figure data,
and run the acceptance selftest. Exit code is nonzero on any FAIL flag."""

from __future__ import annotations

import argparse
import os
import sys

from .harness import ConfigError, Report, ScenarioConfig, emit_figures_data, \
    run_scenario, validate_config
from .lattice import CACHE_ENV_VAR


def _cmd_run(args) -> int:
    cfg = ScenarioConfig.from_file(args.config)
    if args.output:
        cfg.output_path = args.output
    if args.workers:
        # trial merges are index-ordered, so worker count never changes results
        if "n_workers" in _worker_capable(cfg.scenario):
            cfg.params.setdefault("n_workers", args.workers)
    report = run_scenario(cfg)
    print(report.to_json() if args.verbose else _summary(report))
    return 0 if report.passed else 1


def _worker_capable(scenario: str) -> set:
    from .harness import _SCHEMAS

    schema = _SCHEMAS.get(scenario, {})
    return set(schema.get("optional", {}))


def _summary(report: Report) -> str:
    flags = " ".join(f"{k}={'PASS' if v else 'FAIL'}" for k, v in report.flags.items())
    status = "PASS" if report.passed else "FAIL"
    return f"[{status}] {report.scenario}: {len(report.rows)} rows; {flags}"


def _cmd_validate(args) -> int:
    try:
        cfg = ScenarioConfig.from_file(args.config)
        validate_config(cfg)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 1
    print(f"ok: {cfg.scenario}")
    return 0


def _cmd_figures(args) -> int:
    report = Report.from_json(args.report)
    files = emit_figures_data(report, args.outdir)
    for f in files:
        print(f)
    return 0


def _cmd_selftest(args) -> int:
    from .acceptance import run_acceptance

    results = run_acceptance(fast=args.fast)
    n_fail = sum(not r.passed for r in results)
    print(f"{len(results) - n_fail}/{len(results)} criteria passed")
    return 1 if n_fail else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pamse",
        description="Exclusion-catalyst reaction-diffusion toolkit: scenario "
                    "runner and acceptance suite.",
        epilog=f"Heat-kernel tables are cached under ${CACHE_ENV_VAR} when set.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario config (JSON)")
    p_run.add_argument("config")
    p_run.add_argument("--output", help="write the report JSON here")
    p_run.add_argument("--verbose", action="store_true")
    p_run.add_argument("--workers", type=int, default=os.cpu_count(),
                       help="worker processes for Monte-Carlo scenarios "
                            "(results are worker-count independent)")
    p_run.set_defaults(fn=_cmd_run)

    p_val = sub.add_parser("validate", help="validate a scenario config")
    p_val.add_argument("config")
    p_val.set_defaults(fn=_cmd_validate)

    p_fig = sub.add_parser("figures", help="emit figure data from a report")
    p_fig.add_argument("report")
    p_fig.add_argument("--outdir", default="figures")
    p_fig.set_defaults(fn=_cmd_figures)

    p_self = sub.add_parser("selftest", help="run the acceptance criteria")
    p_self.add_argument("--fast", action="store_true",
                        help="reduced Monte-Carlo budgets")
    p_self.set_defaults(fn=_cmd_selftest)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
