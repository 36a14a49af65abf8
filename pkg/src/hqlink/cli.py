"""Command-line scenario runner.

Exit codes: 0 success, 2 configuration error, 3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import sys

from .config import SCENARIOS, ConfigError, ExperimentConfig
from .memory import IntegrationError
from .scenarios import emit_report, run
from .tomography import NonConvergenceError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hqlink",
        description="Simulate the trapped-ion / solid-state-memory link: "
                    "tomography, CHSH, rate budgets and memory design sweeps.")
    parser.add_argument("--scenario", choices=SCENARIOS,
                        help="experiment to run (overrides the config file)")
    parser.add_argument("--config", help="JSON config file; defaults cover all "
                                         "published parameters")
    parser.add_argument("--seed", type=int, help="master seed override")
    parser.add_argument("--shots", type=int,
                        help="override shots/heralds/trials of the chosen scenario")
    parser.add_argument("--out", help="output directory override")
    parser.add_argument("--format", choices=("json", "csv"), default="json",
                        help="summary format (matrix and tables are always written)")
    return parser


def load_config(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.from_file(args.config)
    else:
        cfg = ExperimentConfig.defaults(args.scenario or "ti_qm")
    overrides: dict = {}
    if args.scenario:
        overrides["scenario"] = args.scenario
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.out:
        overrides["output_dir"] = args.out
    if overrides:
        cfg = cfg.with_overrides(**overrides)
    if args.shots is not None:
        scen = cfg.scenario
        key = {"ti_qm": "heralds", "chsh": "trials"}.get(scen, "shots")
        cfg = cfg.with_overrides(scenarios={scen: {key: args.shots}})
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        report = run(cfg)
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except IntegrationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    try:
        files = emit_report(report, cfg.output_dir, args.format)
    except OSError as exc:
        print(f"error: cannot write report: {exc}", file=sys.stderr)
        return 2
    print(f"scenario {report.scenario} (seed {report.seed}) "
          f"finished in {report.runtime_s:.2f} s")
    for name, entry in sorted(report.statistics.items()):
        if entry.get("exact"):
            print(f"  {name}: {entry['value']:.6g}")
        else:
            print(f"  {name}: {entry['value']:.6g} +/- {entry['stddev']:.2g}")
    for path in files:
        print(f"  wrote {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
