"""Command-line front end.

    mcsim run <scenario.yaml> [--out DIR] [--seed N] [--variant NAME]...
    mcsim validate <scenario.yaml>
    mcsim list-metrics

Exit codes: 0 success, 1 validation error, 2 at least one variant timed out.
Shipped scenario files can be named without a path (fig7a, fig7b,
amr-faults, tsu-bound); they resolve to the packaged copies.
"""

from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

from mcsim import report
from mcsim.engine import run_experiment
from mcsim.scenario import ScenarioError, load_scenario


def find_scenario(name: str) -> Path:
    p = Path(name)
    if p.exists():
        return p
    packaged = resources.files("mcsim") / "scenarios" / f"{name}.yaml"
    try:
        if packaged.is_file():
            return Path(str(packaged))
    except (FileNotFoundError, ModuleNotFoundError):
        pass
    raise FileNotFoundError(f"scenario {name!r} not found (no such file and not shipped)")


def cmd_run(args) -> int:
    try:
        path = find_scenario(args.scenario)
        scenario = load_scenario(path)
    except (ScenarioError, FileNotFoundError) as exc:
        print(exc, file=sys.stderr)
        return 1
    if args.seed is not None:
        scenario.seed = args.seed
    results = run_experiment(scenario, variant_names=args.variant or None)
    # always namespaced, so several scenarios can share one output dir
    paths = report.emit_report(scenario.name, results, args.out, namespaced=True)
    print(paths["summary"].read_text(), end="")
    print(f"\nwrote {paths['metrics']}, {paths['events']}")
    timeouts = [v for v, r in results.items() if r.timeout_tasks]
    if timeouts:
        print(f"timeout variants: {', '.join(sorted(timeouts))}", file=sys.stderr)
        return 2
    return 0


def cmd_validate(args) -> int:
    try:
        path = find_scenario(args.scenario)
        scenario = load_scenario(path)
    except (ScenarioError, FileNotFoundError) as exc:
        print(exc, file=sys.stderr)
        return 1
    print(f"{scenario.name}: valid ({len(scenario.tasks)} tasks, "
          f"{len(scenario.variants)} variants)")
    return 0


def cmd_list_metrics(_args) -> int:
    for subject, metric, unit in report.list_metrics():
        print(f"{subject:<10} {metric:<30} [{unit}]")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mcsim",
        description="Transaction-level simulator of a mixed-criticality SoC memory system")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario's variants and write reports")
    p_run.add_argument("scenario", help="scenario file or shipped scenario name")
    p_run.add_argument("--out", default="out",
                       help="output directory; reports land in <out>/<scenario-name>/")
    p_run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_run.add_argument("--variant", action="append",
                       help="run only the named variant (repeatable); isolated always runs")
    p_run.set_defaults(func=cmd_run)

    p_val = sub.add_parser("validate", help="check a scenario file, listing every problem")
    p_val.add_argument("scenario")
    p_val.set_defaults(func=cmd_validate)

    p_met = sub.add_parser("list-metrics", help="list every metric the CSV can contain")
    p_met.set_defaults(func=cmd_list_metrics)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
