"""Command line front end: run and validate scenario files.

    ckmp run <scenario> [--out DIR] [--iterations N] [--snapshot-every N] [--seed N]
    ckmp validate <scenario>

The scenario argument is a path; names of bundled scenarios (for example
``writing_g``) resolve to the packaged files when no such path exists.
"""

from __future__ import annotations

import argparse
import os
import sys

import yaml

from .scenario import ScenarioError, bundled_scenario_path, load_scenario, run_scenario


def _resolve(path):
    if os.path.exists(path):
        return path
    try:
        candidate = bundled_scenario_path(path)
    except (FileNotFoundError, OSError):
        return path
    if os.path.exists(candidate):
        return candidate
    return path


def main(argv=None):
    parser = argparse.ArgumentParser(prog="ckmp", description="Constrained kernelized movement primitives")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a scenario and write its outputs")
    run_p.add_argument("scenario", help="scenario file path or bundled scenario name")
    run_p.add_argument("--out", default=None, help="output directory (default: <name>_out)")
    run_p.add_argument("--iterations", type=int, default=None, help="override solver.max_iterations")
    run_p.add_argument("--snapshot-every", type=int, default=None, help="write a trajectory snapshot every N iterations")
    run_p.add_argument("--seed", type=int, default=None, help="override the scenario seeds")

    val_p = sub.add_parser("validate", help="check a scenario file and list violations")
    val_p.add_argument("scenario", help="scenario file path or bundled scenario name")

    args = parser.parse_args(argv)
    path = _resolve(args.scenario)
    if not os.path.exists(path):
        print(f"error: scenario not found: {args.scenario}", file=sys.stderr)
        return 2

    if args.command == "validate":
        try:
            scenario = load_scenario(path)
        except ScenarioError as exc:
            print(f"{path}: invalid scenario", file=sys.stderr)
            for v in exc.violations:
                print(f"  - {v}", file=sys.stderr)
            return 2
        except yaml.YAMLError as exc:
            print(f"{path}: not parseable YAML: {exc}", file=sys.stderr)
            return 2
        print(f"{path}: ok ({scenario.name})")
        return 0

    try:
        scenario = load_scenario(path)
    except ScenarioError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    out_dir = args.out if args.out is not None else f"{scenario.name}_out"
    try:
        summary = run_scenario(
            scenario,
            out_dir=out_dir,
            iterations=args.iterations,
            snapshot_every=args.snapshot_every,
            seed=args.seed,
        )
    except ScenarioError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    print(
        f"{scenario.name}: {summary['iterations_run']} iterations, "
        f"final violation {summary['final_max_violation']:.3e}, "
        f"obstacle cost {summary['final_obstacle_cost']:.6g} "
        f"-> {out_dir}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
