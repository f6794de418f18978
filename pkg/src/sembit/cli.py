"""Command-line front end.

Subcommands: ``generate`` (write a scenario JSON), ``run`` (execute an
experiment and emit CSVs), ``summarize`` (print headline metrics from a
results directory), and ``validate-scenario`` (check a scenario file).
Exit codes: 0 success, 1 usage error, 2 validation error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import sys

from .scenario import GenerationConfig, ScenarioError, generate_scenario, load_scenario, save_scenario
from .queueing import QueueingError
from .optimize import OptimizationError
from .experiments import EXPERIMENTS, ExperimentSpec, run_experiment, summarize


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; the CLI contract wants 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sembit",
                     description="Queueing analysis and resource optimization "
                                 "for hybrid semantic/bit links")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("generate", help="generate a random scenario file")
    gen.add_argument("--mus", type=int, default=20, help="number of mobile users")
    gen.add_argument("--bss", type=int, default=3, help="number of base stations")
    gen.add_argument("--radius", type=float, default=300.0, help="deployment radius in meters")
    gen.add_argument("--kappa", type=float, default=None,
                     help="interference scaling factor (0 = noise-only)")
    gen.add_argument("--b2m", choices=("linear", "pwl"), default="linear",
                     help="bit-to-message rate map family for semantic links")
    gen.add_argument("--seed", type=int, default=0, help="generation seed")
    gen.add_argument("--out", required=True, help="output scenario JSON path")
    gen.set_defaults(func=_cmd_generate)

    run = sub.add_parser("run", help="run an experiment and write CSV results")
    run.add_argument("--experiment", required=True, choices=EXPERIMENTS,
                     help="experiment to run")
    run.add_argument("--scenario", default=None,
                     help="scenario JSON (single-run / rate-cdf); sweeps regenerate per point")
    run.add_argument("--seed", type=int, default=0, help="master seed")
    run.add_argument("--out", default="results", help="output directory for CSVs")
    run.add_argument("--trials", type=int, default=20, help="seeds per sweep grid point")
    run.add_argument("--threads", type=int, default=1, help="worker processes for sweeps")
    run.add_argument("--grid", default=None,
                     help="comma-separated sweep grid values (experiment-specific default)")
    run.add_argument("--mus", type=int, default=20, help="users in generated scenarios")
    run.add_argument("--bss", type=int, default=3, help="stations in generated scenarios")
    run.add_argument("--slots", type=int, default=200_000,
                     help="simulated slots (or packets) per replication in validation runs")
    run.add_argument("--reps", type=int, default=5,
                     help="simulation replications per validation point")
    run.set_defaults(func=_cmd_run)

    summ = sub.add_parser("summarize", help="print headline metrics from result CSVs")
    summ.add_argument("results_dir", help="directory holding experiment CSVs")
    summ.set_defaults(func=_cmd_summarize)

    val = sub.add_parser("validate-scenario", help="validate a scenario JSON file")
    val.add_argument("path", help="scenario JSON path")
    val.set_defaults(func=_cmd_validate)
    return parser


def _cmd_generate(args) -> int:
    cfg = GenerationConfig(num_users=args.mus, num_stations=args.bss,
                           radius_m=args.radius, seed=args.seed, b2m_kind=args.b2m)
    if args.kappa is not None:
        cfg.interference_kappa = args.kappa
    scenario = generate_scenario(cfg)
    save_scenario(scenario, args.out)
    print(f"wrote {args.out}: {scenario.num_users} users, {scenario.num_stations} stations")
    return 0


def _cmd_run(args) -> int:
    grid = None
    if args.grid is not None:
        grid = [float(v) if "." in v else int(v) for v in args.grid.split(",") if v]
    spec = ExperimentSpec(name=args.experiment, out_dir=args.out, seed=args.seed,
                          trials=args.trials, grid=grid, scenario_path=args.scenario,
                          num_users=args.mus, num_stations=args.bss,
                          num_slots=args.slots, replications=args.reps,
                          threads=args.threads)
    result = run_experiment(spec)
    for path in result.csv_paths:
        print(f"wrote {path}")
    return 0


def _cmd_summarize(args) -> int:
    sys.stdout.write(summarize(args.results_dir))
    return 0


def _cmd_validate(args) -> int:
    try:
        scenario = load_scenario(args.path)
    except (ScenarioError, OSError) as e:
        print(f"invalid scenario: {e}", file=sys.stderr)
        return 2
    print(f"ok: {scenario.num_users} users, {scenario.num_stations} stations, "
          f"{scenario.num_users * scenario.num_stations} links")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except ScenarioError as e:
        print(f"validation error: {e}", file=sys.stderr)
        return 2
    except (QueueingError, OptimizationError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 3


def entry():
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
