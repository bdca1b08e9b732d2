"""Command-line entry point.

Subcommands::

    landau-sim simulate --config FILE [--seed S] [--workers W] [--out DIR]
    landau-sim rate-n   --config FILE [...]
    landau-sim rate-N   --config FILE [...]
    landau-sim hist     --config FILE [...]
    landau-sim lemmas   [--trials K] [--seed S]

Exit codes: 0 success, 1 configuration problem, 2 numerical failure during a
run, 3 a property suite found violations.
"""

import argparse
import sys

from .config import load_config
from .errors import ConfigError, DomainError, NonFinite, NotPsd, Singular
from .harness import (run_all_suites, run_rate_particles, run_rate_steps,
                      run_simulate)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2
EXIT_PROPERTY = 3


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="landau-sim",
        description="Particle simulation of the homogeneous Landau dynamics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_command(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="key=value config file")
        p.add_argument("--seed", type=int, default=None,
                       help="override run.seed")
        p.add_argument("--workers", type=int, default=None,
                       help="override run.workers")
        p.add_argument("--out", dest="out_dir", default=None,
                       help="override out.dir")
        return p

    add_run_command("simulate", "run replicates, write moments/hist/ellipticity")
    add_run_command("rate-n", "particle-count convergence study")
    add_run_command("rate-N", "time-step convergence study")
    add_run_command("hist", "write histograms only (replicate 0)")

    lem = sub.add_parser("lemmas", help="randomized matrix-inequality suites")
    lem.add_argument("--trials", type=int, default=10000)
    lem.add_argument("--seed", type=int, default=0)
    return parser


def _setup_from_args(args):
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.out_dir is not None:
        overrides["out_dir"] = args.out_dir
    from .config import build_setup, parse_config_text
    from pathlib import Path
    path = Path(args.config)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("cannot read config %s: %s" % (path, exc)) from exc
    return build_setup(parse_config_text(text, origin=str(path)), overrides)


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else EXIT_CONFIG
        return EXIT_OK if code == 0 else EXIT_CONFIG

    try:
        if args.command == "lemmas":
            if args.trials < 1:
                raise ConfigError("--trials must be >= 1")
            results = run_all_suites(trials=args.trials, seed=args.seed)
            failed = False
            for res in results:
                status = "ok" if res.passed else "VIOLATED"
                print("%-28s %6d trials  %s (worst margin %.3e)"
                      % (res.name, res.trials, status, res.worst_margin))
                if not res.passed:
                    failed = True
                    print("  counterexample: %s" % res.counterexample)
            return EXIT_PROPERTY if failed else EXIT_OK

        setup = _setup_from_args(args)
        if args.command == "simulate":
            out = run_simulate(setup)
        elif args.command == "hist":
            out = run_simulate(setup, command="hist", hist_only=True)
        elif args.command == "rate-n":
            out = run_rate_particles(setup)
        else:
            out = run_rate_steps(setup)
        for message in out.warnings:
            print("warning: %s" % message, file=sys.stderr)
        for path in out.files:
            print("wrote %s" % path)
        if args.command in ("rate-n", "rate-N"):
            print("slope %.4f  (95%% CI [%.4f, %.4f])"
                  % (out.series.slope, *out.series.slope_ci))
        return EXIT_OK
    except (ConfigError, DomainError) as exc:
        # DomainError escaping a run means some derived quantity (a rate
        # ladder level, a histogram grid) was infeasible for the requested
        # parameters -- a configuration problem discovered late.
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    except (NonFinite, NotPsd, Singular, FloatingPointError) as exc:
        print("numerical failure: %s" % exc, file=sys.stderr)
        return EXIT_NUMERIC


def entry():
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
