"""Command-line entry point.

Exit codes: 0 all checks pass, 1 a statistical or validation check failed,
2 usage or configuration error.
"""

import argparse
import sys
from pathlib import Path

from . import experiments
from .config import BUNDLED
from .exceptions import ConfigError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _int_list(text):
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser():
    parser = argparse.ArgumentParser(prog="cusign", description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=0, help="master RNG seed (default 0)")
    parser.add_argument("--samples", type=int, default=1_000_000, help="Monte Carlo sample count N")
    parser.add_argument("--window", type=int, default=100, help="pseudo-window length ell")
    parser.add_argument("--out", type=Path, help="write the report here instead of stdout")
    parser.add_argument("--format", choices=("csv", "json"), default="json", help="report format")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", help="analytic invariant checks, no Monte Carlo")

    p = sub.add_parser("table2", help="analytic vs simulated CUSIGN alarm rates at p = 0.5")
    p.add_argument("--taus", type=_int_list, default=experiments.TAUS)

    p = sub.add_parser("theta", help="calibrate the scaling value of the alarm-rate variance")
    p.add_argument("--taus", type=_int_list, default=experiments.TAUS)
    p.add_argument("--p-plus", type=float, default=0.5)
    p.add_argument("--histogram", type=Path, help="write binned alarm-rate estimates as CSV")

    p = sub.add_parser("appendix", help="mean/std of the alarm-rate estimate over tau x p_plus")
    p.add_argument("--taus", type=_int_list, default=experiments.TAUS)
    p.add_argument("--p-values", type=_float_list, default=(0.4, 0.5, 0.6))

    p = sub.add_parser("scenario", help="closed-loop UGV run from a config file")
    p.add_argument("config", help="path to a .cfg file, or a bundled name: " + ", ".join(BUNDLED))
    p.add_argument("--trace", type=Path, help="per-step CSV trace output (default: <config stem>_trace.csv)")
    return parser


def _emit(report, args):
    text = report.to_json() if args.format == "json" else report.to_csv()
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text)
    print(report.render(), file=sys.stderr)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK

    try:
        if args.command == "validate":
            report = experiments.cmd_validate()
        elif args.command == "table2":
            report = experiments.cmd_table_alarm_rates(args.samples, args.seed, args.taus)
        elif args.command == "theta":
            report = experiments.cmd_calibrate_theta(args.samples, args.seed, args.window, args.taus, args.p_plus)
            if args.histogram is not None:
                args.histogram.write_text(report.histograms_csv())
        elif args.command == "appendix":
            report = experiments.cmd_appendix_tables(args.samples, args.seed, args.window, args.taus, args.p_values)
        else:
            trace_path = args.trace or Path(f"{Path(args.config).stem}_trace.csv")
            _, report = experiments.cmd_scenario(args.config, trace_path)
    except ConfigError as exc:
        print(f"cusign: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"cusign: {exc}", file=sys.stderr)
        return EXIT_USAGE

    _emit(report, args)
    return EXIT_OK if report.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
