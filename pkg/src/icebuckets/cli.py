"""Command-line entry point: ``icebuckets <command> [options]``.

Commands write CSV to stdout (bench also writes files under ``--out``).
Exit codes: 0 success, 2 usage, 3 bad input data, 4 capacity exceeded.
The default seed comes from the ICEBUCKETS_SEED environment variable.
"""

import argparse
import csv
import os
import sys

from .bench import SCHEMES, RunSpec, run_bench, write_results
from .buckets import choose_parameters, global_upscale_table, ice_overall_error_bound
from .errors import (
    CapacityError, ConfigError, DomainError, PolicyError, TraceParseError, UndefinedMetricError,
)
from .scale import bits_required, epsilon_for_capacity, upscale_error_lp
from .traces import FORMATS, FLOW_PER_LINE, load_trace, shuffle_ids, write_trace, zipf_trace

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_CAPACITY = 4

SEED_ENV = "ICEBUCKETS_SEED"


class UsageError(Exception):
    pass


def default_seed():
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        seed = int(raw, 0)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={raw!r} is not an integer") from None
    if seed < 0:
        raise UsageError(f"{SEED_ENV} must be non-negative")
    return seed


def _out():
    return csv.writer(sys.stdout, lineterminator="\n")


def cmd_bounds(args):
    w = _out()
    w.writerow(["quantity", "value"])
    if args.T_bits_per_counter is not None:
        if args.N is None or args.M is None:
            raise UsageError("--T-bits-per-counter needs --N and --M")
        T = int(round(args.T_bits_per_counter * args.N))
        cfg = choose_parameters(T, args.N, args.M)
        rows = [("T", T), ("N", args.N), ("M", args.M), ("L", cfg.L), ("E", cfg.E),
                ("log2_E", cfg.scale_bits), ("B", cfg.B), ("S", cfg.S),
                ("eps_step", cfg.eps_step), ("eps_M", epsilon_for_capacity(args.M, cfg.L)),
                ("ice_bound", cfg.predicted_bound)]
    else:
        if args.M is None or args.L is None:
            raise UsageError("bounds needs --M and --L, or --T-bits-per-counter --N --M")
        eps = epsilon_for_capacity(args.M, args.L)
        rows = [("M", args.M), ("L", args.L), ("eps_M", eps)]
        B = args.B
        if B is None and args.S is not None:
            if args.N is None:
                raise UsageError("--S needs --N to derive the bucket count")
            B = -(-args.N // args.S)
        if args.E is not None:
            if B is None:
                raise UsageError("--E needs --B (or --N and --S)")
            rows += [("E", args.E), ("B", B), ("ice_bound", ice_overall_error_bound(args.M, B, args.L, args.E))]
        elif B is not None:
            raise UsageError("--B needs --E")
    if args.epsilon is not None:
        bb = bits_required(args.M, args.epsilon)
        rows += [("epsilon", args.epsilon), ("exact_L", bb.exact_L), ("bits", bb.bits),
                 ("bits_lower", bb.lower_bits), ("bits_upper", bb.upper_bits)]
    for name, value in rows:
        w.writerow([name, repr(value) if isinstance(value, float) else value])
    return EXIT_OK


def cmd_upscale_table(args):
    w = _out()
    w.writerow(["old_w", "old_eps", "new_w", "new_eps", "upscale"])
    for old_w, old_eps, new_w, new_eps, odd in global_upscale_table(args.E, args.eps_step):
        w.writerow(["" if old_w is None else old_w,
                    "" if old_eps is None else repr(old_eps),
                    new_w, repr(new_eps),
                    "" if odd is None else int(odd)])
    return EXIT_OK


def cmd_lp_check(args):
    w = _out()
    w.writerow(["eps", "eps_to", "L", "objective", "ratio"])
    for L in args.L:
        for eps in args.eps:
            eps_to = args.ratio * eps
            obj = upscale_error_lp(eps, eps_to, L)
            w.writerow([repr(eps), repr(eps_to), L, repr(obj), repr(obj / eps_to ** 2)])
    return EXIT_OK


def _trace_from_args(args, seed):
    if args.trace is not None:
        trace = load_trace(args.trace, args.format)
    else:
        trace = zipf_trace(args.flows, args.packets, args.skew, seed)
    if args.shuffle_ids:
        trace = shuffle_ids(trace, seed)
    return trace


def cmd_synth(args):
    seed = args.seed if args.seed is not None else default_seed()
    trace = zipf_trace(args.flows, args.packets, args.skew, seed)
    if args.shuffle_ids:
        trace = shuffle_ids(trace, seed)
    write_trace(trace, args.out, args.format)
    return EXIT_OK


def cmd_bench(args):
    seed = args.seed if args.seed is not None else default_seed()
    trace = _trace_from_args(args, seed)
    results = []
    for scheme in args.scheme or ["ice"]:
        spec = RunSpec(scheme, bits_per_symbol=args.bits, overhead_bits_per_counter=args.overhead,
                       E=args.E, S=args.S, M=args.M, seed=seed, runs=args.runs,
                       checkpoints=args.checkpoints)
        results.append(run_bench(spec, trace, workers=args.workers))
    if args.out:
        write_results(results, args.out)
    _print_overall(results)
    return EXIT_OK


def _print_overall(results):
    w = _out()
    w.writerow(["scheme", "bits", "overall", "bound"])
    for res in results:
        w.writerow([res.spec.scheme, res.spec.bits_per_symbol,
                    repr(res.report.overall), repr(res.bound)])


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _add_zipf_args(p):
    p.add_argument("--flows", type=_positive_int, default=100_000, help="number of flows (default 100000)")
    p.add_argument("--packets", type=_positive_int, default=1_000_000, help="number of packets (default 1000000)")
    p.add_argument("--skew", type=float, default=1.0, help="Zipf skew (default 1.0)")
    p.add_argument("--shuffle-ids", action="store_true",
                   help="relabel flows randomly so heavy flows are spread over buckets")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="icebuckets",
        description="Approximate counter arrays: bounds, upscale tables and error benchmarks.",
        epilog=f"Exit codes: 0 ok, 2 usage, 3 bad data, 4 capacity exceeded. "
               f"{SEED_ENV} sets the default seed.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", help="error and memory bounds for a configuration")
    p.add_argument("--M", type=float, help="counting capacity (largest count)")
    p.add_argument("--L", type=int, help="symbols per counter (power of two)")
    p.add_argument("--E", type=int, help="number of scales per bucket")
    p.add_argument("--B", type=int, help="number of buckets")
    p.add_argument("--S", type=int, help="counters per bucket (with --N, instead of --B)")
    p.add_argument("--N", type=int, help="number of counters")
    p.add_argument("--T-bits-per-counter", dest="T_bits_per_counter", type=float,
                   help="memory budget per counter; picks L, E, B automatically")
    p.add_argument("--epsilon", type=float, help="also report bits needed for this error at M")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("upscale-table", help="how a global upscale remaps scale indices")
    p.add_argument("--E", type=int, required=True, help="number of scales (power of two)")
    p.add_argument("--eps-step", type=float, required=True, help="current epsilon step")
    p.set_defaults(func=cmd_upscale_table)

    p = sub.add_parser("lp-check", help="upscale-error LP objective over a grid")
    p.add_argument("--eps", type=float, nargs="+", default=[1e-3, 1e-2, 1e-1],
                   help="source epsilons (default 0.001 0.01 0.1)")
    p.add_argument("--L", type=int, nargs="+", default=[256, 4096], help="symbol counts (default 256 4096)")
    p.add_argument("--ratio", type=float, default=2.0, help="eps_to / eps (default 2)")
    p.set_defaults(func=cmd_lp_check)

    p = sub.add_parser("bench", help="seeded error measurement over a trace")
    p.add_argument("--scheme", action="append", choices=SCHEMES,
                   help="scheme to run; repeat for several (default ice)")
    p.add_argument("--trace", help="trace file; a Zipf trace is generated when omitted")
    p.add_argument("--format", choices=FORMATS, default=FLOW_PER_LINE, help="trace file format")
    _add_zipf_args(p)
    p.add_argument("--bits", type=int, default=8, help="bits per symbol (default 8)")
    p.add_argument("--overhead", type=float, default=0.5,
                   help="scale-index bits per counter for automatic ICE config (default 0.5)")
    p.add_argument("--E", type=int, help="ICE scales per bucket (with --S)")
    p.add_argument("--S", type=int, help="ICE counters per bucket (with --E)")
    p.add_argument("--M", type=float, help="capacity to provision (default: trace packets)")
    p.add_argument("--runs", type=_positive_int, default=1, help="independent trials (default 1)")
    p.add_argument("--checkpoints", type=_positive_int, default=20, help="progress points (default 20)")
    p.add_argument("--seed", type=int, help=f"base seed (default ${SEED_ENV} or 0)")
    p.add_argument("--workers", type=_positive_int, default=1, help="worker processes (default 1)")
    p.add_argument("--out", help="directory for overall.csv and per-scheme CSVs")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", help="write a synthetic Zipf trace")
    _add_zipf_args(p)
    p.add_argument("--seed", type=int, help=f"seed (default ${SEED_ENV} or 0)")
    p.add_argument("--format", choices=FORMATS, default=FLOW_PER_LINE, help="output format")
    p.add_argument("--out", required=True, help="output path (.gz to compress)")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, ConfigError, DomainError, PolicyError) as exc:
        print(f"icebuckets: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TraceParseError, UndefinedMetricError, OSError) as exc:
        print(f"icebuckets: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except CapacityError as exc:
        print(f"icebuckets: capacity exceeded: {exc}", file=sys.stderr)
        return EXIT_CAPACITY


if __name__ == "__main__":
    sys.exit(main())
