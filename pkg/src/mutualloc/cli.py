"""Command line entry point.

Exit codes: 0 success, 2 configuration error, 3 runtime or numerical
error, 4 replay mismatch.
"""
import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

from .config import ConfigError, parse_config
from .runlog import ReplayMismatch, fmt, replay, write_outputs

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_REPLAY = 0, 2, 3, 4

log = logging.getLogger("mutualloc")


def _run_one(cfg, out_dir):
    from .simulator import run_scenario

    write_outputs(run_scenario(cfg), out_dir)
    return out_dir


def cmd_run(args):
    cfg = parse_config(args.config)
    if args.no_gating:
        cfg = replace(cfg, enable_gating=False)
    if args.baseline:
        cfg = replace(cfg, enable_baseline=True)
    if args.timing:
        cfg = replace(cfg, record_timing=True)
    if args.trials < 1 or args.jobs < 1:
        raise ConfigError("--trials and --jobs must be >= 1")
    if args.trials == 1:
        _run_one(cfg, args.out)
        log.info("wrote %s", args.out)
        return EXIT_OK
    jobs = [(replace(cfg, seed=cfg.seed + i), os.path.join(args.out, "trial_%03d" % i))
            for i in range(args.trials)]
    if args.jobs == 1:
        for c, d in jobs:
            _run_one(c, d)
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            list(pool.map(_run_one, *zip(*jobs)))
    log.info("wrote %d trials under %s", args.trials, args.out)
    return EXIT_OK


def _parse_sizes(text):
    try:
        sizes = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"--robots must be a comma separated list of integers, got {text!r}")
    if not sizes or min(sizes) < 2:
        raise ConfigError("--robots needs team sizes >= 2")
    return sizes


def cmd_bench(args):
    from .bench import BENCH_COLUMNS, run_bench

    sizes = _parse_sizes(args.robots)
    if args.steps < 1:
        raise ConfigError("--steps must be >= 1")
    results = run_bench(sizes, steps=args.steps, seed=args.seed, cap=args.cap)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "bench.csv")
    lines = ["# schema: " + ",".join(BENCH_COLUMNS),
             "# median per-station update time in microseconds; speedup = "
             "t_without_us / t_with_us; skipped rows exceeded the hypothesis cap",
             ",".join(BENCH_COLUMNS)]
    lines += [",".join(fmt(int(v)) if isinstance(v, bool) else fmt(v) for v in r.row())
              for r in results]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    for r in results:
        log.info("N=%d speedup %.2f", r.n_robots, r.speedup)
    return EXIT_OK


def cmd_replay(args):
    checked = replay(args.runlog)
    log.info("replay ok: %s", ", ".join(checked))
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="mutualloc",
                                description="Anonymous mutual localization simulator.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate one scenario and export its data")
    r.add_argument("config")
    r.add_argument("--out", default="out")
    r.add_argument("--no-gating", action="store_true", help="admit every pair")
    r.add_argument("--baseline", action="store_true", help="also run dead reckoning")
    r.add_argument("--timing", action="store_true",
                   help="record wall-clock timings (outputs stop being reproducible)")
    r.add_argument("--trials", type=int, default=1, help="runs with seeds seed..seed+K-1")
    r.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bench", help="time the update with and without gating")
    b.add_argument("--robots", default="3,5,7")
    b.add_argument("--steps", type=int, default=20)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--cap", type=int, default=10 ** 6,
                   help="skip sizes whose ungated hypothesis count exceeds this")
    b.add_argument("--out", default="out")
    b.set_defaults(func=cmd_bench)

    rp = sub.add_parser("replay", help="verify a stored run log against its outputs")
    rp.add_argument("runlog")
    rp.set_defaults(func=cmd_replay)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ReplayMismatch as exc:
        print(f"replay mismatch: {exc}", file=sys.stderr)
        return EXIT_REPLAY
    except (OSError, ValueError, ArithmeticError, RuntimeError,
            __import__("numpy").linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
