"""Command-line entry point: ``slicetel run|frontier|micro``."""

from __future__ import annotations

import argparse
import logging
import sys

from slicetel import __version__
from slicetel.errors import ConfigError


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="slicetel", description="Slice-aware change-triggered telemetry experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="verb", required=True)

    r = sub.add_parser("run", help="execute every run of an experiment spec")
    r.add_argument("spec", help="experiment spec (YAML)")
    r.add_argument("--out", help="output directory (default: the spec's output)")
    r.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")
    r.add_argument("--seed", type=int, default=None, help="override the spec's seed list with one seed")
    r.add_argument("--no-plots", action="store_true", help="skip figures")

    f = sub.add_parser("frontier", help="Pareto frontier per scheme from results CSVs")
    f.add_argument("results", help="glob of results CSVs, e.g. 'out/runs/*/results.csv'")
    f.add_argument("--out", default="frontier.csv", help="frontier CSV path")
    f.add_argument("--by", default="all", help="violation coordinate: all, URLLC, eMBB or mMTC")
    f.add_argument("--no-plots", action="store_true")

    m = sub.add_parser("micro", help="microbenchmarks")
    m.add_argument("kind", choices=["tau", "buckets", "solver-scaling"])
    m.add_argument("--out", default="micro", help="output directory")
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--slices", type=int, default=None, help="tau: workload size")
    m.add_argument("--duration", type=float, default=None, help="tau: simulated seconds")
    m.add_argument("--keys", type=int, default=None, help="buckets: distinct keys")
    m.add_argument("--hash-seeds", type=int, default=None, help="buckets: number of hash seeds")
    m.add_argument("--no-plots", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    from slicetel import experiments

    try:
        if args.verb == "run":
            failed = experiments.cmd_run(args.spec, args.out, jobs=args.jobs, seed=args.seed, plots=not args.no_plots)
            return 1 if failed else 0
        if args.verb == "frontier":
            front = experiments.cmd_frontier(args.results, args.out, by=args.by, plots=not args.no_plots)
            print(f"{len(front)} frontier point(s) written to {args.out}")
            return 0
        kw = {}
        if args.kind == "tau":
            if args.slices:
                kw["n_slices"] = args.slices
            if args.duration:
                kw["duration_s"] = args.duration
        elif args.kind == "buckets":
            if args.keys:
                kw["n_keys"] = args.keys
            if args.hash_seeds:
                kw["hash_seeds"] = tuple(range(args.hash_seeds))
        path = experiments.cmd_micro(args.kind, args.out, seed=args.seed, plots=not args.no_plots, **kw)
        print(f"wrote {path}")
        return 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
