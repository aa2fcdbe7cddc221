"""Command-line driver.

Subcommands: sweep, verify, bench, entropy, aposteriori.
Global flags: --config PATH, --seed U64, --out PATH, --threads INT.
Exit codes: 0 success, 1 validation/config error, 2 verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from cgmc.errors import CgmcError
from cgmc.config import ExperimentConfig, parse_config_file
from cgmc.harness import (
    VERIFY_SUITES,
    run_aposteriori,
    run_bench,
    run_entropy_grid,
    run_sweep,
    run_verify,
    write_entropy_csv,
    write_sweep_csv,
)


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cgmc",
                                description="coarse-grained Monte Carlo driver")
    p.add_argument("--config", help="experiment config file")
    p.add_argument("--seed", type=int, help="override the chain seed")
    p.add_argument("--out", help="output path (CSV or JSON)")
    p.add_argument("--threads", type=int, default=1,
                   help="concurrent (scheme, branch) tasks in sweeps")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("sweep", help="isotherm continuation sweep to CSV")
    pv = sub.add_parser("verify", help="run a verification suite")
    pv.add_argument("--suite", required=True, choices=sorted(VERIFY_SUITES))
    sub.add_parser("bench", help="operation-count benchmark")
    sub.add_parser("entropy", help="exact entropy-scaling grid to CSV")
    sub.add_parser("aposteriori", help="a posteriori error estimate of cg0")
    return p


def _load_config(args) -> ExperimentConfig:
    cfg = parse_config_file(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _emit(payload: dict, out: str | None):
    text = json.dumps(payload, indent=2, default=float)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "sweep":
            cfg = _load_config(args)
            records = run_sweep(cfg, threads=max(1, args.threads))
            out = args.out or "sweep.csv"
            write_sweep_csv(records, out)
            print(f"wrote {len(records)} records to {out}")
            return 0
        if args.command == "verify":
            report = run_verify(args.suite)
            _emit(report, args.out)
            if not report["passed"]:
                return 2
            return 0
        if args.command == "bench":
            cfg = _load_config(args)
            _emit(run_bench(cfg), args.out)
            return 0
        if args.command == "entropy":
            cfg = _load_config(args)
            report = run_entropy_grid(cfg)
            out = args.out or "entropy.csv"
            write_entropy_csv(report, out)
            print(json.dumps(report["fits"], indent=2))
            print(f"wrote {len(report['rows'])} rows to {out}")
            return 0
        if args.command == "aposteriori":
            cfg = _load_config(args)
            _emit(run_aposteriori(cfg), args.out)
            return 0
    except CgmcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
