"""Command-line front door: ``trustmarket <subcommand> ...``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from trustmarket import trust
from trustmarket.broker import TrustLedger
from trustmarket.calc import emit_surface_grid, trust_calc
from trustmarket.errors import TrustMarketError
from trustmarket.harness import load_script, read_metrics, run_scenario, timing_report


def _cmd_trust_calc(args: argparse.Namespace) -> int:
    result = trust_calc(args.r, args.s, args.N, args.w, args.f, args.scale, args.force_t, args.force_c)
    sys.stdout.write(result.format())
    return 0


def _cmd_run_scenario(args: argparse.Namespace) -> int:
    script = load_script(args.file, seed=args.seed)
    if args.seed is not None:
        script = type(script)(args.seed, script.steps)
    result = run_scenario(script, args.out, ack_timeout=args.ack_timeout)
    print(f"{len(result.events)} events, {len(result.metrics)} transactions -> {args.out}")
    sys.stdout.write(result.listing.to_tsv())
    return 0


def _cmd_surface(args: argparse.Namespace) -> int:
    text = emit_surface_grid(args.resolution).to_tsv()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_list(args: argparse.Namespace) -> int:
    ledger = TrustLedger.from_snapshot(Path(args.snapshot) / "broker")
    sys.stdout.write(ledger.list_companies().to_tsv())
    return 0


def _cmd_timing(args: argparse.Namespace) -> int:
    sys.stdout.write(timing_report(read_metrics(Path(args.snapshot) / "metrics.tsv")))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trustmarket", description="Certain-trust broker marketplace simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("trust-calc", help="compute t, c, E, t', T and P from evidence counts")
    p.add_argument("--r", type=int, default=0, help="positive evidence count")
    p.add_argument("--s", type=int, default=0, help="negative evidence count")
    p.add_argument("--N", type=int, default=trust.DEFAULT_N, help="maximum evidence (default %(default)s)")
    p.add_argument("--w", type=float, default=trust.DEFAULT_W, help="dispositional trust (default %(default)s)")
    p.add_argument("--f", type=float, default=trust.DEFAULT_F, help="initial expectation (default %(default)s)")
    p.add_argument("--scale", type=float, default=trust.DEFAULT_SCALE_MAX, help="rating scale top (default %(default)s)")
    p.add_argument("--force-t", type=float, default=None, help="TEST AFFORDANCE: override the average rating")
    p.add_argument("--force-c", type=float, default=None, help="TEST AFFORDANCE: override the certainty")
    p.set_defaults(func=_cmd_trust_calc)

    p = sub.add_parser("run-scenario", help="run a scenario file (or bundled scenario name)")
    p.add_argument("file")
    p.add_argument("--seed", type=int, default=None, help="overrides the script's seed line")
    p.add_argument("--out", required=True, help="output directory for logs and stores")
    p.add_argument("--ack-timeout", type=int, default=10, help="company acknowledgment timeout in logical time units")
    p.set_defaults(func=_cmd_run_scenario)

    p = sub.add_parser("surface", help="emit the (t, c) -> T grid as tab-separated text")
    p.add_argument("--resolution", type=int, default=11)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_surface)

    p = sub.add_parser("list", help="rebuild the broker listing from a run's evidence log")
    p.add_argument("--snapshot", required=True)
    p.set_defaults(func=_cmd_list)

    p = sub.add_parser("timing", help="per-transaction timing table from a run")
    p.add_argument("--snapshot", required=True)
    p.set_defaults(func=_cmd_timing)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (TrustMarketError, ValueError, FileNotFoundError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
