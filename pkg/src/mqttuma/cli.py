"""Command-line entry point.

Exit codes: 0 success, 2 bad arguments or config, 3 unstable queue
(lambda >= mu), 4 simulation outside tolerance.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from . import hybrid
from .core import PhaseKind
from .queueing import (
    DEFAULT_INTER_ARRIVAL,
    DEFAULT_MU,
    DEFAULT_POINTS,
    UnstableQueue,
    sweep,
    write_csv,
)
from .sim import DEFAULT_SEED, SIM_CSV_COLUMNS, SimConfig, csv_row, validate_against_analytic
from .timing import (
    PHASE_ORDER,
    ConfigError,
    TimingConfig,
    cost_transcript,
    phase_latency,
    publish_overhead_ratio,
)

EXIT_OK, EXIT_USAGE, EXIT_UNSTABLE, EXIT_FAILED = 0, 2, 3, 4


class UsageError(Exception):
    pass


def rate(text: str) -> float:
    """Parse a rate given as a decimal or a fraction such as ``1/587``."""
    try:
        value = float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rate: {text!r}") from None
    if value <= 0:
        raise argparse.ArgumentTypeError(f"rate must be positive: {text!r}")
    return value


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load_config(path: Optional[str]) -> TimingConfig:
    if path is None:
        return TimingConfig()
    try:
        return TimingConfig.load(path)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    except ConfigError as exc:
        raise UsageError(f"bad config {path}: {exc}") from None


def cmd_phases(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    rows = [phase_latency(p, config) for p in PHASE_ORDER]
    for b in rows:
        terms = " + ".join(f"{n}x{t.value}" for t, n in b.counts.items())
        print(f"{b.phase.value:<24} {b.total:>6} ms   {terms}")
    ratio = publish_overhead_ratio(config)
    for name, value in ratio.ratios.items():
        print(f"ratio {name:<30} {value:.4f}")
    if args.out:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["phase", "term", "count", "ms"])
        for b in rows:
            for t, n in b.counts.items():
                w.writerow([b.phase.value, t.value, n, b.contributions[t]])
            w.writerow([b.phase.value, "total", "", b.total])
        Path(args.out).write_text(buf.getvalue())
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    lo, hi = args.inter_arrival_min, args.inter_arrival_max
    if hi < lo or args.points < 1:
        raise UsageError(f"bad range: min={lo} max={hi} points={args.points}")
    rows = sweep(args.mu, (lo, hi), args.points)
    _emit(write_csv(rows), args.out)
    print(f"{len(rows)} rows", file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        config = SimConfig(args.lam, args.mu, args.arrivals, args.warmup, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    report = validate_against_analytic(config, args.tolerance)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SIM_CSV_COLUMNS)
    w.writerow(csv_row(config, report.result))
    _emit(buf.getvalue(), args.out)
    log = sys.stdout if args.out else sys.stderr
    for c in report.checks:
        print(f"{c.name:<5} sim={c.simulated:.6g} analytic={c.analytic:.6g} "
              f"rel_err={c.rel_error:.4f} {'PASS' if c.passed else 'FAIL'}", file=log)
    print("PASS" if report.passed else "FAIL", file=log)
    return EXIT_OK if report.passed else EXIT_FAILED


def trace_phase(phase: PhaseKind, resource: str = "temp/room1") -> str:
    """JSON lines for ``phase`` plus a footer with both latency modes."""
    system = hybrid.prepare_for(phase, resource=resource)
    other = system.clone()
    coef = system.run_flow(phase, resource=resource, mode=hybrid.COEFFICIENT)
    derived = other.run_flow(phase, resource=resource, mode=hybrid.TRANSCRIPT)
    footer = {
        "footer": True,
        "phase": phase.value,
        "messages": len(coef),
        "coefficient_latency_ms": cost_transcript(coef).total,
        "transcript_latency_ms": cost_transcript(derived).total,
    }
    return coef.to_jsonl() + json.dumps(footer) + "\n"


def cmd_trace(args: argparse.Namespace) -> int:
    try:
        phase = PhaseKind.parse(args.phase)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _emit(trace_phase(phase, args.resource), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mqttuma", description="MQTT/UMA hybrid model: latencies, queueing, traces"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phases", help="phase latencies from the timing table")
    p.add_argument("--config", help="timing config JSON")
    p.add_argument("--out", help="write per-term breakdown CSV here")
    p.set_defaults(func=cmd_phases)

    p = sub.add_parser("sweep", help="M/M/1 metrics over mean inter-arrival times")
    p.add_argument("--mu", type=rate, default=DEFAULT_MU, help="service rate per ms (default 1/587)")
    p.add_argument("--inter-arrival-min", type=float, default=DEFAULT_INTER_ARRIVAL[0])
    p.add_argument("--inter-arrival-max", type=float, default=DEFAULT_INTER_ARRIVAL[1])
    p.add_argument("--points", type=int, default=DEFAULT_POINTS)
    p.add_argument("--out", help="CSV path (stdout if omitted)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="discrete-event M/M/1 run checked against the formulas")
    p.add_argument("--lambda", dest="lam", type=rate, default=rate("1/640"))
    p.add_argument("--mu", type=rate, default=DEFAULT_MU)
    p.add_argument("--arrivals", type=int, default=1_000_000)
    p.add_argument("--warmup", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--tolerance", type=float, default=0.05)
    p.add_argument("--out", help="CSV path (stdout if omitted)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("trace", help="JSON-lines transcript of one phase")
    p.add_argument("phase", help="|".join(ph.value for ph in PhaseKind))
    p.add_argument("--resource", default="temp/room1")
    p.add_argument("--out", help="output path (stdout if omitted)")
    p.set_defaults(func=cmd_trace)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except UnstableQueue as exc:
        print(f"error: unstable queue: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE


if __name__ == "__main__":
    sys.exit(main())
