"""Command-line experiment harness.

Subcommands:
  run     one scenario; prints a summary and writes metrics.csv
  matrix  variants x seeds over a base scenario; writes matrix.csv
  census  per-node complaint table for one run; writes census.csv
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import List, Optional

from .experiment import (
    MatrixResult,
    census_csv,
    complaint_census,
    metrics_row,
    run_matrix,
    run_scenario,
)
from .scenario import PRESETS, VARIANTS, ScenarioConfig
from .simulation import ConfigError
from .trace import TraceRecorder


def _load_config(args) -> ScenarioConfig:
    if args.config:
        config = ScenarioConfig.load(args.config)
    elif args.preset:
        config = PRESETS[args.preset]()
    else:
        raise SystemExit("need --config FILE or --preset NAME")
    if getattr(args, "variant", None):
        config = config.replace(detector_variant=args.variant)
    if getattr(args, "seed", None) is not None:
        config = config.replace(seed=args.seed)
    return config


def _parse_seeds(spec: str) -> List[int]:
    """Seed lists as '1,2,5' or ranges as '1-20' (inclusive), combinable."""
    seeds: List[int] = []
    for part in spec.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        elif part:
            seeds.append(int(part))
    return seeds


def _write(path: str, text: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _cmd_run(args) -> int:
    config = _load_config(args)
    trace = TraceRecorder(path=args.trace) if args.trace else None
    metrics = run_scenario(config, trace=trace)
    if trace:
        trace.close()
    row = metrics_row(metrics)
    for key, value in row.items():
        print(f"{key}: {value}")
    print(f"flagged: {metrics.flagged}")
    print(f"condemned: {metrics.condemned}")
    if args.out:
        result = MatrixResult([metrics])
        _write(os.path.join(args.out, "metrics.csv"), result.to_csv())
        print(f"wrote {os.path.join(args.out, 'metrics.csv')}")
    return 0


def _cmd_matrix(args) -> int:
    config = _load_config(args)
    seeds = _parse_seeds(args.seeds)
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    progress = None
    if not args.quiet:
        def progress(variant, seed, m):
            print(
                f"[{variant} seed={seed}] false_alarm={m.false_alarm_rate:.3f} "
                f"detection={m.detection_rate:.3f}",
                file=sys.stderr,
            )
    result = run_matrix(config, variants, seeds, progress=progress)
    csv_text = result.to_csv()
    out = os.path.join(args.out, "matrix.csv")
    _write(out, csv_text)
    print(f"wrote {out}")
    for variant in sorted(set(variants)):
        print(
            f"{variant}: mean false_alarm={result.mean(variant, 'false_alarm_rate'):.4f} "
            f"mean detection={result.mean(variant, 'detection_rate'):.4f}"
        )
    return 0


def _cmd_census(args) -> int:
    config = _load_config(args)
    metrics = run_scenario(config)
    rows = complaint_census(metrics)
    text = census_csv(rows)
    if args.out:
        out = os.path.join(args.out, "census.csv")
        _write(out, text)
        print(f"wrote {out}")
    print(f"{'node':>5} {'malicious':>9} {'complaints':>10}")
    for row in rows:
        mark = "yes" if row["is_malicious"] else ""
        print(f"{row['node']:>5} {mark:>9} {row['complaints']:>10}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="manetguard",
        description="Cooperative packet-drop detection experiments on a deterministic MANET simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_variant=True):
        p.add_argument("--config", help="scenario config file (JSON)")
        p.add_argument("--preset", choices=sorted(PRESETS), help="built-in scenario preset")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        if with_variant:
            p.add_argument("--variant", choices=VARIANTS, default=None,
                           help="override the detector variant")

    p_run = sub.add_parser("run", help="run one scenario")
    common(p_run)
    p_run.add_argument("--out", help="output directory for metrics.csv")
    p_run.add_argument("--trace", help="write a line-delimited event trace to this file")
    p_run.set_defaults(fn=_cmd_run)

    p_matrix = sub.add_parser("matrix", help="run variants x seeds")
    common(p_matrix, with_variant=False)
    p_matrix.add_argument("--variants", default=",".join(VARIANTS),
                          help="comma-separated variant list")
    p_matrix.add_argument("--seeds", required=True, help="e.g. '1-20' or '1,2,7'")
    p_matrix.add_argument("--out", default="out", help="output directory")
    p_matrix.add_argument("--quiet", action="store_true")
    p_matrix.set_defaults(fn=_cmd_matrix)

    p_census = sub.add_parser("census", help="per-node complaint table")
    common(p_census)
    p_census.add_argument("--out", help="output directory for census.csv")
    p_census.set_defaults(fn=_cmd_census)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
