"""Experiment harness: single runs, (variant x seed) matrices with summary
statistics, complaint censuses, and deterministic CSV emission.
"""

from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence

from .scenario import ScenarioConfig, VARIANTS
from .simulation import RunMetrics, Simulation, run_once
from .trace import TraceRecorder

ROW_FIELDS = [
    "variant",
    "seed",
    "false_alarm_rate",
    "detection_rate",
    "honest_on_path",
    "malicious_on_path",
    "flagged_honest",
    "flagged_malicious",
    "originated",
    "delivered",
    "dropped_congestion",
    "dropped_malicious",
    "lost_collision",
    "modify_detected",
    "dropped_noroute",
    "in_flight",
    "protocol_messages",
]


def run_scenario(config: ScenarioConfig, trace: Optional[TraceRecorder] = None) -> RunMetrics:
    """Execute one deterministic run and reduce it to metrics."""
    return run_once(config, trace=trace)


def metrics_row(m: RunMetrics) -> Dict[str, object]:
    return {
        "variant": m.variant,
        "seed": m.seed,
        "false_alarm_rate": repr(m.false_alarm_rate),
        "detection_rate": repr(m.detection_rate),
        "honest_on_path": len(m.honest_on_path),
        "malicious_on_path": len(m.malicious_on_path),
        "flagged_honest": len(m.flagged_honest()),
        "flagged_malicious": len(m.flagged_malicious()),
        "originated": m.originated,
        "delivered": m.delivered,
        "dropped_congestion": m.dropped_congestion,
        "dropped_malicious": m.dropped_malicious,
        "lost_collision": m.lost_collision,
        "modify_detected": m.modify_detected,
        "dropped_noroute": m.dropped_noroute,
        "in_flight": m.in_flight,
        "protocol_messages": m.protocol_messages,
    }


@dataclass
class MatrixResult:
    runs: List[RunMetrics]

    def by_variant(self) -> Dict[str, List[RunMetrics]]:
        out: Dict[str, List[RunMetrics]] = {}
        for m in self.runs:
            out.setdefault(m.variant, []).append(m)
        return out

    def mean(self, variant: str, attr: str) -> float:
        values = [getattr(m, attr) for m in self.runs if m.variant == variant]
        return statistics.fmean(values)

    def stdev(self, variant: str, attr: str) -> float:
        values = [getattr(m, attr) for m in self.runs if m.variant == variant]
        return statistics.pstdev(values) if len(values) > 1 else 0.0

    def to_csv(self) -> str:
        """Row per (variant, seed), then a summary block; RFC-4180 quoting."""
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=ROW_FIELDS, quoting=csv.QUOTE_MINIMAL)
        writer.writeheader()
        ordered = sorted(self.runs, key=lambda m: (m.variant, m.seed))
        for m in ordered:
            writer.writerow(metrics_row(m))
        summary = csv.writer(buf, quoting=csv.QUOTE_MINIMAL)
        summary.writerow([])
        summary.writerow(["summary", "variant", "metric", "mean", "stdev", "runs"])
        variants = sorted({m.variant for m in self.runs})
        for variant in variants:
            n = sum(1 for m in self.runs if m.variant == variant)
            for attr in ("false_alarm_rate", "detection_rate"):
                summary.writerow(
                    ["summary", variant, attr,
                     repr(self.mean(variant, attr)), repr(self.stdev(variant, attr)), n]
                )
        return buf.getvalue()


def run_matrix(
    base: ScenarioConfig,
    variants: Sequence[str],
    seeds: Sequence[int],
    progress=None,
) -> MatrixResult:
    """Run every (variant, seed) combination of the base scenario.

    Runs are independent; results are sorted before aggregation so the
    output does not depend on execution order.
    """
    if not seeds:
        raise ValueError("run_matrix needs at least one seed")
    for v in variants:
        if v not in VARIANTS:
            raise ValueError(f"unknown variant {v!r}; expected one of {VARIANTS}")
    runs: List[RunMetrics] = []
    for variant in variants:
        for seed in seeds:
            config = base.replace(detector_variant=variant, seed=seed)
            runs.append(run_scenario(config))
            if progress is not None:
                progress(variant, seed, runs[-1])
    runs.sort(key=lambda m: (m.variant, m.seed))
    return MatrixResult(runs)


def complaint_census(metrics: RunMetrics) -> List[Dict[str, object]]:
    """Per-node complaint table, ordered by complaint count descending
    (ties by node id). A complaint is one distinct node holding the subject
    suspected or malicious."""
    adversaries = set(metrics.adversaries)
    rows = []
    for node in range(metrics.node_count):
        rows.append(
            {
                "node": node,
                "is_malicious": node in adversaries,
                "complaints": metrics.complaints.get(node, 0),
            }
        )
    rows.sort(key=lambda r: (-r["complaints"], r["node"]))
    return rows


def census_csv(rows: List[Dict[str, object]]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["node", "is_malicious", "complaints"])
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()
