"""Formatting and persistence of metric reports."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path


@dataclass
class MetricReport:
    task: str
    split: str
    metrics: dict[str, float]
    count: int = 0
    extra: dict = field(default_factory=dict)


def format_report(report: MetricReport) -> str:
    """Stable text block: alphabetical metric order, six decimal places."""
    width = max((len(name) for name in report.metrics), default=0)
    lines = [f"[{report.task}] split={report.split} instances={report.count}"]
    for name in sorted(report.metrics):
        lines.append(f"  {name:<{width}}  {report.metrics[name]:.6f}")
    return "\n".join(lines) + "\n"


def write_report(report: MetricReport, jsonl_path: str | Path, timestamp: float | None = None) -> dict:
    """Append one machine-readable record to the run's metrics.jsonl."""
    record = {
        "split": report.split,
        "task": report.task,
        "metrics": {k: report.metrics[k] for k in sorted(report.metrics)},
        "count": report.count,
        "timestamp": time.time() if timestamp is None else timestamp,
    }
    path = Path(jsonl_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")
    return record


def report_from_record(record: dict) -> MetricReport:
    """Inverse of write_report for the fields a MetricReport carries."""
    return MetricReport(
        task=record["task"],
        split=record["split"],
        metrics=dict(record["metrics"]),
        count=record["count"],
    )
