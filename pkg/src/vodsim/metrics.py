"""Run metrics and their JSON/CSV serialization.

Reports are fully determined by (config, seed): no wall-clock timestamps
appear in data, only in CSV comment lines.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields


@dataclass(frozen=True)
class MetricsReport:
    policy: str
    seed: int
    duration_s: float
    warmup_s: float
    rounds_measured: int
    offered: int
    admitted: int
    admitted_disk: int
    admitted_interval: int
    admitted_batch_open: int
    admitted_batch_join: int
    rejected: int
    rejected_disk_bound: int
    rejected_network_bound: int
    pending_at_end: int
    videos_streamed: int
    terminated_early: int
    disk_busy_s: float
    disk_utilization: float
    streams_per_disk_busy_s: float
    cache_hits: int
    cache_misses: int
    cache_hit_ratio: float
    violations: int
    cache_bw_violations: int
    deadline_misses: int
    interval_breaks: int
    batches_formed: int
    mean_batch_size: float
    mean_startup_delay_s: float
    concurrent_clients_mean: float
    cache_clients_mean: float
    littles_lambda_per_s: float
    littles_residence_s: float
    littles_predicted_clients: float
    littles_measured_clients: float
    blocks_fetched: int
    prefix_blocks_loaded: int

    def to_dict(self) -> dict:
        return asdict(self)


FIELD_NAMES = [f.name for f in fields(MetricsReport)]


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return format(value, ".6g")
    return str(value)


def report_to_json(report: MetricsReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True)


def reports_to_json(reports: list[MetricsReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True)


def reports_to_csv(reports: list[MetricsReport], comment: str | None = None) -> str:
    """One row per report, 6 significant figures for floats.

    Only the optional comment line may carry a timestamp; data rows are
    reproducible byte for byte.
    """
    lines = []
    if comment:
        lines.append(f"# {comment}")
    lines.append(",".join(FIELD_NAMES))
    for r in reports:
        d = r.to_dict()
        lines.append(",".join(_fmt(d[name]) for name in FIELD_NAMES))
    return "\n".join(lines) + "\n"
