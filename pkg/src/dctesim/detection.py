"""Elephant detection oracle with tunable imperfection.

Classifies flows against the ground-truth size threshold, then degrades the
answer: each true elephant is missed with probability ``fn_rate``, each mouse
is spuriously reported with probability ``fp_rate``, and every report is
delivered ``delay_s`` after the flow starts.

One uniform draw per flow (keyed by flow id under a fixed seed) drives both
error kinds, so for a fixed seed the reported sets are nested across rates:
raising fn_rate only removes reports, raising fp_rate only adds them.  Sweeps
over the rates therefore vary detection quality without resampling which
flows are affected.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from .traffic import DEFAULT_ELEPHANT_THRESHOLD_BYTES, Trace

REPORT_HEADER = "flow_id,report_time_s"


@dataclass(frozen=True)
class DetectorConfig:
    fn_rate: float = 0.0
    fp_rate: float = 0.0
    delay_s: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.fn_rate <= 1.0:
            raise ValueError(f"fn_rate {self.fn_rate} outside [0, 1]")
        if not 0.0 <= self.fp_rate <= 1.0:
            raise ValueError(f"fp_rate {self.fp_rate} outside [0, 1]")
        if self.delay_s < 0.0:
            raise ValueError("delay_s must be non-negative")


@dataclass(frozen=True)
class ElephantReport:
    """One detector report.  Controllers may read the flow identity, the
    endpoints (which name the rack pair), and when the report arrives;
    ``is_true_elephant`` is ground-truth annotation for analysis only and
    must never influence a controller's decision."""

    flow_id: int
    report_time: float
    src_host: int
    dst_host: int
    is_true_elephant: bool


def make_reports(trace: Trace, config: DetectorConfig,
                 threshold_bytes: int = DEFAULT_ELEPHANT_THRESHOLD_BYTES,
                 ) -> list[ElephantReport]:
    """Reports sorted by delivery time.  Deterministic per (trace, config)."""
    if threshold_bytes < 1:
        raise ValueError("threshold_bytes must be positive")
    flows = sorted(trace.flows, key=lambda f: f.flow_id)
    draws = np.random.default_rng(config.seed).random(len(flows))
    reports = []
    for f, u in zip(flows, draws):
        elephant = f.size_bytes > threshold_bytes
        if elephant:
            reported = u >= config.fn_rate  # missed with probability fn_rate
        else:
            reported = u < config.fp_rate  # false alarm with prob fp_rate
        if reported:
            reports.append(ElephantReport(f.flow_id,
                                          f.start_time + config.delay_s,
                                          f.src_host, f.dst_host, elephant))
    reports.sort(key=lambda r: (r.report_time, r.flow_id))
    return reports


def save_reports(reports: Sequence[ElephantReport], fp: IO[str]) -> None:
    fp.write(REPORT_HEADER + "\n")
    for r in reports:
        fp.write(f"{r.flow_id},{r.report_time:.6f}\n")


def load_reports(fp: IO[str], trace: Trace,
                 threshold_bytes: int = DEFAULT_ELEPHANT_THRESHOLD_BYTES,
                 ) -> list[ElephantReport]:
    """Endpoints and ground truth are not serialized; both are re-joined
    from the trace so replayed reports behave identically."""
    by_id = {f.flow_id: f for f in trace.flows}
    reader = csv.reader(fp)
    header = next(reader, None)
    if header is None or [c.strip() for c in header] != REPORT_HEADER.split(","):
        raise ValueError(f"bad report header: {header!r}")
    reports = []
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 2:
            raise ValueError(f"line {line_no}: expected 2 fields, got {len(row)}")
        fid = int(row[0])
        spec = by_id.get(fid)
        if spec is None:
            raise ValueError(f"line {line_no}: flow {fid} not in trace")
        reports.append(ElephantReport(fid, float(row[1]), spec.src_host,
                                      spec.dst_host,
                                      spec.size_bytes > threshold_bytes))
    reports.sort(key=lambda r: (r.report_time, r.flow_id))
    return reports
