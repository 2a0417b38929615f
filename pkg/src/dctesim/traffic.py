"""Synthetic flow traces: heavy-tailed sizes, Poisson arrivals, file I/O.

Flow sizes come from a two-component mixture: a uniform small-flow component
on [64 B, small_cutoff] and a truncated-Pareto tail whose shape is solved
numerically so the overall mean matches the target.  Arrivals are per-host
Poisson processes with uniformly random remote destinations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import IO, Iterable

import numpy as np
from scipy.optimize import brentq

from .topology import Topology

TRACE_HEADER = "# dctesim-trace v1"
MIN_FLOW_BYTES = 64
TAIL_CAP_BYTES = 1_000_000_000  # 1 GB truncation of the Pareto tail
DEFAULT_ELEPHANT_THRESHOLD_BYTES = 10_000_000  # strictly greater => elephant


@dataclass(frozen=True)
class FlowSpec:
    flow_id: int
    start_time: float  # seconds, microsecond-quantized
    src_host: int
    dst_host: int
    size_bytes: int


@dataclass(frozen=True)
class Trace:
    """Flows sorted by (start_time, flow_id) plus the nominal duration.

    ``resorted`` flags that a loaded file was out of order and had to be
    re-sorted; it does not participate in equality.
    """

    flows: tuple[FlowSpec, ...]
    duration: float
    resorted: bool = field(default=False, compare=False)


class TraceFormatError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def _trunc_pareto_mean(alpha: float, xm: float, cap: float) -> float:
    # mean of Pareto(alpha, xm) truncated to [xm, cap]
    z = 1.0 - (xm / cap) ** alpha
    if abs(alpha - 1.0) < 1e-12:
        return xm * math.log(cap / xm) / z
    return (alpha * xm ** alpha / z) * (cap ** (1 - alpha) - xm ** (1 - alpha)) / (1 - alpha)


def _trunc_pareto_mass_above(alpha: float, xm: float, cap: float, t: float) -> float:
    """Fraction of the truncated tail's byte mass carried by values > t."""
    if t <= xm:
        return 1.0
    if t >= cap:
        return 0.0
    if abs(alpha - 1.0) < 1e-12:
        return math.log(cap / t) / math.log(cap / xm)
    return (cap ** (1 - alpha) - t ** (1 - alpha)) / (cap ** (1 - alpha) - xm ** (1 - alpha))


def solve_tail_shape(target_mean: float, fraction_small: float,
                     small_cutoff: int) -> float:
    """Pareto shape alpha making the mixture mean hit ``target_mean``.

    Raises ValueError when no positive shape can reach the target (the tail
    cannot be lighter than its cap-constrained minimum or heavier than its
    near-zero-shape maximum).
    """
    small_mean = (MIN_FLOW_BYTES + small_cutoff) / 2.0
    tail_weight = 1.0 - fraction_small
    need = (target_mean - fraction_small * small_mean) / tail_weight
    lo, hi = 0.01, 50.0
    m_lo = _trunc_pareto_mean(lo, small_cutoff, TAIL_CAP_BYTES)
    m_hi = _trunc_pareto_mean(hi, small_cutoff, TAIL_CAP_BYTES)
    if not (m_hi < need < m_lo):
        raise ValueError(
            f"size mixture cannot reach mean {target_mean:.0f} B: tail mean "
            f"would need to be {need:.0f} B, attainable range is "
            f"({m_hi:.0f}, {m_lo:.0f})")
    return brentq(
        lambda a: _trunc_pareto_mean(a, small_cutoff, TAIL_CAP_BYTES) - need,
        lo, hi, xtol=1e-12)


def generate_trace(topology: Topology, duration_s: float, *,
                   target_mean_flow_bytes: float = 146_000.0,
                   fraction_small: float = 0.8,
                   small_cutoff_bytes: int = 10_000,
                   elephant_fraction_of_bytes: float = 0.5,
                   flows_per_host_per_second: float = 8.0,
                   seed: int = 0) -> Trace:
    """Generate a trace over the topology's hosts.

    Each host opens flows as a Poisson process at the given rate toward
    uniformly random other hosts.  Deterministic per seed.
    """
    if topology.host_count < 2:
        raise ValueError("need at least 2 hosts to generate traffic")
    if duration_s <= 0:
        raise ValueError("duration must be positive")
    if not 0.0 < fraction_small < 1.0:
        raise ValueError("fraction_small must be in (0, 1)")
    if small_cutoff_bytes <= MIN_FLOW_BYTES:
        raise ValueError(f"small_cutoff_bytes must exceed {MIN_FLOW_BYTES}")
    if flows_per_host_per_second < 0:
        raise ValueError("flows_per_host_per_second must be >= 0")
    if not 0.0 <= elephant_fraction_of_bytes < 1.0:
        raise ValueError("elephant_fraction_of_bytes must be in [0, 1)")

    alpha = solve_tail_shape(target_mean_flow_bytes, fraction_small,
                             small_cutoff_bytes)
    tail_weight = 1.0 - fraction_small
    tail_mean = _trunc_pareto_mean(alpha, small_cutoff_bytes, TAIL_CAP_BYTES)
    implied_share = (tail_weight * tail_mean
                     * _trunc_pareto_mass_above(alpha, small_cutoff_bytes,
                                                TAIL_CAP_BYTES,
                                                DEFAULT_ELEPHANT_THRESHOLD_BYTES)
                     / target_mean_flow_bytes)
    if implied_share < elephant_fraction_of_bytes:
        raise ValueError(
            f"mixture puts only {implied_share:.2f} of expected bytes in flows "
            f"above {DEFAULT_ELEPHANT_THRESHOLD_BYTES} B, below the requested "
            f"{elephant_fraction_of_bytes:.2f}")

    rng = np.random.default_rng(seed)
    hosts = topology.host_count
    counts = rng.poisson(flows_per_host_per_second * duration_s, size=hosts)
    n = int(counts.sum())
    if n == 0:
        return Trace(flows=(), duration=float(duration_s))

    src = np.repeat(np.arange(hosts), counts)
    start = rng.random(n) * duration_s
    start = np.round(start * 1e6) / 1e6  # microsecond grid, exact file round-trip

    d = rng.integers(0, hosts - 1, size=n)
    dst = d + (d >= src)

    u = rng.random(n)
    sizes = np.empty(n, dtype=np.int64)
    small = u < fraction_small
    n_small = int(small.sum())
    sizes[small] = np.floor(
        MIN_FLOW_BYTES + rng.random(n_small) * (small_cutoff_bytes - MIN_FLOW_BYTES + 1)
    ).astype(np.int64)
    n_tail = n - n_small
    if n_tail:
        z = 1.0 - (small_cutoff_bytes / TAIL_CAP_BYTES) ** alpha
        v = rng.random(n_tail)
        tail = small_cutoff_bytes * (1.0 - v * z) ** (-1.0 / alpha)
        sizes[~small] = np.minimum(np.floor(tail), TAIL_CAP_BYTES).astype(np.int64)

    order = np.lexsort((np.arange(n), src, start))
    flows = tuple(
        FlowSpec(flow_id=i, start_time=float(start[k]), src_host=int(src[k]),
                 dst_host=int(dst[k]), size_bytes=int(sizes[k]))
        for i, k in enumerate(order)
    )
    return Trace(flows=flows, duration=float(duration_s))


def save_trace(trace: Trace, fp: IO[str]) -> None:
    fp.write(TRACE_HEADER + "\n")
    fp.write(f"# duration_s={trace.duration:.6f}\n")
    for f in trace.flows:
        fp.write(f"{f.flow_id},{f.start_time:.6f},{f.src_host},{f.dst_host},"
                 f"{f.size_bytes}\n")


def load_trace(fp: IO[str]) -> Trace:
    """Parse a trace file; malformed lines raise TraceFormatError with the
    line number.  Unsorted flows are re-sorted and flagged via ``resorted``."""
    duration: float | None = None
    flows: list[FlowSpec] = []
    seen_header = False
    seen_ids: set[int] = set()
    for line_no, raw in enumerate(fp, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if not seen_header:
                if line != TRACE_HEADER:
                    raise TraceFormatError(line_no,
                                           f"expected header {TRACE_HEADER!r}")
                seen_header = True
            elif line.startswith("# duration_s="):
                duration = float(line.split("=", 1)[1])
            continue
        if not seen_header:
            raise TraceFormatError(line_no, f"missing header {TRACE_HEADER!r}")
        parts = line.split(",")
        if len(parts) != 5:
            raise TraceFormatError(line_no, f"expected 5 fields, got {len(parts)}")
        try:
            fid = int(parts[0])
            start = float(parts[1])
            src = int(parts[2])
            dst = int(parts[3])
            size = int(parts[4])
        except ValueError as exc:
            raise TraceFormatError(line_no, str(exc)) from None
        if fid < 0:
            raise TraceFormatError(line_no, f"negative flow id {fid}")
        if fid in seen_ids:
            raise TraceFormatError(line_no, f"duplicate flow id {fid}")
        seen_ids.add(fid)
        if start < 0:
            raise TraceFormatError(line_no, f"negative start time {start}")
        if src == dst:
            raise TraceFormatError(line_no, f"flow {fid} has src == dst ({src})")
        if size < 1:
            raise TraceFormatError(line_no, f"flow {fid} has size {size} < 1 byte")
        flows.append(FlowSpec(fid, start, src, dst, size))
    if not seen_header:
        raise TraceFormatError(1, f"missing header {TRACE_HEADER!r}")
    keys = [(f.start_time, f.flow_id) for f in flows]
    resorted = keys != sorted(keys)
    if resorted:
        flows.sort(key=lambda f: (f.start_time, f.flow_id))
    if duration is None:
        duration = flows[-1].start_time if flows else 0.0
    return Trace(flows=tuple(flows), duration=duration, resorted=resorted)


def classify_ground_truth(trace: Trace,
                          threshold_bytes: int = DEFAULT_ELEPHANT_THRESHOLD_BYTES,
                          ) -> tuple[frozenset[int], frozenset[int]]:
    """Partition flow ids into (elephants, mice).  Elephant means strictly
    more than ``threshold_bytes``."""
    elephants = frozenset(f.flow_id for f in trace.flows
                          if f.size_bytes > threshold_bytes)
    mice = frozenset(f.flow_id for f in trace.flows
                     if f.size_bytes <= threshold_bytes)
    return elephants, mice
