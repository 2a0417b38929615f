"""Flow-level discrete-event simulation core.

Between events every flow transfers at a constant rate given by max-min fair
sharing over the directed links its path crosses, so byte counts integrate
exactly.  Completions are scheduled lazily: after each rate change the engine
pushes one completion event for the earliest-finishing flow, tagged with an
epoch; events from earlier epochs are discarded when popped.

Controllers observe the network only through :class:`ControllerContext`
(switch tables, port counters, topology) and act by installing entries or
pinning paths; they never see flow sizes or remaining bytes.
"""

from __future__ import annotations

import heapq
import math
from collections import defaultdict
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .flowtable import FlowTables, RoutingBlackHole, RoutingLoop, route_lookup
from .topology import NodeId, NodeKind, Path, Topology
from .traffic import FlowSpec, Trace


class EventKind(IntEnum):
    """Tie-break order for simultaneous events, lowest first."""

    COMPLETION = 0
    ARRIVAL = 1
    REPORT = 2
    TICK = 3
    POLL = 4


class EventQueue:
    """Min-heap of (time, kind, insertion seq) ordered events."""

    def __init__(self) -> None:
        self._heap: list[tuple[float, int, int, object]] = []
        self._seq = 0

    def push(self, time: float, kind: EventKind, payload: object = None) -> None:
        heapq.heappush(self._heap, (time, int(kind), self._seq, payload))
        self._seq += 1

    def pop(self) -> tuple[float, EventKind, object]:
        time, kind, _, payload = heapq.heappop(self._heap)
        return time, EventKind(kind), payload

    def __len__(self) -> int:
        return len(self._heap)


def allocate_rates(flow_links: Mapping[object, Sequence[object]],
                   link_capacity) -> dict:
    """Max-min fair rates (bits/s) by progressive filling.

    ``flow_links`` maps a flow key to the (non-empty, duplicate-free) links it
    crosses; ``link_capacity`` is indexable by link key.  All unfrozen flows
    rise together until some link saturates, which freezes the flows crossing
    it; repeats until every flow is frozen.  Deterministic for a given input.
    """
    rates: dict = {}
    if not flow_links:
        return rates
    # compact integer indices keep the hot loop free of dict hashing
    fids = list(flow_links)
    index: dict = {}
    tol: list[float] = []  # saturation threshold, 1e-9 of capacity
    res: list[float] = []
    cnt: list[int] = []
    link_members: list[list[int]] = []
    flow_members: list[list[int]] = []
    for i, f in enumerate(fids):
        ls = flow_links[f]
        if not ls:
            raise ValueError(f"flow {f!r} crosses no links")
        row = []
        for l in ls:
            j = index.get(l)
            if j is None:
                cap = float(link_capacity[l])
                if cap <= 0:
                    raise ValueError(f"link {l!r} has non-positive capacity")
                j = index[l] = len(res)
                res.append(cap)
                tol.append(1e-9 * cap)
                cnt.append(0)
                link_members.append([])
            cnt[j] += 1
            link_members[j].append(i)
            row.append(j)
        flow_members.append(row)

    frozen = [False] * len(fids)
    level = 0.0
    remaining = len(fids)
    live = list(range(len(res)))
    while remaining:
        share = min(res[j] / cnt[j] for j in live)
        level += share
        keep = []
        saturated = []
        for j in live:
            r = res[j] - share * cnt[j]
            res[j] = r
            if r <= tol[j]:
                saturated.append(j)
            else:
                keep.append(j)
        for j in saturated:
            for i in link_members[j]:
                if not frozen[i]:
                    frozen[i] = True
                    rates[fids[i]] = level
                    remaining -= 1
                    for j2 in flow_members[i]:
                        cnt[j2] -= 1
        live = [j for j in keep if cnt[j] > 0]
    return rates


class ControllerActionError(Exception):
    """A controller referenced an unknown flow/switch or an invalid path."""


@dataclass
class FlowRecord:
    flow_id: int
    src_host: int
    dst_host: int
    size_bytes: int
    start_time: float
    completion_time: float | None = None

    @property
    def fct(self) -> float | None:
        if self.completion_time is None:
            return None
        return self.completion_time - self.start_time


@dataclass
class SimulationResult:
    """Everything one run produces; experiment code serializes subsets."""

    flows: list[FlowRecord]
    duration: float
    completed: int
    incomplete: int
    mean_fct: float | None
    median_fct: float | None
    p99_fct: float | None
    decision_log: list[tuple[float, str, int, str]]
    occupancy_series: list[tuple[float, str, int, int]]
    install_series: list[tuple[int, str, int]]
    exact_entry_hwm: int
    exact_entry_hwm_by_switch: dict[str, int]
    setup_installs: int
    exact_installs: int
    max_install_rate: float
    metrics: dict[str, float]
    link_bytes: np.ndarray
    wildcard_entry_counts: dict[str, int]


class Controller:
    """No-op base controller.  Subclasses override the hooks they need and
    may set ``tick_period`` to receive periodic on_tick callbacks."""

    tick_period: float | None = None

    def __init__(self) -> None:
        self.ctx: ControllerContext | None = None

    def attach(self, ctx: "ControllerContext") -> None:
        if self.ctx is not None:
            raise RuntimeError("controller instances are single-use; "
                               "construct a fresh one per run")
        self.ctx = ctx

    def on_start(self) -> None:
        pass

    def on_flow_arrival(self, flow_id: int, src_host: int, dst_host: int) -> None:
        pass

    def on_elephant_report(self, report) -> None:
        pass

    def on_tick(self, now: float) -> None:
        pass


class _ActiveFlow:
    __slots__ = ("record", "links", "rate", "delivered", "path", "pinned",
                 "has_pin", "entry_switches")

    def __init__(self, record: FlowRecord):
        self.record = record
        self.links: tuple[int, ...] = ()
        self.rate = 0.0  # bytes/s
        self.delivered = 0.0
        self.path: Path | None = None
        self.pinned: Path | None = None
        self.has_pin = False
        self.entry_switches: set[NodeId] = set()


class ControllerContext:
    """Capability surface handed to controllers: read switch state and
    counters, install entries, pin paths, log decisions."""

    def __init__(self, sim: "Simulation"):
        self._sim = sim

    # -- observation -------------------------------------------------------

    @property
    def topology(self) -> Topology:
        return self._sim.topology

    @property
    def now(self) -> float:
        return self._sim.now

    @property
    def idle_timeout(self) -> float:
        return self._sim.tables.idle_timeout

    def shortest_paths(self, rack_src: int, rack_dst: int) -> tuple[Path, ...]:
        return self._sim.topology.shortest_paths(rack_src, rack_dst)

    def exact_entries(self) -> list[tuple[NodeId, int, NodeId | None, float, float]]:
        """Live (non-expired) exact entries as
        (switch, flow_id, next_hop, bytes_matched, install_time)."""
        sim = self._sim
        out = []
        for sw in sim.topology.switches:
            table = sim.tables.tables[sw]
            for fid, entry in table.exacts.items():
                if not entry.expired(sim.now):
                    out.append((sw, fid, entry.next_hop,
                                entry.bytes_matched(sim.delivered_bytes(fid)),
                                entry.install_time))
        return out

    def port_counter_bytes(self) -> np.ndarray:
        """Cumulative bytes per directed link id; monotone over a run."""
        return self._sim.link_bytes.copy()

    # -- actions -------------------------------------------------------------

    def install_wildcard_tree(self, tree) -> None:
        self._sim.apply_wildcard_tree(tree)

    def install_exact_route(self, flow_id: int, path: Path) -> None:
        self._sim.apply_exact_route(flow_id, path)

    def pin_path(self, flow_id: int, path: Path | None,
                 count_installs: bool = False) -> None:
        self._sim.apply_pin(flow_id, path, count_installs)

    def log_decision(self, event: str, flow_id: int, path: Path | None) -> None:
        self._sim.decision_log.append(
            (self._sim.now, event, flow_id, str(path) if path else "-"))

    def record_metric(self, name: str, value: float) -> None:
        self._sim.metrics[name] = float(value)


@dataclass
class EngineConfig:
    idle_timeout_s: float = 5.0
    stats_interval_s: float = 1.0
    # test hook called before each integration step with
    # (t0, t1, [(flow_id, rate_bytes_per_s, link_ids), ...])
    interval_hook: Callable[[float, float, list], None] | None = None


class Simulation:
    """One run of a trace under a controller.  Single use."""

    def __init__(self, topology: Topology, trace: Trace, controller: Controller,
                 reports: Sequence = (), end_time: float | None = None,
                 config: EngineConfig | None = None):
        self.topology = topology
        self.trace = trace
        self.controller = controller
        self.reports = sorted(reports, key=lambda r: (r.report_time, r.flow_id))
        self.end_time = end_time
        self.config = config or EngineConfig()

        for f in trace.flows:
            if not (0 <= f.src_host < topology.host_count
                    and 0 <= f.dst_host < topology.host_count):
                raise ValueError(f"flow {f.flow_id} references hosts outside "
                                 f"the topology")

        self.tables = FlowTables(topology, self.config.idle_timeout_s)
        self.records: dict[int, FlowRecord] = {
            f.flow_id: FlowRecord(f.flow_id, f.src_host, f.dst_host,
                                  f.size_bytes, f.start_time)
            for f in trace.flows
        }
        self.active: dict[int, _ActiveFlow] = {}
        self.now = 0.0
        self.epoch = 0
        self.queue = EventQueue()
        self.link_bytes = np.zeros(len(topology.links))
        self.link_rate = np.zeros(len(topology.links))  # bytes/s
        self._caps = [float(c) for c in topology.capacities]
        self._tol = [1e-9 * c for c in self._caps]
        self._link_count: dict[int, int] = {}  # live flows per occupied link
        self._link_flows: dict[int, set[int]] = {}
        self.decision_log: list[tuple[float, str, int, str]] = []
        self.metrics: dict[str, float] = {}
        self.occupancy_series: list[tuple[float, str, int, int]] = []
        self._exact_hwm: dict[NodeId, int] = defaultdict(int)
        self._modeled_installs: dict[NodeId, dict[int, int]] = defaultdict(
            lambda: defaultdict(int))
        self._dirty = False
        self._setup_phase = False
        self._ran = False

    # -- state the context exposes ------------------------------------------

    def delivered_bytes(self, flow_id: int) -> float:
        flow = self.active.get(flow_id)
        if flow is not None:
            return flow.delivered
        rec = self.records.get(flow_id)
        if rec is not None and rec.completion_time is not None:
            return float(rec.size_bytes)
        return 0.0

    # -- controller actions ---------------------------------------------------

    def apply_wildcard_tree(self, tree) -> None:
        tree.install_into(self.tables, self.now, setup=self._setup_phase)

    def _flow_record_or_raise(self, flow_id: int) -> FlowRecord:
        rec = self.records.get(flow_id)
        if rec is None:
            raise ControllerActionError(f"unknown flow {flow_id}")
        return rec

    def apply_exact_route(self, flow_id: int, path: Path) -> None:
        rec = self._flow_record_or_raise(flow_id)
        src_tor = self.topology.tor_of_host(rec.src_host)
        dst_tor = self.topology.tor_of_host(rec.dst_host)
        if path.nodes[0] != src_tor or path.nodes[-1] != dst_tor:
            raise ControllerActionError(
                f"path {path} does not connect flow {flow_id}'s racks "
                f"({src_tor} -> {dst_tor})")
        delivered = self.delivered_bytes(flow_id)
        nodes = path.nodes
        for k, sw in enumerate(nodes):
            nxt = nodes[k + 1] if k + 1 < len(nodes) else None
            entry = self.tables.install_exact(sw, flow_id, nxt, self.now,
                                              delivered)
            if rec.completion_time is not None:
                entry.freeze(self.now, delivered)
        flow = self.active.get(flow_id)
        if flow is not None:
            new_switches = set(nodes)
            for sw in flow.entry_switches - new_switches:
                stale = self.tables.tables[sw].exacts.get(flow_id)
                if stale is not None:
                    stale.freeze(self.now, flow.delivered)
            flow.entry_switches = new_switches
            if flow.links:
                self._refresh_route(flow)

    def apply_pin(self, flow_id: int, path: Path | None,
                  count_installs: bool) -> None:
        rec = self._flow_record_or_raise(flow_id)
        src_rack = self.topology.rack_of_host(rec.src_host)
        dst_rack = self.topology.rack_of_host(rec.dst_host)
        if path is None:
            if src_rack != dst_rack:
                raise ControllerActionError(
                    f"flow {flow_id} is inter-rack but was pinned no path")
        else:
            if (path.nodes[0] != self.topology.tor_of_rack(src_rack)
                    or path.nodes[-1] != self.topology.tor_of_rack(dst_rack)):
                raise ControllerActionError(
                    f"pinned path {path} does not match flow {flow_id}'s racks")
        flow = self.active.get(flow_id)
        if flow is None:
            raise ControllerActionError(
                f"cannot pin inactive flow {flow_id}")
        flow.pinned = path
        flow.has_pin = True
        if count_installs:
            switches = path.nodes if path is not None else \
                (self.topology.tor_of_rack(src_rack),)
            bucket = int(math.floor(self.now))
            for sw in switches:
                self._modeled_installs[sw][bucket] += 1
        if flow.links:
            self._refresh_route(flow)

    # -- routing ----------------------------------------------------------------

    def _links_for(self, flow: _ActiveFlow, path: Path | None) -> tuple[int, ...]:
        rec = flow.record
        egress = self.topology.host_egress[rec.src_host]
        ingress = self.topology.host_ingress[rec.dst_host]
        if path is None:
            return (egress, ingress)
        return (egress,) + path.link_ids + (ingress,)

    def _resolve_route(self, flow: _ActiveFlow) -> None:
        if flow.has_pin:
            path = flow.pinned
        else:
            path = route_lookup(self.tables, flow.record.flow_id,
                                flow.record.src_host, flow.record.dst_host,
                                self.now)
        new_links = self._links_for(flow, path)
        if new_links != flow.links:
            fid = flow.record.flow_id
            if flow.links:
                self._drop_links(fid, flow.links)
            lc = self._link_count
            lf = self._link_flows
            for l in new_links:
                if l in lc:
                    lc[l] += 1
                    lf[l].add(fid)
                else:
                    lc[l] = 1
                    lf[l] = {fid}
        flow.path = path
        flow.links = new_links

    def _drop_links(self, fid: int, links: tuple[int, ...]) -> None:
        lc = self._link_count
        lf = self._link_flows
        for l in links:
            c = lc[l] - 1
            if c:
                lc[l] = c
                lf[l].discard(fid)
            else:
                del lc[l]
                del lf[l]

    def _refresh_route(self, flow: _ActiveFlow) -> None:
        old = flow.links
        self._resolve_route(flow)
        if flow.links != old:
            self._dirty = True

    # -- core loop ---------------------------------------------------------------

    def _advance(self, t: float) -> None:
        dt = t - self.now
        if dt < 0:
            raise AssertionError(f"time went backwards: {self.now} -> {t}")
        if dt > 0:
            hook = self.config.interval_hook
            if hook is not None:
                hook(self.now, t,
                     [(fid, fl.rate, fl.links) for fid, fl in self.active.items()])
            for fl in self.active.values():
                fl.delivered += fl.rate * dt
            self.link_bytes += self.link_rate * dt
        self.now = t

    def _reallocate(self) -> None:
        self.epoch += 1
        self._dirty = False
        self.link_rate[:] = 0.0
        active = self.active
        if not active:
            return
        # Progressive filling over just the occupied links (same arithmetic
        # as allocate_rates, fed from incrementally maintained membership).
        caps = self._caps
        tol = self._tol
        lf = self._link_flows
        cnt = dict(self._link_count)
        res = {l: caps[l] for l in cnt}
        live = list(cnt)
        rate_of: dict[int, float] = {}
        level = 0.0
        remaining = len(active)
        while remaining:
            share = min(res[l] / cnt[l] for l in live)
            level += share
            keep = []
            saturated = []
            for l in live:
                r = res[l] - share * cnt[l]
                res[l] = r
                if r <= tol[l]:
                    saturated.append(l)
                else:
                    keep.append(l)
            for l in saturated:
                for fid in lf[l]:
                    if fid not in rate_of:
                        rate_of[fid] = level
                        remaining -= 1
                        for l2 in active[fid].links:
                            cnt[l2] -= 1
            live = [l for l in keep if cnt[l] > 0]

        best_t = math.inf
        best_fid = -1
        for fid, fl in active.items():
            fl.rate = rate_of[fid] / 8.0  # bits/s -> bytes/s
            for l in fl.links:
                self.link_rate[l] += fl.rate
            left = fl.record.size_bytes - fl.delivered
            t_done = self.now + (left / fl.rate if left > 0 else 0.0)
            if t_done < best_t or (t_done == best_t and fid < best_fid):
                best_t = t_done
                best_fid = fid
        self.queue.push(best_t, EventKind.COMPLETION, (best_fid, self.epoch))

    def _complete_flow(self, fid: int) -> None:
        fl = self.active.pop(fid)
        self._drop_links(fid, fl.links)
        rec = fl.record
        rec.completion_time = self.now
        size = float(rec.size_bytes)
        # sub-byte float residue from scheduling arithmetic
        if abs(fl.delivered - size) > 1.0:
            raise AssertionError(
                f"flow {fid} completed having delivered {fl.delivered} of "
                f"{size} bytes")
        fl.delivered = size
        for sw in fl.entry_switches:
            entry = self.tables.tables[sw].exacts.get(fid)
            if entry is not None:
                entry.freeze(self.now, size)

    def _sample_stats(self) -> None:
        t = self.now
        for sw in self.topology.switches:
            table = self.tables.tables[sw]
            wc = table.wildcard_count()
            ex = table.exact_live_count(t)
            self.occupancy_series.append((t, str(sw), wc, ex))
            if ex > self._exact_hwm[sw]:
                self._exact_hwm[sw] = ex

    def run(self) -> SimulationResult:
        if self._ran:
            raise RuntimeError("Simulation instances are single-use")
        self._ran = True

        self.controller.attach(ControllerContext(self))
        self._setup_phase = True
        self.controller.on_start()
        self._setup_phase = False

        flows = self.trace.flows
        n_reports = len(self.reports)
        arrival_idx = 0
        report_idx = 0
        if flows:
            self.queue.push(flows[0].start_time, EventKind.ARRIVAL, 0)
        if n_reports:
            self.queue.push(self.reports[0].report_time, EventKind.REPORT, 0)
        if self.controller.tick_period:
            self.queue.push(self.controller.tick_period, EventKind.TICK, None)
        self.queue.push(self.config.stats_interval_s, EventKind.POLL, None)

        def done() -> bool:
            return (arrival_idx >= len(flows) and not self.active
                    and report_idx >= n_reports)

        cut = False
        while len(self.queue) and not done():
            t, kind, payload = self.queue.pop()
            if self.end_time is not None and t > self.end_time:
                cut = True
                break

            if kind is EventKind.COMPLETION:
                fid, epoch = payload
                if epoch != self.epoch:
                    continue  # superseded by a later reallocation
                self._advance(t)
                self._complete_flow(fid)
                self._reallocate()
            elif kind is EventKind.ARRIVAL:
                self._advance(t)
                spec = flows[payload]
                arrival_idx = payload + 1
                if arrival_idx < len(flows):
                    self.queue.push(flows[arrival_idx].start_time,
                                    EventKind.ARRIVAL, arrival_idx)
                flow = _ActiveFlow(self.records[spec.flow_id])
                self.active[spec.flow_id] = flow
                self.controller.on_flow_arrival(spec.flow_id, spec.src_host,
                                                spec.dst_host)
                self._resolve_route(flow)
                self._reallocate()
            elif kind is EventKind.REPORT:
                self._advance(t)
                report = self.reports[payload]
                report_idx = payload + 1
                if report_idx < n_reports:
                    self.queue.push(self.reports[report_idx].report_time,
                                    EventKind.REPORT, report_idx)
                self.controller.on_elephant_report(report)
                if self._dirty:
                    self._reallocate()
            elif kind is EventKind.TICK:
                self._advance(t)
                self.controller.on_tick(t)
                self.queue.push(t + self.controller.tick_period,
                                EventKind.TICK, None)
                if self._dirty:
                    self._reallocate()
            elif kind is EventKind.POLL:
                self._advance(t)
                self._sample_stats()
                self.tables.purge_expired(t)
                self.queue.push(t + self.config.stats_interval_s,
                                EventKind.POLL, None)

        if cut and self.end_time is not None:
            self._advance(self.end_time)

        return self._build_result()

    # -- result assembly -----------------------------------------------------------

    def _build_result(self) -> SimulationResult:
        records = [self.records[f.flow_id] for f in self.trace.flows]
        fcts = np.array([r.fct for r in records if r.fct is not None])
        completed = int(fcts.size)
        incomplete = len(records) - completed
        mean_fct = float(fcts.mean()) if completed else None
        median_fct = float(np.median(fcts)) if completed else None
        p99_fct = float(np.percentile(fcts, 99)) if completed else None

        install_rows: list[tuple[int, str, int]] = []
        setup_installs = 0
        exact_installs = 0
        peak_rate = 0.0
        for sw in self.topology.switches:
            stats = self.tables.stats[sw]
            setup_installs += stats.setup_installs
            exact_installs += stats.installs - stats.setup_installs
            buckets = dict(stats.install_buckets)
            for b, c in self._modeled_installs.get(sw, {}).items():
                buckets[b] = buckets.get(b, 0) + c
                exact_installs += c
            for b in sorted(buckets):
                install_rows.append((b, str(sw), buckets[b]))
                if buckets[b] > peak_rate:
                    peak_rate = float(buckets[b])

        hwm_by_switch = {str(sw): self._exact_hwm.get(sw, 0)
                         for sw in self.topology.switches}
        wc_counts = {str(sw): self.tables.tables[sw].wildcard_count()
                     for sw in self.topology.switches}

        return SimulationResult(
            flows=records,
            duration=self.now,
            completed=completed,
            incomplete=incomplete,
            mean_fct=mean_fct,
            median_fct=median_fct,
            p99_fct=p99_fct,
            decision_log=self.decision_log,
            occupancy_series=self.occupancy_series,
            install_series=install_rows,
            exact_entry_hwm=max(hwm_by_switch.values(), default=0),
            exact_entry_hwm_by_switch=hwm_by_switch,
            setup_installs=setup_installs,
            exact_installs=exact_installs,
            max_install_rate=peak_rate / 1.0,  # buckets are 1 s wide
            metrics=dict(self.metrics),
            link_bytes=self.link_bytes.copy(),
            wildcard_entry_counts=wc_counts,
        )


def run(topology: Topology, trace: Trace, controller: Controller,
        detector_reports: Sequence = (), end_time: float | None = None,
        config: EngineConfig | None = None) -> SimulationResult:
    """Convenience wrapper: build a Simulation and run it."""
    return Simulation(topology, trace, controller, detector_reports,
                      end_time, config).run()
