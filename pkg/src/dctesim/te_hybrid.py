"""Hybrid traffic engineering: static trees, reactive elephants, periodic
global rerouting.

Three layers, cheapest first.  Wildcard forwarding trees carry everything by
default, so mice never touch the controller.  When the detector reports an
elephant, the controller immediately pins it to the least-loaded shortest
path between its racks, judged by last-window measured link rates (before
the first window exists, by the demands it has reserved so far instead).
Stale reports cost little: a flow that already finished gets entries that
never match traffic and age out.  Every tick the controller re-reads switch
counters, estimates each tracked elephant's natural (NIC-limited) demand, and
runs global first fit to repack them against the measured background load.

The controller only trusts switch state it can observe: a tracked flow whose
exact entries have aged out is treated as finished, and its current path is
reconstructed from the entries rather than remembered.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .engine import Controller, allocate_rates
from .static_routing import build_forwarding_trees
from .topology import NodeId, Path, Topology


def least_loaded_path(paths: Sequence[Path], link_rates,
                      reserved: Mapping[int, float]) -> Path:
    """Path minimizing the maximum per-link load; first wins ties."""
    if not paths:
        raise ValueError("no candidate paths")
    return min(paths, key=lambda p: max(link_rates[l] + reserved.get(l, 0.0)
                                        for l in p.link_ids))


def background_rates(link_rates: np.ndarray,
                     flow_links: Mapping[int, Sequence[int]],
                     flow_rates: Mapping[int, float]) -> np.ndarray:
    """Per-link load with tracked flows' measured rates subtracted out."""
    bg = np.array(link_rates, dtype=float)
    for fid, links in flow_links.items():
        r = flow_rates.get(fid, 0.0)
        if r > 0.0:
            for l in links:
                bg[l] -= r
    np.maximum(bg, 0.0, out=bg)
    return bg


def estimate_natural_demands(topology: Topology,
                             endpoints: Mapping[int, tuple[int, int]],
                             ) -> dict[int, float]:
    """Max-min fair rates (bits/s) the flows would get if only NICs bound
    them: each flow crosses just its source-egress and sink-ingress NIC."""
    if not endpoints:
        return {}
    flow_links: dict[int, tuple] = {}
    caps: dict[tuple, float] = {}
    for fid, (src, dst) in endpoints.items():
        eg = ("eg", src)
        ing = ("in", dst)
        caps[eg] = topology.nic_capacity(src)
        caps[ing] = topology.nic_capacity(dst)
        flow_links[fid] = (eg, ing)
    return allocate_rates(flow_links, caps)


def global_first_fit(demands: Mapping[int, float],
                     current_paths: Mapping[int, Path],
                     candidate_paths: Mapping[int, Sequence[Path]],
                     background, capacities,
                     ) -> tuple[dict[int, Path], dict[int, float], set[int]]:
    """Repack flows in descending demand order (flow id breaks ties).

    A path fits when background plus already-reserved plus this demand stays
    within capacity on every link.  The flow's current path is tried first so
    placements are sticky; otherwise candidates are scanned in order.  A flow
    with no fitting path keeps its path and reserves nothing.

    Returns (moves, reserved bits/s per link, unplaced flow ids).
    """
    reserved: dict[int, float] = defaultdict(float)
    moves: dict[int, Path] = {}
    unplaced: set[int] = set()
    for fid in sorted(demands, key=lambda f: (-demands[f], f)):
        demand = demands[fid]
        cur = current_paths.get(fid)
        trial = list(candidate_paths[fid])
        if cur is not None:
            trial = [cur] + [p for p in trial if p != cur]
        chosen = None
        for p in trial:
            if all(background[l] + reserved.get(l, 0.0) + demand
                   <= capacities[l] * (1.0 + 1e-9) for l in p.link_ids):
                chosen = p
                break
        if chosen is None:
            unplaced.add(fid)
            continue
        for l in chosen.link_ids:
            reserved[l] += demand
        if chosen != cur:
            moves[fid] = chosen
    assert all(background[l] + r <= capacities[l] * (1.0 + 1e-9)
               for l, r in reserved.items()), "reservations exceed capacity"
    return moves, dict(reserved), unplaced


def reconstruct_exact_path(topology: Topology,
                           hops: Mapping[NodeId, NodeId | None],
                           src_rack: int, dst_rack: int) -> Path | None:
    """Walk per-switch exact next-hops from the source ToR; None if the
    chain is broken or loops (the flow is gone or its state decayed)."""
    cur = topology.tor_of_rack(src_rack)
    dst_tor = topology.tor_of_rack(dst_rack)
    nodes = [cur]
    seen = {cur}
    while cur != dst_tor:
        nxt = hops.get(cur)
        if nxt is None or nxt in seen:
            return None
        seen.add(nxt)
        nodes.append(nxt)
        cur = nxt
    return topology.make_path(nodes)


@dataclass
class HybridTEConfig:
    tree_seed: int = 0
    tick_period_s: float = 5.0
    match_mode: str = "rack"


class _Tracked:
    __slots__ = ("src_host", "dst_host", "src_rack", "dst_rack", "path")

    def __init__(self, src_host: int, dst_host: int, src_rack: int,
                 dst_rack: int, path: Path):
        self.src_host = src_host
        self.dst_host = dst_host
        self.src_rack = src_rack
        self.dst_rack = dst_rack
        self.path = path


class HybridTEController(Controller):
    def __init__(self, config: HybridTEConfig | None = None):
        super().__init__()
        self.config = config or HybridTEConfig()
        if self.config.tick_period_s <= 0:
            raise ValueError("tick_period_s must be positive")
        self.tick_period = self.config.tick_period_s
        self.trees = None
        self.tracked: dict[int, _Tracked] = {}
        self.reserved: dict[int, float] = defaultdict(float)
        self._polled = False  # first counter window not yet available
        self._src_counts: dict[int, int] = defaultdict(int)
        self._dst_counts: dict[int, int] = defaultdict(int)
        self._link_rates: np.ndarray | None = None
        self._last_bytes: np.ndarray | None = None
        self._last_poll = 0.0
        self._prev_entry_bytes: dict[tuple[NodeId, int], float] = {}
        self._tracked_hwm = 0
        self._reactive_total = 0
        self._reroute_total = 0

    def on_start(self) -> None:
        ctx = self.ctx
        topo = ctx.topology
        self.trees = build_forwarding_trees(topo, self.config.tree_seed,
                                            self.config.match_mode)
        ctx.install_wildcard_tree(self.trees)
        self._link_rates = np.zeros(len(topo.links))
        self._last_bytes = np.zeros(len(topo.links))

    # -- reactive placement on each report -----------------------------------

    def on_elephant_report(self, report) -> None:
        ctx = self.ctx
        topo = ctx.topology
        fid = report.flow_id
        if fid in self.tracked:
            return
        src_rack = topo.rack_of_host(report.src_host)
        dst_rack = topo.rack_of_host(report.dst_host)
        if src_rack == dst_rack:
            return  # never crosses the fabric; tree delivery suffices
        self._src_counts[report.src_host] += 1
        self._dst_counts[report.dst_host] += 1
        demand = min(
            topo.nic_capacity(report.src_host) / self._src_counts[report.src_host],
            topo.nic_capacity(report.dst_host) / self._dst_counts[report.dst_host])
        paths = ctx.shortest_paths(src_rack, dst_rack)
        path = least_loaded_path(paths, self._link_rates, self.reserved)
        ctx.install_exact_route(fid, path)
        ctx.log_decision("reactive", fid, path)
        if not self._polled:
            # no measurements yet: placements see each other via reservations
            for l in path.link_ids:
                self.reserved[l] += demand
        self.tracked[fid] = _Tracked(report.src_host, report.dst_host,
                                     src_rack, dst_rack, path)
        self._reactive_total += 1
        if len(self.tracked) > self._tracked_hwm:
            self._tracked_hwm = len(self.tracked)

    # -- periodic global repacking ------------------------------------------------

    def on_tick(self, now: float) -> None:
        ctx = self.ctx
        topo = ctx.topology
        dt = now - self._last_poll
        bytes_now = ctx.port_counter_bytes()
        if np.any(bytes_now < self._last_bytes):
            raise RuntimeError("port counters regressed")
        self._link_rates = (bytes_now - self._last_bytes) * 8.0 / dt
        self._last_bytes = bytes_now
        self._last_poll = now
        if not self._polled:
            self._polled = True
            self.reserved = {}  # measured rates take over from here on

        flow_hops: dict[int, dict[NodeId, NodeId | None]] = defaultdict(dict)
        entry_bytes: dict[tuple[NodeId, int], float] = {}
        for sw, fid, nxt, matched, _ in ctx.exact_entries():
            flow_hops[fid][sw] = nxt
            entry_bytes[(sw, fid)] = matched

        survivors: dict[int, _Tracked] = {}
        flow_rates: dict[int, float] = {}
        for fid, info in self.tracked.items():
            path = reconstruct_exact_path(topo, flow_hops.get(fid, {}),
                                          info.src_rack, info.dst_rack)
            if path is None:
                continue  # entries aged out: the flow finished
            info.path = path
            survivors[fid] = info
            window = max((entry_bytes.get((sw, fid), 0.0)
                          - self._prev_entry_bytes.get((sw, fid), 0.0)
                          for sw in path.nodes), default=0.0)
            flow_rates[fid] = max(window, 0.0) * 8.0 / dt
        self.tracked = survivors
        self._prev_entry_bytes = entry_bytes
        self._src_counts.clear()
        self._dst_counts.clear()
        for info in survivors.values():
            self._src_counts[info.src_host] += 1
            self._dst_counts[info.dst_host] += 1

        bg = background_rates(
            self._link_rates,
            {fid: info.path.link_ids for fid, info in survivors.items()},
            flow_rates)
        demands = estimate_natural_demands(
            topo, {fid: (info.src_host, info.dst_host)
                   for fid, info in survivors.items()})
        candidates = {fid: ctx.shortest_paths(info.src_rack, info.dst_rack)
                      for fid, info in survivors.items()}
        current = {fid: info.path for fid, info in survivors.items()}
        moves, _, _ = global_first_fit(demands, current, candidates, bg,
                                       topo.capacities)
        for fid, path in moves.items():
            ctx.install_exact_route(fid, path)
            ctx.log_decision("reroute", fid, path)
            survivors[fid].path = path
        self._reroute_total += len(moves)

        ctx.record_metric("tracked_elephant_hwm", self._tracked_hwm)
        ctx.record_metric("reactive_placements", self._reactive_total)
        ctx.record_metric("gff_reroutes", self._reroute_total)
