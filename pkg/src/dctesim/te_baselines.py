"""Baseline schemes: static hashed ECMP and threshold-triggered rerouting.

ECMP spreads flows by hashing the flow id over the equal-cost shortest paths
of its rack pair.  It comes in an idealized flavor that models no switch
state at all, plus an accounting flavor that charges one would-be exact entry
per path switch so table pressure can be compared without simulating it.

The threshold rerouter places every flow on its ECMP path with real per-flow
entries at arrival, then periodically repacks flows whose measured rate
crosses a fraction of the NIC with the same global-first-fit pass the hybrid
controller uses."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .engine import Controller
from .te_hybrid import (background_rates, estimate_natural_demands,
                        global_first_fit)
from .topology import NodeId, Path

_M64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _M64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _M64
    return x ^ (x >> 31)


def ecmp_path_index(seed: int, flow_id: int, n_paths: int) -> int:
    """Stable uniform-ish path pick; flows keep their path for life."""
    if n_paths < 1:
        raise ValueError("no paths to hash over")
    return splitmix64((splitmix64(seed & _M64) + flow_id) & _M64) % n_paths


@dataclass
class EcmpConfig:
    seed: int = 0
    count_installs: bool = False  # model per-flow entries without storing them


class EcmpController(Controller):
    def __init__(self, config: EcmpConfig | None = None):
        super().__init__()
        self.config = config or EcmpConfig()

    def on_flow_arrival(self, flow_id: int, src_host: int, dst_host: int) -> None:
        ctx = self.ctx
        topo = ctx.topology
        src_rack = topo.rack_of_host(src_host)
        dst_rack = topo.rack_of_host(dst_host)
        if src_rack == dst_rack:
            path = None
        else:
            paths = ctx.shortest_paths(src_rack, dst_rack)
            path = paths[ecmp_path_index(self.config.seed, flow_id, len(paths))]
        ctx.pin_path(flow_id, path,
                     count_installs=self.config.count_installs)


@dataclass
class HederaStyleConfig:
    seed: int = 0
    tick_period_s: float = 5.0
    elephant_rate_fraction: float = 0.1  # of the source NIC, per window


class _PlacedFlow:
    __slots__ = ("src_host", "dst_host", "src_rack", "dst_rack", "path")

    def __init__(self, src_host, dst_host, src_rack, dst_rack, path):
        self.src_host = src_host
        self.dst_host = dst_host
        self.src_rack = src_rack
        self.dst_rack = dst_rack
        self.path = path


class HederaStyleController(Controller):
    def __init__(self, config: HederaStyleConfig | None = None):
        super().__init__()
        self.config = config or HederaStyleConfig()
        if self.config.tick_period_s <= 0:
            raise ValueError("tick_period_s must be positive")
        self.tick_period = self.config.tick_period_s
        self.flows: dict[int, _PlacedFlow] = {}
        self._last_bytes: np.ndarray | None = None
        self._last_poll = 0.0
        self._link_rates: np.ndarray | None = None
        self._prev_entry_bytes: dict[tuple[NodeId, int], float] = {}
        self._tracked_hwm = 0
        self._reroute_total = 0

    def on_start(self) -> None:
        n = len(self.ctx.topology.links)
        self._last_bytes = np.zeros(n)
        self._link_rates = np.zeros(n)

    def on_flow_arrival(self, flow_id: int, src_host: int, dst_host: int) -> None:
        ctx = self.ctx
        topo = ctx.topology
        src_rack = topo.rack_of_host(src_host)
        dst_rack = topo.rack_of_host(dst_host)
        if src_rack == dst_rack:
            # delivery entry at the shared ToR is the whole route
            path = topo.make_path([topo.tor_of_rack(src_rack)])
        else:
            paths = ctx.shortest_paths(src_rack, dst_rack)
            path = paths[ecmp_path_index(self.config.seed, flow_id, len(paths))]
        ctx.install_exact_route(flow_id, path)
        self.flows[flow_id] = _PlacedFlow(src_host, dst_host, src_rack,
                                          dst_rack, path)

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

        live: set[int] = set()
        entry_bytes: dict[tuple[NodeId, int], float] = {}
        for sw, fid, _, matched, _ in ctx.exact_entries():
            live.add(fid)
            entry_bytes[(sw, fid)] = matched

        for fid in [f for f in self.flows if f not in live]:
            del self.flows[fid]  # entries aged out: flow finished

        elephants: dict[int, _PlacedFlow] = {}
        flow_rates: dict[int, float] = {}
        for fid, info in self.flows.items():
            window = max((entry_bytes.get((sw, fid), 0.0)
                          - self._prev_entry_bytes.get((sw, fid), 0.0)
                          for sw in info.path.nodes), default=0.0)
            rate = max(window, 0.0) * 8.0 / dt
            threshold = (self.config.elephant_rate_fraction
                         * topo.nic_capacity(info.src_host))
            if rate >= threshold and info.src_rack != info.dst_rack:
                elephants[fid] = info
                flow_rates[fid] = rate
        self._prev_entry_bytes = entry_bytes

        if len(elephants) > self._tracked_hwm:
            self._tracked_hwm = len(elephants)

        bg = background_rates(
            self._link_rates,
            {fid: info.path.link_ids for fid, info in elephants.items()},
            flow_rates)
        demands = estimate_natural_demands(
            topo, {fid: (info.src_host, info.dst_host)
                   for fid, info in elephants.items()})
        candidates = {fid: ctx.shortest_paths(info.src_rack, info.dst_rack)
                      for fid, info in elephants.items()}
        current = {fid: info.path for fid, info in elephants.items()}
        moves, _, _ = global_first_fit(demands, current, candidates, bg,
                                       topo.capacities)
        for fid, path in moves.items():
            ctx.install_exact_route(fid, path)
            ctx.log_decision("reroute", fid, path)
            self.flows[fid].path = path
        self._reroute_total += len(moves)

        ctx.record_metric("tracked_elephant_hwm", self._tracked_hwm)
        ctx.record_metric("gff_reroutes", self._reroute_total)
