"""Per-switch forwarding tables: wildcard rack/host entries and exact
per-flow entries, with OpenFlow-style idle expiry and install accounting.

Exact entries override wildcard entries.  An entry whose flow is actively
sending through it never idles out; entries freeze when their flow completes
or its path moves elsewhere, and expire once frozen for longer than the idle
timeout.  Expiry is evaluated lazily so no timer events are needed.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import IO, Iterator

from .topology import NodeId, NodeKind, Path, Topology


class RoutingBlackHole(Exception):
    """No matching entry for a flow at some switch."""

    def __init__(self, switch: NodeId, flow_id: int, dst_rack: int):
        super().__init__(f"no entry for flow {flow_id} (dst rack {dst_rack}) "
                         f"at {switch}")
        self.switch = switch
        self.flow_id = flow_id


class RoutingLoop(Exception):
    def __init__(self, switch: NodeId, flow_id: int):
        super().__init__(f"flow {flow_id} revisits {switch}")
        self.switch = switch
        self.flow_id = flow_id


@dataclass
class WildcardEntry:
    """Matches all packets to one destination rack (or one host at a ToR).
    ``next_hop`` None means deliver on the local host ports."""

    switch: NodeId
    match_repr: str
    next_hop: NodeId | None
    install_time: float
    rewrite: tuple[int, int] | None = None  # (match MAC value, rewrite-to value)


@dataclass
class ExactEntry:
    """Per-flow entry with an idle timeout and a byte counter.

    ``base_delivered`` snapshots the flow's delivered bytes at install;
    ``carry`` preserves bytes counted before a reinstall so the counter is
    monotone per (switch, flow).  ``frozen_at``/``frozen_bytes`` are set when
    the flow stops matching here (completion or path change).
    """

    switch: NodeId
    flow_id: int
    next_hop: NodeId | None
    install_time: float
    idle_timeout: float
    base_delivered: float = 0.0
    carry: float = 0.0
    frozen_at: float | None = None
    frozen_bytes: float = 0.0

    def expired(self, now: float) -> bool:
        if self.idle_timeout <= 0 or self.frozen_at is None:
            return False
        return now - self.frozen_at > self.idle_timeout

    def bytes_matched(self, delivered_now: float) -> float:
        if self.frozen_at is not None:
            return self.frozen_bytes
        return self.carry + (delivered_now - self.base_delivered)

    def freeze(self, now: float, delivered_now: float) -> None:
        if self.frozen_at is None:
            self.frozen_bytes = self.carry + (delivered_now - self.base_delivered)
            self.frozen_at = now


@dataclass
class SwitchStats:
    installs: int = 0
    removals: int = 0
    setup_installs: int = 0
    install_buckets: dict[int, int] = field(default_factory=lambda: defaultdict(int))

    def record_install(self, now: float, setup: bool) -> None:
        self.installs += 1
        if setup:
            self.setup_installs += 1
        else:
            self.install_buckets[int(math.floor(now))] += 1


class SwitchTable:
    def __init__(self, switch: NodeId):
        self.switch = switch
        self.wildcard_racks: dict[int, WildcardEntry] = {}
        self.wildcard_hosts: dict[int, WildcardEntry] = {}
        self.exacts: dict[int, ExactEntry] = {}

    def wildcard_count(self) -> int:
        return len(self.wildcard_racks) + len(self.wildcard_hosts)

    def exact_live_count(self, now: float) -> int:
        return sum(1 for e in self.exacts.values() if not e.expired(now))


class FlowTables:
    """All switch tables plus install/removal accounting."""

    def __init__(self, topology: Topology, idle_timeout: float = 5.0):
        self.topology = topology
        self.idle_timeout = idle_timeout
        self.tables: dict[NodeId, SwitchTable] = {
            sw: SwitchTable(sw) for sw in topology.switches
        }
        self.stats: dict[NodeId, SwitchStats] = {
            sw: SwitchStats() for sw in topology.switches
        }

    def _check_switch(self, switch: NodeId) -> SwitchTable:
        t = self.tables.get(switch)
        if t is None:
            raise ValueError(f"unknown switch {switch}")
        return t

    def install_wildcard_rack(self, switch: NodeId, rack: int,
                              next_hop: NodeId | None, now: float,
                              match_repr: str | None = None, *,
                              setup: bool = False) -> None:
        t = self._check_switch(switch)
        if rack in t.wildcard_racks:
            self.stats[switch].removals += 1
        t.wildcard_racks[rack] = WildcardEntry(
            switch, match_repr or f"rack:{rack}", next_hop, now)
        self.stats[switch].record_install(now, setup)

    def install_wildcard_host(self, switch: NodeId, host: int,
                              next_hop: NodeId | None, now: float,
                              rewrite: tuple[int, int] | None = None, *,
                              setup: bool = False) -> None:
        t = self._check_switch(switch)
        if host in t.wildcard_hosts:
            self.stats[switch].removals += 1
        t.wildcard_hosts[host] = WildcardEntry(
            switch, f"host:{host}", next_hop, now, rewrite=rewrite)
        self.stats[switch].record_install(now, setup)

    def remove_wildcard_host(self, switch: NodeId, host: int) -> None:
        t = self._check_switch(switch)
        if t.wildcard_hosts.pop(host, None) is not None:
            self.stats[switch].removals += 1

    def install_exact(self, switch: NodeId, flow_id: int,
                      next_hop: NodeId | None, now: float,
                      base_delivered: float) -> ExactEntry:
        t = self._check_switch(switch)
        prev = t.exacts.get(flow_id)
        entry = ExactEntry(switch, flow_id, next_hop, now, self.idle_timeout,
                           base_delivered=base_delivered)
        if prev is not None:
            # modify: counts as one removal + one install, counter continues
            self.stats[switch].removals += 1
            if prev.frozen_at is None:
                entry.base_delivered = prev.base_delivered
                entry.carry = prev.carry
            else:
                entry.carry = prev.frozen_bytes
        t.exacts[flow_id] = entry
        self.stats[switch].record_install(now, setup=False)
        return entry

    def remove_exact(self, switch: NodeId, flow_id: int) -> None:
        t = self._check_switch(switch)
        if t.exacts.pop(flow_id, None) is not None:
            self.stats[switch].removals += 1

    def purge_expired(self, now: float) -> None:
        for sw, t in self.tables.items():
            dead = [fid for fid, e in t.exacts.items() if e.expired(now)]
            for fid in dead:
                del t.exacts[fid]
                self.stats[sw].removals += 1

    def live_exact_entries(self, now: float) -> Iterator[ExactEntry]:
        for t in self.tables.values():
            for e in t.exacts.values():
                if not e.expired(now):
                    yield e

    def dump_entries(self, fp: IO[str], now: float = 0.0) -> None:
        """Debug dump, one `switch,match,next_hop` line per entry."""
        for sw in self.topology.switches:
            t = self.tables[sw]
            for rack in sorted(t.wildcard_racks):
                e = t.wildcard_racks[rack]
                fp.write(f"{sw},{e.match_repr},{e.next_hop or '-'}\n")
            for host in sorted(t.wildcard_hosts):
                e = t.wildcard_hosts[host]
                fp.write(f"{sw},{e.match_repr},{e.next_hop or '-'}\n")
            for fid in sorted(t.exacts):
                e = t.exacts[fid]
                if not e.expired(now):
                    fp.write(f"{sw},flow:{fid},{e.next_hop or '-'}\n")


def route_lookup(tables: FlowTables, flow_id: int, src_host: int,
                 dst_host: int, now: float = 0.0) -> Path | None:
    """Resolve the switch path a flow takes under the current tables.

    Exact entries take precedence over the destination-rack wildcard at every
    switch, so partially installed exact routes splice onto the wildcard tree.
    Returns None for intra-rack flows (no fabric traversal).  Raises
    RoutingBlackHole / RoutingLoop on inconsistent tables.
    """
    topo = tables.topology
    src_rack = topo.rack_of_host(src_host)
    dst_rack = topo.rack_of_host(dst_host)
    if src_rack == dst_rack:
        return None
    dst_tor = topo.tor_of_rack(dst_rack)
    cur = topo.tor_of_rack(src_rack)
    nodes = [cur]
    seen = {cur}
    while cur != dst_tor:
        table = tables.tables[cur]
        exact = table.exacts.get(flow_id)
        if exact is not None and not exact.expired(now) and exact.next_hop is not None:
            nxt = exact.next_hop
        else:
            wild = table.wildcard_racks.get(dst_rack)
            if wild is None:
                raise RoutingBlackHole(cur, flow_id, dst_rack)
            nxt = wild.next_hop
            if nxt is None:
                # delivery entry on a switch that is not the destination ToR
                raise RoutingBlackHole(cur, flow_id, dst_rack)
        if nxt in seen:
            raise RoutingLoop(nxt, flow_id)
        seen.add(nxt)
        nodes.append(nxt)
        cur = nxt
    return topo.make_path(nodes)
