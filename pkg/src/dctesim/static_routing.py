"""Static destination-rooted forwarding trees.

Every destination rack gets one spanning tree over the switches: each switch
holds at most one wildcard entry per destination rack, so all default-routed
traffic to a rack converges onto that tree.  Trees are built by drawing, for
every ordered rack pair, one uniformly random shortest path and installing
next hops along it wherever the destination has no entry yet (first writer
wins).  The random draws spread the trees of different destinations across
the fabric; a given seed reproduces the same trees exactly.

A deterministic completion pass then covers switches the draws happened to
miss: any switch lying on some shortest path toward the destination gets an
entry pointing at its smallest strictly-closer neighbor.  Every entry
(drawn or completion) decreases the hop distance to the destination ToR by
one, so the per-destination entries always form a loop-free in-tree.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from . import labels
from .flowtable import FlowTables
from .topology import NodeId, Path, Topology

MATCH_MODES = ("rack", "label")


@dataclass
class ForwardingTreeSet:
    """Per-destination-rack next hops plus per-host ToR delivery entries."""

    topology: Topology
    seed: int
    match_mode: str
    # next_hops[rack][switch] -> next switch, None meaning deliver locally
    next_hops: dict[int, dict[NodeId, NodeId | None]]
    # (tor, host id, optional (match-label, rewrite-to) pair)
    host_entries: list[tuple[NodeId, int, tuple[int, int] | None]]
    drawn_paths: dict[tuple[int, int], Path]
    completion_entries: frozenset[tuple[int, NodeId]]

    def match_repr(self, rack: int) -> str:
        if self.match_mode == "label":
            return f"mac:{labels.rack_prefix(rack):07x}/{labels.PREFIX_BITS}"
        return f"rack:{rack}"

    def entry_count(self, switch: NodeId) -> int:
        n = sum(1 for hops in self.next_hops.values() if switch in hops)
        n += sum(1 for tor, _, _ in self.host_entries if tor == switch)
        return n

    def entry_counts(self) -> dict[NodeId, int]:
        return {sw: self.entry_count(sw) for sw in self.topology.switches}

    def install_into(self, tables: FlowTables, now: float = 0.0, *,
                     setup: bool = True) -> None:
        for rack in sorted(self.next_hops):
            match = self.match_repr(rack)
            for sw, nxt in self.next_hops[rack].items():
                tables.install_wildcard_rack(sw, rack, nxt, now, match,
                                             setup=setup)
        for tor, host, rewrite in self.host_entries:
            tables.install_wildcard_host(tor, host,
                                         self.topology.hosts[host], now,
                                         rewrite=rewrite, setup=setup)


def build_forwarding_trees(topology: Topology, seed: int,
                           match_mode: str = "rack",
                           directory: "labels.HostDirectory | None" = None,
                           ) -> ForwardingTreeSet:
    if match_mode not in MATCH_MODES:
        raise ValueError(f"match_mode must be one of {MATCH_MODES}, "
                         f"got {match_mode!r}")
    rng = random.Random(seed)
    nracks = topology.rack_count
    next_hops: dict[int, dict[NodeId, NodeId | None]] = {
        i: {} for i in range(nracks)
    }
    drawn: dict[tuple[int, int], Path] = {}

    for i in range(nracks):  # destination-major, then source rack
        hops = next_hops[i]
        for j in range(nracks):
            if j == i:
                continue
            paths = topology.shortest_paths(j, i)
            path = paths[rng.randrange(len(paths))]
            drawn[(j, i)] = path
            nodes = path.nodes
            for k, sw in enumerate(nodes):
                if sw in hops:
                    continue  # first writer wins; tree stays consistent
                hops[sw] = nodes[k + 1] if k + 1 < len(nodes) else None

    tors = [topology.tor_of_rack(r) for r in range(nracks)]
    dist = {t: topology.switch_distances(t) for t in tors}
    completion: set[tuple[int, NodeId]] = set()
    for i in range(nracks):
        d_i = dist[tors[i]]
        hops = next_hops[i]
        pair_dist = [d_i[tors[j]] for j in range(nracks)]
        for sw in topology.switches:
            if sw == tors[i] or sw in hops:
                continue
            ds = d_i.get(sw)
            if not ds:
                continue
            # only switches some shortest source-to-i path could cross
            on_path = any(j != i and dist[tors[j]][sw] + ds == pair_dist[j]
                          for j in range(nracks))
            if not on_path:
                continue
            nxt = next(n for n in topology.switch_neighbors(sw)
                       if d_i.get(n) == ds - 1)
            hops[sw] = nxt
            completion.add((i, sw))

    host_entries: list[tuple[NodeId, int, tuple[int, int] | None]] = []
    if match_mode == "label" and directory is None:
        directory = labels.HostDirectory(topology)
    for tor, hosts in topology.racks:
        for h in hosts:
            rewrite = None
            if match_mode == "label":
                rewrite = (directory.label_of(h.index),
                           labels.flat_mac(h.index))
            host_entries.append((tor, h.index, rewrite))

    return ForwardingTreeSet(topology, seed, match_mode, next_hops,
                             host_entries, drawn, frozenset(completion))


def install_static_routes(tables: FlowTables, seed: int,
                          match_mode: str = "rack",
                          directory: "labels.HostDirectory | None" = None,
                          ) -> ForwardingTreeSet:
    """Build trees and install them as setup state at time zero."""
    trees = build_forwarding_trees(tables.topology, seed, match_mode,
                                   directory)
    trees.install_into(tables, 0.0, setup=True)
    return trees
