"""Three-layer Clos-like topology: hosts, ToR/pod/core switches, directed links.

The fabric is built by :func:`build_clos`: every host attaches to its rack's
ToR, every ToR connects to all pod switches of its pod, and every pod switch
connects to every core switch.  Links are directed (full duplex modeled as two
independent directed links) and at most one link exists per directed node
pair.  Shortest paths are enumerated ToR-to-ToR and cached per rack pair.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import IntEnum
from typing import IO


class NodeKind(IntEnum):
    HOST = 0
    TOR = 1
    POD = 2
    CORE = 3


_KIND_LABELS = {NodeKind.HOST: "h", NodeKind.TOR: "tor",
                NodeKind.POD: "pod", NodeKind.CORE: "core"}


@dataclass(frozen=True, order=True)
class NodeId:
    """Typed node handle; ordering is (kind, index) and is used for all
    deterministic tie-breaking."""

    kind: NodeKind
    index: int

    def __str__(self) -> str:
        return f"{_KIND_LABELS[self.kind]}{self.index}"

    def __repr__(self) -> str:
        return f"NodeId({self})"


@dataclass(frozen=True)
class Link:
    """One directed link with an independent capacity in bits/second."""

    src: NodeId
    dst: NodeId
    capacity: float


@dataclass(frozen=True, order=True)
class Path:
    """A ToR-to-ToR switch path.

    ``nodes`` are the traversed switches in order; ``link_ids`` the directed
    links between consecutive nodes.  Construct through
    :meth:`Topology.make_path` so the link derivation stays consistent.
    """

    nodes: tuple[NodeId, ...]
    link_ids: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.nodes)

    def __str__(self) -> str:
        return ">".join(str(n) for n in self.nodes)


class Topology:
    """Immutable fabric description plus derived lookup tables.

    Do not mutate after construction; controllers and the engine share one
    instance and rely on the caches.  Use :meth:`with_scaled_fabric` to get a
    load-scaled variant.
    """

    def __init__(self, *, pods: int, racks_per_pod: int, hosts_per_rack: int,
                 pod_switches_per_pod: int, core_switches: int,
                 host_link_capacity: float, fabric_link_capacity: float):
        if min(pods, racks_per_pod, hosts_per_rack,
               pod_switches_per_pod, core_switches) < 1:
            raise ValueError("all topology counts must be >= 1")
        if host_link_capacity <= 0 or fabric_link_capacity <= 0:
            raise ValueError("link capacities must be positive")

        self.pods_count = pods
        self.racks_per_pod = racks_per_pod
        self.hosts_per_rack = hosts_per_rack
        self.pod_switches_per_pod = pod_switches_per_pod
        self.core_switches_count = core_switches
        self.host_link_capacity = float(host_link_capacity)
        self.fabric_link_capacity = float(fabric_link_capacity)

        self.rack_count = pods * racks_per_pod
        self.host_count = self.rack_count * hosts_per_rack

        self.hosts = [NodeId(NodeKind.HOST, i) for i in range(self.host_count)]
        self.tors = [NodeId(NodeKind.TOR, r) for r in range(self.rack_count)]
        self.pod_switches = [NodeId(NodeKind.POD, s)
                             for s in range(pods * pod_switches_per_pod)]
        self.cores = [NodeId(NodeKind.CORE, c) for c in range(core_switches)]
        self.switches = self.tors + self.pod_switches + self.cores
        self.nodes = self.hosts + self.switches

        # racks: (tor, member hosts); pods: (pod switches, member rack ids)
        self.racks = [
            (self.tors[r],
             tuple(self.hosts[r * hosts_per_rack + k] for k in range(hosts_per_rack)))
            for r in range(self.rack_count)
        ]
        self.pods = [
            (tuple(self.pod_switches[p * pod_switches_per_pod + s]
                   for s in range(pod_switches_per_pod)),
             tuple(range(p * racks_per_pod, (p + 1) * racks_per_pod)))
            for p in range(pods)
        ]

        links: list[Link] = []

        def connect(a: NodeId, b: NodeId, cap: float) -> None:
            links.append(Link(a, b, cap))
            links.append(Link(b, a, cap))

        for r in range(self.rack_count):
            tor, members = self.racks[r]
            for h in members:
                connect(h, tor, self.host_link_capacity)
        for r in range(self.rack_count):
            pod = r // racks_per_pod
            for sw in self.pods[pod][0]:
                connect(self.tors[r], sw, self.fabric_link_capacity)
        for sw in self.pod_switches:
            for core in self.cores:
                connect(sw, core, self.fabric_link_capacity)

        self.links: tuple[Link, ...] = tuple(links)
        self.link_index: dict[tuple[NodeId, NodeId], int] = {
            (l.src, l.dst): i for i, l in enumerate(self.links)
        }
        if len(self.link_index) != len(self.links):
            raise ValueError("duplicate directed link")
        self.capacities: tuple[float, ...] = tuple(l.capacity for l in self.links)

        # adjacency over switches only (paths never transit hosts)
        adj: dict[NodeId, list[NodeId]] = {sw: [] for sw in self.switches}
        for l in self.links:
            if l.src.kind != NodeKind.HOST and l.dst.kind != NodeKind.HOST:
                adj[l.src].append(l.dst)
        self._switch_adj = {sw: sorted(n) for sw, n in adj.items()}

        # per-host access link ids
        self.host_egress = [self.link_index[(h, self.tor_of_host(h.index))]
                            for h in self.hosts]
        self.host_ingress = [self.link_index[(self.tor_of_host(h.index), h)]
                             for h in self.hosts]

        self._sp_cache: dict[tuple[int, int], tuple[Path, ...]] = {}
        self._dist_cache: dict[NodeId, dict[NodeId, int]] = {}

    # -- structure lookups ------------------------------------------------

    def rack_of_host(self, host: int) -> int:
        if not 0 <= host < self.host_count:
            raise ValueError(f"unknown host index {host}")
        return host // self.hosts_per_rack

    def tor_of_rack(self, rack: int) -> NodeId:
        if not 0 <= rack < self.rack_count:
            raise ValueError(f"unknown rack index {rack}")
        return self.tors[rack]

    def tor_of_host(self, host: int) -> NodeId:
        return self.tor_of_rack(self.rack_of_host(host))

    def pod_of_rack(self, rack: int) -> int:
        return rack // self.racks_per_pod

    def nic_capacity(self, host: int) -> float:
        return self.links[self.host_egress[host]].capacity

    def is_fabric_link(self, link_id: int) -> bool:
        l = self.links[link_id]
        return l.src.kind != NodeKind.HOST and l.dst.kind != NodeKind.HOST

    # -- paths -------------------------------------------------------------

    def make_path(self, nodes: list[NodeId] | tuple[NodeId, ...]) -> Path:
        """Build a Path from a node sequence, validating adjacency."""
        nodes = tuple(nodes)
        if len(nodes) < 1:
            raise ValueError("empty path")
        if len(set(nodes)) != len(nodes):
            raise ValueError(f"path revisits a node: {nodes}")
        link_ids = []
        for a, b in zip(nodes, nodes[1:]):
            lid = self.link_index.get((a, b))
            if lid is None:
                raise ValueError(f"no link {a}->{b}")
            link_ids.append(lid)
        return Path(nodes, tuple(link_ids))

    def switch_neighbors(self, switch: NodeId) -> list[NodeId]:
        """Adjacent switches (hosts excluded), in NodeId order."""
        try:
            return self._switch_adj[switch]
        except KeyError:
            raise ValueError(f"{switch} is not a switch") from None

    def switch_distances(self, target: NodeId) -> dict[NodeId, int]:
        """Hop distance from every switch to ``target`` over the switch graph."""
        cached = self._dist_cache.get(target)
        if cached is not None:
            return cached
        dist = {target: 0}
        q = deque([target])
        while q:
            u = q.popleft()
            for v in self._switch_adj[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    q.append(v)
        self._dist_cache[target] = dist
        return dist

    def shortest_paths(self, rack_src: int, rack_dst: int) -> tuple[Path, ...]:
        """All equal-cost shortest ToR-to-ToR paths from rack_src to rack_dst.

        Returned in lexicographic node order; the same rack yields an empty
        tuple (no fabric traversal).  Results are cached.
        """
        key = (rack_src, rack_dst)
        cached = self._sp_cache.get(key)
        if cached is not None:
            return cached
        src = self.tor_of_rack(rack_src)
        dst = self.tor_of_rack(rack_dst)
        if src == dst:
            paths: tuple[Path, ...] = ()
        else:
            dist_to_dst = self.switch_distances(dst)
            dist_from_src = self.switch_distances(src)  # undirected-symmetric
            total = dist_from_src[dst]
            out: list[Path] = []
            stack: list[NodeId] = [src]

            def expand() -> None:
                u = stack[-1]
                if u == dst:
                    out.append(self.make_path(stack))
                    return
                for v in self._switch_adj[u]:
                    if (dist_from_src.get(v) == dist_from_src[u] + 1
                            and dist_from_src[v] + dist_to_dst.get(v, 1 << 30) == total):
                        stack.append(v)
                        expand()
                        stack.pop()

            expand()
            paths = tuple(out)
        self._sp_cache[key] = paths
        return paths

    # -- derived variants & dumps -------------------------------------------

    def with_scaled_fabric(self, divisor: float) -> "Topology":
        """A structurally identical topology with fabric capacities divided by
        ``divisor``; host access links keep their capacity."""
        if divisor <= 0:
            raise ValueError("fabric capacity divisor must be positive")
        return Topology(
            pods=self.pods_count, racks_per_pod=self.racks_per_pod,
            hosts_per_rack=self.hosts_per_rack,
            pod_switches_per_pod=self.pod_switches_per_pod,
            core_switches=self.core_switches_count,
            host_link_capacity=self.host_link_capacity,
            fabric_link_capacity=self.fabric_link_capacity / divisor,
        )

    def write_adjacency(self, fp: IO[str]) -> None:
        """Debug dump: one directed link per line, `<node> <node> <capacity_bps>`."""
        for l in self.links:
            fp.write(f"{l.src} {l.dst} {l.capacity!r}\n")


def build_clos(pods: int, racks_per_pod: int, hosts_per_rack: int,
               pod_switches_per_pod: int = 2, core_switches: int = 2,
               host_link_capacity: float = 10e9,
               fabric_link_capacity: float = 10e9) -> Topology:
    """Construct the three-layer topology.  Referentially transparent:
    identical arguments produce structurally identical topologies."""
    return Topology(
        pods=pods, racks_per_pod=racks_per_pod, hosts_per_rack=hosts_per_rack,
        pod_switches_per_pod=pod_switches_per_pod, core_switches=core_switches,
        host_link_capacity=host_link_capacity,
        fabric_link_capacity=fabric_link_capacity,
    )
