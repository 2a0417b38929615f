from __future__ import annotations

import io

import pytest

from dctesim.flowtable import (
    ExactEntry, FlowTables, RoutingBlackHole, RoutingLoop, route_lookup,
)
from dctesim.static_routing import install_static_routes
from dctesim.topology import NodeId, NodeKind


@pytest.fixture
def routed_tables(small_topology):
    tables = FlowTables(small_topology, idle_timeout=5.0)
    trees = install_static_routes(tables, seed=17)
    return tables, trees


def _hand_walk(tables, flow_id, src_host, dst_host):
    """Independent hop-by-hop table walk (the lookup oracle)."""
    topo = tables.topology
    cur = topo.tor_of_host(src_host)
    dst_tor = topo.tor_of_host(dst_host)
    dst_rack = topo.rack_of_host(dst_host)
    nodes = [cur]
    while cur != dst_tor:
        table = tables.tables[cur]
        exact = table.exacts.get(flow_id)
        if exact is not None and exact.next_hop is not None:
            cur = exact.next_hop
        else:
            cur = table.wildcard_racks[dst_rack].next_hop
        nodes.append(cur)
        assert len(nodes) <= len(topo.switches), "walk did not terminate"
    return tuple(nodes)


def test_wildcard_only_lookup_follows_tree(routed_tables):
    tables, trees = routed_tables
    topo = tables.topology
    src, dst = 0, topo.host_count - 1  # cross-pod pair
    path = route_lookup(tables, flow_id=1, src_host=src, dst_host=dst)
    assert path.nodes == _hand_walk(tables, 1, src, dst)
    assert path == trees.drawn_paths[(topo.rack_of_host(src),
                                      topo.rack_of_host(dst))]


def test_intra_rack_lookup_is_none(routed_tables):
    tables, _ = routed_tables
    assert route_lookup(tables, 5, src_host=0, dst_host=1) is None


def test_exact_route_overrides_tree_for_that_flow_only(routed_tables):
    tables, _ = routed_tables
    topo = tables.topology
    src, dst = 0, topo.host_count - 1
    tree_path = route_lookup(tables, 1, src, dst)
    alternates = [p for p in topo.shortest_paths(topo.rack_of_host(src),
                                                 topo.rack_of_host(dst))
                  if p != tree_path]
    alt = alternates[0]
    for a, b in zip(alt.nodes, alt.nodes[1:]):
        tables.install_exact(a, 1, b, now=0.0, base_delivered=0.0)
    tables.install_exact(alt.nodes[-1], 1, None, now=0.0, base_delivered=0.0)
    assert route_lookup(tables, 1, src, dst) == alt
    assert route_lookup(tables, 2, src, dst) == tree_path  # others unchanged


def test_partial_exact_entries_splice_onto_tree(routed_tables):
    # exact entries on only the first two hops of an alternate route; the
    # rest of the walk must fall back to the destination's tree
    tables, _ = routed_tables
    topo = tables.topology
    src, dst = 0, topo.host_count - 1
    src_rack, dst_rack = topo.rack_of_host(src), topo.rack_of_host(dst)
    tree_path = route_lookup(tables, 9, src, dst)
    alt = next(p for p in topo.shortest_paths(src_rack, dst_rack)
               if p.nodes[1] != tree_path.nodes[1]
               and p.nodes[2] != tree_path.nodes[2])
    tables.install_exact(alt.nodes[0], 9, alt.nodes[1], 0.0, 0.0)
    tables.install_exact(alt.nodes[1], 9, alt.nodes[2], 0.0, 0.0)
    got = route_lookup(tables, 9, src, dst)
    # hand-computed splice: two exact hops, then wildcard entries onward
    expect = [alt.nodes[0], alt.nodes[1], alt.nodes[2]]
    cur = alt.nodes[2]
    while cur != topo.tor_of_rack(dst_rack):
        cur = tables.tables[cur].wildcard_racks[dst_rack].next_hop
        expect.append(cur)
    assert got.nodes == tuple(expect)
    assert got.nodes == _hand_walk(tables, 9, src, dst)


def test_black_hole_without_static_routes(small_topology):
    tables = FlowTables(small_topology)
    with pytest.raises(RoutingBlackHole):
        route_lookup(tables, 1, 0, small_topology.host_count - 1)


def test_exact_cycle_raises_loop(routed_tables):
    tables, _ = routed_tables
    topo = tables.topology
    src, dst = 0, topo.host_count - 1
    tor = topo.tor_of_host(src)
    pod = topo.switch_neighbors(tor)[0]
    tables.install_exact(tor, 3, pod, 0.0, 0.0)
    tables.install_exact(pod, 3, tor, 0.0, 0.0)  # bounces straight back
    with pytest.raises(RoutingLoop):
        route_lookup(tables, 3, src, dst)


def test_one_wildcard_entry_per_switch_rack(routed_tables):
    tables, _ = routed_tables
    sw = tables.topology.tors[0]
    count = tables.tables[sw].wildcard_count()
    installs = tables.stats[sw].installs
    tables.install_wildcard_rack(sw, 2, tables.topology.pod_switches[0], 1.0)
    assert tables.tables[sw].wildcard_count() == count  # replaced, not added
    assert tables.stats[sw].installs == installs + 1
    assert tables.stats[sw].removals == 1


def test_exact_reinstall_replaces_and_continues_counter(small_topology):
    tables = FlowTables(small_topology, idle_timeout=5.0)
    sw = small_topology.pod_switches[0]
    nxt = small_topology.cores[0]
    e1 = tables.install_exact(sw, 7, nxt, now=0.0, base_delivered=100.0)
    assert e1.bytes_matched(delivered_now=400.0) == 300.0
    e2 = tables.install_exact(sw, 7, small_topology.cores[1], now=1.0,
                              base_delivered=400.0)
    assert len(tables.tables[sw].exacts) == 1
    # the counter keeps counting from the same delivered baseline
    assert e2.bytes_matched(delivered_now=900.0) == 800.0
    assert tables.stats[sw].installs == 2
    assert tables.stats[sw].removals == 1


def test_freeze_pins_counter_and_starts_timeout():
    sw = NodeId(NodeKind.POD, 0)
    entry = ExactEntry(sw, 1, None, install_time=0.0, idle_timeout=5.0,
                       base_delivered=0.0)
    assert not entry.expired(1e9)  # never expires while still matching
    entry.freeze(now=2.0, delivered_now=1234.0)
    assert entry.bytes_matched(delivered_now=99999.0) == 1234.0
    assert not entry.expired(7.0)  # timeout measured from the freeze
    assert entry.expired(7.0 + 1e-9)


def test_reinstall_after_freeze_carries_frozen_bytes(small_topology):
    tables = FlowTables(small_topology, idle_timeout=5.0)
    sw = small_topology.pod_switches[1]
    e1 = tables.install_exact(sw, 4, None, now=0.0, base_delivered=0.0)
    e1.freeze(now=3.0, delivered_now=500.0)
    e2 = tables.install_exact(sw, 4, None, now=4.0, base_delivered=500.0)
    assert e2.bytes_matched(delivered_now=700.0) == 700.0  # 500 carried


def test_purge_expired_updates_occupancy(small_topology):
    tables = FlowTables(small_topology, idle_timeout=2.0)
    sw = small_topology.cores[0]
    tables.install_exact(sw, 1, None, now=0.0, base_delivered=0.0)
    e = tables.install_exact(sw, 2, None, now=0.0, base_delivered=0.0)
    e.freeze(1.0, 0.0)
    assert tables.tables[sw].exact_live_count(4.0) == 1
    assert len(list(tables.live_exact_entries(4.0))) == 1
    tables.purge_expired(4.0)
    assert set(tables.tables[sw].exacts) == {1}
    stats = tables.stats[sw]
    # occupancy equals installs minus removals at all times
    assert len(tables.tables[sw].exacts) == stats.installs - stats.removals


def test_setup_installs_not_rate_bucketed(routed_tables):
    tables, _ = routed_tables
    for sw, stats in tables.stats.items():
        assert stats.setup_installs == stats.installs
        assert not stats.install_buckets
    sw = tables.topology.tors[0]
    tables.install_exact(sw, 11, None, now=3.7, base_delivered=0.0)
    assert dict(tables.stats[sw].install_buckets) == {3: 1}


def test_unknown_switch_rejected(small_topology):
    tables = FlowTables(small_topology)
    ghost = NodeId(NodeKind.CORE, 99)
    with pytest.raises(ValueError, match="unknown switch"):
        tables.install_exact(ghost, 1, None, 0.0, 0.0)


def test_dump_entry_format(routed_tables):
    tables, _ = routed_tables
    buf = io.StringIO()
    tables.dump_entries(buf)
    lines = buf.getvalue().splitlines()
    total_wildcards = sum(t.wildcard_count()
                          for t in tables.tables.values())
    assert len(lines) == total_wildcards
    assert all(len(line.split(",")) == 3 for line in lines)
