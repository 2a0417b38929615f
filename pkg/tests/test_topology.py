from __future__ import annotations

import io
import itertools

import pytest

from dctesim.topology import NodeId, NodeKind, build_clos

from oracles import all_shortest_switch_paths


def test_full_scale_counts():
    topo = build_clos(9, 8, 20)
    assert topo.rack_count == 72
    assert topo.host_count == 1440


def test_minimal_instance_wiring():
    topo = build_clos(1, 1, 1)
    assert topo.rack_count == 1 and topo.host_count == 1
    tor = topo.tors[0]
    assert set(topo.switch_neighbors(tor)) == set(topo.pod_switches)
    for sw in topo.pod_switches:
        assert set(topo.cores) <= set(topo.switch_neighbors(sw))


def test_small_instance_hand_counted_links():
    topo = build_clos(2, 2, 4)
    assert topo.rack_count == 4
    assert topo.host_count == 16
    assert len(topo.switches) == 4 + 4 + 2
    # wiring rule, counted by hand: 16 host-ToR + 4 ToRs x 2 pod switches
    # + 4 pod switches x 2 cores = 32 undirected = 64 directed links
    assert len(topo.links) == 2 * (16 + 4 * 2 + 4 * 2)


@pytest.mark.parametrize("bad", [
    dict(pods=0, racks_per_pod=1, hosts_per_rack=1),
    dict(pods=1, racks_per_pod=0, hosts_per_rack=1),
    dict(pods=1, racks_per_pod=1, hosts_per_rack=0),
    dict(pods=1, racks_per_pod=1, hosts_per_rack=1, pod_switches_per_pod=0),
    dict(pods=1, racks_per_pod=1, hosts_per_rack=1, core_switches=0),
])
def test_zero_counts_rejected(bad):
    with pytest.raises(ValueError):
        build_clos(**bad)


@pytest.mark.parametrize("caps", [dict(host_link_capacity=0.0),
                                  dict(fabric_link_capacity=-1.0)])
def test_nonpositive_capacities_rejected(caps):
    with pytest.raises(ValueError):
        build_clos(2, 2, 2, **caps)


def test_same_pod_pair_has_two_three_hop_paths(desk_topology):
    paths = desk_topology.shortest_paths(0, 1)  # racks 0,1 share pod 0
    assert desk_topology.pod_of_rack(0) == desk_topology.pod_of_rack(1)
    assert len(paths) == 2
    assert all(len(p.nodes) == 3 for p in paths)


def test_cross_pod_pair_has_eight_five_hop_paths(desk_topology):
    src, dst = 0, desk_topology.racks_per_pod  # first rack of pods 0 and 1
    assert desk_topology.pod_of_rack(src) != desk_topology.pod_of_rack(dst)
    paths = desk_topology.shortest_paths(src, dst)
    assert len(paths) == 8  # 2 source pod switches x 2 cores x 2 dest pod
    assert all(len(p.nodes) == 5 for p in paths)


def test_same_rack_yields_no_paths(desk_topology):
    assert desk_topology.shortest_paths(2, 2) == ()


def test_paths_match_bfs_oracle_on_small_topologies():
    shapes = [(1, 2, 1), (1, 3, 1), (2, 2, 1), (2, 3, 1), (3, 2, 1), (6, 1, 1)]
    variants = [(1, 1), (1, 2), (2, 1), (2, 2), (3, 2), (2, 3)]
    for (pods, rpp, hpr), (psw, cores) in itertools.product(shapes, variants):
        topo = build_clos(pods, rpp, hpr, psw, cores)
        for i, j in itertools.permutations(range(topo.rack_count), 2):
            got = topo.shortest_paths(i, j)
            assert {p.nodes for p in got} == \
                all_shortest_switch_paths(topo, i, j), (pods, rpp, psw,
                                                        cores, i, j)
            assert list(got) == sorted(got)  # deterministic lexicographic


def test_path_structure_invariants(desk_topology):
    topo = desk_topology
    for i, j in [(0, 3), (0, 7), (5, 14)]:
        for p in topo.shortest_paths(i, j):
            assert len(set(p.nodes)) == len(p.nodes)
            for (a, b), lid in zip(zip(p.nodes, p.nodes[1:]), p.link_ids):
                link = topo.links[lid]
                assert (link.src, link.dst) == (a, b)


def test_shortest_paths_cached(desk_topology):
    assert desk_topology.shortest_paths(0, 5) is \
        desk_topology.shortest_paths(0, 5)


def test_build_is_referentially_transparent():
    a = build_clos(2, 3, 4, 2, 3, 1e9, 2e9)
    b = build_clos(2, 3, 4, 2, 3, 1e9, 2e9)
    assert a.links == b.links
    assert a.capacities == b.capacities
    assert a.hosts == b.hosts and a.switches == b.switches


def test_scaled_fabric_divides_only_fabric_links():
    base = build_clos(2, 2, 2, host_link_capacity=10e9,
                      fabric_link_capacity=10e9)
    scaled = base.with_scaled_fabric(2.0)
    assert scaled.links != base.links  # capacities differ
    for lid, (old, new) in enumerate(zip(base.links, scaled.links)):
        assert (old.src, old.dst) == (new.src, new.dst)
        if base.is_fabric_link(lid):
            assert new.capacity == old.capacity / 2.0
        else:
            assert new.capacity == old.capacity
    assert base.capacities == build_clos(2, 2, 2).capacities  # untouched


def test_fabric_link_classification(small_topology):
    topo = small_topology
    for lid, link in enumerate(topo.links):
        is_host_side = NodeKind.HOST in (link.src.kind, link.dst.kind)
        assert topo.is_fabric_link(lid) == (not is_host_side)


def test_structure_lookups(desk_topology):
    topo = desk_topology
    assert topo.rack_of_host(0) == 0
    assert topo.rack_of_host(topo.hosts_per_rack) == 1
    assert topo.tor_of_host(0) == NodeId(NodeKind.TOR, 0)
    assert topo.pod_of_rack(topo.racks_per_pod) == 1
    assert topo.nic_capacity(3) == topo.host_link_capacity


def test_adjacency_dump_format(small_topology):
    buf = io.StringIO()
    small_topology.write_adjacency(buf)
    lines = buf.getvalue().splitlines()
    assert len(lines) == len(small_topology.links)
    node, node2, cap = lines[0].split()
    assert float(cap) > 0 and node != node2
