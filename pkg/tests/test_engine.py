from __future__ import annotations

import random

import numpy as np
import pytest

from dctesim.engine import (
    Controller, ControllerActionError, EngineConfig, EventKind, EventQueue,
    Simulation, allocate_rates, run,
)
from dctesim.te_baselines import EcmpConfig, EcmpController
from dctesim.topology import build_clos
from dctesim.traffic import FlowSpec, Trace

from oracles import waterfill


def _trace(*flows: tuple[int, float, int, int, int],
           duration: float = 60.0) -> Trace:
    return Trace(tuple(FlowSpec(*f) for f in flows), duration)


# -- max-min fair allocation --------------------------------------------------


def test_two_flows_split_a_shared_link_evenly():
    rates = allocate_rates({"a": ("L",), "b": ("L",)}, {"L": 10e9})
    assert rates == {"a": 5e9, "b": 5e9}


def test_hand_computed_two_link_example():
    # A and B share L1 (10 Gbps); B alone crosses L2 (4 Gbps).  Filling
    # freezes B at 4 when L2 saturates, then A rises to the remaining 6.
    rates = allocate_rates({"A": ("L1",), "B": ("L1", "L2")},
                           {"L1": 10e9, "L2": 4e9})
    assert rates["B"] == pytest.approx(4e9, rel=1e-12)
    assert rates["A"] == pytest.approx(6e9, rel=1e-12)
    oracle = waterfill({"A": ("L1",), "B": ("L1", "L2")},
                       {"L1": 10e9, "L2": 4e9})
    assert rates["A"] == pytest.approx(oracle["A"], rel=1e-12)
    assert rates["B"] == pytest.approx(oracle["B"], rel=1e-12)


def test_zero_flows_empty_allocation():
    assert allocate_rates({}, {"L": 1e9}) == {}


def _random_instance(rng: random.Random):
    n_links = rng.randint(1, 6)
    links = [f"L{i}" for i in range(n_links)]
    caps = {l: rng.choice([1e9, 2.5e9, 4e9, 10e9]) * rng.uniform(0.5, 1.5)
            for l in links}
    flows = {f"f{i}": tuple(rng.sample(links, rng.randint(1, n_links)))
             for i in range(rng.randint(1, 8))}
    return flows, caps


def test_matches_waterfilling_oracle_on_random_instances():
    rng = random.Random(42)
    for _ in range(200):
        flows, caps = _random_instance(rng)
        got = allocate_rates(flows, caps)
        want = waterfill(flows, caps)
        assert got.keys() == want.keys()
        for f in got:
            assert got[f] == pytest.approx(want[f], rel=1e-9), (flows, caps)


def test_every_flow_crosses_a_saturated_bottleneck():
    rng = random.Random(7)
    for _ in range(50):
        flows, caps = _random_instance(rng)
        rates = allocate_rates(flows, caps)
        load = {l: 0.0 for l in caps}
        for f, ls in flows.items():
            for l in set(ls):
                load[l] += rates[f]
        for l in caps:
            assert load[l] <= caps[l] * (1 + 1e-9)
        for f, ls in flows.items():
            assert any(load[l] >= caps[l] * (1 - 1e-6) for l in set(ls)), \
                f"{f} has no bottleneck"


# -- event loop ---------------------------------------------------------------


def test_event_queue_tie_break_order():
    q = EventQueue()
    q.push(5.0, EventKind.POLL)
    q.push(5.0, EventKind.ARRIVAL, "a1")
    q.push(5.0, EventKind.TICK)
    q.push(5.0, EventKind.COMPLETION, "c")
    q.push(5.0, EventKind.REPORT, "r")
    q.push(5.0, EventKind.ARRIVAL, "a2")  # FIFO within a kind
    kinds = [q.pop() for _ in range(len(q))]
    assert [k for _, k, _ in kinds] == [
        EventKind.COMPLETION, EventKind.ARRIVAL, EventKind.ARRIVAL,
        EventKind.REPORT, EventKind.TICK, EventKind.POLL]
    assert kinds[1][2] == "a1" and kinds[2][2] == "a2"


@pytest.fixture
def idle_topology():
    return build_clos(2, 2, 4)  # 10 Gbps everywhere


def test_single_flow_fct_is_transfer_time(idle_topology):
    # 1 MB over an idle 10 Gbps network: 8e6 bits / 1e10 bps = 0.8 ms
    trace = _trace((0, 0.0, 0, 15, 1_000_000))
    result = run(idle_topology, trace, EcmpController())
    assert result.completed == 1
    assert result.flows[0].fct == pytest.approx(0.0008, rel=1e-12)
    assert result.mean_fct == pytest.approx(0.0008, rel=1e-12)


def test_shared_nic_flows_complete_together(idle_topology):
    # two 10 MB flows leaving one host NIC split it 5/5 the whole way down
    trace = _trace((0, 0.0, 0, 8, 10_000_000), (1, 0.0, 0, 12, 10_000_000))
    result = run(idle_topology, trace, EcmpController())
    assert result.completed == 2
    for rec in result.flows:
        assert rec.fct == pytest.approx(0.016, rel=1e-12)


def test_intra_rack_flow_touches_no_fabric_link(idle_topology):
    trace = _trace((0, 0.0, 0, 1, 10_000_000))
    result = run(idle_topology, trace, EcmpController())
    assert result.flows[0].fct == pytest.approx(0.008, rel=1e-12)
    for lid in range(len(idle_topology.links)):
        if idle_topology.is_fabric_link(lid):
            assert result.link_bytes[lid] == 0.0
    egress = idle_topology.host_egress[0]
    assert result.link_bytes[egress] == pytest.approx(10_000_000, abs=1e-3)


def test_end_time_marks_running_flows_incomplete(idle_topology):
    # the second flow stays within its rack so the first runs unimpeded
    trace = _trace((0, 0.0, 0, 8, 1_000_000),
                   (1, 0.0, 1, 2, 50_000_000_000))  # would need 40 s
    result = run(idle_topology, trace, EcmpController(), end_time=1.0)
    assert result.completed == 1
    assert result.incomplete == 1
    assert result.mean_fct == pytest.approx(0.0008, rel=1e-12)
    assert result.duration == 1.0


def test_flow_outside_topology_rejected(idle_topology):
    trace = _trace((0, 0.0, 0, 99, 1000))
    with pytest.raises(ValueError, match="outside"):
        Simulation(idle_topology, trace, EcmpController())


def test_simulation_is_single_use(idle_topology):
    sim = Simulation(idle_topology, _trace((0, 0.0, 0, 8, 1000)),
                     EcmpController())
    sim.run()
    with pytest.raises(RuntimeError, match="single-use"):
        sim.run()


class _RogueController(Controller):
    def on_flow_arrival(self, flow_id, src_host, dst_host):
        paths = self.ctx.shortest_paths(0, 3)
        self.ctx.install_exact_route(999, paths[0])  # no such flow


def test_unknown_flow_action_is_hard_error(idle_topology):
    trace = _trace((0, 0.0, 0, 15, 1000))
    with pytest.raises(ControllerActionError):
        run(idle_topology, trace, _RogueController())


class _WrongRackController(Controller):
    def on_flow_arrival(self, flow_id, src_host, dst_host):
        self.ctx.install_exact_route(flow_id, self.ctx.shortest_paths(0, 1)[0])


def test_mismatched_route_is_hard_error(idle_topology):
    trace = _trace((0, 0.0, 0, 15, 1000))  # rack 0 -> rack 3
    with pytest.raises(ControllerActionError, match="does not connect"):
        run(idle_topology, trace, _WrongRackController())


def test_replay_is_bit_identical(idle_topology):
    trace = Trace(tuple(
        FlowSpec(i, round(i * 0.037, 6), i % 16, (i * 7 + 3) % 16, 50_000 + i)
        for i in range(0, 300) if i % 16 != (i * 7 + 3) % 16), 60.0)
    r1 = run(idle_topology, trace, EcmpController(EcmpConfig(seed=5)))
    r2 = run(idle_topology, trace, EcmpController(EcmpConfig(seed=5)))
    assert [f.fct for f in r1.flows] == [f.fct for f in r2.flows]
    assert np.array_equal(r1.link_bytes, r2.link_bytes)
    assert r1.decision_log == r2.decision_log
    assert r1.mean_fct == r2.mean_fct


# -- integration accounting ----------------------------------------------------


def _busy_trace(topo, seed=0, n=400, duration=20.0):
    rng = random.Random(seed)
    flows = []
    for i in range(n):
        src = rng.randrange(topo.host_count)
        dst = rng.randrange(topo.host_count - 1)
        if dst >= src:
            dst += 1
        size = rng.choice([5_000, 80_000, 2_000_000, 40_000_000])
        flows.append(FlowSpec(i, round(rng.uniform(0, duration * 0.6), 6),
                              src, dst, size))
    flows.sort(key=lambda f: (f.start_time, f.flow_id))
    return Trace(tuple(flows), duration)


def test_conservation_capacity_and_counter_consistency(idle_topology):
    topo = idle_topology
    trace = _busy_trace(topo)
    delivered = {f.flow_id: 0.0 for f in trace.flows}
    link_acc = np.zeros(len(topo.links))
    caps = np.array(topo.capacities) / 8.0  # bytes/s

    def hook(t0, t1, rows):
        dt = t1 - t0
        per_link = np.zeros(len(topo.links))
        for fid, rate, links in rows:
            delivered[fid] += rate * dt
            for l in links:
                per_link[l] += rate
        link_acc[:] = link_acc + per_link * dt
        assert np.all(per_link <= caps * (1 + 1e-9)), "capacity violated"

    result = run(topo, trace, EcmpController(),
                 config=EngineConfig(interval_hook=hook))
    assert result.incomplete == 0
    by_id = {f.flow_id: f for f in result.flows}
    for f in trace.flows:
        # conservation: integrated rate equals the payload
        assert delivered[f.flow_id] == pytest.approx(f.size_bytes, abs=1.0)
        assert by_id[f.flow_id].fct is not None
    # counter consistency: < 1 KB drift per simulated minute
    assert np.max(np.abs(link_acc - result.link_bytes)) < 1024.0


def test_engine_rates_match_public_allocator(idle_topology):
    # the event loop's inline progressive filling must agree exactly with
    # the standalone allocate_rates on every inter-event snapshot
    topo = idle_topology
    trace = _busy_trace(topo, seed=3, n=250)
    checked = 0

    def hook(t0, t1, rows):
        nonlocal checked
        if not rows or checked > 400:
            return
        flow_links = {fid: links for fid, links, in
                      ((fid, links) for fid, _, links in rows)}
        caps = {l: topo.capacities[l] for links in flow_links.values()
                for l in links}
        want = allocate_rates(flow_links, caps)
        for fid, rate, _ in rows:
            assert rate == want[fid] / 8.0, (t0, fid)
        checked += 1

    run(topo, trace, EcmpController(), config=EngineConfig(interval_hook=hook))
    assert checked > 100


def test_occupancy_series_sampled_each_interval(idle_topology):
    trace = _trace((0, 0.0, 0, 8, 30_000_000_000))  # runs ~24 s
    result = run(idle_topology, trace, EcmpController(),
                 config=EngineConfig(stats_interval_s=1.0))
    times = sorted({t for t, _, _, _ in result.occupancy_series})
    # sampled at 1, 2, ... strictly before the final completion instant
    # (the loop stops once the last flow finishes)
    assert times == [float(i) for i in range(1, 30) if i < result.duration]
    switches = {sw for _, sw, _, _ in result.occupancy_series}
    assert len(switches) == len(idle_topology.switches)
