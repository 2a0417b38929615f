"""Tests for the elephant-detection oracle."""

import io

import pytest

from dctesim import detection, traffic
from dctesim.detection import DetectorConfig, ElephantReport, make_reports

THRESHOLD = 10_000_000


def synthetic_trace(n_elephants=1000, n_mice=1000, duration=100.0):
    """Deterministic trace with known elephant/mouse composition."""
    flows = []
    fid = 0
    for i in range(n_elephants):
        flows.append(traffic.FlowSpec(fid, round(i * duration / n_elephants, 6),
                                      0, 1, 20_000_000 + i))
        fid += 1
    for i in range(n_mice):
        flows.append(traffic.FlowSpec(fid, round(i * duration / n_mice, 6),
                                      1, 0, 1000 + i))
        fid += 1
    flows.sort(key=lambda f: (f.start_time, f.flow_id))
    return traffic.Trace(tuple(flows), duration)


@pytest.fixture(scope="module")
def trace():
    return synthetic_trace()


class TestIdentityConfig:
    """fn=0, fp=0, delay=0 reproduces ground truth exactly."""

    def test_one_report_per_elephant(self, trace):
        reports = make_reports(trace, DetectorConfig())
        elephants = {f.flow_id for f in trace.flows
                     if f.size_bytes > THRESHOLD}
        assert {r.flow_id for r in reports} == elephants
        assert len(reports) == len(elephants)

    def test_report_times_equal_start_times(self, trace):
        starts = {f.flow_id: f.start_time for f in trace.flows}
        for r in make_reports(trace, DetectorConfig()):
            assert r.report_time == starts[r.flow_id]

    def test_endpoints_and_truth_annotation(self, trace):
        by_id = {f.flow_id: f for f in trace.flows}
        for r in make_reports(trace, DetectorConfig()):
            spec = by_id[r.flow_id]
            assert (r.src_host, r.dst_host) == (spec.src_host, spec.dst_host)
            assert r.is_true_elephant is True


class TestErrorRates:
    def test_fn_rate_half_is_binomial(self, trace):
        # 1000 elephants missed with p=0.5: 3 sigma = 3*sqrt(1000*0.25) ~ 47
        reports = make_reports(trace, DetectorConfig(fn_rate=0.5))
        n_true = sum(1 for r in reports if r.is_true_elephant)
        assert n_true == len(reports)  # fp=0: no mice reported
        assert abs(n_true - 500) <= 3 * (1000 * 0.25) ** 0.5

    def test_fp_rate_half_is_binomial(self, trace):
        reports = make_reports(trace, DetectorConfig(fp_rate=0.5))
        n_false = sum(1 for r in reports if not r.is_true_elephant)
        assert len(reports) - n_false == 1000  # all elephants still reported
        assert abs(n_false - 500) <= 3 * (1000 * 0.25) ** 0.5

    def test_fn_sets_nest_as_rate_rises(self, trace):
        ids = {}
        for fn in (0.0, 0.25, 0.5, 0.75):
            reports = make_reports(trace, DetectorConfig(fn_rate=fn))
            ids[fn] = {r.flow_id for r in reports}
        assert ids[0.75] <= ids[0.5] <= ids[0.25] <= ids[0.0]

    def test_fp_sets_nest_as_rate_rises(self, trace):
        ids = {}
        for fp in (0.1, 0.5, 0.95):
            reports = make_reports(trace, DetectorConfig(fp_rate=fp))
            ids[fp] = {r.flow_id for r in reports}
        assert ids[0.1] <= ids[0.5] <= ids[0.95]

    def test_fn_one_reports_nothing(self, trace):
        assert make_reports(trace, DetectorConfig(fn_rate=1.0)) == []

    def test_fp_one_reports_every_mouse(self, trace):
        reports = make_reports(trace, DetectorConfig(fn_rate=1.0, fp_rate=1.0))
        mice = {f.flow_id for f in trace.flows if f.size_bytes <= THRESHOLD}
        assert {r.flow_id for r in reports} == mice
        assert all(not r.is_true_elephant for r in reports)

    def test_threshold_boundary_is_strict(self):
        flows = (traffic.FlowSpec(0, 0.0, 0, 1, THRESHOLD),
                 traffic.FlowSpec(1, 0.0, 0, 1, THRESHOLD + 1))
        trace = traffic.Trace(flows, 1.0)
        reports = make_reports(trace, DetectorConfig())
        assert [r.flow_id for r in reports] == [1]


class TestDelay:
    def test_delay_shifts_every_report_exactly(self, trace):
        base = make_reports(trace, DetectorConfig())
        delayed = make_reports(trace, DetectorConfig(delay_s=0.1))
        assert len(base) == len(delayed)
        by_id = {r.flow_id: r for r in delayed}
        for r in base:
            d = by_id[r.flow_id]
            assert d.report_time == pytest.approx(r.report_time + 0.1, abs=1e-12)

    def test_delay_does_not_change_which_flows_report(self, trace):
        for delay in (0.0, 0.1, 1.0, 1e6):
            reports = make_reports(trace, DetectorConfig(fn_rate=0.3,
                                                         delay_s=delay))
            assert {r.flow_id for r in reports} == {
                r.flow_id
                for r in make_reports(trace, DetectorConfig(fn_rate=0.3))}

    def test_reports_past_trace_end_still_emitted(self, trace):
        reports = make_reports(trace, DetectorConfig(delay_s=1e6))
        assert reports and all(r.report_time > trace.duration for r in reports)


class TestDeterminismAndOrder:
    def test_same_config_same_reports(self, trace):
        cfg = DetectorConfig(fn_rate=0.3, fp_rate=0.2, delay_s=0.5, seed=7)
        assert make_reports(trace, cfg) == make_reports(trace, cfg)

    def test_seed_changes_selection(self, trace):
        a = make_reports(trace, DetectorConfig(fn_rate=0.5, seed=0))
        b = make_reports(trace, DetectorConfig(fn_rate=0.5, seed=1))
        assert {r.flow_id for r in a} != {r.flow_id for r in b}

    def test_sorted_by_time_then_id(self, trace):
        reports = make_reports(trace, DetectorConfig(fp_rate=0.5, delay_s=0.2))
        keys = [(r.report_time, r.flow_id) for r in reports]
        assert keys == sorted(keys)

    def test_each_flow_reported_at_most_once(self, trace):
        reports = make_reports(trace, DetectorConfig(fp_rate=1.0))
        ids = [r.flow_id for r in reports]
        assert len(ids) == len(set(ids))

    def test_custom_threshold(self, trace):
        reports = make_reports(trace, DetectorConfig(), threshold_bytes=500)
        assert len(reports) == len(trace.flows)  # every flow exceeds 500 B


class TestSerialization:
    def test_round_trip(self, trace):
        reports = make_reports(trace, DetectorConfig(fp_rate=0.3, delay_s=0.25))
        buf = io.StringIO()
        detection.save_reports(reports, buf)
        buf.seek(0)
        assert detection.load_reports(buf, trace) == reports

    def test_round_trip_preserves_truth_annotation(self, trace):
        reports = make_reports(trace, DetectorConfig(fp_rate=0.5))
        buf = io.StringIO()
        detection.save_reports(reports, buf)
        buf.seek(0)
        loaded = detection.load_reports(buf, trace)
        assert ([r.is_true_elephant for r in loaded]
                == [r.is_true_elephant for r in reports])

    def test_bad_header_rejected(self, trace):
        buf = io.StringIO("flow,when\n1,0.5\n")
        with pytest.raises(ValueError, match="header"):
            detection.load_reports(buf, trace)

    def test_unknown_flow_rejected(self, trace):
        buf = io.StringIO(detection.REPORT_HEADER + "\n999999,0.5\n")
        with pytest.raises(ValueError, match="not in trace"):
            detection.load_reports(buf, trace)

    def test_wrong_field_count_rejected(self, trace):
        buf = io.StringIO(detection.REPORT_HEADER + "\n1,0.5,extra\n")
        with pytest.raises(ValueError, match="line 2"):
            detection.load_reports(buf, trace)


class TestConfigValidation:
    @pytest.mark.parametrize("kwargs", [
        {"fn_rate": -0.1}, {"fn_rate": 1.5},
        {"fp_rate": -0.01}, {"fp_rate": 2.0},
        {"delay_s": -1.0},
    ])
    def test_rejects_out_of_range(self, kwargs):
        with pytest.raises(ValueError):
            DetectorConfig(**kwargs)

    def test_rejects_nonpositive_threshold(self, trace):
        with pytest.raises(ValueError, match="threshold"):
            make_reports(trace, DetectorConfig(), threshold_bytes=0)
