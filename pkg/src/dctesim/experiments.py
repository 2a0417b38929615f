"""Experiment harness: configs, single cells, sweeps, and CSV outputs.

A cell is one simulation: (scheme, load level, seed).  A sweep is the cross
product of those axes over one shared topology and traffic model.  Within a
seed, every scheme consumes the identical trace, and detector reports are
cached per (seed, fn, fp, delay) so comparisons are paired.  All randomness
derives from the named seeds: the trace, the forwarding trees, and the ECMP
hash use the cell seed directly, the detector uses seed + 7777 so detector
noise is independent of the traffic draw.

Cell outputs: ``result_<cell>.csv`` (metric,value), ``flows_<cell>.csv``
(flow_id,start_s,fct_s,bytes,scheme), ``decisions_<cell>.csv``,
``occupancy_<cell>.csv``, ``installs_<cell>.csv``; plus one ``aggregate.csv``
row per completed cell and ``failed_cells.csv`` when cells error.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path as FsPath
from typing import IO, Mapping, Sequence

from . import detection, traffic
from .engine import Controller, EngineConfig, SimulationResult, Simulation
from .te_baselines import (EcmpConfig, EcmpController, HederaStyleConfig,
                           HederaStyleController)
from .te_hybrid import HybridTEConfig, HybridTEController
from .topology import Topology, build_clos

DETECTOR_SEED_OFFSET = 7777
SCHEME_KINDS = ("ecmp", "hedera", "hybrid")

AGGREGATE_COLUMNS = (
    "cell", "scheme", "load_level", "seed", "flows_total", "completed",
    "incomplete", "mean_fct_s", "median_fct_s", "p99_fct_s", "duration_s",
    "setup_installs", "exact_installs", "max_install_rate_per_s",
    "exact_entry_hwm", "tracked_elephant_hwm", "gff_reroutes",
    "reactive_placements", "trace_digest",
)


class ConfigError(ValueError):
    """Configuration problem, message prefixed with the dotted key path."""


_MISSING = object()


class _Reader:
    """Pops typed values out of a config dict, naming offending keys."""

    def __init__(self, data, path: str = ""):
        if not isinstance(data, dict):
            raise ConfigError(f"{path or 'config'}: expected an object, "
                              f"got {type(data).__name__}")
        self.data = dict(data)
        self.path = path

    def _name(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def take(self, key: str, kind: str, default=_MISSING):
        if key not in self.data:
            if default is _MISSING:
                raise ConfigError(f"{self._name(key)}: required key missing")
            return default
        value = self.data.pop(key)
        name = self._name(key)
        if kind == "number":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{name}: expected a number, got {value!r}")
            return float(value)
        if kind == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{name}: expected an integer, got {value!r}")
            return value
        if kind == "bool":
            if not isinstance(value, bool):
                raise ConfigError(f"{name}: expected true/false, got {value!r}")
            return value
        if kind == "str":
            if not isinstance(value, str):
                raise ConfigError(f"{name}: expected a string, got {value!r}")
            return value
        if kind == "list":
            if not isinstance(value, list):
                raise ConfigError(f"{name}: expected a list, got {value!r}")
            return value
        if kind == "number?":
            if value is None:
                return None
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{name}: expected a number or null, "
                                  f"got {value!r}")
            return float(value)
        if kind == "str?":
            if value is None or isinstance(value, str):
                return value
            raise ConfigError(f"{name}: expected a string or null, "
                              f"got {value!r}")
        raise AssertionError(kind)

    def sub(self, key: str) -> "_Reader":
        return _Reader(self.data.pop(key, {}), self._name(key))

    def finish(self) -> None:
        if self.data:
            raise ConfigError(f"{self._name(next(iter(self.data)))}: "
                              f"unknown key")


@dataclass(frozen=True)
class TopologyParams:
    pods: int = 4
    racks_per_pod: int = 4
    hosts_per_rack: int = 10
    pod_switches_per_pod: int = 2
    core_switches: int = 2
    host_link_gbps: float = 10.0
    fabric_link_gbps: float = 10.0

    def build(self) -> Topology:
        return build_clos(self.pods, self.racks_per_pod, self.hosts_per_rack,
                          pod_switches_per_pod=self.pod_switches_per_pod,
                          core_switches=self.core_switches,
                          host_link_capacity=self.host_link_gbps * 1e9,
                          fabric_link_capacity=self.fabric_link_gbps * 1e9)

    @staticmethod
    def from_reader(r: _Reader) -> "TopologyParams":
        d = TopologyParams()
        out = TopologyParams(
            pods=r.take("pods", "int", d.pods),
            racks_per_pod=r.take("racks_per_pod", "int", d.racks_per_pod),
            hosts_per_rack=r.take("hosts_per_rack", "int", d.hosts_per_rack),
            pod_switches_per_pod=r.take("pod_switches_per_pod", "int",
                                        d.pod_switches_per_pod),
            core_switches=r.take("core_switches", "int", d.core_switches),
            host_link_gbps=r.take("host_link_gbps", "number",
                                  d.host_link_gbps),
            fabric_link_gbps=r.take("fabric_link_gbps", "number",
                                    d.fabric_link_gbps),
        )
        r.finish()
        return out


@dataclass(frozen=True)
class TrafficParams:
    duration_s: float = 60.0
    flows_per_host_per_second: float = 10.0
    target_mean_flow_bytes: float = 146_000.0
    fraction_small: float = 0.8
    small_cutoff_bytes: int = 10_000
    elephant_fraction_of_bytes: float = 0.5

    @staticmethod
    def from_reader(r: _Reader) -> "TrafficParams":
        d = TrafficParams()
        out = TrafficParams(
            duration_s=r.take("duration_s", "number", d.duration_s),
            flows_per_host_per_second=r.take(
                "flows_per_host_per_second", "number",
                d.flows_per_host_per_second),
            target_mean_flow_bytes=r.take("target_mean_flow_bytes", "number",
                                          d.target_mean_flow_bytes),
            fraction_small=r.take("fraction_small", "number",
                                  d.fraction_small),
            small_cutoff_bytes=r.take("small_cutoff_bytes", "int",
                                      d.small_cutoff_bytes),
            elephant_fraction_of_bytes=r.take(
                "elephant_fraction_of_bytes", "number",
                d.elephant_fraction_of_bytes),
        )
        r.finish()
        return out


@dataclass(frozen=True)
class SchemeSpec:
    kind: str  # one of SCHEME_KINDS
    label: str = ""
    count_installs: bool = False  # ecmp: model per-flow entry cost
    fn_rate: float = 0.0  # hybrid detector grid
    fp_rate: float = 0.0
    delay_s: float = 0.0
    match_mode: str = "rack"  # hybrid tree matching

    def __post_init__(self) -> None:
        if self.kind not in SCHEME_KINDS:
            raise ConfigError(f"scheme kind must be one of {SCHEME_KINDS}, "
                              f"got {self.kind!r}")
        if not self.label:
            object.__setattr__(self, "label", self._default_label())

    def _default_label(self) -> str:
        if self.kind == "ecmp":
            return "ecmp_acct" if self.count_installs else "ecmp"
        if self.kind == "hedera":
            return "hedera"
        name = f"hybrid{round((1.0 - self.fn_rate) * 100)}"
        if self.fp_rate > 0.0:
            name += f"_fp{round(self.fp_rate * 100)}"
        if self.delay_s > 0.0:
            name += f"_d{self.delay_s:g}"
        return name

    @staticmethod
    def from_dict(data, path: str) -> "SchemeSpec":
        r = _Reader(data, path)
        kind = r.take("scheme", "str")
        if kind not in SCHEME_KINDS:
            raise ConfigError(f"{path}.scheme: must be one of {SCHEME_KINDS}, "
                              f"got {kind!r}")
        spec = SchemeSpec(
            kind=kind,
            label=r.take("label", "str", ""),
            count_installs=r.take("count_installs", "bool", False),
            fn_rate=r.take("fn_rate", "number", 0.0),
            fp_rate=r.take("fp_rate", "number", 0.0),
            delay_s=r.take("delay_s", "number", 0.0),
            match_mode=r.take("match_mode", "str", "rack"),
        )
        r.finish()
        for rate_key, rate in (("fn_rate", spec.fn_rate),
                               ("fp_rate", spec.fp_rate)):
            if not 0.0 <= rate <= 1.0:
                raise ConfigError(f"{path}.{rate_key}: must be in [0, 1], "
                                  f"got {rate}")
        if spec.delay_s < 0.0:
            raise ConfigError(f"{path}.delay_s: must be >= 0")
        return spec


@dataclass(frozen=True)
class ExperimentConfig:
    """One cell: everything a single simulation run needs."""

    topology: TopologyParams = TopologyParams()
    traffic: TrafficParams = TrafficParams()
    scheme: SchemeSpec = SchemeSpec("ecmp")
    load_level: float = 1.0
    seed: int = 0
    trace_file: str | None = None
    elephant_threshold_bytes: int = 10_000_000
    reroute_period_s: float = 5.0
    idle_timeout_s: float = 5.0
    end_time_s: float | None = None
    allow_low_load: bool = False
    max_flow_records: int = 2_000_000
    output_dir: str = "results"

    @property
    def cell_name(self) -> str:
        return f"{self.scheme.label}_L{self.load_level:g}_s{self.seed}"


@dataclass(frozen=True)
class SweepConfig:
    base: ExperimentConfig = ExperimentConfig()
    schemes: tuple[SchemeSpec, ...] = (SchemeSpec("ecmp"),)
    load_levels: tuple[float, ...] = (1.0,)
    seeds: tuple[int, ...] = (0,)

    def cells(self) -> list[ExperimentConfig]:
        out = []
        for load in self.load_levels:
            for scheme in self.schemes:
                for seed in self.seeds:
                    out.append(replace(self.base, scheme=scheme,
                                       load_level=load, seed=seed))
        return out


def sweep_config_from_dict(data) -> SweepConfig:
    r = _Reader(data)
    topo = TopologyParams.from_reader(r.sub("topology"))
    traf = TrafficParams.from_reader(r.sub("traffic"))
    schemes_raw = r.take("schemes", "list", [{"scheme": "ecmp"}])
    if not schemes_raw:
        raise ConfigError("schemes: must not be empty")
    schemes = tuple(SchemeSpec.from_dict(s, f"schemes[{i}]")
                    for i, s in enumerate(schemes_raw))
    labels = [s.label for s in schemes]
    if len(set(labels)) != len(labels):
        dup = next(l for l in labels if labels.count(l) > 1)
        raise ConfigError(f"schemes: duplicate label {dup!r}")

    loads_raw = r.take("load_levels", "list", [1.0])
    loads = []
    for i, v in enumerate(loads_raw):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or v <= 0:
            raise ConfigError(f"load_levels[{i}]: expected a positive number, "
                              f"got {v!r}")
        loads.append(float(v))
    seeds_raw = r.take("seeds", "list", [0])
    seeds = []
    for i, v in enumerate(seeds_raw):
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"seeds[{i}]: expected an integer, got {v!r}")
        seeds.append(v)
    if not loads or not seeds:
        raise ConfigError("load_levels and seeds must not be empty")

    base = ExperimentConfig(
        topology=topo,
        traffic=traf,
        trace_file=r.take("trace_file", "str?", None),
        elephant_threshold_bytes=r.take("elephant_threshold_bytes", "int",
                                        10_000_000),
        reroute_period_s=r.take("reroute_period_s", "number", 5.0),
        idle_timeout_s=r.take("idle_timeout_s", "number", 5.0),
        end_time_s=r.take("end_time_s", "number?", None),
        allow_low_load=r.take("allow_low_load", "bool", False),
        max_flow_records=r.take("max_flow_records", "int", 2_000_000),
        output_dir=r.take("output_dir", "str", "results"),
    )
    r.finish()
    if base.elephant_threshold_bytes < 1:
        raise ConfigError("elephant_threshold_bytes: must be positive")
    if base.reroute_period_s <= 0:
        raise ConfigError("reroute_period_s: must be positive")
    return SweepConfig(base=base, schemes=schemes,
                       load_levels=tuple(loads), seeds=tuple(seeds))


def load_sweep_config(fp: IO[str]) -> SweepConfig:
    try:
        data = json.load(fp)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from None
    return sweep_config_from_dict(data)


def apply_load_level(topology: Topology, load_level: float,
                     allow_low_load: bool = False) -> Topology:
    """Divide fabric capacities by load_level; NIC links stay untouched."""
    if load_level <= 0:
        raise ConfigError(f"load_level must be positive, got {load_level}")
    if load_level < 1.0 and not allow_low_load:
        raise ConfigError(f"load_level {load_level} < 1 requires "
                          f"allow_low_load")
    if load_level == 1.0:
        return topology
    return topology.with_scaled_fabric(load_level)


def make_controller(cfg: ExperimentConfig) -> Controller:
    s = cfg.scheme
    if s.kind == "ecmp":
        return EcmpController(EcmpConfig(seed=cfg.seed,
                                         count_installs=s.count_installs))
    if s.kind == "hedera":
        return HederaStyleController(HederaStyleConfig(
            seed=cfg.seed, tick_period_s=cfg.reroute_period_s))
    return HybridTEController(HybridTEConfig(
        tree_seed=cfg.seed, tick_period_s=cfg.reroute_period_s,
        match_mode=s.match_mode))


def prepare_trace(cfg: ExperimentConfig, topology: Topology) -> traffic.Trace:
    if cfg.trace_file is not None:
        with open(cfg.trace_file, "r", encoding="utf-8") as fp:
            return traffic.load_trace(fp)
    t = cfg.traffic
    return traffic.generate_trace(
        topology, t.duration_s,
        target_mean_flow_bytes=t.target_mean_flow_bytes,
        fraction_small=t.fraction_small,
        small_cutoff_bytes=t.small_cutoff_bytes,
        elephant_fraction_of_bytes=t.elephant_fraction_of_bytes,
        flows_per_host_per_second=t.flows_per_host_per_second,
        seed=cfg.seed)


def prepare_reports(cfg: ExperimentConfig,
                    trace: traffic.Trace) -> list[detection.ElephantReport]:
    if cfg.scheme.kind != "hybrid":
        return []
    dcfg = detection.DetectorConfig(fn_rate=cfg.scheme.fn_rate,
                                    fp_rate=cfg.scheme.fp_rate,
                                    delay_s=cfg.scheme.delay_s,
                                    seed=cfg.seed + DETECTOR_SEED_OFFSET)
    return detection.make_reports(trace, dcfg, cfg.elephant_threshold_bytes)


def trace_digest(trace: traffic.Trace) -> str:
    buf = io.StringIO()
    traffic.save_trace(trace, buf)
    return hashlib.sha256(buf.getvalue().encode("utf-8")).hexdigest()[:16]


@dataclass
class CellResult:
    config: ExperimentConfig
    result: SimulationResult
    trace_digest: str

    def aggregate_row(self) -> dict[str, object]:
        r = self.result
        m = r.metrics
        return {
            "cell": self.config.cell_name,
            "scheme": self.config.scheme.label,
            "load_level": f"{self.config.load_level:g}",
            "seed": self.config.seed,
            "flows_total": r.completed + r.incomplete,
            "completed": r.completed,
            "incomplete": r.incomplete,
            "mean_fct_s": _fmt(r.mean_fct),
            "median_fct_s": _fmt(r.median_fct),
            "p99_fct_s": _fmt(r.p99_fct),
            "duration_s": _fmt(r.duration),
            "setup_installs": r.setup_installs,
            "exact_installs": r.exact_installs,
            "max_install_rate_per_s": _fmt(r.max_install_rate),
            "exact_entry_hwm": r.exact_entry_hwm,
            "tracked_elephant_hwm": int(m.get("tracked_elephant_hwm", 0)),
            "gff_reroutes": int(m.get("gff_reroutes", 0)),
            "reactive_placements": int(m.get("reactive_placements", 0)),
            "trace_digest": self.trace_digest,
        }


def _fmt(x: float | None) -> str:
    return "" if x is None else f"{x:.9f}"


def run_cell(cfg: ExperimentConfig, trace: traffic.Trace | None = None,
             reports: Sequence[detection.ElephantReport] | None = None,
             digest: str | None = None) -> CellResult:
    base_topo = cfg.topology.build()
    run_topo = apply_load_level(base_topo, cfg.load_level, cfg.allow_low_load)
    if trace is None:
        trace = prepare_trace(cfg, base_topo)
    if reports is None:
        reports = prepare_reports(cfg, trace)
    controller = make_controller(cfg)
    sim = Simulation(run_topo, trace, controller, reports,
                     end_time=cfg.end_time_s,
                     config=EngineConfig(idle_timeout_s=cfg.idle_timeout_s))
    result = sim.run()
    return CellResult(cfg, result,
                      digest if digest is not None else trace_digest(trace))


# -- per-cell file output ----------------------------------------------------

def write_cell_outputs(out_dir: FsPath, cell: CellResult) -> list[FsPath]:
    out_dir.mkdir(parents=True, exist_ok=True)
    name = cell.config.cell_name
    res = cell.result
    written = []

    p = out_dir / f"result_{name}.csv"
    with open(p, "w", encoding="utf-8") as fp:
        fp.write("metric,value\n")
        for k, v in cell.aggregate_row().items():
            fp.write(f"{k},{v}\n")
    written.append(p)

    if len(res.flows) <= cell.config.max_flow_records:
        p = out_dir / f"flows_{name}.csv"
        with open(p, "w", encoding="utf-8") as fp:
            fp.write("flow_id,start_s,fct_s,bytes,scheme\n")
            label = cell.config.scheme.label
            for rec in res.flows:
                fct = "" if rec.fct is None else f"{rec.fct:.9f}"
                fp.write(f"{rec.flow_id},{rec.start_time:.6f},{fct},"
                         f"{rec.size_bytes},{label}\n")
        written.append(p)

    p = out_dir / f"decisions_{name}.csv"
    with open(p, "w", encoding="utf-8") as fp:
        fp.write("time_s,event,flow_id,path\n")
        for t, event, fid, path in res.decision_log:
            fp.write(f"{t:.6f},{event},{fid},{path}\n")
    written.append(p)

    p = out_dir / f"occupancy_{name}.csv"
    with open(p, "w", encoding="utf-8") as fp:
        fp.write("time_s,switch,wildcard_entries,exact_entries\n")
        for t, sw, wc, ex in res.occupancy_series:
            fp.write(f"{t:.6f},{sw},{wc},{ex}\n")
    written.append(p)

    p = out_dir / f"installs_{name}.csv"
    with open(p, "w", encoding="utf-8") as fp:
        fp.write("bucket_s,switch,installs\n")
        for bucket, sw, count in res.install_series:
            fp.write(f"{bucket},{sw},{count}\n")
    written.append(p)
    return written


@dataclass
class SweepOutcome:
    results: list[CellResult]
    failures: list[tuple[str, str]]  # (cell name, error)

    @property
    def ok(self) -> bool:
        return not self.failures


def run_sweep(sweep: SweepConfig, out_dir: str | FsPath | None = None,
              write: bool = True) -> SweepOutcome:
    """Run every cell; a failing cell is recorded, not fatal.

    When writing (the default), per-flow records land in flows_<cell>.csv
    and are dropped from the returned results to bound sweep memory.
    """
    base = sweep.base
    out = FsPath(out_dir) if out_dir is not None else FsPath(base.output_dir)
    base_topo = base.topology.build()

    traces: dict[int, traffic.Trace] = {}
    digests: dict[int, str] = {}
    report_cache: dict[tuple, list] = {}
    results: list[CellResult] = []
    failures: list[tuple[str, str]] = []

    for cfg in sweep.cells():
        name = cfg.cell_name
        try:
            if cfg.seed not in traces:
                traces[cfg.seed] = prepare_trace(cfg, base_topo)
                digests[cfg.seed] = trace_digest(traces[cfg.seed])
            trace = traces[cfg.seed]
            s = cfg.scheme
            rkey = (cfg.seed, s.kind, s.fn_rate, s.fp_rate, s.delay_s)
            if rkey not in report_cache:
                report_cache[rkey] = prepare_reports(cfg, trace)
            cell = run_cell(cfg, trace, report_cache[rkey],
                            digest=digests[cfg.seed])
            if write:
                write_cell_outputs(out, cell)
                # per-flow records now live in flows_<cell>.csv; drop them
                # from the retained results so big sweeps stay in memory
                cell = replace(cell, result=replace(cell.result, flows=[]))
            results.append(cell)
        except Exception as e:  # record and move on
            failures.append((name, f"{type(e).__name__}: {e}"))

    if write:
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "aggregate.csv", "w", encoding="utf-8") as fp:
            fp.write(",".join(AGGREGATE_COLUMNS) + "\n")
            for cell in results:
                row = cell.aggregate_row()
                fp.write(",".join(str(row[c]) for c in AGGREGATE_COLUMNS)
                         + "\n")
        if failures:
            with open(out / "failed_cells.csv", "w", encoding="utf-8") as fp:
                fp.write("cell,error\n")
                for name, err in failures:
                    fp.write(f"{name},{err.replace(',', ';')}\n")
    return SweepOutcome(results, failures)


# -- cross-cell summary ----------------------------------------------------------

def summarize_rows(rows: Sequence[Mapping[str, str]],
                   baseline: str = "ecmp") -> list[dict[str, object]]:
    """Per (load, scheme) across-seed means and FCT reduction vs baseline.

    Requires the baseline scheme in every (load, seed) group and identical
    trace digests within each group (the pairing guarantee).
    """
    groups: dict[tuple[str, str], dict[str, Mapping[str, str]]] = {}
    for row in rows:
        key = (row["load_level"], str(row["seed"]))
        groups.setdefault(key, {})
        label = row["scheme"]
        if label in groups[key]:
            raise ValueError(f"duplicate cell for scheme {label!r} at "
                             f"load {key[0]} seed {key[1]}")
        groups[key][label] = row

    for (load, seed), cells in sorted(groups.items()):
        if baseline not in cells:
            raise ValueError(f"missing {baseline!r} baseline cell for "
                             f"load {load} seed {seed}")
        digests = {c["trace_digest"] for c in cells.values()}
        if len(digests) > 1:
            raise ValueError(f"trace mismatch at load {load} seed {seed}: "
                             f"{sorted(digests)}")

    by_scheme: dict[tuple[str, str], list[tuple[float, float]]] = {}
    stats: dict[tuple[str, str], dict[str, float]] = {}
    for (load, seed), cells in sorted(groups.items()):
        base_fct = float(cells[baseline]["mean_fct_s"])
        for label, row in cells.items():
            fct = float(row["mean_fct_s"])
            reduction = ((base_fct - fct) / base_fct * 100.0
                         if base_fct > 0 else 0.0)
            by_scheme.setdefault((load, label), []).append((fct, reduction))
            st = stats.setdefault((load, label), {
                "exact_entry_hwm": 0.0, "max_install_rate_per_s": 0.0,
                "tracked_elephant_hwm": 0.0})
            st["exact_entry_hwm"] = max(st["exact_entry_hwm"],
                                        float(row["exact_entry_hwm"]))
            st["max_install_rate_per_s"] = max(
                st["max_install_rate_per_s"],
                float(row["max_install_rate_per_s"]))
            st["tracked_elephant_hwm"] = max(
                st["tracked_elephant_hwm"],
                float(row["tracked_elephant_hwm"]))

    out = []
    for (load, label), samples in sorted(by_scheme.items()):
        fcts = [s[0] for s in samples]
        reds = [s[1] for s in samples]
        st = stats[(load, label)]
        out.append({
            "load_level": load,
            "scheme": label,
            "seeds": len(samples),
            "mean_fct_s": f"{sum(fcts) / len(fcts):.9f}",
            "mean_reduction_vs_baseline_pct":
                f"{sum(reds) / len(reds):.4f}",
            "min_reduction_pct": f"{min(reds):.4f}",
            "max_reduction_pct": f"{max(reds):.4f}",
            "exact_entry_hwm_max": int(st["exact_entry_hwm"]),
            "max_install_rate_per_s": f"{st['max_install_rate_per_s']:.4f}",
            "tracked_elephant_hwm_max": int(st["tracked_elephant_hwm"]),
        })
    return out


def summarize_dir(results_dir: str | FsPath, baseline: str = "ecmp",
                  write: bool = True) -> list[dict[str, object]]:
    import csv as _csv
    results_dir = FsPath(results_dir)
    agg = results_dir / "aggregate.csv"
    if not agg.exists():
        raise ValueError(f"no aggregate.csv under {results_dir}")
    with open(agg, "r", encoding="utf-8") as fp:
        rows = list(_csv.DictReader(fp))
    summary = summarize_rows(rows, baseline)
    if write:
        cols = list(summary[0].keys()) if summary else [
            "load_level", "scheme", "seeds", "mean_fct_s",
            "mean_reduction_vs_baseline_pct", "min_reduction_pct",
            "max_reduction_pct", "exact_entry_hwm_max",
            "max_install_rate_per_s", "tracked_elephant_hwm_max"]
        with open(results_dir / "summary.csv", "w", encoding="utf-8") as fp:
            fp.write(",".join(cols) + "\n")
            for row in summary:
                fp.write(",".join(str(row[c]) for c in cols) + "\n")
    return summary


# -- presets -------------------------------------------------------------------

def desk_preset() -> SweepConfig:
    """160-host topology sized so a full sweep runs on a laptop.

    Link speeds are scaled down (100 Mb/s NICs, 200 Mb/s fabric) so that
    this small fabric sees meaningful contention at a flow arrival rate
    the simulator can sweep in minutes; scheme-vs-scheme FCT gaps are
    driven by elephant placement, which needs busy links to matter.
    """
    return SweepConfig(
        base=ExperimentConfig(
            topology=TopologyParams(host_link_gbps=0.1,
                                    fabric_link_gbps=0.2),
            traffic=TrafficParams(flows_per_host_per_second=5.0)),
        schemes=(SchemeSpec("ecmp"),
                 SchemeSpec("ecmp", count_installs=True),
                 SchemeSpec("hedera"),
                 SchemeSpec("hybrid", fn_rate=0.0, delay_s=0.1),
                 SchemeSpec("hybrid", fn_rate=0.25, delay_s=0.1),
                 SchemeSpec("hybrid", fn_rate=0.5, delay_s=0.1)),
        load_levels=(1.0, 1.5, 2.0),
        seeds=tuple(range(10)),
    )


def full_preset() -> SweepConfig:
    """The full-scale 72-rack, 1440-host fabric; hours of runtime."""
    return SweepConfig(
        base=ExperimentConfig(
            topology=TopologyParams(pods=9, racks_per_pod=8,
                                    hosts_per_rack=20,
                                    host_link_gbps=0.1,
                                    fabric_link_gbps=0.2),
            traffic=TrafficParams(flows_per_host_per_second=5.0)),
        schemes=(SchemeSpec("ecmp"),
                 SchemeSpec("hybrid", fn_rate=0.0, delay_s=0.1),
                 SchemeSpec("hybrid", fn_rate=0.25, delay_s=0.1),
                 SchemeSpec("hybrid", fn_rate=0.5, delay_s=0.1)),
        load_levels=(1.0, 1.5, 1.75, 2.0),
        seeds=tuple(range(10)),
    )


PRESETS = {"desk": desk_preset, "full": full_preset}
