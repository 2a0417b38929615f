"""Flow-level simulator for data-center traffic engineering.

Builds Clos-like topologies, generates or replays flow traces, simulates
max-min fair flow completion, and compares forwarding schemes: static
multipath trees with reactive elephant placement and periodic rerouting,
per-flow ECMP, and a measure-and-reroute baseline.
"""

from .detection import DetectorConfig, ElephantReport, make_reports
from .engine import (Controller, ControllerActionError, EngineConfig,
                     FlowRecord, SimulationResult, Simulation,
                     allocate_rates, run)
from .experiments import (ConfigError, ExperimentConfig, SchemeSpec,
                          SweepConfig, TopologyParams, TrafficParams,
                          apply_load_level, run_cell, run_sweep,
                          summarize_dir)
from .flowtable import FlowTables, RoutingBlackHole, RoutingLoop
from .labels import HostDirectory, decode_label, encode_label, flat_mac
from .static_routing import (ForwardingTreeSet, build_forwarding_trees,
                             install_static_routes)
from .te_baselines import (EcmpConfig, EcmpController, HederaStyleConfig,
                           HederaStyleController, ecmp_path_index)
from .te_hybrid import (HybridTEConfig, HybridTEController,
                        estimate_natural_demands, global_first_fit,
                        least_loaded_path)
from .topology import Topology, build_clos
from .traffic import Trace, generate_trace, load_trace, save_trace

__version__ = "0.1.0"

__all__ = [
    "Controller", "ControllerActionError", "ConfigError", "DetectorConfig",
    "EcmpConfig", "EcmpController", "ElephantReport", "EngineConfig",
    "ExperimentConfig", "FlowRecord", "FlowTables", "ForwardingTreeSet",
    "HederaStyleConfig", "HederaStyleController", "HostDirectory",
    "HybridTEConfig", "HybridTEController", "RoutingBlackHole",
    "RoutingLoop", "SchemeSpec", "SimulationResult",
    "Simulation", "SweepConfig", "Topology", "TopologyParams", "Trace",
    "TrafficParams", "allocate_rates", "apply_load_level", "build_clos",
    "build_forwarding_trees", "decode_label", "ecmp_path_index",
    "encode_label", "estimate_natural_demands", "flat_mac",
    "generate_trace", "global_first_fit", "install_static_routes",
    "least_loaded_path", "load_trace", "make_reports", "run", "run_cell",
    "run_sweep", "save_trace", "summarize_dir",
]
