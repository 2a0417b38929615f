"""Command-line front end: generate / run / sweep / summarize."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import experiments, traffic
from .experiments import (ConfigError, PRESETS, SweepConfig,
                          load_sweep_config)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="FILE",
                   help="JSON sweep config; flags override its keys")
    p.add_argument("--preset", choices=sorted(PRESETS),
                   help="built-in config to start from (default: desk)")
    p.add_argument("--output-dir", metavar="DIR")
    p.add_argument("--seeds", metavar="N[,N...]",
                   help="comma-separated seed list")
    p.add_argument("--load-levels", metavar="X[,X...]",
                   help="comma-separated load levels")
    p.add_argument("--duration", type=float, metavar="S",
                   help="trace duration in seconds")
    p.add_argument("--flows-per-host-per-second", type=float, metavar="F")
    p.add_argument("--pods", type=int)
    p.add_argument("--racks-per-pod", type=int)
    p.add_argument("--hosts-per-rack", type=int)
    p.add_argument("--trace-file", metavar="FILE",
                   help="replay this trace instead of generating one")
    p.add_argument("--elephant-threshold-bytes", type=int)
    p.add_argument("--reroute-period", type=float, metavar="S")
    p.add_argument("--idle-timeout", type=float, metavar="S")
    p.add_argument("--end-time", type=float, metavar="S",
                   help="cut the simulation at this time")
    p.add_argument("--max-flow-records", type=int)
    p.add_argument("--allow-low-load", action="store_true")


def _parse_list(text: str, kind, name: str):
    try:
        return tuple(kind(part) for part in text.split(",") if part != "")
    except ValueError:
        raise ConfigError(f"--{name}: cannot parse {text!r}") from None


def _load_config(args) -> SweepConfig:
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fp:
            sweep = load_sweep_config(fp)
    else:
        sweep = PRESETS[args.preset or "desk"]()

    base = sweep.base
    topo = base.topology
    traf = base.traffic
    if args.pods is not None:
        topo = replace(topo, pods=args.pods)
    if args.racks_per_pod is not None:
        topo = replace(topo, racks_per_pod=args.racks_per_pod)
    if args.hosts_per_rack is not None:
        topo = replace(topo, hosts_per_rack=args.hosts_per_rack)
    if args.duration is not None:
        traf = replace(traf, duration_s=args.duration)
    if args.flows_per_host_per_second is not None:
        traf = replace(traf,
                       flows_per_host_per_second=args.flows_per_host_per_second)
    base = replace(base, topology=topo, traffic=traf)
    if args.trace_file is not None:
        base = replace(base, trace_file=args.trace_file)
    if args.elephant_threshold_bytes is not None:
        base = replace(base,
                       elephant_threshold_bytes=args.elephant_threshold_bytes)
    if args.reroute_period is not None:
        base = replace(base, reroute_period_s=args.reroute_period)
    if args.idle_timeout is not None:
        base = replace(base, idle_timeout_s=args.idle_timeout)
    if args.end_time is not None:
        base = replace(base, end_time_s=args.end_time)
    if args.max_flow_records is not None:
        base = replace(base, max_flow_records=args.max_flow_records)
    if args.allow_low_load:
        base = replace(base, allow_low_load=True)
    if args.output_dir is not None:
        base = replace(base, output_dir=args.output_dir)

    sweep = replace(sweep, base=base)
    if args.seeds is not None:
        sweep = replace(sweep, seeds=_parse_list(args.seeds, int, "seeds"))
    if args.load_levels is not None:
        sweep = replace(sweep,
                        load_levels=_parse_list(args.load_levels, float,
                                                "load-levels"))
    return sweep


def _pick(name: str, value, choices):
    if value is not None:
        if value not in choices:
            raise ConfigError(f"--{name} {value}: not in config "
                              f"({', '.join(str(c) for c in choices)})")
        return value
    if len(choices) == 1:
        return choices[0]
    raise ConfigError(f"--{name} is required; config offers: "
                      f"{', '.join(str(c) for c in choices)}")


def cmd_generate(args) -> int:
    sweep = _load_config(args)
    cfg = sweep.base
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    else:
        cfg = replace(cfg, seed=sweep.seeds[0])
    trace = experiments.prepare_trace(cfg, cfg.topology.build())
    with open(args.out, "w", encoding="utf-8") as fp:
        traffic.save_trace(trace, fp)
    print(f"wrote {len(trace.flows)} flows to {args.out} "
          f"(seed {cfg.seed}, digest {experiments.trace_digest(trace)})")
    return 0


def cmd_run(args) -> int:
    sweep = _load_config(args)
    labels = [s.label for s in sweep.schemes]
    label = _pick("scheme", args.scheme, labels)
    load = _pick("load-level", args.load_level, list(sweep.load_levels))
    seed = _pick("seed", args.seed, list(sweep.seeds))
    scheme = sweep.schemes[labels.index(label)]
    cfg = replace(sweep.base, scheme=scheme, load_level=load, seed=seed)
    cell = experiments.run_cell(cfg)
    written = experiments.write_cell_outputs(Path(cfg.output_dir), cell)
    row = cell.aggregate_row()
    print(f"{cfg.cell_name}: completed={row['completed']} "
          f"incomplete={row['incomplete']} mean_fct_s={row['mean_fct_s']}")
    for p in written:
        print(f"  {p}")
    return 0


def cmd_sweep(args) -> int:
    sweep = _load_config(args)
    outcome = experiments.run_sweep(sweep)
    for cell in outcome.results:
        row = cell.aggregate_row()
        print(f"ok {row['cell']}: mean_fct_s={row['mean_fct_s']} "
              f"completed={row['completed']}")
    for name, err in outcome.failures:
        print(f"FAILED {name}: {err}", file=sys.stderr)
    print(f"{len(outcome.results)} cells ok, "
          f"{len(outcome.failures)} failed, "
          f"outputs in {sweep.base.output_dir}")
    return 0 if outcome.ok else 1


def cmd_summarize(args) -> int:
    rows = experiments.summarize_dir(args.results, baseline=args.baseline)
    if not rows:
        print("no completed cells to summarize", file=sys.stderr)
        return 1
    cols = list(rows[0].keys())
    widths = [max(len(c), max(len(str(r[c])) for r in rows)) for c in cols]
    print("  ".join(c.ljust(w) for c, w in zip(cols, widths)))
    for r in rows:
        print("  ".join(str(r[c]).ljust(w) for c, w in zip(cols, widths)))
    print(f"\nwrote {Path(args.results) / 'summary.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dctesim",
        description="Flow-level data-center TE simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a traffic trace CSV")
    _add_common(p)
    p.add_argument("--seed", type=int, help="trace seed")
    p.add_argument("--out", required=True, metavar="FILE")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("run", help="run a single cell")
    _add_common(p)
    p.add_argument("--scheme", metavar="LABEL",
                   help="scheme label from the config")
    p.add_argument("--load-level", type=float, metavar="X")
    p.add_argument("--seed", type=int, metavar="N")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run the full scheme x load x seed grid")
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("summarize", help="aggregate sweep outputs")
    p.add_argument("--results", required=True, metavar="DIR")
    p.add_argument("--baseline", default="ecmp", metavar="LABEL")
    p.set_defaults(func=cmd_summarize)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
