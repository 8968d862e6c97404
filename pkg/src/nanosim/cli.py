"""Command-line front end.

    nanosim run  (--preset NAME | --config FILE) [--seed N] [--set K=V]...
                 [--out DIR] [--tag TAG] [--strict]
    nanosim sweep --preset NAME --grid 0.1,0.2,... [run options]
    nanosim list

Outputs land in <out>/<scenario>/<tag or timestamp>/: the fully resolved
config echo (config.json), summary.csv, samples.csv, qtrace.csv,
metrics.csv and log.txt. With a fixed --tag and seed, re-running produces
byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from . import scenarios
from .config import (ConfigError, PRESETS, SWEEP_FIELD, apply_overrides,
                     load_config_file, preset_config)
from .fabric import write_queue_trace_csv
from .workload import (SAMPLES_HEADER, SUMMARY_HEADER, samples_csv_rows,
                       write_lines)

SCENARIO_RUNNERS = {
    "loopback_latency": scenarios.run_loopback,
    "core_throughput": scenarios.run_core_throughput,
    "sched_hw_vs_timer": scenarios.run_sched_hw_vs_timer,
    "bounded_mpt": scenarios.run_bounded_mpt,
    "core_selection": scenarios.run_core_selection,
    "incast_ndp": scenarios.run_incast,
    "mica_kv": scenarios.run_mica_kv,
    "chain_replication": scenarios.run_chain,
}

# Preset -> paper figure/table analogue, shown by `nanosim list`.
FIGURE_MAP = {
    "loopback_latency": "latency breakdown (65ns wire-to-wire, 13ns loopback)",
    "core_throughput": "throughput table + 350 Mpps NIC packet rate",
    "sched_hw_vs_timer": "Fig. 3 analogue",
    "bounded_mpt": "Fig. 4 analogue",
    "core_selection": "Fig. 5 analogue",
    "incast_ndp": "Fig. 6 analogue (bottleneck queue occupancy)",
    "mica_kv": "key-value store tail latency vs load",
    "chain_replication": "3-way replicated WRITE latency",
}


def run_scenario(cfg: dict) -> scenarios.ScenarioResult:
    return SCENARIO_RUNNERS[cfg["scenario"]](cfg)


def write_outputs(out_dir: str, cfg: dict, result) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.json"), "w") as f:
        json.dump(cfg, f, indent=2, sort_keys=True)
        f.write("\n")
    write_lines(os.path.join(out_dir, "summary.csv"), SUMMARY_HEADER,
                result.summary_rows)
    sample_lines = []
    for experiment, seed, rps, results in result.sample_sets:
        sample_lines.extend(samples_csv_rows(experiment, seed, rps, results))
    write_lines(os.path.join(out_dir, "samples.csv"), SAMPLES_HEADER, sample_lines)
    if result.qtrace:
        write_queue_trace_csv(os.path.join(out_dir, "qtrace.csv"), result.qtrace)
    write_lines(os.path.join(out_dir, "metrics.csv"), "scope,name,value",
                (f"{scope},{name},{value}" for scope, name, value in result.metrics_rows))
    log_lines = [f"scenario={cfg['scenario']}", f"seed={cfg['seed']}",
                 f"summary_rows={len(result.summary_rows)}",
                 f"sample_sets={len(result.sample_sets)}",
                 f"flagged_incomplete={result.flagged_incomplete}"]
    write_lines(os.path.join(out_dir, "log.txt"), "# nanosim run log", log_lines)


def _resolve_config(args) -> dict:
    if args.preset and args.config:
        raise ConfigError("preset", "give either --preset or --config, not both")
    if args.preset:
        cfg = preset_config(args.preset)
    elif args.config:
        cfg = load_config_file(args.config)
    else:
        raise ConfigError("preset", "one of --preset or --config is required")
    overrides = list(args.set or [])
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    return apply_overrides(cfg, overrides) if overrides else cfg


def _out_dir(args, cfg) -> str:
    root = args.out or os.environ.get("NANOSIM_OUT", "out")
    tag = args.tag or time.strftime("%Y%m%dT%H%M%S")
    return os.path.join(root, cfg["scenario"], tag)


def _execute(cfg, args, warning: str) -> int:
    result = run_scenario(cfg)
    out_dir = _out_dir(args, cfg)
    write_outputs(out_dir, cfg, result)
    print(f"wrote {out_dir}")
    if result.flagged_incomplete:
        print(f"warning: {warning}", file=sys.stderr)
        if args.strict:
            return 1
    return 0


def cmd_run(args) -> int:
    return _execute(_resolve_config(args), args,
                    "run flagged incomplete requests")


def cmd_sweep(args) -> int:
    cfg = _resolve_config(args)
    field = SWEEP_FIELD.get(cfg["scenario"])
    if field is None:
        raise ConfigError("scenario", f"{cfg['scenario']} has no load parameter to sweep")
    grid = [float(x) for x in args.grid.split(",") if x.strip()]
    if not grid:
        raise ConfigError("grid", "empty load grid")
    cfg = apply_overrides(cfg, [f"{field}={json.dumps(grid)}"])
    return _execute(cfg, args, "sweep rows include incomplete runs")


def cmd_list(_args) -> int:
    for name in PRESETS:
        print(f"{name:20s} {PRESETS[name]}")
        print(f"{'':20s}   -> {FIGURE_MAP[name]}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nanosim",
        description="Deterministic nanoPU + trimming-fabric simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--preset", help="preset name (see `nanosim list`)")
        p.add_argument("--config", help="path to a config JSON file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--set", action="append", metavar="FIELD=VALUE",
                       help="override a config field (JSON value)")
        p.add_argument("--out", help="output root (default $NANOSIM_OUT or ./out)")
        p.add_argument("--tag", help="run directory name (default: timestamp)")
        p.add_argument("--strict", action="store_true",
                       help="exit nonzero when a run is flagged incomplete")

    p_run = sub.add_parser("run", help="run one experiment")
    common(p_run)
    p_run.set_defaults(fn=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a load sweep")
    common(p_sweep)
    p_sweep.add_argument("--grid", required=True,
                         help="comma-separated load points, e.g. 0.2,0.5,0.8")
    p_sweep.set_defaults(fn=cmd_sweep)

    p_list = sub.add_parser("list", help="list experiment presets")
    p_list.set_defaults(fn=cmd_list)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
