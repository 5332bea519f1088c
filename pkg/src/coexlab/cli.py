"""Command-line front end.

Every subcommand reads a JSON topology file and writes CSV results into an
output directory.  Exit codes: 0 success, 1 validation problem, 2 state-space
cap exceeded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import fields

from . import harness, simulator
from .analysis import (
    DEFAULT_LTEU_RATE_MBPS,
    analyze,
    write_report_csv,
    write_state_grid_csv,
)
from .csma import MacParameters
from .simulator import SimConfig, simulate
from .states import StateSpaceLimitError, LtuSchedule, build_segments, write_segments_csv
from .topology import TopologyError, build_graphs, load_topology, save_topology

_MAC_FIELDS = {f.name for f in fields(MacParameters)}


def _load_params(path) -> dict:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise TopologyError(f"{path}: not valid JSON ({exc})") from None
    known = _MAC_FIELDS | {"t_frame_us", "lteu_rate_mbps", "sim_time_s"}
    unknown = set(data) - known
    if unknown:
        raise TopologyError(f"{path}: unknown parameter field(s): {sorted(unknown)}")
    return data


def _gather_settings(args) -> tuple[MacParameters, float, float, float]:
    """Merge topology-file mac section, --params file, and flags.

    Returns (mac, t_frame_s, lteu_rate_mbps, sim_time_s); precedence is
    flags > params file > topology file > defaults.
    """
    merged: dict = {}
    topo_path = getattr(args, "topology", None)
    if topo_path:
        with open(topo_path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise TopologyError(f"{topo_path}: not valid JSON ({exc})") from None
        mac_section = doc.get("mac", {})
        unknown = set(mac_section) - (_MAC_FIELDS | {"t_frame_us", "lteu_rate_mbps"})
        if unknown:
            raise TopologyError(f"{topo_path}: unknown mac field(s): {sorted(unknown)}")
        merged.update(mac_section)
    if getattr(args, "params", None):
        merged.update(_load_params(args.params))
    if getattr(args, "t_frame_us", None) is not None:
        merged["t_frame_us"] = args.t_frame_us
    if getattr(args, "sim_time_s", None) is not None:
        merged["sim_time_s"] = args.sim_time_s

    t_frame_s = merged.pop("t_frame_us", 40_000) / 1_000_000
    lteu_rate = float(merged.pop("lteu_rate_mbps", DEFAULT_LTEU_RATE_MBPS))
    sim_time_s = float(merged.pop("sim_time_s", 50.0))
    mac = MacParameters(**merged)
    return mac, t_frame_s, lteu_rate, sim_time_s


def _outdir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _cmd_analyze(args) -> int:
    topology = load_topology(args.topology)
    mac, t_frame, lteu_rate, _ = _gather_settings(args)
    report = analyze(
        topology,
        mac=mac,
        t_frame=t_frame,
        lteu_rate_mbps=lteu_rate,
        state_grid_us=args.state_grid_us,
        max_segments=args.max_segments,
    )
    out = _outdir(args)
    with open(os.path.join(out, "report.csv"), "w", newline="") as fh:
        write_report_csv(report, fh)
    if args.state_grid_us:
        with open(os.path.join(out, "state_prob.csv"), "w", newline="") as fh:
            write_state_grid_csv(report, fh)
    if args.segments:
        graphs = build_graphs(topology)
        schedule = LtuSchedule.from_topology(topology, graphs, t_frame=t_frame)
        with open(os.path.join(out, "segments.csv"), "w", newline="") as fh:
            write_segments_csv(build_segments(schedule, max_segments=args.max_segments), fh)
    for warning in report.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    print(f"wrote {os.path.join(out, 'report.csv')} "
          f"(system throughput {report.system_throughput_mbps:.2f} Mbps)")
    return 0


def _sim_config(args, mac, t_frame, lteu_rate, sim_time, **extra) -> SimConfig:
    return SimConfig(
        seed=args.seed,
        sim_time_s=sim_time,
        t_frame_s=t_frame,
        mac=mac,
        lteu_rate_mbps=lteu_rate,
        **extra,
    )


def _cmd_simulate(args) -> int:
    topology = load_topology(args.topology)
    mac, t_frame, lteu_rate, sim_time = _gather_settings(args)
    config = _sim_config(args, mac, t_frame, lteu_rate, sim_time, record_trace=args.trace)
    result = simulate(topology, config)
    out = _outdir(args)
    with open(os.path.join(out, "sim.csv"), "w", newline="") as fh:
        simulator.write_sim_csv(topology, result, fh)
    if args.trace:
        with open(os.path.join(out, "trace.csv"), "w", newline="") as fh:
            simulator.write_trace_csv(result, fh)
    print(f"wrote {os.path.join(out, 'sim.csv')} "
          f"(system throughput {result.system_throughput_mbps:.2f} Mbps, seed {result.seed})")
    return 0


def _cmd_compare(args) -> int:
    topology = load_topology(args.topology)
    mac, t_frame, lteu_rate, sim_time = _gather_settings(args)
    config = _sim_config(args, mac, t_frame, lteu_rate, sim_time)
    result = harness.compare(topology, config, runs=args.runs)
    out = _outdir(args)
    with open(os.path.join(out, "compare.csv"), "w", newline="") as fh:
        harness.write_compare_csv(result, fh)
    print(
        f"wrote {os.path.join(out, 'compare.csv')} "
        f"(mean error: wifi {100 * result.wifi_mean_error:.2f}%, "
        f"lteu {100 * result.lteu_mean_error:.2f}%, "
        f"system {100 * result.system_error:.2f}%)"
    )
    return 0


def _cmd_coexist(args) -> int:
    topology = load_topology(args.topology)
    mac, t_frame, lteu_rate, _ = _gather_settings(args)
    study = harness.coexist_study(topology, mac=mac, t_frame=t_frame, lteu_rate_mbps=lteu_rate)
    out = _outdir(args)
    with open(os.path.join(out, "coexist.csv"), "w", newline="") as fh:
        harness.write_coexist_csv(study, fh)
    with open(os.path.join(out, "cdf.csv"), "w", newline="") as fh:
        harness.write_cdf_csv(study, fh)
    print(f"wrote {os.path.join(out, 'coexist.csv')} and cdf.csv")
    return 0


def _cmd_sweep(args) -> int:
    topology = load_topology(args.topology)
    mac, t_frame, lteu_rate, sim_time = _gather_settings(args)
    values = [int(v) for v in args.values_us.split(",") if v.strip()]
    config = _sim_config(args, mac, t_frame, lteu_rate, sim_time)
    rows = harness.tframe_sweep(topology, config, values)
    out = _outdir(args)
    with open(os.path.join(out, "tframe.csv"), "w", newline="") as fh:
        harness.write_sweep_csv(rows, fh)
    print(f"wrote {os.path.join(out, 'tframe.csv')}")
    return 0


def _cmd_gen(args) -> int:
    topology = harness.gen_topology(
        n_total=args.n,
        wifi_fraction=args.wifi_fraction,
        area_m=args.area_m,
        seed=args.seed,
        min_dist_m=args.min_dist,
    )
    save_topology(topology, args.out)
    print(f"wrote {args.out} ({len(topology.wifi_ids)} wifi + {len(topology.lteu_ids)} lteu)")
    return 0


def _cmd_state_prob(args) -> int:
    topology = load_topology(args.topology)
    mac, t_frame, lteu_rate, _ = _gather_settings(args)
    report = analyze(
        topology, mac=mac, t_frame=t_frame, lteu_rate_mbps=lteu_rate,
        state_grid_us=args.grid_us,
    )
    samples = report.state_grid
    if args.node:
        if args.node not in topology.lteu_ids:
            raise TopologyError(f"--node {args.node!r} is not an LTE-U node of the topology")
        samples = tuple(s for s in samples if s.node_id == args.node)
    out = _outdir(args)
    path = os.path.join(out, "state_prob.csv")
    with open(path, "w", newline="") as fh:
        import csv as _csv

        writer = _csv.writer(fh)
        writer.writerow(["node_id", "t_us", "prob_pending", "prob_transmitting", "prob_done"])
        for s in samples:
            writer.writerow([s.node_id, s.t_us, repr(s.pending), repr(s.transmitting), repr(s.done)])
    print(f"wrote {path}")
    return 0


def _add_common(sub, sim: bool = False):
    sub.add_argument("topology", help="topology JSON file")
    sub.add_argument("-o", "--out", default="out", help="output directory (default: out)")
    sub.add_argument("--t-frame-us", type=int, default=None, help="frame length in µs")
    sub.add_argument("--params", default=None, help="JSON parameter override file")
    if sim:
        sub.add_argument("--seed", type=int, default=1, help="simulation RNG seed")
        sub.add_argument("--sim-time-s", type=float, default=None, help="simulated seconds")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coexlab",
        description="Throughput and air-time analysis of co-channel duty-cycled "
                    "LTE-U and CSMA/CA Wi-Fi deployments",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("analyze", help="analytical per-node report")
    _add_common(p)
    p.add_argument("--state-grid-us", type=int, default=None,
                   help="also sample per-eNB phase probabilities on this grid")
    p.add_argument("--segments", action="store_true", help="also dump the segment cover")
    p.add_argument("--max-segments", type=int, default=1_000_000,
                   help="state-space safety cap (exit code 2 when exceeded)")
    p.set_defaults(func=_cmd_analyze)

    p = subs.add_parser("simulate", help="discrete-event simulation")
    _add_common(p, sim=True)
    p.add_argument("--trace", action="store_true", help="also dump the event trace")
    p.set_defaults(func=_cmd_simulate)

    p = subs.add_parser("compare", help="analytical vs simulated throughput")
    _add_common(p, sim=True)
    p.add_argument("--runs", type=int, default=1, help="simulation repetitions to average")
    p.set_defaults(func=_cmd_compare)

    p = subs.add_parser("coexist", help="eNB-replacement fairness study")
    _add_common(p)
    p.set_defaults(func=_cmd_coexist)

    p = subs.add_parser("sweep-tframe", help="system throughput across frame lengths")
    _add_common(p, sim=True)
    p.add_argument("--values-us", default="10000,20000,40000,80000",
                   help="comma-separated frame lengths in µs")
    p.set_defaults(func=_cmd_sweep)

    p = subs.add_parser("gen-topology", help="random uniform deployment")
    p.add_argument("-o", "--out", required=True, help="output topology JSON file")
    p.add_argument("--n", type=int, required=True, help="total node count")
    p.add_argument("--wifi-fraction", type=float, default=0.5)
    p.add_argument("--area-m", type=float, default=200.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-dist", type=float, default=1.0,
                   help="minimum pairwise spacing in meters")
    p.set_defaults(func=_cmd_gen)

    p = subs.add_parser("state-prob", help="per-eNB phase probability time series")
    _add_common(p)
    p.add_argument("--node", default=None, help="restrict to one LTE-U node id")
    p.add_argument("--grid-us", type=int, default=100, help="sampling step in µs")
    p.set_defaults(func=_cmd_state_prob)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StateSpaceLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (TopologyError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
