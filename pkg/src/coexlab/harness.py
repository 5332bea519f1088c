"""Experiment drivers: random topology generation, model-vs-simulation
comparison, frame-length sweeps, and the eNB-replacement fairness study."""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

from . import csma
from .analysis import DEFAULT_LTEU_RATE_MBPS, Report, analyze
from .csma import MacParameters
from .simulator import SimConfig, SimResult, simulate
from .states import DEFAULT_T_FRAME_S
from .topology import LTEU, WIFI, ChannelParams, Node, Topology


def gen_topology(
    n_total: int,
    wifi_fraction: float = 0.5,
    area_m: float = 200.0,
    seed: int = 0,
    min_dist_m: float = 1.0,
    tx_power_dbm: float = 20.0,
    channel: ChannelParams | None = None,
) -> Topology:
    """Uniform random placement over a square, deterministic per seed.

    Node counts follow the Wi-Fi fraction with halves rounding toward Wi-Fi.
    Positions closer than min_dist_m to an earlier node are redrawn.
    """
    if n_total < 1:
        raise ValueError("n_total must be >= 1")
    if not 0.0 <= wifi_fraction <= 1.0:
        raise ValueError("wifi_fraction must lie in [0, 1]")
    if area_m <= 0:
        raise ValueError("area_m must be positive")
    rng = random.Random(seed)
    n_wifi = int(math.floor(n_total * wifi_fraction + 0.5))
    positions: list[tuple[float, float]] = []
    while len(positions) < n_total:
        for _ in range(100_000):
            x, y = rng.uniform(0.0, area_m), rng.uniform(0.0, area_m)
            if all(math.hypot(x - px, y - py) >= min_dist_m for px, py in positions):
                positions.append((x, y))
                break
        else:
            raise ValueError(
                f"could not place {n_total} nodes at min_dist {min_dist_m} m in a "
                f"{area_m} m square"
            )
    nodes = []
    for i, (x, y) in enumerate(positions):
        if i < n_wifi:
            nodes.append(Node(id=f"W{i + 1}", kind=WIFI, x=x, y=y, tx_power_dbm=tx_power_dbm))
        else:
            nodes.append(Node(id=f"L{i - n_wifi + 1}", kind=LTEU, x=x, y=y, tx_power_dbm=tx_power_dbm))
    return Topology(nodes=tuple(nodes), channel=channel or ChannelParams())


# ----------------------------------------------------------------------
# Analytical vs simulated throughput
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class CompareRow:
    node_id: str
    kind: str
    analysis_mbps: float
    simulation_mbps: float
    error: float  # |analysis - simulation| / simulation


@dataclass(frozen=True)
class CompareResult:
    rows: tuple[CompareRow, ...]
    wifi_mean_error: float
    lteu_mean_error: float
    system_error: float
    report: Report
    simulated_system_mbps: float


def _node_error(analysis: float, simulation: float) -> float:
    if simulation == 0.0:
        return 0.0 if analysis == 0.0 else math.inf
    return abs(analysis - simulation) / simulation


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def compare(topology: Topology, config: SimConfig, runs: int = 1) -> CompareResult:
    """Analyze and simulate the same deployment; per-node and class errors.

    With runs > 1 the simulation is repeated on consecutive seeds and
    per-node throughputs are averaged before the errors are taken.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    report = analyze(
        topology,
        mac=config.mac,
        t_frame=config.t_frame_s,
        lteu_rate_mbps=config.lteu_rate_mbps,
        duty_overrides=config.duty_overrides,
    )
    totals = {n.id: 0.0 for n in topology.nodes}
    for k in range(runs):
        result = simulate(topology, replace(config, seed=config.seed + k))
        for node_id, value in result.throughput_mbps.items():
            totals[node_id] += value
    sim_thr = {node_id: v / runs for node_id, v in totals.items()}

    rows = []
    for node in topology.nodes:
        a = report.by_id()[node.id].throughput_mbps
        s = sim_thr[node.id]
        rows.append(CompareRow(node.id, node.kind, a, s, _node_error(a, s)))
    wifi_errors = [r.error for r in rows if r.kind == WIFI]
    lteu_errors = [r.error for r in rows if r.kind == LTEU]
    sim_system = sum(sim_thr.values())
    system_error = _node_error(report.system_throughput_mbps, sim_system)
    return CompareResult(
        rows=tuple(rows),
        wifi_mean_error=_mean(wifi_errors),
        lteu_mean_error=_mean(lteu_errors),
        system_error=system_error,
        report=report,
        simulated_system_mbps=sim_system,
    )


def write_compare_csv(result: CompareResult, fh) -> None:
    writer = csv.writer(fh)
    writer.writerow(["node_id", "kind", "analysis_mbps", "simulation_mbps", "error_pct"])
    for r in result.rows:
        writer.writerow([r.node_id, r.kind, repr(r.analysis_mbps), repr(r.simulation_mbps),
                         repr(100.0 * r.error)])
    writer.writerow(["mean_wifi", WIFI, "", "", repr(100.0 * result.wifi_mean_error)])
    writer.writerow(["mean_lteu", LTEU, "", "", repr(100.0 * result.lteu_mean_error)])
    writer.writerow(["system", "", repr(result.report.system_throughput_mbps),
                     repr(result.simulated_system_mbps), repr(100.0 * result.system_error)])


# ----------------------------------------------------------------------
# Replacement fairness study (eNBs swapped for Wi-Fi APs in place)
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class CoexistStudy:
    #: (node_id, throughput with eNBs present, throughput with eNBs replaced)
    fixed_wifi: tuple[tuple[str, float, float], ...]
    replaced: tuple[tuple[str, float, float], ...]
    mixed_report: Report
    all_wifi_report: Report
    #: class name -> 100 (quantile, normalized throughput) pairs
    cdf: dict[str, tuple[tuple[float, float], ...]]


def replace_lteu_with_wifi(topology: Topology) -> Topology:
    """Same geometry and ids, every eNB turned into a Wi-Fi AP."""
    return Topology(
        nodes=tuple(
            replace(n, kind=WIFI) if n.kind == LTEU else n for n in topology.nodes
        ),
        channel=topology.channel,
    )


def _quantiles(values: Iterable[float], points: int = 100) -> tuple[tuple[float, float], ...]:
    ordered = sorted(values)
    if not ordered:
        return ()
    n = len(ordered)
    out = []
    for i in range(1, points + 1):
        q = i / points
        pos = q * (n - 1)
        lo = int(math.floor(pos))
        hi = min(lo + 1, n - 1)
        frac = pos - lo
        out.append((q, ordered[lo] + frac * (ordered[hi] - ordered[lo])))
    return tuple(out)


def coexist_study(
    topology: Topology,
    mac: MacParameters | None = None,
    t_frame=DEFAULT_T_FRAME_S,
    lteu_rate_mbps: float = DEFAULT_LTEU_RATE_MBPS,
    cdf_points: int = 100,
) -> CoexistStudy:
    """Analyze the deployment as-is and with every eNB replaced by an AP.

    Throughputs are paired per node; CDF samples are normalized by the
    single-link Wi-Fi rate for APs and by the eNB PHY rate for eNBs.
    """
    if not topology.lteu_ids:
        raise ValueError("coexistence study requires at least one LTE-U node")
    mac = mac or MacParameters()
    mixed = analyze(topology, mac=mac, t_frame=t_frame, lteu_rate_mbps=lteu_rate_mbps)
    all_wifi = analyze(replace_lteu_with_wifi(topology), mac=mac, t_frame=t_frame,
                       lteu_rate_mbps=lteu_rate_mbps)
    z1 = csma.single_link_throughput_mbps(mac)
    mixed_by, wifi_by = mixed.by_id(), all_wifi.by_id()

    fixed = tuple(
        (w, mixed_by[w].throughput_mbps, wifi_by[w].throughput_mbps)
        for w in topology.wifi_ids
    )
    swapped = tuple(
        (l, mixed_by[l].throughput_mbps, wifi_by[l].throughput_mbps)
        for l in topology.lteu_ids
    )
    cdf = {
        "mixed_fixed_wifi": _quantiles((mixed_by[w].throughput_mbps / z1 for w in topology.wifi_ids), cdf_points),
        "allwifi_fixed_wifi": _quantiles((wifi_by[w].throughput_mbps / z1 for w in topology.wifi_ids), cdf_points),
        "mixed_lteu": _quantiles((mixed_by[l].throughput_mbps / lteu_rate_mbps for l in topology.lteu_ids), cdf_points),
        "allwifi_replaced_wifi": _quantiles((wifi_by[l].throughput_mbps / z1 for l in topology.lteu_ids), cdf_points),
    }
    return CoexistStudy(
        fixed_wifi=fixed,
        replaced=swapped,
        mixed_report=mixed,
        all_wifi_report=all_wifi,
        cdf=cdf,
    )


def write_coexist_csv(study: CoexistStudy, fh) -> None:
    writer = csv.writer(fh)
    writer.writerow(["node_id", "set", "with_lteu_mbps", "all_wifi_mbps"])
    for node_id, wl, ww in study.fixed_wifi:
        writer.writerow([node_id, "fixed_wifi", repr(wl), repr(ww)])
    for node_id, wl, ww in study.replaced:
        writer.writerow([node_id, "replaced", repr(wl), repr(ww)])


def write_cdf_csv(study: CoexistStudy, fh) -> None:
    writer = csv.writer(fh)
    writer.writerow(["set", "quantile", "normalized_throughput"])
    for name in sorted(study.cdf):
        for q, value in study.cdf[name]:
            writer.writerow([name, repr(q), repr(value)])


# ----------------------------------------------------------------------
# Frame-length sweep
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    t_frame_us: int
    analytical_system_mbps: float
    simulated_system_mbps: float


def tframe_sweep(
    topology: Topology, config: SimConfig, values_us: Sequence[int]
) -> tuple[SweepRow, ...]:
    """System throughput at several frame lengths.

    The analytical value is frame-length invariant; the simulated value moves
    with the per-frame transition overhead.
    """
    if not values_us:
        raise ValueError("values_us must be non-empty")
    rows = []
    for t_us in values_us:
        t_frame_s = t_us / 1_000_000
        report = analyze(
            topology,
            mac=config.mac,
            t_frame=t_frame_s,
            lteu_rate_mbps=config.lteu_rate_mbps,
            duty_overrides=config.duty_overrides,
        )
        result = simulate(topology, replace(config, t_frame_s=t_frame_s))
        rows.append(
            SweepRow(
                t_frame_us=int(t_us),
                analytical_system_mbps=report.system_throughput_mbps,
                simulated_system_mbps=result.system_throughput_mbps,
            )
        )
    return tuple(rows)


def write_sweep_csv(rows: Iterable[SweepRow], fh) -> None:
    writer = csv.writer(fh)
    writer.writerow(["t_frame_us", "analytical_system_mbps", "simulated_system_mbps"])
    for r in rows:
        writer.writerow([r.t_frame_us, repr(r.analytical_system_mbps), repr(r.simulated_system_mbps)])
