"""End-to-end analytical pipeline: geometry -> schedule -> segment cover ->
per-node normalized throughput, absolute throughput, and air time.

For each segment of the frame cover the active Wi-Fi set is computed, the
channel shares of the induced carrier-sense graph are looked up (memoized per
distinct active set), suppressed nodes get zero, and everything is averaged
over probability x duration.  The integral is exact: segments are piecewise
constant and all weights are rational, so the per-node normalized throughput
is a Fraction and the report is independent of the frame length.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from . import csma
from .csma import MacParameters
from .states import (
    ACTIVE,
    DEFAULT_MAX_SEGMENTS,
    DEFAULT_T_FRAME_S,
    LtuSchedule,
    SegmentCover,
    build_segments,
    node_state_probability,
)
from .topology import LTEU, WIFI, ContentionGraphs, Topology, build_graphs

DEFAULT_LTEU_RATE_MBPS = 93.24


def wifi_normalized(
    cover: SegmentCover, graphs: ContentionGraphs, wifi_ids: Sequence[str]
) -> dict[str, Fraction]:
    """Exact frame-averaged channel share per Wi-Fi node.

    Share inside one segment: the node's membership frequency across the
    maximum independent sets of the carrier-sense graph induced by the
    active set; zero while any EDT-adjacent eNB transmits.
    """
    ltu_ids = cover.schedule.node_ids
    totals = {w: Fraction(0) for w in wifi_ids}
    share_cache: dict[frozenset[str], dict[str, Fraction]] = {}
    active_cache: dict[tuple[int, ...], frozenset[str]] = {}
    for seg in cover.segments:
        active = active_cache.get(seg.phases)
        if active is None:
            active = csma.active_set(seg.phases, ltu_ids, wifi_ids, graphs)
            active_cache[seg.phases] = active
        shares = share_cache.get(active)
        if shares is None:
            shares = csma.mis_share(active, graphs.cst)
            share_cache[active] = shares
        weight = seg.probability * seg.duration
        for w, value in shares.items():
            totals[w] += weight * value
    t_frame = cover.t_frame
    return {w: totals[w] / t_frame for w in wifi_ids}


def wifi_throughput_mbps(
    normalized: Mapping[str, Fraction], mac: MacParameters
) -> dict[str, float]:
    """Absolute throughput: share times the single-link saturation rate."""
    z1 = csma.single_link_throughput_mbps(mac)
    return {w: float(v) * z1 for w, v in normalized.items()}


def ltu_throughput_mbps(duty: Fraction, lteu_rate_mbps: float) -> float:
    """eNB throughput: duty cycle times its PHY rate."""
    return float(duty) * lteu_rate_mbps


@dataclass(frozen=True)
class NodeReport:
    node_id: str
    kind: str
    normalized: float  # channel share for Wi-Fi, duty cycle for LTE-U
    throughput_mbps: float
    air_time: float
    duty_cycle: float | None = None


@dataclass(frozen=True)
class StateProbSample:
    node_id: str
    t_us: float
    pending: float
    transmitting: float
    done: float


@dataclass(frozen=True)
class Report:
    nodes: tuple[NodeReport, ...]
    topology_hash: str
    t_frame_s: float
    lteu_rate_mbps: float
    mac: MacParameters
    warnings: tuple[str, ...] = ()
    state_grid: tuple[StateProbSample, ...] = ()

    @property
    def system_throughput_mbps(self) -> float:
        return sum(n.throughput_mbps for n in self.nodes)

    def by_id(self) -> dict[str, NodeReport]:
        return {n.node_id: n for n in self.nodes}


def analyze(
    topology: Topology,
    mac: MacParameters | None = None,
    t_frame=DEFAULT_T_FRAME_S,
    lteu_rate_mbps: float = DEFAULT_LTEU_RATE_MBPS,
    duty_overrides: Mapping[str, object] | None = None,
    state_grid_us: int | None = None,
    max_segments: int = DEFAULT_MAX_SEGMENTS,
) -> Report:
    """Full analytical report for one deployment.

    state_grid_us, when given, samples each eNB's per-phase probabilities on
    that time grid and attaches them to the report.
    """
    mac = mac or MacParameters()
    graphs = build_graphs(topology)
    schedule = LtuSchedule.from_topology(
        topology, graphs, t_frame=t_frame, duty_overrides=duty_overrides
    )
    cover = build_segments(schedule, max_segments=max_segments)
    normalized = wifi_normalized(cover, graphs, topology.wifi_ids)
    throughput = wifi_throughput_mbps(normalized, mac)
    omega_1 = csma.busy_slot_fraction(1, mac)
    duties = dict(zip(schedule.node_ids, schedule.duty_cycles))

    rows = []
    for node in topology.nodes:
        if node.kind == WIFI:
            share = normalized[node.id]
            rows.append(
                NodeReport(
                    node_id=node.id,
                    kind=WIFI,
                    normalized=float(share),
                    throughput_mbps=throughput[node.id],
                    air_time=float(share) * omega_1,
                )
            )
        else:
            duty = duties[node.id]
            rows.append(
                NodeReport(
                    node_id=node.id,
                    kind=LTEU,
                    normalized=float(duty),
                    throughput_mbps=ltu_throughput_mbps(duty, lteu_rate_mbps),
                    air_time=float(duty),
                    duty_cycle=float(duty),
                )
            )

    grid: list[StateProbSample] = []
    if state_grid_us is not None:
        if state_grid_us <= 0:
            raise ValueError("state_grid_us must be positive")
        step = Fraction(state_grid_us, 1_000_000)
        for i, node_id in enumerate(schedule.node_ids):
            t = Fraction(0)
            while t < schedule.t_frame:
                p0, p1, p2 = node_state_probability(cover, i, t)
                grid.append(
                    StateProbSample(
                        node_id=node_id,
                        t_us=float(t * 1_000_000),
                        pending=float(p0),
                        transmitting=float(p1),
                        done=float(p2),
                    )
                )
                t += step

    return Report(
        nodes=tuple(rows),
        topology_hash=topology.content_hash(),
        t_frame_s=float(schedule.t_frame),
        lteu_rate_mbps=lteu_rate_mbps,
        mac=mac,
        warnings=cover.warnings,
        state_grid=tuple(grid),
    )


def write_report_csv(report: Report, fh) -> None:
    writer = csv.writer(fh)
    writer.writerow(["node_id", "kind", "normalized", "throughput_mbps", "air_time"])
    for row in report.nodes:
        writer.writerow(
            [row.node_id, row.kind, repr(row.normalized), repr(row.throughput_mbps), repr(row.air_time)]
        )


def write_state_grid_csv(report: Report, fh) -> None:
    writer = csv.writer(fh)
    writer.writerow(["node_id", "t_us", "prob_pending", "prob_transmitting", "prob_done"])
    for s in report.state_grid:
        writer.writerow([s.node_id, s.t_us, repr(s.pending), repr(s.transmitting), repr(s.done)])
