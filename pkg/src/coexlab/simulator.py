"""Discrete-event oracle: slot-accurate CSMA/CA Wi-Fi plus frame-scheduled,
coordinated duty-cycled eNBs on one shared channel.

Time is integer microseconds.  Wi-Fi nodes run saturated DCF: DIFS sensing,
uniform backoff over [0, CW-1] slots frozen while the channel is busy,
binary exponential CW growth on loss, drop after the retry limit.  A node
senses busy while any CST-adjacent Wi-Fi node transmits or any EDT-adjacent
eNB is ON.  Two CST-adjacent nodes whose countdowns expire on the same tick
collide; a data frame overlapped by an EDT-adjacent eNB's ON interval is
lost.  eNBs owe one ON burst per frame, defer to EDT-adjacent eNBs, and the
starter among simultaneously eligible eNBs is drawn uniformly.

Everything is driven by one seeded RNG and a deterministically ordered event
heap, so identical inputs replay identical results.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from typing import Mapping

from . import csma
from .analysis import DEFAULT_LTEU_RATE_MBPS
from .csma import MacParameters
from .states import LtuSchedule
from .topology import LTEU, WIFI, Topology, build_graphs

# Event priorities within one tick: releases happen first, then the frame
# rollover, then Wi-Fi countdown expiries, then eNB start checks.  A Wi-Fi
# expiry that ties with an eNB start therefore transmits into the burst and
# is corrupted.
_P_RELEASE, _P_FRAME, _P_TIMER, _P_LTU_CHECK = 0, 1, 2, 3


@dataclass(frozen=True)
class SimConfig:
    seed: int = 1
    sim_time_s: float = 50.0
    t_frame_s: float = 0.040
    mac: MacParameters = field(default_factory=MacParameters)
    lteu_rate_mbps: float = DEFAULT_LTEU_RATE_MBPS
    warmup_frames: int = 5
    duty_overrides: Mapping[str, object] | None = None
    record_trace: bool = False
    record_ltu_intervals: bool = False

    def __post_init__(self):
        if self.t_frame_s <= 0:
            raise ValueError("t_frame_s must be positive")
        if self.sim_time_s < 10 * self.t_frame_s:
            raise ValueError(
                f"sim_time_s ({self.sim_time_s}) must be at least 10 frames "
                f"({10 * self.t_frame_s})"
            )
        if self.warmup_frames < 0:
            raise ValueError("warmup_frames must be >= 0")


@dataclass(frozen=True)
class SimResult:
    throughput_mbps: dict[str, float]
    air_time: dict[str, float]
    wifi_collisions: int
    wifi_overlap_losses: int
    wifi_drops: int
    frames: int
    seed: int
    trace: tuple | None = None
    ltu_intervals: tuple | None = None  # (frame_idx, node_id, on_start_us, on_end_us)

    @property
    def system_throughput_mbps(self) -> float:
        return sum(self.throughput_mbps.values())


class _Wifi:
    __slots__ = (
        "idx", "id", "cst", "edt_ltu", "busy", "idle_since", "counter", "stage",
        "retries", "gen", "in_tx", "tx_start", "tx_data_end", "collided",
        "corrupted", "bits", "air_us", "collisions", "overlap_losses", "drops",
    )

    def __init__(self, idx, node_id):
        self.idx = idx
        self.id = node_id
        self.cst: list[int] = []
        self.edt_ltu: list[int] = []
        self.busy = 0
        self.idle_since: int | None = None
        self.counter = 0
        self.stage = 0
        self.retries = 0
        self.gen = 0
        self.in_tx = False
        self.tx_start = 0
        self.tx_data_end = 0
        self.collided = False
        self.corrupted = False
        self.bits = 0
        self.air_us = 0
        self.collisions = 0
        self.overlap_losses = 0
        self.drops = 0


class _Ltu:
    __slots__ = ("idx", "id", "ltu_nbrs", "wifi_nbrs", "status", "allot_us", "on_end", "air_us")

    PENDING, ON, DONE = 0, 1, 2

    def __init__(self, idx, node_id, allot_us):
        self.idx = idx
        self.id = node_id
        self.ltu_nbrs: list[int] = []
        self.wifi_nbrs: list[int] = []
        self.status = _Ltu.PENDING
        self.allot_us = allot_us
        self.on_end = 0
        self.air_us = 0


def simulate(topology: Topology, config: SimConfig) -> SimResult:
    mac = config.mac
    rng = random.Random(config.seed)
    graphs = build_graphs(topology)
    schedule = LtuSchedule.from_topology(
        topology, graphs, t_frame=config.t_frame_s, duty_overrides=config.duty_overrides
    ) if topology.lteu_ids else None

    t_frame_us = round(config.t_frame_s * 1_000_000)
    sim_end = round(config.sim_time_s * 1_000_000)
    stats_start = config.warmup_frames * t_frame_us
    if stats_start >= sim_end:
        raise ValueError("warm-up swallows the whole simulation window")
    window_us = sim_end - stats_start

    slot = round(mac.slot_us)
    difs = round(mac.difs_us)
    data_us = round(csma.data_airtime_us(mac))
    ack_us = round(csma.ack_exchange_us(mac))
    t_s_us = data_us + ack_us + difs
    t_c_us = data_us + difs
    payload_bits = mac.aggregate_payload_bits
    max_stage = mac.backoff_stages

    wifi_ids = list(topology.wifi_ids)
    wifi = [_Wifi(i, node_id) for i, node_id in enumerate(wifi_ids)]
    widx = {node_id: i for i, node_id in enumerate(wifi_ids)}

    ltu_ids = list(schedule.node_ids) if schedule else []
    lidx = {node_id: i for i, node_id in enumerate(ltu_ids)}
    ltu = []
    for i, node_id in enumerate(ltu_ids):
        allot_us = round(schedule.allotments[i] * 1_000_000)
        ltu.append(_Ltu(i, node_id, allot_us))
        ltu[i].ltu_nbrs = sorted(lidx[m] for m in graphs.ltu[node_id])
        ltu[i].wifi_nbrs = sorted(widx[m] for m in graphs.edt[node_id] if m in widx)
    for w in wifi:
        w.cst = sorted(widx[m] for m in graphs.cst[w.id])
        w.edt_ltu = sorted(lidx[m] for m in graphs.edt[w.id] if m in lidx)

    heap: list[tuple] = []
    seq = 0

    def push(t, prio, kind, arg):
        nonlocal seq
        seq += 1
        heapq.heappush(heap, (t, prio, seq, kind, arg))

    trace: list[tuple] = []

    def log(t, node_id, event):
        if config.record_trace:
            trace.append((t, node_id, event))

    intervals: list[tuple] = []
    frame_idx = -1
    frame_end = 0

    # --- Wi-Fi helpers -------------------------------------------------

    def schedule_timer(w: _Wifi, t: int):
        w.gen += 1
        push(t + difs + w.counter * slot, _P_TIMER, "timer", (w.idx, w.gen))

    def consume_slots(w: _Wifi, t: int):
        if w.idle_since is None:
            return
        elapsed = t - w.idle_since
        if elapsed > difs:
            w.counter = max(0, w.counter - (elapsed - difs) // slot)
        w.idle_since = None
        w.gen += 1  # invalidate the pending expiry

    def busy_inc(w: _Wifi, t: int):
        w.busy += 1
        if w.busy == 1 and not w.in_tx:
            consume_slots(w, t)

    def busy_dec(w: _Wifi, t: int):
        w.busy -= 1
        if w.busy == 0 and not w.in_tx:
            w.idle_since = t
            schedule_timer(w, t)

    def draw_backoff(w: _Wifi):
        cw = min(mac.cw_min << w.stage, mac.cw_max)
        w.counter = rng.randrange(cw)

    def finish_attempt(w: _Wifi, t: int, success: bool):
        counted = w.tx_start >= stats_start
        if success:
            if counted:
                w.bits += payload_bits
                w.air_us += t_s_us
            w.stage = 0
            w.retries = 0
            log(t, w.id, "tx_end")
        else:
            if counted:
                w.air_us += t_c_us
                if w.corrupted:
                    w.overlap_losses += 1
                else:
                    w.collisions += 1
            log(t, w.id, "collision")
            w.retries += 1
            if w.retries > mac.max_retry:
                if counted:
                    w.drops += 1
                log(t, w.id, "drop")
                w.retries = 0
                w.stage = 0
            else:
                w.stage = min(w.stage + 1, max_stage)
        w.in_tx = False
        w.collided = False
        w.corrupted = False
        draw_backoff(w)
        if w.busy == 0:
            w.idle_since = t
            schedule_timer(w, t)
        else:
            w.idle_since = None

    def start_transmissions(t: int, starters: list[_Wifi]):
        batch = {w.idx for w in starters}
        for w in starters:
            w.collided = any(m in batch for m in w.cst)
            w.corrupted = False
            w.in_tx = True
            w.idle_since = None
            w.tx_start = t
            w.tx_data_end = t + data_us
            log(t, w.id, "tx_start")
        # busy increments after eligibility so same-tick starters all launch
        for w in starters:
            push(w.tx_data_end, _P_RELEASE, "data_end", w.idx)
            for m in w.cst:
                busy_inc(wifi[m], t)

    # --- eNB helpers ----------------------------------------------------

    def ltu_start_check(t: int):
        while True:
            eligible = [
                u for u in ltu
                if u.status == _Ltu.PENDING
                and all(ltu[m].status != _Ltu.ON for m in u.ltu_nbrs)
            ]
            if not eligible:
                return
            u = eligible[rng.randrange(len(eligible))]
            u.status = _Ltu.ON
            u.on_end = min(t + u.allot_us, frame_end)
            push(u.on_end, _P_RELEASE, "ltu_off", u.idx)
            log(t, u.id, "ltu_on")
            lo, hi = max(t, stats_start), min(u.on_end, sim_end)
            if hi > lo:
                u.air_us += hi - lo
            if config.record_ltu_intervals:
                intervals.append((frame_idx, u.id, t, u.on_end))
            for m in u.wifi_nbrs:
                w = wifi[m]
                busy_inc(w, t)
                if w.in_tx and t < w.tx_data_end:
                    w.corrupted = True

    # --- bootstrap --------------------------------------------------------

    for w in wifi:
        draw_backoff(w)
        w.idle_since = 0
        schedule_timer(w, 0)
    push(0, _P_FRAME, "frame", None)

    frames = 0
    while heap and heap[0][0] < sim_end:
        t, prio, _, kind, arg = heapq.heappop(heap)

        if kind == "timer":
            # Batch all same-tick expiries so CST neighbors collide instead
            # of serializing.
            entries = [arg]
            while heap and heap[0][0] == t and heap[0][1] == _P_TIMER:
                entries.append(heapq.heappop(heap)[4])
            starters = []
            for idx, gen in entries:
                w = wifi[idx]
                if w.gen == gen and w.busy == 0 and not w.in_tx and w.idle_since is not None:
                    starters.append(w)
            if starters:
                start_transmissions(t, starters)

        elif kind == "data_end":
            w = wifi[arg]
            if w.collided or w.corrupted:
                for m in w.cst:
                    busy_dec(wifi[m], t)
                finish_attempt(w, t, success=False)
            else:
                push(t + ack_us, _P_RELEASE, "succ_end", w.idx)

        elif kind == "succ_end":
            w = wifi[arg]
            for m in w.cst:
                busy_dec(wifi[m], t)
            finish_attempt(w, t, success=True)

        elif kind == "ltu_off":
            u = ltu[arg]
            u.status = _Ltu.DONE
            log(t, u.id, "ltu_off")
            for m in u.wifi_nbrs:
                busy_dec(wifi[m], t)
            push(t, _P_LTU_CHECK, "ltu_check", None)

        elif kind == "frame":
            frame_idx += 1
            frames += 1
            frame_end = t + t_frame_us
            for u in ltu:
                u.status = _Ltu.PENDING
            if ltu:
                push(t, _P_LTU_CHECK, "ltu_check", None)
            if t + t_frame_us < sim_end:
                push(t + t_frame_us, _P_FRAME, "frame", None)

        elif kind == "ltu_check":
            while heap and heap[0][0] == t and heap[0][1] == _P_LTU_CHECK:
                heapq.heappop(heap)
            ltu_start_check(t)

    throughput = {w.id: w.bits / window_us for w in wifi}
    air = {w.id: w.air_us / window_us for w in wifi}
    for u in ltu:
        throughput[u.id] = (u.air_us / window_us) * config.lteu_rate_mbps
        air[u.id] = u.air_us / window_us

    return SimResult(
        throughput_mbps=throughput,
        air_time=air,
        wifi_collisions=sum(w.collisions for w in wifi),
        wifi_overlap_losses=sum(w.overlap_losses for w in wifi),
        wifi_drops=sum(w.drops for w in wifi),
        frames=frames,
        seed=config.seed,
        trace=tuple(trace) if config.record_trace else None,
        ltu_intervals=tuple(intervals) if config.record_ltu_intervals else None,
    )


def write_trace_csv(result: SimResult, fh) -> None:
    import csv as _csv

    if result.trace is None:
        raise ValueError("simulation was run without record_trace")
    writer = _csv.writer(fh)
    writer.writerow(["t_us", "node_id", "event"])
    for row in result.trace:
        writer.writerow(row)


def write_sim_csv(topology: Topology, result: SimResult, fh) -> None:
    import csv as _csv

    writer = _csv.writer(fh)
    writer.writerow(["node_id", "kind", "throughput_mbps", "air_time"])
    for node in topology.nodes:
        writer.writerow(
            [
                node.id,
                node.kind,
                repr(result.throughput_mbps[node.id]),
                repr(result.air_time[node.id]),
            ]
        )
