"""Exact enumeration of the LTE-U network schedule over one frame.

Every eNB owes one ON burst per frame.  An eNB may start only while no
EDT-adjacent eNB is transmitting; whenever several blocked-free eNBs could
start at the same instant, one is chosen uniformly at random, eligibility is
re-evaluated, and the cascade repeats until nobody else can start.  Between
start/completion instants nothing happens except the linear countdown of the
active bursts.

This module expands that process exactly: states branch at start instants
with rational probabilities, identical states are merged, and the result is a
probability-weighted piecewise-constant cover of [0, T_frame).  All times and
probabilities are `fractions.Fraction`, so probability mass is conserved
exactly and runs are bit-reproducible.
"""

from __future__ import annotations

import csv
import heapq
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .topology import LTEU, ContentionGraphs, Topology, build_graphs, duty_cycle

#: Per-node phase codes within a frame.
PENDING, ACTIVE, DONE = 0, 1, 2

DEFAULT_T_FRAME_S = Fraction(1, 25)  # 40 ms
DEFAULT_MAX_SEGMENTS = 1_000_000


class StateSpaceLimitError(RuntimeError):
    """Schedule enumeration exceeded the configured segment cap."""


def _as_fraction(value) -> Fraction:
    # str() round-trip so 0.95 means 19/20, not the nearest binary float.
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


@dataclass(frozen=True)
class LtuSchedule:
    """Per-frame ON-time allotments for the eNBs plus their mutual adjacency.

    node_ids follow topology order; adjacency holds, per node index, the
    indices of EDT-adjacent eNBs.  Allotments are seconds of ON time.
    """

    node_ids: tuple[str, ...]
    allotments: tuple[Fraction, ...]
    t_frame: Fraction
    adjacency: tuple[frozenset[int], ...]

    def __post_init__(self):
        if len(self.allotments) != len(self.node_ids) or len(self.adjacency) != len(self.node_ids):
            raise ValueError("node_ids, allotments, and adjacency must have equal length")
        if self.t_frame <= 0:
            raise ValueError("t_frame must be positive")
        cap = self.t_frame * Fraction(19, 20)
        for node_id, allot in zip(self.node_ids, self.allotments):
            if not (0 < allot <= cap):
                raise ValueError(
                    f"allotment for {node_id!r} must lie in (0, 0.95*t_frame], got {allot}"
                )
        for i, nbrs in enumerate(self.adjacency):
            if i in nbrs:
                raise ValueError("adjacency must not contain self-loops")
            for j in nbrs:
                if i not in self.adjacency[j]:
                    raise ValueError("adjacency must be symmetric")

    @property
    def duty_cycles(self) -> tuple[Fraction, ...]:
        return tuple(a / self.t_frame for a in self.allotments)

    @classmethod
    def from_topology(
        cls,
        topology: Topology,
        graphs: ContentionGraphs | None = None,
        t_frame=DEFAULT_T_FRAME_S,
        duty_overrides: Mapping[str, object] | None = None,
    ) -> "LtuSchedule":
        """Derive the schedule from geometry: duty = min(0.95, 1/(1+EDT degree)).

        duty_overrides maps node id to an explicit duty cycle and wins over
        the neighbor-count rule.
        """
        graphs = graphs or build_graphs(topology)
        t_frame = _as_fraction(t_frame)
        ids = tuple(n.id for n in topology.nodes if n.kind == LTEU)
        index = {node_id: i for i, node_id in enumerate(ids)}
        overrides = dict(duty_overrides or {})
        unknown = set(overrides) - set(ids)
        if unknown:
            raise ValueError(f"duty_overrides for unknown LTE-U node(s): {sorted(unknown)}")
        duties = []
        for node_id in ids:
            if node_id in overrides:
                duties.append(_as_fraction(overrides[node_id]))
            else:
                duties.append(duty_cycle(topology.node(node_id), graphs))
        adjacency = tuple(
            frozenset(index[m] for m in graphs.ltu[node_id]) for node_id in ids
        )
        return cls(
            node_ids=ids,
            allotments=tuple(d * t_frame for d in duties),
            t_frame=t_frame,
            adjacency=adjacency,
        )


@dataclass(frozen=True)
class NetworkState:
    """Joint eNB state at an instant: per-node phase, leftover ON time, and
    the probability of the branch that reached it."""

    phases: tuple[int, ...]
    remaining: tuple[Fraction, ...]
    time: Fraction
    probability: Fraction

    def is_stable(self) -> bool:
        return all(p == DONE for p in self.phases)


@dataclass(frozen=True)
class Segment:
    """One constant-phase interval [t_start, t_end) of one branch family."""

    phases: tuple[int, ...]
    t_start: Fraction
    t_end: Fraction
    probability: Fraction

    @property
    def duration(self) -> Fraction:
        return self.t_end - self.t_start

    def covers(self, t) -> bool:
        return self.t_start <= t < self.t_end


def initial_state(schedule: LtuSchedule) -> NetworkState:
    """Frame start: everyone pending with a full allotment, probability 1."""
    n = len(schedule.node_ids)
    return NetworkState(
        phases=(PENDING,) * n,
        remaining=tuple(schedule.allotments),
        time=Fraction(0),
        probability=Fraction(1),
    )


def eligible_starters(state: NetworkState, adjacency: Sequence[frozenset[int]]) -> tuple[int, ...]:
    """Indices of pending nodes with no transmitting EDT neighbor."""
    return _eligible(state.phases, adjacency)


def _eligible(phases: Sequence[int], adjacency: Sequence[frozenset[int]]) -> tuple[int, ...]:
    return tuple(
        i
        for i, p in enumerate(phases)
        if p == PENDING and all(phases[j] != ACTIVE for j in adjacency[i])
    )


def _start_cascade(
    phases: tuple[int, ...], adjacency: Sequence[frozenset[int]]
) -> dict[tuple[int, ...], Fraction]:
    """All outcomes of the start cascade with their exact probabilities.

    Repeatedly picks one eligible starter uniformly at random until none is
    left.  Different pick orders reaching the same transmitter set are merged;
    memoization keeps the walk polynomial in the number of reachable phase
    vectors rather than factorial in the pick orderings.
    """
    memo: dict[tuple[int, ...], dict[tuple[int, ...], Fraction]] = {}

    def walk(current: tuple[int, ...]) -> dict[tuple[int, ...], Fraction]:
        cached = memo.get(current)
        if cached is not None:
            return cached
        eligible = _eligible(current, adjacency)
        if not eligible:
            result = {current: Fraction(1)}
        else:
            share = Fraction(1, len(eligible))
            result = {}
            for i in eligible:
                child = current[:i] + (ACTIVE,) + current[i + 1:]
                for terminal, p in walk(child).items():
                    result[terminal] = result.get(terminal, Fraction(0)) + share * p
        memo[current] = result
        return result

    return walk(phases)


def _expand_detailed(state: NetworkState, adjacency: Sequence[frozenset[int]]):
    """One macro-step: start cascade, countdown to the next completion,
    completions flipped.

    Yields (segment_phases, branch_probability, child_state); the segment
    covers [state.time, child.time) with the during-countdown phases.  Branch
    probabilities sum to 1 and child probabilities already include the
    parent's mass.
    """
    if state.is_stable():
        raise ValueError("cannot expand a stable state (all transmissions completed)")
    phases = tuple(state.phases)
    remaining = list(state.remaining)
    # Fold in any completion the caller left pending (leftover time 0).
    phases = tuple(
        DONE if p == ACTIVE and remaining[i] == 0 else p for i, p in enumerate(phases)
    )
    results = []
    for started, branch_p in sorted(_start_cascade(phases, adjacency).items()):
        active = [i for i, p in enumerate(started) if p == ACTIVE]
        if not active:
            # Start cascade finished the frame's work outright (everyone done).
            child = NetworkState(started, tuple(Fraction(0) for _ in remaining), state.time, state.probability * branch_p)
            results.append((started, branch_p, child))
            continue
        step = min(remaining[i] for i in active)
        new_remaining = tuple(
            remaining[i] - step if i in active else remaining[i] for i in range(len(remaining))
        )
        new_phases = tuple(
            DONE if started[i] == ACTIVE and new_remaining[i] == 0 else started[i]
            for i in range(len(started))
        )
        child = NetworkState(
            phases=new_phases,
            remaining=new_remaining,
            time=state.time + step,
            probability=state.probability * branch_p,
        )
        results.append((started, branch_p, child))
    return results


def expand(state: NetworkState, adjacency: Sequence[frozenset[int]]):
    """Public macro-step: list of (child state, branch probability)."""
    return [(child, branch_p) for _, branch_p, child in _expand_detailed(state, adjacency)]


@dataclass(frozen=True)
class SegmentCover:
    """Probability-weighted piecewise-constant cover of one frame."""

    segments: tuple[Segment, ...]
    schedule: LtuSchedule
    warnings: tuple[str, ...]
    #: Expected seconds each node actually spent transmitting (equals its
    #: allotment unless a truncation warning was emitted).
    transmitted: tuple[Fraction, ...]

    @property
    def t_frame(self) -> Fraction:
        return self.schedule.t_frame


def build_segments(schedule: LtuSchedule, max_segments: int = DEFAULT_MAX_SEGMENTS) -> SegmentCover:
    """Expand every branch of the frame schedule into merged segments.

    Branches are explored in time order; states identical in (time, phases,
    leftover times) are merged by summing probability before they are
    expanded, which keeps clustered deployments sub-factorial.  Bursts that
    cannot finish inside the frame are truncated at T_frame with a warning.
    """
    n = len(schedule.node_ids)
    t_frame = schedule.t_frame
    if n == 0:
        seg = Segment(phases=(), t_start=Fraction(0), t_end=t_frame, probability=Fraction(1))
        return SegmentCover((seg,), schedule, (), ())

    seg_mass: dict[tuple, Fraction] = {}
    transmitted = [Fraction(0)] * n
    warnings: set[str] = set()

    def emit(phases: tuple[int, ...], t0: Fraction, t1: Fraction, prob: Fraction):
        if t1 <= t0:
            return
        key = (t0, t1, phases)
        seg_mass[key] = seg_mass.get(key, Fraction(0)) + prob
        for i, p in enumerate(phases):
            if p == ACTIVE:
                transmitted[i] += prob * (t1 - t0)

    start = initial_state(schedule)
    frontier: dict[tuple, Fraction] = {}
    heap: list[tuple] = []

    def push(state: NetworkState):
        key = (state.time, state.phases, state.remaining)
        if key in frontier:
            frontier[key] += state.probability
        else:
            frontier[key] = state.probability
            heapq.heappush(heap, key)

    push(start)
    while heap:
        key = heapq.heappop(heap)
        prob = frontier.pop(key, None)
        if prob is None:
            continue
        time, phases, remaining = key
        state = NetworkState(phases=phases, remaining=remaining, time=time, probability=prob)
        if state.is_stable():
            emit(phases, time, t_frame, prob)
            continue
        if time >= t_frame:
            unfinished = sorted(
                schedule.node_ids[i] for i, p in enumerate(phases) if p != DONE
            )
            warnings.add(
                "frame ended before node(s) "
                + ", ".join(unfinished)
                + " completed; truncated at t_frame"
            )
            continue
        for seg_phases, _branch_p, child in _expand_detailed(state, adjacency=schedule.adjacency):
            if child.time > t_frame:
                # Every active burst is still running at t_frame (completions
                # only happen at child.time), so all non-done nodes lose time.
                emit(seg_phases, time, t_frame, child.probability)
                unfinished = sorted(
                    schedule.node_ids[i]
                    for i, p in enumerate(seg_phases)
                    if p != DONE
                )
                warnings.add(
                    "frame ended before node(s) "
                    + ", ".join(unfinished)
                    + " completed; truncated at t_frame"
                )
                continue
            emit(seg_phases, time, child.time, child.probability)
            push(child)
        if len(seg_mass) > max_segments:
            raise StateSpaceLimitError(
                f"segment count exceeded the cap of {max_segments} "
                f"(reached t={float(time):.6g}s of {float(t_frame):.6g}s; "
                f"{len(frontier)} branch states outstanding)"
            )

    segments = tuple(
        Segment(phases=phases, t_start=t0, t_end=t1, probability=p)
        for (t0, t1, phases), p in sorted(seg_mass.items())
    )
    return SegmentCover(segments, schedule, tuple(sorted(warnings)), tuple(transmitted))


def state_probability(cover: SegmentCover, phases: Sequence[int], t) -> Fraction:
    """Probability that the joint phase vector equals `phases` at time t."""
    _check_time(cover, t)
    phases = tuple(phases)
    return sum(
        (s.probability for s in cover.segments if s.phases == phases and s.covers(t)),
        Fraction(0),
    )


def node_state_probability(cover: SegmentCover, node_index: int, t) -> tuple[Fraction, Fraction, Fraction]:
    """Marginal (pending, transmitting, done) probabilities for one node at t."""
    if not 0 <= node_index < len(cover.schedule.node_ids):
        raise ValueError(f"node index {node_index} out of range")
    _check_time(cover, t)
    out = [Fraction(0), Fraction(0), Fraction(0)]
    for s in cover.segments:
        if s.covers(t):
            out[s.phases[node_index]] += s.probability
    return tuple(out)


def _check_time(cover: SegmentCover, t) -> None:
    if not 0 <= t < cover.t_frame:
        raise ValueError(f"time {t} outside the frame [0, {float(cover.t_frame)})")


def write_segments_csv(cover: SegmentCover, fh) -> None:
    """Dump the cover: one row per merged segment, times in microseconds."""
    writer = csv.writer(fh)
    writer.writerow(["state_id", "phases", "t_start_us", "t_end_us", "probability"])
    for i, seg in enumerate(cover.segments):
        writer.writerow(
            [
                i,
                "".join(str(p) for p in seg.phases),
                float(seg.t_start * 1_000_000),
                float(seg.t_end * 1_000_000),
                float(seg.probability),
            ]
        )
