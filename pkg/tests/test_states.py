import math
import random
from fractions import Fraction

import pytest

from coexlab import (
    ACTIVE,
    DONE,
    PENDING,
    LtuSchedule,
    NetworkState,
    Node,
    StateSpaceLimitError,
    Topology,
    build_graphs,
    build_segments,
    eligible_starters,
    expand,
    initial_state,
    node_state_probability,
    state_probability,
)
from coexlab.harness import gen_topology
from coexlab.states import write_segments_csv

T40 = Fraction(1, 25)  # 40 ms


def schedule_from(adjacency, duties, t_frame=T40):
    n = len(adjacency)
    return LtuSchedule(
        node_ids=tuple(f"L{i + 1}" for i in range(n)),
        allotments=tuple(Fraction(d) * t_frame for d in duties),
        t_frame=t_frame,
        adjacency=tuple(frozenset(a) for a in adjacency),
    )


# pendant pair plus isolated node: edges {L2-L3}, L1 alone
PENDANT = schedule_from(
    adjacency=[(), (2,), (1,)],
    duties=[Fraction(19, 20), Fraction(1, 2), Fraction(1, 2)],
)

TRIANGLE = schedule_from(
    adjacency=[(1, 2), (0, 2), (0, 1)],
    duties=[Fraction(1, 3)] * 3,
)


class TestInitialState:
    def test_single_node(self):
        s = initial_state(schedule_from([()], [Fraction(19, 20)]))
        assert s.phases == (PENDING,)
        assert s.remaining == (Fraction(19, 20) * T40,)
        assert s.probability == 1
        assert s.time == 0

    def test_three_nodes(self):
        s = initial_state(PENDANT)
        assert s.phases == (0, 0, 0)
        assert s.remaining == PENDANT.allotments

    def test_no_lteu_nodes(self):
        empty = LtuSchedule(node_ids=(), allotments=(), t_frame=T40, adjacency=())
        s = initial_state(empty)
        assert s.phases == ()
        assert s.probability == 1


class TestEligibleStarters:
    def test_all_pending(self):
        assert eligible_starters(initial_state(PENDANT), PENDANT.adjacency) == (0, 1, 2)

    def test_blocked_by_transmitting_neighbor(self):
        s = NetworkState(
            phases=(ACTIVE, ACTIVE, PENDING),
            remaining=PENDANT.allotments,
            time=Fraction(0),
            probability=Fraction(1),
        )
        assert eligible_starters(s, PENDANT.adjacency) == ()

    def test_all_done(self):
        s = NetworkState(
            phases=(DONE, DONE, DONE),
            remaining=(Fraction(0),) * 3,
            time=T40,
            probability=Fraction(1),
        )
        assert eligible_starters(s, PENDANT.adjacency) == ()

    def test_completed_neighbor_unblocks(self):
        s = NetworkState(
            phases=(DONE, DONE, PENDING),
            remaining=(Fraction(0), Fraction(0), PENDANT.allotments[2]),
            time=Fraction(1, 50),
            probability=Fraction(1),
        )
        assert eligible_starters(s, PENDANT.adjacency) == (2,)


class TestExpand:
    def test_pendant_pair_two_start_patterns(self):
        children = expand(initial_state(PENDANT), PENDANT.adjacency)
        assert sum(p for _, p in children) == 1
        # L1 always starts; exactly one of L2/L3 joins, each pattern at 1/2
        started = {
            tuple(i for i, ph in enumerate(c.phases) if ph != PENDING): p
            for c, p in children
        }
        assert started == {(0, 1): Fraction(1, 2), (0, 2): Fraction(1, 2)}

    def test_triangle_three_branches(self):
        children = expand(initial_state(TRIANGLE), TRIANGLE.adjacency)
        assert len(children) == 3
        for child, p in children:
            assert p == Fraction(1, 3)
            # exactly one node got the channel; it ran its full burst
            assert sorted(child.phases) == [PENDING, PENDING, DONE]
            assert child.time == Fraction(1, 3) * T40

    def test_single_transmitter_completes(self):
        s = NetworkState(
            phases=(ACTIVE,),
            remaining=(Fraction(1, 100),),  # 10 ms left
            time=Fraction(1, 100),
            probability=Fraction(1),
        )
        children = expand(s, (frozenset(),))
        assert len(children) == 1
        child, p = children[0]
        assert p == 1
        assert child.phases == (DONE,)
        assert child.time == s.time + Fraction(1, 100)

    def test_stable_state_rejected(self):
        s = NetworkState(
            phases=(DONE,), remaining=(Fraction(0),), time=T40, probability=Fraction(1)
        )
        with pytest.raises(ValueError):
            expand(s, (frozenset(),))

    def test_phases_never_decrease(self):
        # walk the whole tree of the pendant schedule
        stack = [initial_state(PENDANT)]
        while stack:
            s = stack.pop()
            if s.is_stable():
                continue
            for child, _ in expand(s, PENDANT.adjacency):
                for before, after in zip(s.phases, child.phases):
                    assert after >= before
                stack.append(child)

    def test_clique_ordering_count_is_factorial(self):
        # each macro-step of a clique starts exactly one node
        for n in (2, 3, 4):
            sched = schedule_from(
                adjacency=[tuple(j for j in range(n) if j != i) for i in range(n)],
                duties=[Fraction(1, n)] * n,
            )

            def leaves(state):
                if state.is_stable():
                    return 1
                return sum(leaves(c) for c, _ in expand(state, sched.adjacency))

            assert leaves(initial_state(sched)) == math.factorial(n)


class TestBuildSegments:
    def test_single_node_half_duty(self):
        sched = schedule_from([()], [Fraction(1, 2)])
        cover = build_segments(sched)
        assert [
            (s.phases, s.t_start, s.t_end, s.probability) for s in cover.segments
        ] == [
            ((ACTIVE,), Fraction(0), T40 / 2, Fraction(1)),
            ((DONE,), T40 / 2, T40, Fraction(1)),
        ]
        assert cover.warnings == ()

    def test_mutual_pair_serializes(self):
        sched = schedule_from([(1,), (0,)], [Fraction(1, 2), Fraction(1, 2)])
        cover = build_segments(sched)
        half = T40 / 2
        expected = {
            ((ACTIVE, PENDING), Fraction(0), half): Fraction(1, 2),
            ((PENDING, ACTIVE), Fraction(0), half): Fraction(1, 2),
            ((DONE, ACTIVE), half, T40): Fraction(1, 2),
            ((ACTIVE, DONE), half, T40): Fraction(1, 2),
        }
        got = {(s.phases, s.t_start, s.t_end): s.probability for s in cover.segments}
        assert got == expected

    def test_pendant_pair_branch_families(self):
        cover = build_segments(PENDANT)
        # two families at 1/2: (L2 first) and (L3 first); L1 active from t=0 in both
        first = [s for s in cover.segments if s.t_start == 0]
        assert sorted((s.phases, s.probability) for s in first) == [
            ((ACTIVE, PENDING, ACTIVE), Fraction(1, 2)),
            ((ACTIVE, ACTIVE, PENDING), Fraction(1, 2)),
        ]
        assert state_probability(cover, (ACTIVE, ACTIVE, PENDING), 0) == Fraction(1, 2)

    def test_empty_schedule_covers_frame(self):
        empty = LtuSchedule(node_ids=(), allotments=(), t_frame=T40, adjacency=())
        cover = build_segments(empty)
        assert len(cover.segments) == 1
        assert cover.segments[0].phases == ()
        assert cover.segments[0].probability == 1

    def test_air_time_matches_allotments(self):
        cover = build_segments(PENDANT)
        assert cover.transmitted == PENDANT.allotments

    def test_truncation_warns_and_reports_realized_air(self):
        sched = schedule_from([(1,), (0,)], [Fraction(19, 20), Fraction(19, 20)])
        cover = build_segments(sched)
        assert cover.warnings
        # each node averages 0.5*0.038 (goes first) + 0.5*0.002 (truncated tail)
        assert cover.transmitted == (Fraction(1, 50), Fraction(1, 50))
        for t in (Fraction(0), Fraction(39, 1000)):
            mass = sum(s.probability for s in cover.segments if s.covers(t))
            assert mass == 1

    def test_segment_cap(self):
        # distinct duties in a clique defeat merging; growth is factorial
        n = 8
        sched = schedule_from(
            adjacency=[tuple(j for j in range(n) if j != i) for i in range(n)],
            duties=[Fraction(1, 9 + i) for i in range(n)],
        )
        with pytest.raises(StateSpaceLimitError):
            build_segments(sched, max_segments=500)

    def test_equal_duty_clique_merges_below_factorial(self):
        n = 6
        sched = schedule_from(
            adjacency=[tuple(j for j in range(n) if j != i) for i in range(n)],
            duties=[Fraction(1, n)] * n,
        )
        cover = build_segments(sched)
        assert len(cover.segments) < math.factorial(n)
        assert cover.warnings == ()
        assert cover.transmitted == sched.allotments

    def test_probability_conservation_random_topologies(self):
        for seed in range(25):
            top = gen_topology(10, 0.5, 200.0, seed=seed)
            sched = LtuSchedule.from_topology(top)
            cover = build_segments(sched)
            boundaries = sorted({s.t_start for s in cover.segments})
            probes = boundaries + [Fraction(k, 100) * T40 for k in range(100)]
            for t in probes:
                mass = sum(s.probability for s in cover.segments if s.covers(t))
                assert mass == 1, f"seed {seed}, t={t}"

    def test_no_segment_has_adjacent_transmitters(self):
        for seed in range(10):
            top = gen_topology(12, 0.4, 120.0, seed=seed)
            sched = LtuSchedule.from_topology(top)
            cover = build_segments(sched)
            for s in cover.segments:
                active = [i for i, p in enumerate(s.phases) if p == ACTIVE]
                for i in active:
                    assert not (sched.adjacency[i] & set(active))


class TestStateProbability:
    def test_stable_at_frame_end(self):
        # slack schedule: every branch terminates by T/2, after which the
        # all-done state holds the whole mass
        sched = schedule_from(
            adjacency=[(), (2,), (1,)],
            duties=[Fraction(1, 2), Fraction(1, 4), Fraction(1, 4)],
        )
        cover = build_segments(sched)
        t = T40 - Fraction(1, 10**9)
        assert state_probability(cover, (DONE, DONE, DONE), t) == 1

    def test_invalid_vector_is_zero(self):
        cover = build_segments(TRIANGLE)
        assert state_probability(cover, (ACTIVE, ACTIVE, PENDING), Fraction(1, 1000)) == 0

    def test_time_domain_checked(self):
        cover = build_segments(PENDANT)
        with pytest.raises(ValueError):
            state_probability(cover, (0, 0, 0), T40)
        with pytest.raises(ValueError):
            state_probability(cover, (0, 0, 0), -Fraction(1, 1000))


class TestNodeStateProbability:
    def test_isolated_node_starts_immediately(self):
        sched = schedule_from([()], [Fraction(19, 20)])
        cover = build_segments(sched)
        assert node_state_probability(cover, 0, 0) == (0, 1, 0)

    def test_everything_done_late(self):
        sched = schedule_from(
            adjacency=[(), (2,), (1,)],
            duties=[Fraction(1, 2), Fraction(1, 4), Fraction(1, 4)],
        )
        cover = build_segments(sched)
        t = T40 - Fraction(1, 10**9)
        for i in range(3):
            assert node_state_probability(cover, i, t) == (0, 0, 1)

    def test_mutual_pair_midpoint(self):
        sched = schedule_from([(1,), (0,)], [Fraction(1, 2), Fraction(1, 2)])
        cover = build_segments(sched)
        p0, p1, p2 = node_state_probability(cover, 0, T40 / 4)
        assert (p0, p1, p2) == (Fraction(1, 2), Fraction(1, 2), 0)

    def test_marginals_sum_to_one(self):
        for seed in range(10):
            top = gen_topology(10, 0.5, 150.0, seed=seed)
            sched = LtuSchedule.from_topology(top)
            if not sched.node_ids:
                continue
            cover = build_segments(sched)
            for i in range(len(sched.node_ids)):
                for k in range(20):
                    t = Fraction(k, 20) * T40
                    assert sum(node_state_probability(cover, i, t)) == 1

    def test_bad_index(self):
        cover = build_segments(PENDANT)
        with pytest.raises(ValueError):
            node_state_probability(cover, 7, 0)


def _playout(schedule, rng):
    """Independent random playout of the start/countdown process.

    Returns per-node (start, end) times.  Mirrors the process definition
    directly (uniform pick among currently eligible, advance to the next
    completion), without any of the enumeration machinery.
    """
    n = len(schedule.node_ids)
    phases = [PENDING] * n
    remaining = list(schedule.allotments)
    spans = [None] * n
    t = Fraction(0)
    while not all(p == DONE for p in phases):
        while True:
            eligible = [
                i
                for i in range(n)
                if phases[i] == PENDING
                and all(phases[j] != ACTIVE for j in schedule.adjacency[i])
            ]
            if not eligible:
                break
            i = eligible[rng.randrange(len(eligible))]
            phases[i] = ACTIVE
            spans[i] = [t, None]
        active = [i for i in range(n) if phases[i] == ACTIVE]
        step = min(remaining[i] for i in active)
        t += step
        for i in active:
            remaining[i] -= step
            if remaining[i] == 0:
                phases[i] = DONE
                spans[i][1] = t
    return [(s[0], s[1]) for s in spans]


class TestMonteCarloAgreement:
    def test_transmitting_marginals_match_playouts(self):
        # pendant pair plus a 3-path: varied blocking structure
        sched = schedule_from(
            adjacency=[(1,), (0, 2), (1,), (4,), (3,)],
            duties=[
                Fraction(1, 2),
                Fraction(1, 3),
                Fraction(1, 2),
                Fraction(1, 2),
                Fraction(1, 2),
            ],
        )
        cover = build_segments(sched)
        rng = random.Random(12345)
        runs = 4000
        probes = [Fraction(1, 8) * T40, Fraction(3, 8) * T40, Fraction(5, 8) * T40]
        hits = {(i, t): 0 for i in range(5) for t in probes}
        for _ in range(runs):
            spans = _playout(sched, rng)
            for i, (start, end) in enumerate(spans):
                for t in probes:
                    if start <= t < end:
                        hits[(i, t)] += 1
        for i in range(5):
            for t in probes:
                expected = float(node_state_probability(cover, i, t)[1])
                observed = hits[(i, t)] / runs
                sigma = math.sqrt(max(expected * (1 - expected), 1e-12) / runs)
                assert abs(observed - expected) <= 3 * sigma + 0.01, (
                    f"node {i} t={float(t)}: observed {observed}, expected {expected}"
                )


class TestFromTopology:
    def test_allotments_follow_duty_rule(self):
        top = Topology(
            nodes=(
                Node("L1", "lteu", 0.0, 0.0),
                Node("L2", "lteu", 5.0, 0.0),
                Node("W1", "wifi", 0.0, 5.0),
            )
        )
        sched = LtuSchedule.from_topology(top)
        assert sched.node_ids == ("L1", "L2")
        # L1 has neighbors {L2, W1}: duty 1/3; L2 has {L1, W1}... W1-L2 distance
        g = build_graphs(top)
        for node_id, allot in zip(sched.node_ids, sched.allotments):
            from coexlab import duty_cycle

            assert allot == duty_cycle(top.node(node_id), g) * sched.t_frame

    def test_duty_override_validation(self):
        top = Topology(nodes=(Node("L1", "lteu", 0.0, 0.0),))
        with pytest.raises(ValueError):
            LtuSchedule.from_topology(top, duty_overrides={"nope": 0.5})
        with pytest.raises(ValueError):
            LtuSchedule.from_topology(top, duty_overrides={"L1": 0.96})
        sched = LtuSchedule.from_topology(top, duty_overrides={"L1": 0.95})
        assert sched.allotments[0] == Fraction(19, 20) * sched.t_frame


def test_segments_csv_round_trip(tmp_path):
    cover = build_segments(PENDANT)
    path = tmp_path / "segments.csv"
    with open(path, "w", newline="") as fh:
        write_segments_csv(cover, fh)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "state_id,phases,t_start_us,t_end_us,probability"
    assert len(lines) == len(cover.segments) + 1
    assert lines[1] == "0,101,0.0,20000.0,0.5"
    assert lines[2] == "1,110,0.0,20000.0,0.5"
