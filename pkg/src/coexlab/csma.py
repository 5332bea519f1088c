"""Wi-Fi contention analysis: per-state active sets, independent-set sharing,
and DCF saturation throughput.

Two ingredients feed the frame integrator:

* graph sharing: in a given eNB phase vector, a Wi-Fi node is active iff no
  EDT-adjacent eNB is transmitting; the active nodes share the channel in
  proportion to how often each appears across the maximum independent sets of
  their carrier-sense graph.
* link capacity: the classic DCF fixed point (binary exponential backoff,
  basic access) gives saturation throughput and the busy-slot fraction used
  for air-time accounting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Set

from .topology import ContentionGraphs


@dataclass(frozen=True)
class MacParameters:
    """802.11 MAC/PHY constants (5 GHz band defaults)."""

    cw_min: int = 16
    cw_max: int = 1024
    slot_us: float = 9.0
    difs_us: float = 34.0
    sifs_us: float = 16.0
    phy_header_bits: int = 128
    mac_header_bits: int = 272
    ack_bits: int = 240
    payload_bits: int = 8148
    max_pdu: int = 4
    phy_rate_mbps: float = 130.0
    ack_rate_mbps: float = 26.0
    header_rate_mbps: float = 6.5
    max_retry: int = 6

    def __post_init__(self):
        if self.cw_min < 1 or self.cw_max < self.cw_min:
            raise ValueError(f"need 1 <= cw_min <= cw_max, got {self.cw_min}, {self.cw_max}")
        ratio = self.cw_max / self.cw_min
        stages = round(math.log2(ratio))
        if 2 ** stages * self.cw_min != self.cw_max:
            raise ValueError(f"cw_max must be cw_min times a power of two, got {self.cw_max}")
        for name in ("slot_us", "difs_us", "sifs_us", "phy_rate_mbps", "ack_rate_mbps",
                     "header_rate_mbps"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("phy_header_bits", "mac_header_bits", "ack_bits", "payload_bits",
                     "max_pdu"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.max_retry < 0:
            raise ValueError("max_retry must be >= 0")

    @property
    def backoff_stages(self) -> int:
        """Number of contention-window doublings before the cap."""
        return round(math.log2(self.cw_max / self.cw_min))

    @property
    def aggregate_payload_bits(self) -> int:
        """Bits delivered by one successful exchange (max_pdu frames)."""
        return self.max_pdu * self.payload_bits


# ----------------------------------------------------------------------
# Frame anatomy (µs).  Headers ride the robust header rate, the aggregate
# payload the full PHY rate, the ACK body the ACK rate.
# ----------------------------------------------------------------------

def data_airtime_us(mac: MacParameters) -> float:
    """PHY preamble + MAC header + aggregated payload."""
    return (
        (mac.phy_header_bits + mac.mac_header_bits) / mac.header_rate_mbps
        + mac.aggregate_payload_bits / mac.phy_rate_mbps
    )


def ack_exchange_us(mac: MacParameters) -> float:
    """SIFS + ACK preamble + ACK body."""
    return (
        mac.sifs_us
        + mac.phy_header_bits / mac.header_rate_mbps
        + mac.ack_bits / mac.ack_rate_mbps
    )


def success_slot_us(mac: MacParameters) -> float:
    """Busy time booked by a successful exchange, trailing DIFS included."""
    return data_airtime_us(mac) + ack_exchange_us(mac) + mac.difs_us


def collision_slot_us(mac: MacParameters) -> float:
    """Busy time booked by a collided exchange, trailing DIFS included."""
    return data_airtime_us(mac) + mac.difs_us


# ----------------------------------------------------------------------
# Active Wi-Fi nodes under a given eNB phase vector
# ----------------------------------------------------------------------

def wifi_active_state(
    wifi_id: str,
    phases: Sequence[int],
    ltu_ids: Sequence[str],
    graphs: ContentionGraphs,
) -> int:
    """1 if the Wi-Fi node may contend (no EDT-adjacent eNB transmitting), else 0."""
    neighbors = graphs.edt[wifi_id]
    for i, node_id in enumerate(ltu_ids):
        if phases[i] == 1 and node_id in neighbors:
            return 0
    return 1


def active_set(
    phases: Sequence[int],
    ltu_ids: Sequence[str],
    wifi_ids: Iterable[str],
    graphs: ContentionGraphs,
) -> frozenset[str]:
    """Wi-Fi nodes free to contend under the given eNB phase vector."""
    transmitting = {ltu_ids[i] for i, p in enumerate(phases) if p == 1}
    return frozenset(
        w for w in wifi_ids if not (graphs.edt[w] & transmitting)
    )


# ----------------------------------------------------------------------
# Independent-set sharing
# ----------------------------------------------------------------------

def maximal_independent_sets(
    nodes: Iterable[str], adjacency: Mapping[str, Set[str]]
) -> frozenset[frozenset[str]]:
    """All maximal independent sets of the conflict graph induced by `nodes`.

    Pivoting Bron-Kerbosch on the complement neighborhood relation; exact and
    comfortably fast for the few dozen simultaneously active nodes this model
    targets.
    """
    members = sorted(set(nodes))
    compatible = {
        v: frozenset(u for u in members if u != v and u not in adjacency.get(v, ()))
        for v in members
    }
    found: list[frozenset[str]] = []

    def extend(chosen: set[str], candidates: set[str], excluded: set[str]):
        if not candidates and not excluded:
            found.append(frozenset(chosen))
            return
        pivot = max(candidates | excluded, key=lambda v: (len(compatible[v] & candidates), v))
        for v in sorted(candidates - compatible[pivot]):
            extend(chosen | {v}, candidates & compatible[v], excluded & compatible[v])
            candidates = candidates - {v}
            excluded = excluded | {v}

    extend(set(), set(members), set())
    return frozenset(found)


def maximum_independent_sets(sets: Iterable[frozenset[str]]) -> frozenset[frozenset[str]]:
    """The maximum-cardinality members of an independent-set family."""
    sets = list(sets)
    if not sets:
        raise ValueError("empty independent-set family")
    best = max(len(s) for s in sets)
    return frozenset(s for s in sets if len(s) == best)


def mis_share(
    nodes: Iterable[str], adjacency: Mapping[str, Set[str]]
) -> dict[str, Fraction]:
    """Per-node share of the channel: membership frequency across all
    maximum independent sets of the conflict graph."""
    members = sorted(set(nodes))
    if not members:
        return {}
    mis = maximum_independent_sets(maximal_independent_sets(members, adjacency))
    total = len(mis)
    counts = {v: 0 for v in members}
    for s in mis:
        for v in s:
            counts[v] += 1
    return {v: Fraction(counts[v], total) for v in members}


# ----------------------------------------------------------------------
# DCF saturation model
# ----------------------------------------------------------------------

def _tau_given_p(p: float, w: int, m: int) -> float:
    # Equivalent to the usual closed form but regular at p = 1/2:
    # tau = 2 / (W + 1 + p*W*sum_{j<m} (2p)^j).
    geom = sum((2.0 * p) ** j for j in range(m))
    return 2.0 / (w + 1 + p * w * geom)


def dcf_fixed_point(n: int, mac: MacParameters) -> tuple[float, float]:
    """Per-slot transmission probability tau and conditional collision
    probability p for n saturated stations in one contention domain.

    Classic infinite-retry chain with binary exponential backoff; solved by
    bisection on tau (the map is monotone).
    """
    if n < 1:
        raise ValueError(f"need n >= 1 stations, got {n}")
    w, m = mac.cw_min, mac.backoff_stages
    if n == 1:
        return 2.0 / (w + 1), 0.0

    def residual(tau: float) -> float:
        p = 1.0 - (1.0 - tau) ** (n - 1)
        return _tau_given_p(p, w, m) - tau

    lo, hi = 1e-12, 1.0 - 1e-12
    if residual(lo) < 0 or residual(hi) > 0:
        raise ArithmeticError("DCF fixed point not bracketed; check MAC parameters")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if residual(mid) > 0:
            lo = mid
        else:
            hi = mid
    tau = 0.5 * (lo + hi)
    p = 1.0 - (1.0 - tau) ** (n - 1)
    return tau, p


def _slot_statistics(n: int, mac: MacParameters) -> tuple[float, float, float]:
    tau, _ = dcf_fixed_point(n, mac)
    p_tr = 1.0 - (1.0 - tau) ** n
    p_s = n * tau * (1.0 - tau) ** (n - 1) / p_tr
    return tau, p_tr, p_s


def saturation_throughput_mbps(n: int, mac: MacParameters) -> float:
    """Aggregate saturation throughput of n mutually in-range stations."""
    _, p_tr, p_s = _slot_statistics(n, mac)
    t_s, t_c = success_slot_us(mac), collision_slot_us(mac)
    payload = mac.aggregate_payload_bits
    denom = (1.0 - p_tr) * mac.slot_us + p_tr * p_s * t_s + p_tr * (1.0 - p_s) * t_c
    return p_s * p_tr * payload / denom  # bits/µs == Mbps


def single_link_throughput_mbps(mac: MacParameters) -> float:
    """Saturation throughput of a lone, uncontended station."""
    return saturation_throughput_mbps(1, mac)


def busy_slot_fraction(n: int, mac: MacParameters) -> float:
    """Probability that a virtual slot carries a transmission or collision
    rather than idling; converts a throughput share into air time."""
    _, p_tr, p_s = _slot_statistics(n, mac)
    t_s, t_c = success_slot_us(mac), collision_slot_us(mac)
    busy = p_tr * p_s * t_s + p_tr * (1.0 - p_s) * t_c
    return busy / ((1.0 - p_tr) * mac.slot_us + busy)
