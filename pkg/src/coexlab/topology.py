"""Spatial deployments, propagation, and contention-graph construction.

A topology is a set of Wi-Fi APs and LTE-U eNBs with 2-D positions and
transmit powers on one shared unlicensed channel.  Two thresholds decide
who can hear whom: a Wi-Fi node defers to another Wi-Fi signal above the
carrier-sense threshold (CST) and to any other energy above the energy
detection threshold (EDT).  Edges involving at least one LTE-U node are
therefore EDT edges; Wi-Fi/Wi-Fi edges are CST edges.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

WIFI = "wifi"
LTEU = "lteu"

#: Duty-cycle cap applied when an eNB has no neighbors at all.
MAX_DUTY_CYCLE = Fraction(19, 20)


class TopologyError(ValueError):
    """Invalid deployment description (duplicate ids, bad coordinates, ...)."""


def path_loss_db(distance_m: float, freq_ghz: float) -> float:
    """Distance/frequency path loss in dB.

    Model: 36.7*log10(d[m]) + 22.7 + 26*log10(f[GHz]).
    """
    if distance_m <= 0:
        raise ValueError(f"distance must be positive, got {distance_m}")
    if freq_ghz <= 0:
        raise ValueError(f"frequency must be positive, got {freq_ghz}")
    return 36.7 * math.log10(distance_m) + 22.7 + 26.0 * math.log10(freq_ghz)


def threshold_distance_m(tx_power_dbm: float, threshold_dbm: float, freq_ghz: float) -> float:
    """Largest distance at which received power still meets `threshold_dbm`."""
    budget = tx_power_dbm - threshold_dbm - 22.7 - 26.0 * math.log10(freq_ghz)
    return 10.0 ** (budget / 36.7)


@dataclass(frozen=True)
class Node:
    id: str
    kind: str  # WIFI or LTEU
    x: float
    y: float
    tx_power_dbm: float = 20.0

    def __post_init__(self):
        if self.kind not in (WIFI, LTEU):
            raise TopologyError(f"node {self.id!r}: kind must be {WIFI!r} or {LTEU!r}, got {self.kind!r}")
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise TopologyError(f"node {self.id!r}: coordinates must be finite")

    def distance_to(self, other: "Node") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class ChannelParams:
    freq_ghz: float = 5.3
    edt_dbm: float = -62.0
    cst_dbm: float = -82.0
    noise_dbm: float = -101.0

    def __post_init__(self):
        if self.freq_ghz <= 0:
            raise TopologyError(f"freq_ghz must be positive, got {self.freq_ghz}")
        if self.cst_dbm > self.edt_dbm:
            raise TopologyError(
                f"cst_dbm ({self.cst_dbm}) must not exceed edt_dbm ({self.edt_dbm})"
            )


def received_power_dbm(tx: Node, rx: Node, channel: ChannelParams) -> float:
    """Received power at `rx` from `tx` over the configured channel."""
    d = tx.distance_to(rx)
    if d <= 0:
        raise ValueError(f"nodes {tx.id!r} and {rx.id!r} are coincident")
    return tx.tx_power_dbm - path_loss_db(d, channel.freq_ghz)


@dataclass(frozen=True)
class Topology:
    nodes: tuple[Node, ...]
    channel: ChannelParams = field(default_factory=ChannelParams)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise TopologyError(f"duplicate node ids: {dupes}")
        for a, b in _pairs(self.nodes):
            if a.x == b.x and a.y == b.y:
                raise TopologyError(f"nodes {a.id!r} and {b.id!r} are coincident")

    @property
    def wifi_ids(self) -> tuple[str, ...]:
        return tuple(n.id for n in self.nodes if n.kind == WIFI)

    @property
    def lteu_ids(self) -> tuple[str, ...]:
        return tuple(n.id for n in self.nodes if n.kind == LTEU)

    def node(self, node_id: str) -> Node:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def content_hash(self) -> str:
        """Stable hash of the deployment, for report provenance."""
        blob = json.dumps(topology_to_dict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _pairs(nodes: Iterable[Node]):
    nodes = list(nodes)
    for i, a in enumerate(nodes):
        for b in nodes[i + 1:]:
            yield a, b


@dataclass(frozen=True)
class ContentionGraphs:
    """Adjacency maps keyed by node id.

    edt: pairs involving at least one LTE-U node within EDT range.
    cst: Wi-Fi/Wi-Fi pairs within CST range.
    ltu: restriction of edt to LTE-U/LTE-U pairs.
    """

    edt: Mapping[str, frozenset[str]]
    cst: Mapping[str, frozenset[str]]
    ltu: Mapping[str, frozenset[str]]


def build_graphs(topology: Topology) -> ContentionGraphs:
    """Construct EDT/CST/LTE-U adjacency from node geometry.

    A pair is edged when the received power at either end meets the relevant
    threshold (inclusive).  With equal transmit powers the relation is
    symmetric by construction; with unequal powers an edge is added if either
    direction meets the threshold, keeping the adjacency symmetric.
    """
    ch = topology.channel
    edt: dict[str, set[str]] = {n.id: set() for n in topology.nodes}
    cst: dict[str, set[str]] = {n.id: set() for n in topology.nodes if n.kind == WIFI}
    ltu: dict[str, set[str]] = {n.id: set() for n in topology.nodes if n.kind == LTEU}
    for a, b in _pairs(topology.nodes):
        rx = max(received_power_dbm(a, b, ch), received_power_dbm(b, a, ch))
        if a.kind == WIFI and b.kind == WIFI:
            if rx >= ch.cst_dbm:
                cst[a.id].add(b.id)
                cst[b.id].add(a.id)
        else:
            if rx >= ch.edt_dbm:
                edt[a.id].add(b.id)
                edt[b.id].add(a.id)
                if a.kind == LTEU and b.kind == LTEU:
                    ltu[a.id].add(b.id)
                    ltu[b.id].add(a.id)
    return ContentionGraphs(
        edt={k: frozenset(v) for k, v in edt.items()},
        cst={k: frozenset(v) for k, v in cst.items()},
        ltu={k: frozenset(v) for k, v in ltu.items()},
    )


def duty_cycle(node: Node, graphs: ContentionGraphs) -> Fraction:
    """Duty cycle of an eNB: min(0.95, 1/(1 + EDT-neighbor count)).

    The neighbor count includes both Wi-Fi and LTE-U nodes inside the eNB's
    EDT range.
    """
    if node.kind != LTEU:
        raise ValueError(f"duty_cycle is defined for LTE-U nodes, got {node.kind!r} node {node.id!r}")
    n = len(graphs.edt[node.id])
    return min(MAX_DUTY_CYCLE, Fraction(1, 1 + n))


# ----------------------------------------------------------------------
# Topology file format (JSON): {"nodes": [...], "channel": {...}, "mac": {...}}
# ----------------------------------------------------------------------

def topology_to_dict(topology: Topology) -> dict:
    return {
        "nodes": [
            {"id": n.id, "kind": n.kind, "x": n.x, "y": n.y, "tx_power_dbm": n.tx_power_dbm}
            for n in topology.nodes
        ],
        "channel": {
            "freq_ghz": topology.channel.freq_ghz,
            "edt_dbm": topology.channel.edt_dbm,
            "cst_dbm": topology.channel.cst_dbm,
            "noise_dbm": topology.channel.noise_dbm,
        },
    }


def topology_from_dict(data: Mapping) -> Topology:
    if "nodes" not in data:
        raise TopologyError("topology document is missing the 'nodes' field")
    nodes = []
    for i, raw in enumerate(data["nodes"]):
        try:
            nodes.append(
                Node(
                    id=str(raw["id"]),
                    kind=str(raw["kind"]).lower(),
                    x=float(raw["x"]),
                    y=float(raw["y"]),
                    tx_power_dbm=float(raw.get("tx_power_dbm", 20.0)),
                )
            )
        except KeyError as exc:
            raise TopologyError(f"nodes[{i}] is missing required field {exc.args[0]!r}") from None
    ch = data.get("channel", {})
    known = {"freq_ghz", "edt_dbm", "cst_dbm", "noise_dbm"}
    unknown = set(ch) - known
    if unknown:
        raise TopologyError(f"unknown channel field(s): {sorted(unknown)}")
    channel = ChannelParams(**{k: float(v) for k, v in ch.items()})
    return Topology(nodes=tuple(nodes), channel=channel)


def load_topology(path) -> Topology:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise TopologyError(f"{path}: not valid JSON ({exc})") from None
    return topology_from_dict(data)


def save_topology(topology: Topology, path) -> None:
    with open(path, "w") as fh:
        json.dump(topology_to_dict(topology), fh, indent=2)
        fh.write("\n")
