"""Bundled example deployments.

Three hand-authored mixed Wi-Fi/LTE-U topologies (5+5, 5+5, and 3+3 nodes)
whose eNB EDT-degree patterns give the duty-cycle sets 1/5, 1/4, 1/3.  The
Wi-Fi nodes are placed mutually out of carrier-sense range so the air-time
identities are directly comparable against simulation.
"""

from __future__ import annotations

from importlib import resources

from .topology import Topology, topology_from_dict

FIXTURE_COUNT = 3


def fixture_topology(index: int) -> Topology:
    """Load bundled topology 1, 2, or 3."""
    if not 1 <= index <= FIXTURE_COUNT:
        raise ValueError(f"fixture index must be 1..{FIXTURE_COUNT}, got {index}")
    import json

    ref = resources.files("coexlab").joinpath(f"topologies/fixture{index}.json")
    return topology_from_dict(json.loads(ref.read_text()))
