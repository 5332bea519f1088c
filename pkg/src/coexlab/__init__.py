"""Throughput and air-time models for co-channel duty-cycled LTE-U and
CSMA/CA Wi-Fi deployments, with a discrete-event simulation oracle."""

from .analysis import (
    DEFAULT_LTEU_RATE_MBPS,
    NodeReport,
    Report,
    analyze,
    ltu_throughput_mbps,
    wifi_normalized,
    wifi_throughput_mbps,
)
from .csma import (
    MacParameters,
    busy_slot_fraction,
    dcf_fixed_point,
    maximal_independent_sets,
    maximum_independent_sets,
    mis_share,
    saturation_throughput_mbps,
    single_link_throughput_mbps,
)
from .fixtures import fixture_topology
from .harness import (
    CoexistStudy,
    CompareResult,
    coexist_study,
    compare,
    gen_topology,
    replace_lteu_with_wifi,
    tframe_sweep,
)
from .simulator import SimConfig, SimResult, simulate
from .states import (
    ACTIVE,
    DEFAULT_T_FRAME_S,
    DONE,
    PENDING,
    LtuSchedule,
    NetworkState,
    Segment,
    SegmentCover,
    StateSpaceLimitError,
    build_segments,
    eligible_starters,
    expand,
    initial_state,
    node_state_probability,
    state_probability,
)
from .topology import (
    LTEU,
    WIFI,
    ChannelParams,
    ContentionGraphs,
    Node,
    Topology,
    TopologyError,
    build_graphs,
    duty_cycle,
    load_topology,
    path_loss_db,
    received_power_dbm,
    save_topology,
    threshold_distance_m,
)

__version__ = "0.1.0"
