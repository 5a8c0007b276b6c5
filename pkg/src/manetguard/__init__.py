"""Deterministic MANET simulator with cooperative packet-drop detection.

Every node runs a passive watchdog over its neighbors' forwarding behavior;
suspicion that survives congestion/collision/noise discounting triggers a
challenge round whose group-trust certificate is flooded, exchanged, and
folded into per-node trust tables; trust collapses raise network-wide alarms
decided by whistle-blower votes. An experiment harness reproduces the
false-alarm and detection-rate comparisons against a naive watchdog baseline
and an individual-observation variant.
"""

from .engine import (
    ConnectivityMap,
    EventQueue,
    MobilityState,
    RandomWaypointTrack,
    SchedulingError,
    ScriptedTrack,
    StaticTrack,
    World,
    substream,
)
from .envelope import AuthEnvelope, KeyRegistry, ReplayGuard, sign, verify
from .experiment import MatrixResult, complaint_census, run_matrix, run_scenario
from .netsim import AdversaryPolicy, Flow, Packet, shortest_path
from .scenario import (
    PRESETS,
    ScenarioConfig,
    table1_connected_preset,
    table1_preset,
    VARIANT_INDIVIDUAL,
    VARIANT_NAIVE,
    VARIANT_PROPOSED,
)
from .simulation import ConfigError, RunMetrics, Simulation, run_once
from .trace import TraceRecorder
from .trustproto import (
    GroupTrustResult,
    NoQuorum,
    TrustCertificate,
    TrustParams,
    TrustState,
    compute_group_trust,
    tally_votes,
    verify_certificate,
)
from .watchdog import MonitorParams, Watchdog, drop_pressure, estimate_p_malicious, update_suspicion

__version__ = "0.1.0"
