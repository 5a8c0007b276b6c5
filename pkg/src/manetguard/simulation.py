"""One full simulation run: wires the event engine, mobility, the packet
pipeline, per-node monitors, and the trust protocol together, and reduces
the outcome to RunMetrics.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict, deque
from dataclasses import dataclass, field
from typing import Deque, Dict, FrozenSet, List, Optional, Set, Tuple

from .engine import (
    ConnectivityMap,
    EventQueue,
    RandomWaypointTrack,
    ScriptedTrack,
    StaticTrack,
    World,
    substream,
)
from .envelope import AuthEnvelope, KeyRegistry
from .netsim import (
    ACTION_DROPPED_MALICIOUS,
    ACTION_FORWARDED,
    ACTION_MODIFIED,
    AdversaryPolicy,
    Flow,
    NodeNetState,
    OUTCOME_COLLIDED,
    OUTCOME_DELIVERED,
    Packet,
    STATE_DELIVERED,
    STATE_DROPPED_CONGESTION,
    STATE_DROPPED_MALICIOUS,
    STATE_DROPPED_NOROUTE,
    STATE_IN_FLIGHT,
    STATE_LOST_COLLISION,
    STATE_MODIFY_DETECTED,
    TransmissionRecord,
    decide_forward_action,
    shortest_path,
)
from .node import Node
from .scenario import ScenarioConfig, VARIANT_INDIVIDUAL, VARIANT_NAIVE, VARIANT_PROPOSED
from .trace import TraceRecorder
from .trustproto import TrustCertificate
from .watchdog import Watchdog


class ConfigError(ValueError):
    def __init__(self, violations: List[str]):
        super().__init__("invalid scenario config:\n  " + "\n  ".join(violations))
        self.violations = violations


@dataclass
class RunMetrics:
    """Everything a finished run reports."""

    seed: int
    variant: str
    node_count: int
    adversaries: List[int]
    honest_on_path: List[int]
    malicious_on_path: List[int]
    flagged: List[int]
    condemned: List[int]
    false_alarm_rate: float
    detection_rate: float
    complaints: Dict[int, int]
    watched_packet_counts: Dict[int, int]
    forward_requests: Dict[int, int]
    originated: int
    delivered: int
    dropped_malicious: int
    dropped_congestion: int
    lost_collision: int
    modify_detected: int
    dropped_noroute: int
    in_flight: int
    protocol_messages: int

    def flagged_honest(self) -> List[int]:
        adv = set(self.adversaries)
        return [n for n in self.flagged if n not in adv]

    def flagged_malicious(self) -> List[int]:
        adv = set(self.adversaries)
        return [n for n in self.flagged if n in adv]


class MetricsCollector:
    def __init__(self):
        self.originated = 0
        self.terminal: Dict[int, str] = {}
        self.forward_requests: Counter = Counter()
        self.watched_packets: Dict[int, Set[int]] = defaultdict(set)
        self.protocol_messages = 0
        self.flood_tx: Counter = Counter()
        self.condemned: Set[int] = set()
        self.alarms: List[Tuple[int, int]] = []
        self.cert_rejects: Counter = Counter()
        self.tampers: List[Tuple[int, int]] = []

    def note_terminal(self, packet_id: int, state: str) -> None:
        assert packet_id not in self.terminal, "packet terminated twice"
        self.terminal[packet_id] = state

    def note_watch(self, subject: int, packet_id: int) -> None:
        self.watched_packets[subject].add(packet_id)

    def note_alarm(self, origin: int, subject: int) -> None:
        self.alarms.append((origin, subject))

    def note_condemnation(self, subject: int, origin: int, condemns: int, eligible: int) -> None:
        self.condemned.add(subject)

    def note_certificate_reject(self, node: int, reason: str) -> None:
        self.cert_rejects[reason] += 1

    def note_tamper_detected(self, node: int, provider: int) -> None:
        self.tampers.append((node, provider))

    def note_flood_tx(self, cert_id: str) -> None:
        self.flood_tx[cert_id] += 1

    def state_count(self, state: str) -> int:
        return sum(1 for s in self.terminal.values() if s == state)


@dataclass
class _LiveTransmission:
    record: TransmissionRecord
    listeners: List[int]
    audible: FrozenSet[int]
    packet: Packet
    snapshot: object


class Simulation:
    """Deterministic single-run simulator; state is fully rebuilt per run."""

    def __init__(self, config: ScenarioConfig, trace: Optional[TraceRecorder] = None):
        violations = config.validate()
        if violations:
            raise ConfigError(violations)
        self.config = config
        self.variant = config.detector_variant
        self.queue = EventQueue()
        self.trace = trace if trace is not None else TraceRecorder()
        self.metrics = MetricsCollector()
        seed = config.seed
        w = config.world
        self.node_count = w.node_count
        self.world = World(w.width_m, w.height_m, w.range_m)
        self.duration = w.duration_s

        self.adversary_ids = self._pick_adversaries()
        self.registry = KeyRegistry.bootstrap(seed, range(self.node_count))
        self.connectivity = ConnectivityMap(
            self._build_tracks(), self.world, config.network.connectivity_epoch_s
        )
        self.nodes: List[Node] = []
        for i in range(self.node_count):
            policy = None
            if i in self.adversary_ids:
                a = config.adversaries
                policy = AdversaryPolicy(
                    i,
                    a.drop_probability,
                    a.modify_probability,
                    a.challenge_response,
                    tuple(a.slander_targets),
                )
            watchdog = Watchdog(i, config.monitor, substream(seed, "watch", i))
            net = NodeNetState(i, config.network.queue_capacity)
            self.nodes.append(Node(self, i, policy, watchdog, net, config.trust))
        self.flows = self._build_flows()
        self._flow_routes: Dict[int, Optional[List[int]]] = {}
        self._adv_rng = {i: substream(seed, "adversary", i) for i in self.adversary_ids}
        self._mac_rng = substream(seed, "mac")
        self._service_rng = [substream(seed, "service", i) for i in range(self.node_count)]
        self._next_packet_id = 0
        self._live: Deque[_LiveTransmission] = deque()
        self.verdict_memo: Dict[str, str] = {}
        self._tx_duration = config.traffic.payload_bytes * 8.0 / config.network.link_rate_bps
        self._service_time = 1.0 / config.network.forward_service_rate_pps
        self._control_latency = config.network.control_latency_s

    # -- construction --------------------------------------------------------

    def _pick_adversaries(self) -> Set[int]:
        a = self.config.adversaries
        if a.nodes is not None:
            return set(a.nodes)
        if a.count == 0:
            return set()
        rng = substream(self.config.seed, "adversaries")
        return set(rng.sample(range(self.node_count), a.count))

    def _build_tracks(self):
        m = self.config.mobility
        seed = self.config.seed
        if m.model == "static":
            return [StaticTrack(x, y) for x, y in m.static_positions]
        if m.model == "scripted":
            return [
                ScriptedTrack([tuple(row) for row in m.scripted_tracks[str(i)]])
                for i in range(self.node_count)
            ]
        return [
            RandomWaypointTrack(
                self.world,
                substream(seed, "mobility", i),
                m.pause_s,
                m.min_speed_mps,
                m.max_speed_mps,
            )
            for i in range(self.node_count)
        ]

    def _build_flows(self) -> List[Flow]:
        t = self.config.traffic
        flows: List[Flow] = []
        if t.flows is not None:
            for i, (src, dst, start, stop) in enumerate(t.flows):
                flows.append(
                    Flow(i, int(src), int(dst), t.rate_pps, float(start),
                         min(float(stop), self.duration), t.payload_bytes)
                )
            return flows
        rng = substream(self.config.seed, "traffic")
        honest = sorted(set(range(self.node_count)) - self.adversary_ids)
        for i in range(t.flow_count):
            src, dst = rng.sample(honest, 2)
            start = rng.uniform(0.0, t.start_window_s)
            flows.append(Flow(i, src, dst, t.rate_pps, start, self.duration, t.payload_bytes))
        return flows

    # -- run -------------------------------------------------------------------

    def run(self) -> RunMetrics:
        cfg = self.config
        if self.trace.enabled:
            self.trace.header(seed=cfg.seed, variant=self.variant,
                              nodes=self.node_count, duration=self.duration)
        for flow in self.flows:
            self._schedule_flow_tick(flow, 0)
        window = cfg.monitor.stats_window_s
        k = 1
        while k * window <= self.duration:
            self.queue.schedule(k * window, self._window_tick)
            k += 1
        if self.variant == VARIANT_PROPOSED:
            period = cfg.trust.exchange_period_s
            k = 1
            while k * period <= self.duration:
                self.queue.schedule(k * period, self._exchange_tick)
                k += 1
        self.queue.run_until(self.duration)
        return self._finalize()

    # -- traffic -----------------------------------------------------------------

    def _schedule_flow_tick(self, flow: Flow, k: int) -> None:
        at = flow.start + k / flow.rate_pps
        if at > flow.stop or at > self.duration:
            return
        self.queue.schedule(at, lambda: self._flow_tick(flow, k))

    def _flow_tick(self, flow: Flow, k: int) -> None:
        self._originate(flow)
        self._schedule_flow_tick(flow, k + 1)

    def _originate(self, flow: Flow) -> None:
        now = self.queue.now
        pid = self._next_packet_id
        self._next_packet_id += 1
        self.metrics.originated += 1
        route = self._route_for_flow(flow, now)
        digest = Packet.content_digest(pid, flow.src, flow.dst, flow.payload_bytes)
        packet = Packet(pid, flow.flow_id, flow.src, flow.dst,
                        list(route) if route else [flow.src],
                        flow.payload_bytes, digest, digest, now)
        packet.hop = 0
        if self.trace.enabled:
            self.trace.emit("originate", time=now, packet=pid, flow=flow.flow_id,
                            src=flow.src, dst=flow.dst,
                            route=list(route) if route else None)
        if route is None:
            self.metrics.note_terminal(pid, STATE_DROPPED_NOROUTE)
            return
        if len(route) == 1:
            self.metrics.note_terminal(pid, STATE_DELIVERED)
            return
        self._enqueue(flow.src, packet)

    def _route_for_flow(self, flow: Flow, now: float) -> Optional[List[int]]:
        snapshot = self.connectivity.snapshot_for(now)
        excluded = self._route_exclusions(flow.src)
        cached = self._flow_routes.get(flow.flow_id)
        if cached and self._route_valid(cached, snapshot, excluded):
            return cached
        route = shortest_path(snapshot.neighbor_lists, flow.src, flow.dst, excluded)
        self._flow_routes[flow.flow_id] = route
        return route

    def _route_exclusions(self, requester: int) -> Optional[Set[int]]:
        if self.variant != VARIANT_PROPOSED:
            return None
        blacklist = self.nodes[requester].trust.blacklist
        return blacklist if blacklist else None

    @staticmethod
    def _route_valid(route: List[int], snapshot, excluded: Optional[Set[int]]) -> bool:
        if excluded and any(n in excluded for n in route[1:]):
            return False
        return all(
            snapshot.are_neighbors(route[i], route[i + 1]) for i in range(len(route) - 1)
        )

    # -- forwarding pipeline --------------------------------------------------------

    def _enqueue(self, node_id: int, packet: Packet) -> None:
        now = self.queue.now
        state = self.nodes[node_id].net
        if not state.enqueue(packet, now):
            self.metrics.note_terminal(packet.packet_id, STATE_DROPPED_CONGESTION)
            if self.trace.enabled:
                self.trace.emit("queued_drop", time=now, node=node_id,
                                packet=packet.packet_id)
            return
        if not state.server_busy:
            state.server_busy = True
            self.queue.schedule_after(self._service_delay(node_id), lambda: self._service(node_id))

    def _service_delay(self, node_id: int) -> float:
        # Small MAC backoff jitter; without it, fixed service times phase-lock
        # neighboring transmitters into perpetual window collisions.
        return self._service_time * (1.0 + 0.02 * self._service_rng[node_id].random())

    def _service(self, node_id: int) -> None:
        state = self.nodes[node_id].net
        if not state.queue:
            state.server_busy = False
            return
        defer = self._carrier_busy_until(node_id)
        if defer is not None:
            wait = (defer - self.queue.now) + 0.0005 * (1.0 + self._service_rng[node_id].random())
            self.queue.schedule_after(wait, lambda: self._service(node_id))
            return
        packet = state.queue.popleft()
        self._transmit(node_id, packet)
        if state.queue:
            self.queue.schedule_after(self._service_delay(node_id), lambda: self._service(node_id))
        else:
            state.server_busy = False

    def _carrier_busy_until(self, node_id: int) -> Optional[float]:
        """Carrier sense: defer while a transmission audible at this node is
        on the air. Hidden transmitters (audible at the receiver only) are
        not sensed, so hidden-terminal collisions survive."""
        now = self.queue.now
        busy = None
        for entry in self._live:
            if entry.record.window[1] <= now:
                continue
            if node_id == entry.record.sender or node_id in entry.audible:
                if busy is None or entry.record.window[1] > busy:
                    busy = entry.record.window[1]
        return busy

    def _transmit(self, node_id: int, packet: Packet) -> None:
        now = self.queue.now
        snapshot = self.connectivity.snapshot_for(now)
        excluded = self._route_exclusions(node_id)
        next_hop = packet.route[packet.hop + 1]
        if (excluded and next_hop in excluded) or not snapshot.are_neighbors(node_id, next_hop):
            fresh = shortest_path(snapshot.neighbor_lists, node_id, packet.dst, excluded)
            if fresh is None:
                self.metrics.note_terminal(packet.packet_id, STATE_DROPPED_NOROUTE)
                if self.trace.enabled:
                    self.trace.emit("noroute", time=now, node=node_id,
                                    packet=packet.packet_id)
                return
            packet.route = packet.route[: packet.hop] + fresh
            next_hop = packet.route[packet.hop + 1]
        window = (now, now + self._tx_duration)
        record = TransmissionRecord(node_id, next_hop, packet.packet_id, window)
        listeners = snapshot.neighbors(node_id)
        for listener in listeners:
            self.nodes[listener].net.rts_log.add(window[0], window[1])
        entry = _LiveTransmission(record, listeners, frozenset(listeners), packet, snapshot)
        self._live.append(entry)
        if self.trace.enabled:
            self.trace.emit("tx", time=now, sender=node_id, receiver=next_hop,
                            packet=packet.packet_id)
        self.queue.schedule(window[1], lambda: self._tx_end(entry))

    def _tx_end(self, entry: _LiveTransmission) -> None:
        now = self.queue.now
        record, packet = entry.record, entry.packet
        live = self._live
        while live and live[0].record.window[1] <= record.window[0]:
            live.popleft()
        overlapping = [
            e for e in live
            if e is not entry
            and e.record.window[0] < record.window[1]
            and record.window[0] < e.record.window[1]
        ]
        p_col = self.config.network.p_col_given_overlap
        missed: Set[int] = set()
        if overlapping:
            for listener in entry.listeners:
                for other in overlapping:
                    if listener == other.record.sender or listener in other.audible:
                        if p_col >= 1.0 or self._mac_rng.random() < p_col:
                            missed.add(listener)
                        break
        receiver = record.receiver
        sender = record.sender
        if receiver in missed:
            record.outcome = OUTCOME_COLLIDED
            self.metrics.note_terminal(packet.packet_id, STATE_LOST_COLLISION)
            if self.trace.enabled:
                self.trace.emit("collision", time=now, sender=sender, receiver=receiver,
                                packet=packet.packet_id)
        piggyback = self.nodes[sender].piggyback_certificates(now)
        for listener in entry.listeners:
            if listener == receiver or listener in missed:
                continue
            node = self.nodes[listener]
            node.on_overhear(packet, sender, receiver, now, entry.snapshot)
            if self.trace.enabled:
                self.trace.emit("overhear", time=now, listener=listener, sender=sender,
                                packet=packet.packet_id)
            for cert in piggyback:
                if cert.cert_id not in node.trust.cert_cache:
                    node.receive_certificate(cert, sender, 0, now)
        self.nodes[sender].on_transmitted(packet, receiver, now)
        if record.outcome != OUTCOME_COLLIDED:
            rnode = self.nodes[receiver]
            rnode.on_received(packet, sender, now)
            rnode.on_overhear(packet, sender, receiver, now, entry.snapshot)
            for cert in piggyback:
                if cert.cert_id not in rnode.trust.cert_cache:
                    rnode.receive_certificate(cert, sender, 0, now)
            if receiver == packet.dst:
                state = (
                    STATE_DELIVERED
                    if packet.digest == packet.origin_digest
                    else STATE_MODIFY_DETECTED
                )
                self.metrics.note_terminal(packet.packet_id, state)
                if self.trace.enabled:
                    self.trace.emit("deliver", time=now, node=receiver,
                                    packet=packet.packet_id, state=state)
            else:
                packet.hop += 1
                self._forward_request(receiver, packet)

    def _forward_request(self, node_id: int, packet: Packet) -> None:
        now = self.queue.now
        self.metrics.forward_requests[node_id] += 1
        node = self.nodes[node_id]
        action = ACTION_FORWARDED
        if node.policy is not None:
            action = decide_forward_action(node.policy, self._adv_rng[node_id])
        if action == ACTION_DROPPED_MALICIOUS:
            self.metrics.note_terminal(packet.packet_id, STATE_DROPPED_MALICIOUS)
            if self.trace.enabled:
                self.trace.emit("malicious_drop", time=now, node=node_id,
                                packet=packet.packet_id)
            return
        if action == ACTION_MODIFIED:
            packet.digest = packet.tampered_digest(node_id)
            if self.trace.enabled:
                self.trace.emit("modify", time=now, node=node_id, packet=packet.packet_id)
        self._enqueue(node_id, packet)

    # -- periodic processing -----------------------------------------------------------

    def _window_tick(self) -> None:
        now = self.queue.now
        snapshot = self.connectivity.snapshot_for(now)
        for node in self.nodes:
            node.window_tick(now, snapshot)

    def _exchange_tick(self) -> None:
        now = self.queue.now
        snapshot = self.connectivity.snapshot_for(now)
        for node in self.nodes:
            node.exchange_tick(now, snapshot)

    # -- control plane -----------------------------------------------------------------

    def send_control(self, sender: int, receiver: int, body: dict,
                     env: Optional[AuthEnvelope], ttl: int = 1,
                     attachments: Optional[dict] = None) -> None:
        self._deliver_control(sender, (receiver,), body, env, ttl, attachments)

    def _deliver_control(self, sender: int, receivers, body: dict,
                         env: Optional[AuthEnvelope], ttl: int,
                         attachments: Optional[dict] = None) -> None:
        self.metrics.protocol_messages += len(receivers)
        if self.trace.enabled:
            for receiver in receivers:
                self.trace.emit("ctrl", time=self.queue.now, kind=body.get("t"),
                                sender=sender, receiver=receiver)
        nodes = self.nodes

        def deliver():
            for receiver in receivers:
                nodes[receiver].handle_control(body, env, sender, ttl, attachments)

        self.queue.schedule_after(self._control_latency, deliver)

    def flood_control(self, sender: int, body: dict, env: Optional[AuthEnvelope],
                      ttl: int) -> None:
        snapshot = self.connectivity.snapshot_for(self.queue.now)
        self._deliver_control(sender, snapshot.neighbors(sender), body, env, ttl)

    def broadcast_control(self, sender: int, body: dict, env: Optional[AuthEnvelope],
                          ttl: int = 1, attachments: Optional[dict] = None) -> None:
        snapshot = self.connectivity.snapshot_for(self.queue.now)
        self._deliver_control(sender, snapshot.neighbors(sender), body, env, ttl, attachments)

    def broadcast_certificate(self, sender: int, cert: TrustCertificate, ttl: int) -> None:
        self.metrics.note_flood_tx(cert.cert_id)
        body = {"t": "certificate", "id": cert.cert_id}
        self.broadcast_control(sender, body, None, ttl, {cert.cert_id: cert})

    # -- reduction ---------------------------------------------------------------------

    def _honest_ids(self) -> List[int]:
        return [i for i in range(self.node_count) if i not in self.adversary_ids]

    def _flagged(self) -> Set[int]:
        threshold = self.config.monitor.suspicion_threshold
        flagged: Set[int] = set()
        if self.variant == VARIANT_NAIVE:
            for i in self._honest_ids():
                for subject, c in self.nodes[i].watchdog.lifetime.items():
                    if c.watched > 0 and (c.dropped + c.modified) / c.watched > threshold:
                        flagged.add(subject)
        elif self.variant == VARIANT_INDIVIDUAL:
            for i in self._honest_ids():
                flagged.update(self.nodes[i].watchdog.crossed_ever)
        else:
            flagged.update(self.metrics.condemned)
            cutoff = self.config.trust.blacklist_threshold
            for i in self._honest_ids():
                for subject, value in self.nodes[i].trust.trust.items():
                    if value < cutoff:
                        flagged.add(subject)
        return flagged

    def _complaints(self) -> Dict[int, int]:
        threshold = self.config.monitor.suspicion_threshold
        complainers: Dict[int, Set[int]] = defaultdict(set)
        for i in self._honest_ids():
            node = self.nodes[i]
            if self.variant == VARIANT_NAIVE:
                for subject, c in node.watchdog.lifetime.items():
                    if c.watched > 0 and (c.dropped + c.modified) / c.watched > threshold:
                        complainers[subject].add(i)
                continue
            for subject in node.watchdog.crossed_ever:
                complainers[subject].add(i)
            if self.variant == VARIANT_PROPOSED:
                for subject, status in node.trust.status.items():
                    if status != "normal":
                        complainers[subject].add(i)
        return {subject: len(who) for subject, who in sorted(complainers.items())}

    def _finalize(self) -> RunMetrics:
        m = self.metrics
        honest = set(self._honest_ids())
        honest_on_path = sorted(
            n for n, c in m.forward_requests.items() if c > 0 and n in honest
        )
        malicious_on_path = sorted(
            n for n, c in m.forward_requests.items() if c > 0 and n in self.adversary_ids
        )
        flagged = self._flagged()
        flagged_honest = [n for n in flagged if n in honest and n in set(honest_on_path)]
        flagged_mal = [n for n in flagged if n in set(malicious_on_path)]
        far = len(flagged_honest) / len(honest_on_path) if honest_on_path else 0.0
        det = len(flagged_mal) / len(malicious_on_path) if malicious_on_path else 1.0
        result = RunMetrics(
            seed=self.config.seed,
            variant=self.variant,
            node_count=self.node_count,
            adversaries=sorted(self.adversary_ids),
            honest_on_path=honest_on_path,
            malicious_on_path=malicious_on_path,
            flagged=sorted(flagged),
            condemned=sorted(m.condemned),
            false_alarm_rate=far,
            detection_rate=det,
            complaints=self._complaints(),
            watched_packet_counts={
                s: len(p) for s, p in sorted(m.watched_packets.items())
            },
            forward_requests=dict(sorted(m.forward_requests.items())),
            originated=m.originated,
            delivered=m.state_count(STATE_DELIVERED),
            dropped_malicious=m.state_count(STATE_DROPPED_MALICIOUS),
            dropped_congestion=m.state_count(STATE_DROPPED_CONGESTION),
            lost_collision=m.state_count(STATE_LOST_COLLISION),
            modify_detected=m.state_count(STATE_MODIFY_DETECTED),
            dropped_noroute=m.state_count(STATE_DROPPED_NOROUTE),
            in_flight=m.originated - len(m.terminal),
            protocol_messages=m.protocol_messages,
        )
        if self.trace.enabled:
            self.trace.emit("metrics", false_alarm_rate=result.false_alarm_rate,
                            detection_rate=result.detection_rate,
                            flagged=result.flagged, condemned=result.condemned)
        return result


def run_once(config: ScenarioConfig, trace: Optional[TraceRecorder] = None) -> RunMetrics:
    sim = Simulation(config, trace=trace)
    return sim.run()
