"""Per-node agent: watchdog hooks on the data plane plus the cooperative
detection state machines (challenge rounds, certificate handling, alarm
flooding, and whistle-blower voting).

Control-plane messages travel single-hop between current neighbors with a
small fixed latency; multi-hop dissemination (certificates, alarms, votes,
verdicts) is hop-by-hop flooding with per-node duplicate suppression.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass
from typing import Deque, Dict, List, Optional, Set, Tuple

from . import trustproto
from .envelope import ACCEPT, AuthEnvelope, ReplayGuard, canonical_bytes, sign, verify
from .netsim import AdversaryPolicy, NodeNetState, Packet
from .trustproto import (
    REJECT_RECOMPUTE_MISMATCH,
    REJECT_RESPONSE_OMITTED,
    SignedResponse,
    TrustCertificate,
    TrustParams,
    TrustState,
    Vote,
    VERDICT_CONDEMN,
    VERDICT_SURVEILLANCE,
    assemble_certificate,
    make_response,
    make_vote,
    tally_votes,
    verify_certificate,
)
from .watchdog import Watchdog


@dataclass
class AccusationRound:
    round_id: str
    accused: int
    phase: str          # await_ack | await_cert
    timer: object       # EventHandle


@dataclass
class CollectionRound:
    round_id: str
    challenger: int
    responses: Dict[int, SignedResponse]


@dataclass
class VoteRound:
    alarm_id: str
    subject: int
    votes: List[Vote]


class Node:
    """One mobile node: data-plane state, monitor, and trust protocol."""

    def __init__(self, sim, node_id: int, policy: Optional[AdversaryPolicy],
                 watchdog: Watchdog, net: NodeNetState, trust_params: TrustParams):
        self.sim = sim
        self.id = node_id
        self.policy = policy
        self.watchdog = watchdog
        self.net = net
        self.trust = TrustState(trust_params)
        self.replay = ReplayGuard()
        self._nonce = 0
        self._round_seq = 0
        self.interactions: Dict[int, float] = {}
        # accuser side
        self.pending_accusations: Dict[int, AccusationRound] = {}
        self.silent_counts: Dict[int, int] = {}
        self.cooldown_until: Dict[int, float] = {}
        # accused side
        self.collections: Dict[str, CollectionRound] = {}
        self.sent_responses: Dict[str, SignedResponse] = {}
        # whistle blower
        self.open_votes: Dict[str, VoteRound] = {}
        self.active_alarms: Dict[int, Tuple[str, float]] = {}
        self.alarm_parent: Dict[str, int] = {}
        self.seen_floods: Set[str] = set()
        # dissemination
        self.recent_certs: Deque[str] = deque(maxlen=8)
        self._piggyback_cache: Optional[Tuple[float, List[TrustCertificate]]] = None
        self._certs_dirty = False
        self._last_offer_neighbors: Set[int] = set()

    # -- helpers -------------------------------------------------------------

    @property
    def is_adversary(self) -> bool:
        return self.policy is not None

    @property
    def runs_protocol(self) -> bool:
        """Silent adversaries do not participate in the detection protocol."""
        if self.sim.variant != "proposed":
            return False
        return self.policy is None or self.policy.challenge_response == "honest"

    def next_nonce(self) -> int:
        self._nonce += 1
        return self._nonce

    def _sign(self, body: dict, now: float) -> AuthEnvelope:
        return sign(self.sim.registry, self.id, canonical_bytes(body), now, self.next_nonce())

    def note_interaction(self, subject: int, now: float) -> None:
        self.interactions[subject] = now

    def params(self) -> TrustParams:
        return self.trust.params

    # -- data-plane hooks (called from the simulation pipeline) ---------------

    def on_transmitted(self, packet: Packet, next_hop: int, now: float) -> None:
        """After handing a packet to next_hop: start watching the forward."""
        self.note_interaction(next_hop, now)
        entry = self.watchdog.watch_sent(
            packet.packet_id, packet.digest, next_hop, packet.dst, now
        )
        if entry is not None:
            self.sim.metrics.note_watch(next_hop, packet.packet_id)

    def on_overhear(self, packet: Packet, transmitter: int, receiver: int,
                    now: float, snapshot) -> None:
        """Promiscuously heard a transmission: resolve pending watches on the
        transmitter and maybe start watching the receiver's forward."""
        self.watchdog.on_overheard_forward(packet.packet_id, transmitter, packet.digest, now)
        if receiver != self.id and receiver != packet.dst:
            entry = self.watchdog.watch_overheard(
                packet.packet_id,
                packet.digest,
                receiver,
                packet.dst,
                now,
                snapshot.are_neighbors(self.id, receiver),
            )
            if entry is not None:
                self.note_interaction(receiver, now)
                self.sim.metrics.note_watch(receiver, packet.packet_id)

    def on_received(self, packet: Packet, previous_hop: int, now: float) -> None:
        self.note_interaction(previous_hop, now)

    # -- per-window processing -------------------------------------------------

    def window_tick(self, now: float, snapshot) -> None:
        variant = self.sim.variant
        if variant == "naive_watchdog":
            self.watchdog.expire(now)
            return
        window = self.watchdog.params.stats_window_s
        p_cong = self.net.local_congestion(now, window)
        p_col = self.net.rts_overlap_fraction(now, window)
        triggers = self.watchdog.tick(now, p_cong, p_col)
        if variant != "proposed" or not self.runs_protocol:
            return
        for subject, _value in triggers:
            self.trigger_accusation(subject, now, snapshot)
        if self.policy is not None:
            for target in self.policy.slander_targets:
                self.trigger_accusation(target, now, snapshot)
        self.replay.prune(now, self.params().freshness_window_s)

    # -- trust collector: accuser side -----------------------------------------

    def trigger_accusation(self, subject: int, now: float, snapshot) -> None:
        """Monitor crossing (or slander policy) asks for a challenge round."""
        if subject == self.id or subject in self.trust.blacklist:
            return
        if subject in self.pending_accusations:
            return
        if now < self.cooldown_until.get(subject, 0.0):
            return
        active = self.active_alarms.get(subject)
        if active is not None and now < active[1]:
            return
        # A round this fresh would be killed by the duplicate-group rule
        # anyway, so don't convene another one.
        last_round = self.trust.last_round_at.get(subject)
        if last_round is not None and now - last_round < self.params().duplicate_window_s:
            return
        if not snapshot.are_neighbors(self.id, subject):
            return
        self._send_challenge(subject, now)

    def _send_challenge(self, subject: int, now: float) -> None:
        self._round_seq += 1
        round_id = f"r{self.id}.{subject}.{self._round_seq}"
        body = {
            "t": "challenge",
            "accuser": self.id,
            "accused": subject,
            "round": round_id,
            "ts": now,
        }
        env = self._sign(body, now)
        self.sim.send_control(self.id, subject, body, env)
        timer = self.sim.queue.schedule_after(
            self.params().challenge_timeout_s, lambda: self._challenge_timeout(subject, round_id)
        )
        self.pending_accusations[subject] = AccusationRound(round_id, subject, "await_ack", timer)
        self.trust.mark_suspected(subject)

    def _challenge_timeout(self, subject: int, round_id: str) -> None:
        round_ = self.pending_accusations.get(subject)
        if round_ is None or round_.round_id != round_id:
            return
        now = self.sim.queue.now
        del self.pending_accusations[subject]
        if round_.phase == "await_ack":
            # The accused never answered: one drop-equivalent observation,
            # and after enough consecutive silent rounds, a direct alarm.
            self.watchdog.record_direct_violation(subject)
            count = self.silent_counts.get(subject, 0) + 1
            self.silent_counts[subject] = count
            if count >= self.params().silent_rounds_to_alarm:
                self.silent_counts[subject] = 0
                self.cooldown_until[subject] = now + self.params().challenge_cooldown_s
                self.raise_global_alarm(subject, now)
            elif self.sim.connectivity.snapshot_for(now).are_neighbors(self.id, subject):
                self._send_challenge(subject, now)
        else:
            # Acked but no certificate arrived: inconclusive round.
            self.cooldown_until[subject] = now + self.params().challenge_cooldown_s

    def _complete_accusation(self, subject: int) -> None:
        round_ = self.pending_accusations.pop(subject, None)
        if round_ is not None:
            round_.timer.cancel()
        self.silent_counts.pop(subject, None)
        self.cooldown_until[subject] = self.sim.queue.now + self.params().challenge_cooldown_s

    # -- control-plane dispatch -------------------------------------------------

    def handle_control(self, body: dict, env: Optional[AuthEnvelope], provider: int,
                       ttl: int, attachments: Optional[dict] = None) -> None:
        if not self.runs_protocol:
            return
        if provider in self.trust.blacklist:
            return
        if env is not None and env.sender in self.trust.blacklist:
            return
        kind = body.get("t")
        now = self.sim.queue.now
        if kind == "challenge":
            self._handle_challenge(body, env, now)
        elif kind == "challenge_ack":
            self._handle_ack(body, env, now)
        elif kind == "verify_behavior":
            self._handle_verify_behavior(body, env, now)
        elif kind == "behavior_response":
            self._handle_response(body, env, now)
        elif kind == "certificate":
            self._handle_certificate(body, provider, ttl, now, attachments)
        elif kind == "certificate_offer":
            self._handle_offer(body, env, provider, now, attachments)
        elif kind == "alarm":
            self._handle_alarm(body, env, provider, ttl, now)
        elif kind == "vote":
            self._handle_vote(body, env, ttl, now)
        elif kind == "verdict":
            self._handle_verdict(body, env, ttl, now)

    def _verify_message(self, body: dict, env: AuthEnvelope, now: float) -> bool:
        return (
            verify(
                self.sim.registry,
                env,
                canonical_bytes(body),
                now,
                self.params().freshness_window_s,
                self.replay,
            )
            == ACCEPT
        )

    # -- trust collector: accused side -------------------------------------------

    def _handle_challenge(self, body: dict, env: AuthEnvelope, now: float) -> None:
        if body.get("accused") != self.id or env.sender != body.get("accuser"):
            return
        if not self._verify_message(body, env, now):
            return
        accuser = body["accuser"]
        round_id = body["round"]
        ack = {"t": "challenge_ack", "accused": self.id, "accuser": accuser, "round": round_id, "ts": now}
        self.sim.send_control(self.id, accuser, ack, self._sign(ack, now))
        verify_msg = {"t": "verify_behavior", "accused": self.id, "round": round_id, "ts": now}
        self.sim.broadcast_control(self.id, verify_msg, self._sign(verify_msg, now))
        self.collections[round_id] = CollectionRound(round_id, accuser, {})
        self.sim.queue.schedule_after(
            self.params().collection_timeout_s, lambda: self._close_collection(round_id)
        )

    def _handle_ack(self, body: dict, env: AuthEnvelope, now: float) -> None:
        if body.get("accuser") != self.id or env.sender != body.get("accused"):
            return
        if not self._verify_message(body, env, now):
            return
        subject = body["accused"]
        round_ = self.pending_accusations.get(subject)
        if round_ is None or round_.round_id != body.get("round"):
            return
        self.silent_counts.pop(subject, None)
        round_.timer.cancel()
        round_.phase = "await_cert"
        grace = self.params().collection_timeout_s + 1.0
        round_.timer = self.sim.queue.schedule_after(
            grace, lambda: self._challenge_timeout(subject, round_.round_id)
        )

    def _handle_verify_behavior(self, body: dict, env: AuthEnvelope, now: float) -> None:
        accused = body.get("accused")
        if env.sender != accused or accused == self.id:
            return
        if not self._verify_message(body, env, now):
            return
        maliciousness = self.watchdog.suspicion_of(accused)
        if self.policy is not None and accused in self.policy.slander_targets:
            maliciousness = 1.0
        snapshot = self.sim.connectivity.snapshot_for(now)
        response = make_response(
            self.sim.registry,
            self.id,
            accused,
            body["round"],
            maliciousness,
            snapshot.neighbors(self.id),
            now,
            self.next_nonce(),
        )
        self.sent_responses[body["round"]] = response
        self.sim.send_control(self.id, accused, response.body(), response.envelope)

    def _handle_response(self, body: dict, env: AuthEnvelope, now: float) -> None:
        if body.get("accused") != self.id or env.sender != body.get("responder"):
            return
        round_ = self.collections.get(body.get("round"))
        if round_ is None:
            return
        if not self._verify_message(body, env, now):
            return
        response = SignedResponse(
            body["responder"],
            body["accused"],
            body["round"],
            body["maliciousness"],
            tuple(body["neighbors"]),
            body["ts"],
            env,
        )
        round_.responses.setdefault(response.responder, response)

    def _close_collection(self, round_id: str) -> None:
        round_ = self.collections.pop(round_id, None)
        if round_ is None or not round_.responses:
            return
        now = self.sim.queue.now
        cert = assemble_certificate(
            self.sim.registry,
            self.id,
            self.id,
            round_id,
            round_.responses.values(),
            self.trust.trust_of,
            self.params().trust_threshold,
            now,
            self.next_nonce(),
        )
        self.trust.cache_certificate(cert, self.id)
        self.recent_certs.append(cert.cert_id)
        self._certs_dirty = True
        hops = self._flood_hops(cert)
        self.sim.broadcast_certificate(self.id, cert, hops)

    def _flood_hops(self, cert: TrustCertificate) -> int:
        """Flood depth: at least flood_hops_min, stretched to two hops when
        the responders' neighborhood reports name nodes beyond the round."""
        inner = cert.responder_set() | {cert.accused}
        reported = set()
        for r in cert.responses:
            reported.update(r.neighbor_report)
        diameter = 2 if (reported - inner) else 1
        return max(self.params().flood_hops_min, diameter)

    # -- trust manager: certificate intake ----------------------------------------

    def _handle_certificate(self, body: dict, provider: int, ttl: int, now: float,
                            attachments: Optional[dict]) -> None:
        cert_id = body.get("id")
        if cert_id in self.trust.cert_cache:
            cert = self.trust.cert_cache[cert_id]
        elif attachments and cert_id in attachments:
            cert = attachments[cert_id]
        elif "cert" in body:
            cert = TrustCertificate.from_wire(body["cert"])
        else:
            return
        self.receive_certificate(cert, provider, ttl, now)

    def receive_certificate(self, cert: TrustCertificate, provider: int, ttl: int,
                            now: float) -> None:
        if not self.runs_protocol:
            return
        if cert.cert_id in self.trust.cert_cache:
            if cert.accused in self.pending_accusations:
                self._complete_accusation(cert.accused)
            return
        own = self.sent_responses.get(cert.round_id)
        if own is not None and own.accused != cert.accused:
            own = None
        verdict = verify_certificate(cert, self.sim.registry, self.params(), now, own)
        if verdict != ACCEPT:
            self.sim.metrics.note_certificate_reject(self.id, verdict)
            if verdict in (REJECT_RECOMPUTE_MISMATCH, REJECT_RESPONSE_OMITTED):
                # A doctored round is itself malicious behavior by the assembler.
                self.watchdog.record_direct_violation(cert.assembler)
            return
        self.trust.cache_certificate(cert, provider)
        self.recent_certs.append(cert.cert_id)
        self._certs_dirty = True
        update = self.trust.apply_certificate(cert, now)
        if cert.accused in self.pending_accusations:
            self._complete_accusation(cert.accused)
        if update.t_new < self.params().blacklist_threshold:
            self.raise_global_alarm(cert.accused, now)
        if ttl > 1:
            self.sim.broadcast_certificate(self.id, cert, ttl - 1)

    def _handle_offer(self, body: dict, env: AuthEnvelope, provider: int, now: float,
                      attachments: Optional[dict]) -> None:
        if env is None or env.sender != provider:
            return
        if not self._verify_message(body, env, now):
            return
        for cert_id in body.get("ids", []):
            if cert_id in self.trust.cert_cache:
                continue
            cert = attachments.get(cert_id) if attachments else None
            if cert is None:
                continue
            cached = self._find_same_round(cert)
            if cached is not None and cached.cert_id != cert.cert_id:
                self._reconcile_copies(cached, cert, provider, now)
            else:
                self.receive_certificate(cert, provider, 0, now)

    def _find_same_round(self, cert: TrustCertificate) -> Optional[TrustCertificate]:
        cert_id = self.trust.round_index.get((cert.assembler, cert.round_id))
        return self.trust.cert_cache.get(cert_id) if cert_id is not None else None

    def _reconcile_copies(self, cached: TrustCertificate, incoming: TrustCertificate,
                          provider: int, now: float) -> None:
        """Two copies of the same round disagree: keep the one that still
        authenticates and charge whoever supplied the tampered copy."""
        params = self.params()
        incoming_ok = verify_certificate(incoming, self.sim.registry, params, now) == ACCEPT
        cached_ok = verify_certificate(cached, self.sim.registry, params, now) == ACCEPT
        if incoming_ok and not cached_ok:
            bad_provider = self.trust.cert_provider.get(cached.cert_id, provider)
            self.trust.evict_certificate(cached.cert_id)
            self.watchdog.record_direct_violation(bad_provider)
            self.sim.metrics.note_tamper_detected(self.id, bad_provider)
            self.receive_certificate(incoming, provider, 0, now)
        elif cached_ok and not incoming_ok:
            self.watchdog.record_direct_violation(provider)
            self.sim.metrics.note_tamper_detected(self.id, provider)

    def exchange_tick(self, now: float, snapshot) -> None:
        """Periodic neighbor cache exchange: offer the newest cached
        certificates whenever the cache or the neighborhood changed."""
        if not self.runs_protocol or not self.recent_certs:
            return
        neighbors = snapshot.neighbors(self.id)
        previous = self._last_offer_neighbors
        fresh_audience = [n for n in neighbors if n not in previous]
        self._last_offer_neighbors = set(neighbors)
        if self._certs_dirty:
            audience = neighbors
        elif fresh_audience:
            audience = fresh_audience
        else:
            return
        attachments = {
            cid: self.trust.cert_cache[cid]
            for cid in self.recent_certs
            if cid in self.trust.cert_cache
        }
        if not attachments:
            return
        self._certs_dirty = False
        body = {"t": "certificate_offer", "origin": self.id,
                "ids": sorted(attachments), "ts": now}
        env = self._sign(body, now)
        for nb in audience:
            self.sim.send_control(self.id, nb, body, env, attachments=attachments)

    def piggyback_certificates(self, now: float) -> List[TrustCertificate]:
        """Fresh certificates attached to this node's outgoing data
        transmissions; older ones travel via the periodic exchange instead."""
        if not self.runs_protocol or not self.recent_certs:
            return []
        cached = self._piggyback_cache
        if cached is not None and cached[0] == now:
            return cached[1]
        horizon = now - self.params().duplicate_window_s
        certs = [
            cert
            for cert in (
                self.trust.cert_cache.get(cid) for cid in list(self.recent_certs)[-2:]
            )
            if cert is not None and cert.issued_at >= horizon
        ]
        self._piggyback_cache = (now, certs)
        return certs

    # -- whistle blower -------------------------------------------------------------

    def raise_global_alarm(self, subject: int, now: float) -> None:
        active = self.active_alarms.get(subject)
        if active is not None and now < active[1]:
            return
        if subject in self.trust.blacklist:
            return
        self._round_seq += 1
        alarm_id = f"a{self.id}.{subject}.{self._round_seq}"
        close_at = now + self.params().vote_window_s
        self.active_alarms[subject] = (alarm_id, close_at)
        self.open_votes[alarm_id] = VoteRound(alarm_id, subject, [])
        self.trust.mark_suspected(subject)
        self.seen_floods.add(alarm_id)
        body = {"t": "alarm", "subject": subject, "origin": self.id, "alarm": alarm_id, "ts": now}
        env = self._sign(body, now)
        self.sim.metrics.note_alarm(self.id, subject)
        self.sim.flood_control(self.id, body, env, self.sim.node_count)
        self._cast_vote(subject, alarm_id, now)
        self.sim.queue.schedule_after(
            self.params().vote_window_s, lambda: self._close_vote(alarm_id)
        )

    def _handle_alarm(self, body: dict, env: AuthEnvelope, provider: int, ttl: int,
                      now: float) -> None:
        alarm_id = body.get("alarm")
        if alarm_id in self.seen_floods:
            return
        if env is None or env.sender != body.get("origin"):
            return
        if verify(self.sim.registry, env, canonical_bytes(body), now,
                  self.params().freshness_window_s) != ACCEPT:
            return
        self.seen_floods.add(alarm_id)
        # First flood arrival defines the convergecast parent for votes.
        self.alarm_parent[alarm_id] = provider
        subject = body["subject"]
        self.active_alarms[subject] = (alarm_id, now + self.params().vote_window_s)
        self.trust.mark_suspected(subject)
        if ttl > 1:
            self.sim.flood_control(self.id, body, env, ttl - 1)
        last = self.interactions.get(subject)
        if last is not None and now - last <= self.params().vote_interaction_window_s:
            self._cast_vote(subject, alarm_id, now)

    def _ballot(self, subject: int) -> str:
        """An honest ballot condemns when this node's own audit shows the
        subject dropping or modifying most of what it was watched forwarding."""
        watches, fraction = self.watchdog.lifetime_drop_fraction(subject)
        p = self.params()
        if watches >= p.ballot_min_watches and fraction > p.ballot_drop_fraction:
            return VERDICT_CONDEMN
        return "absolve"

    def _cast_vote(self, subject: int, alarm_id: str, now: float) -> None:
        flood_id = f"{alarm_id}/v{self.id}"
        if flood_id in self.seen_floods:
            return
        self.seen_floods.add(flood_id)
        last = self.interactions.get(subject)
        age = (now - last) if last is not None else 10.0 * self.params().vote_interaction_window_s
        vote = make_vote(
            self.sim.registry, self.id, subject, alarm_id, self._ballot(subject),
            age, now, self.next_nonce(),
        )
        if alarm_id in self.open_votes:
            self._accept_vote(vote)
        else:
            self._forward_vote(vote.body(), vote.envelope, alarm_id, self.sim.node_count)

    def _forward_vote(self, body: dict, env: AuthEnvelope, alarm_id: str, ttl: int) -> None:
        """Votes ride hop-by-hop up the alarm's flood tree to the origin."""
        parent = self.alarm_parent.get(alarm_id)
        if parent is not None:
            self.sim.send_control(self.id, parent, body, env, ttl)

    def _handle_vote(self, body: dict, env: AuthEnvelope, ttl: int, now: float) -> None:
        alarm_id = body.get("alarm")
        flood_id = f"{alarm_id}/v{body.get('voter')}"
        if flood_id in self.seen_floods:
            return
        if env is None or env.sender != body.get("voter"):
            return
        if verify(self.sim.registry, env, canonical_bytes(body), now,
                  self.params().freshness_window_s) != ACCEPT:
            return
        self.seen_floods.add(flood_id)
        if alarm_id in self.open_votes:
            vote = Vote(
                body["voter"], body["subject"], body["alarm"], body["verdict"],
                body["age"], body["ts"], env,
            )
            self._accept_vote(vote)
        elif ttl > 1:
            self._forward_vote(body, env, alarm_id, ttl - 1)

    def _accept_vote(self, vote: Vote) -> None:
        round_ = self.open_votes.get(vote.alarm_id)
        if round_ is not None:
            round_.votes.append(vote)

    def _close_vote(self, alarm_id: str) -> None:
        round_ = self.open_votes.pop(alarm_id, None)
        if round_ is None:
            return
        now = self.sim.queue.now
        verdict, condemns, eligible = tally_votes(
            round_.votes, self.params().vote_interaction_window_s
        )
        body = {
            "t": "verdict",
            "subject": round_.subject,
            "alarm": alarm_id,
            "verdict": verdict,
            "votes": [v.to_wire() for v in round_.votes],
            "ts": now,
        }
        env = self._sign(body, now)
        self.seen_floods.add(f"{alarm_id}/verdict")
        self.apply_verdict(round_.subject, verdict)
        if verdict == VERDICT_CONDEMN:
            self.sim.metrics.note_condemnation(round_.subject, self.id, condemns, eligible)
        self.sim.flood_control(self.id, body, env, self.sim.node_count)

    def _handle_verdict(self, body: dict, env: AuthEnvelope, ttl: int, now: float) -> None:
        alarm_id = body.get("alarm")
        flood_id = f"{alarm_id}/verdict"
        if flood_id in self.seen_floods:
            return
        if env is None or verify(self.sim.registry, env, canonical_bytes(body), now,
                                 self.params().freshness_window_s) != ACCEPT:
            return
        self.seen_floods.add(flood_id)
        recount = self._recount_verdict(body, env, now)
        if recount != body.get("verdict"):
            return
        self.apply_verdict(body["subject"], recount)
        if ttl > 1:
            self.sim.flood_control(self.id, body, env, ttl - 1)

    def _recount_verdict(self, body: dict, env: AuthEnvelope, now: float) -> str:
        """Re-tally the votes embedded in a verdict; a lying origin's claimed
        verdict must reproduce from the signed ballots. The result is
        memoized per verdict content for all receivers."""
        memo = self.sim.verdict_memo
        cached = memo.get(env.payload_digest)
        if cached is not None:
            return cached
        alarm_id = body.get("alarm")
        kept = []
        for w in body.get("votes", []):
            v = Vote.from_wire(w)
            if v.alarm_id != alarm_id or v.subject != body.get("subject"):
                continue
            if verify(self.sim.registry, v.envelope, v.payload(), now,
                      self.params().certificate_freshness_s) == ACCEPT:
                kept.append(v)
        recount, _c, _e = tally_votes(kept, self.params().vote_interaction_window_s)
        memo[env.payload_digest] = recount
        return recount

    def apply_verdict(self, subject: int, verdict: str) -> None:
        if verdict == VERDICT_CONDEMN:
            self.trust.mark_malicious(subject)
        else:
            self.trust.mark_suspected(subject)
            self.watchdog.surveillance.add(subject)
