"""Cooperative trust protocol: challenge rounds, group-trust consensus,
certificates, trust-state updates, alarms, and whistle-blower votes.

This module holds the protocol's pure logic and wire formats. The per-node
state machines that drive rounds inside a simulation live in node.py.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from .envelope import (
    ACCEPT,
    AuthEnvelope,
    KeyRegistry,
    canonical_bytes,
    payload_digest,
    verify,
)

STATUS_NORMAL = "normal"
STATUS_SUSPECTED = "suspected"
STATUS_MALICIOUS = "malicious"

VERDICT_CONDEMN = "condemn"
VERDICT_SURVEILLANCE = "surveillance"

REJECT_RECOMPUTE_MISMATCH = "recompute_mismatch"
REJECT_RESPONSE_OMITTED = "response_omitted"


@dataclass
class TrustParams:
    """Knobs of the trust update and the surrounding round machinery."""

    alpha: float = 0.6              # weight of the old trust value
    alpha2_c: float = 0.7           # weight given to the newly computed trust
    delta: float = 0.01             # trust replenishment per accepted update
    trust_threshold: float = 0.5    # partition level for the majority split
    blacklist_threshold: float = 0.3
    initial_trust: float = 0.8
    duplicate_window_s: float = 30.0    # same-group certificates inside this window are ignored
    exchange_period_s: float = 20.0
    flood_hops_min: int = 2
    vote_interaction_window_s: float = 100.0
    freshness_window_s: float = 10.0        # for point-to-point protocol messages
    certificate_freshness_s: float = 600.0  # certificates stay exchangeable much longer
    challenge_timeout_s: float = 2.0
    collection_timeout_s: float = 2.0
    vote_window_s: float = 5.0
    silent_rounds_to_alarm: int = 3
    challenge_cooldown_s: float = 30.0
    ballot_min_watches: int = 3
    ballot_drop_fraction: float = 0.5


def clamp01(x: float) -> float:
    return 0.0 if x < 0.0 else 1.0 if x > 1.0 else x


# ---------------------------------------------------------------------------
# Wire messages. Every message body is a JSON-compatible dict with a "t" type
# tag; its canonical_bytes form is what envelopes sign. Embedded responses
# keep their own envelopes so any receiver can re-verify them.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SignedResponse:
    """A neighbor's observation about the accused, as broadcast-safe record."""

    responder: int
    accused: int
    round_id: str
    maliciousness: float
    neighbor_report: Tuple[int, ...]
    timestamp: float
    envelope: AuthEnvelope

    def body(self) -> dict:
        return {
            "t": "behavior_response",
            "responder": self.responder,
            "accused": self.accused,
            "round": self.round_id,
            "maliciousness": self.maliciousness,
            "neighbors": list(self.neighbor_report),
            "ts": self.timestamp,
        }

    def payload(self) -> bytes:
        cached = getattr(self, "_payload", None)
        if cached is None:
            cached = canonical_bytes(self.body())
            object.__setattr__(self, "_payload", cached)
        return cached

    def to_wire(self) -> dict:
        return {"body": self.body(), "env": self.envelope.to_wire()}

    @classmethod
    def from_wire(cls, d: dict) -> "SignedResponse":
        b = d["body"]
        return cls(
            b["responder"],
            b["accused"],
            b["round"],
            b["maliciousness"],
            tuple(b["neighbors"]),
            b["ts"],
            AuthEnvelope.from_wire(d["env"]),
        )


def make_response(
    registry: KeyRegistry,
    responder: int,
    accused: int,
    round_id: str,
    maliciousness: float,
    neighbor_report: Sequence[int],
    now: float,
    nonce: int,
) -> SignedResponse:
    from .envelope import sign

    body = {
        "t": "behavior_response",
        "responder": responder,
        "accused": accused,
        "round": round_id,
        "maliciousness": maliciousness,
        "neighbors": sorted(neighbor_report),
        "ts": now,
    }
    env = sign(registry, responder, canonical_bytes(body), now, nonce)
    return SignedResponse(
        responder, accused, round_id, maliciousness, tuple(sorted(neighbor_report)), now, env
    )


@dataclass(frozen=True)
class TrustCertificate:
    """Signed outcome of one challenge round, assembled by the accused."""

    accused: int
    assembler: int
    round_id: str
    responses: Tuple[SignedResponse, ...]       # sorted by responder id
    weights: Tuple[Tuple[int, float], ...]      # assembler-assigned w_i, sorted
    group_trust: float
    majority_members: Tuple[int, ...]
    credibility: float                          # weighted majority credibility
    issued_at: float
    envelope: AuthEnvelope

    def body(self) -> dict:
        return {
            "t": "trust_certificate",
            "accused": self.accused,
            "assembler": self.assembler,
            "round": self.round_id,
            "responses": [r.to_wire() for r in self.responses],
            "weights": [[n, w] for n, w in self.weights],
            "group_trust": self.group_trust,
            "majority": list(self.majority_members),
            "credibility": self.credibility,
            "issued_at": self.issued_at,
        }

    def payload(self) -> bytes:
        cached = getattr(self, "_payload", None)
        if cached is None:
            cached = canonical_bytes(self.body())
            object.__setattr__(self, "_payload", cached)
        return cached

    @property
    def cert_id(self) -> str:
        return self.envelope.payload_digest

    def responder_set(self) -> FrozenSet[int]:
        return frozenset(r.responder for r in self.responses)

    def to_wire(self) -> dict:
        return {"body": self.body(), "env": self.envelope.to_wire()}

    @classmethod
    def from_wire(cls, d: dict) -> "TrustCertificate":
        b = d["body"]
        return cls(
            b["accused"],
            b["assembler"],
            b["round"],
            tuple(SignedResponse.from_wire(r) for r in b["responses"]),
            tuple((n, w) for n, w in b["weights"]),
            b["group_trust"],
            tuple(b["majority"]),
            b["credibility"],
            b["issued_at"],
            AuthEnvelope.from_wire(d["env"]),
        )


class NoQuorum(Exception):
    """Raised when a round collected zero responses."""


@dataclass(frozen=True)
class GroupTrustResult:
    group_trust: float
    majority_members: Tuple[int, ...]
    credibility: float


def compute_group_trust(
    responses: Sequence[Tuple[int, float]],
    weights: Dict[int, float],
    trust_threshold: float,
    round_size: Optional[int] = None,
) -> GroupTrustResult:
    """Consensus over one round's responses.

    `responses` is a sequence of (responder, maliciousness). Responders are
    partitioned by whether their implied trust 1 - maliciousness clears the
    trust threshold; the majority is the larger subset (a tie goes to the
    subset containing the smallest responder id). The group trust is one
    minus the mean maliciousness over that majority, and the credibility is
    sum(w_i * t_i) over the majority divided by the round size.
    """
    if not responses:
        raise NoQuorum("round collected no responses")
    ordered = sorted(responses)
    trusting = [(n, m) for n, m in ordered if (1.0 - m) >= trust_threshold]
    distrusting = [(n, m) for n, m in ordered if (1.0 - m) < trust_threshold]
    if len(trusting) > len(distrusting):
        majority = trusting
    elif len(distrusting) > len(trusting):
        majority = distrusting
    else:
        smallest = ordered[0][0]
        majority = trusting if any(n == smallest for n, _ in trusting) else distrusting
    group_trust = clamp01(1.0 - sum(m for _, m in majority) / len(majority))
    w = round_size if round_size is not None else len(ordered)
    credibility = clamp01(
        sum(weights.get(n, 0.0) * (1.0 - m) for n, m in majority) / w
    )
    return GroupTrustResult(group_trust, tuple(n for n, _ in majority), credibility)


def assemble_certificate(
    registry: KeyRegistry,
    assembler: int,
    accused: int,
    round_id: str,
    responses: Iterable[SignedResponse],
    weight_lookup,
    trust_threshold: float,
    now: float,
    nonce: int,
) -> TrustCertificate:
    """Build the signed certificate for a completed round.

    `weight_lookup(responder) -> w_i` supplies the assembler's cached trust
    in each responder.
    """
    from .envelope import sign

    ordered = tuple(sorted(responses, key=lambda r: r.responder))
    if not ordered:
        raise NoQuorum("cannot assemble a certificate with no responses")
    weights = {r.responder: weight_lookup(r.responder) for r in ordered}
    result = compute_group_trust(
        [(r.responder, r.maliciousness) for r in ordered], weights, trust_threshold
    )
    body = {
        "t": "trust_certificate",
        "accused": accused,
        "assembler": assembler,
        "round": round_id,
        "responses": [r.to_wire() for r in ordered],
        "weights": [[n, w] for n, w in sorted(weights.items())],
        "group_trust": result.group_trust,
        "majority": list(result.majority_members),
        "credibility": result.credibility,
        "issued_at": now,
    }
    env = sign(registry, assembler, canonical_bytes(body), now, nonce)
    return TrustCertificate(
        accused,
        assembler,
        round_id,
        ordered,
        tuple(sorted(weights.items())),
        result.group_trust,
        result.majority_members,
        result.credibility,
        now,
        env,
    )


def verify_certificate(
    cert: TrustCertificate,
    registry: KeyRegistry,
    params: TrustParams,
    now: float,
    own_response: Optional[SignedResponse] = None,
) -> str:
    """Full receiver-side certificate check.

    Accept iff the certificate envelope and every embedded response
    authenticate, timestamps are fresh, recomputing the group trust over the
    embedded responses reproduces the embedded values exactly, and (when the
    receiver responded in this round) its own response appears unmodified.
    Returns ACCEPT or a reject reason string.
    """
    v = verify(registry, cert.envelope, cert.payload(), now, params.certificate_freshness_s)
    if v != ACCEPT:
        return v
    if cert.envelope.sender != cert.assembler or cert.assembler != cert.accused:
        return "tampered"
    if now - cert.issued_at > params.certificate_freshness_s:
        return "stale"
    seen_responders = set()
    for r in cert.responses:
        if r.accused != cert.accused or r.round_id != cert.round_id:
            return REJECT_RECOMPUTE_MISMATCH
        if r.responder in seen_responders:
            return REJECT_RECOMPUTE_MISMATCH
        seen_responders.add(r.responder)
        if r.envelope.sender != r.responder:
            return "tampered"
        v = verify(registry, r.envelope, r.payload(), now, params.certificate_freshness_s)
        if v != ACCEPT:
            return "tampered" if v != "stale" else "stale"
        if abs(r.timestamp - cert.issued_at) > params.certificate_freshness_s:
            return "stale"
    weights = dict(cert.weights)
    if set(weights) != seen_responders:
        return REJECT_RECOMPUTE_MISMATCH
    try:
        recomputed = compute_group_trust(
            [(r.responder, r.maliciousness) for r in cert.responses],
            weights,
            params.trust_threshold,
        )
    except NoQuorum:
        return REJECT_RECOMPUTE_MISMATCH
    if (
        recomputed.group_trust != cert.group_trust
        or recomputed.majority_members != cert.majority_members
        or recomputed.credibility != cert.credibility
    ):
        return REJECT_RECOMPUTE_MISMATCH
    if own_response is not None:
        match = next(
            (r for r in cert.responses if r.responder == own_response.responder), None
        )
        if (
            match is None
            or match.payload() != own_response.payload()
            or match.envelope != own_response.envelope
        ):
            return REJECT_RESPONSE_OMITTED
    return ACCEPT


@dataclass
class TrustUpdate:
    subject: int
    t_old: float
    t_new: float
    k: int
    beta: float


class TrustState:
    """One node's view of everyone else: trust values, statuses, caches."""

    def __init__(self, params: TrustParams):
        self.params = params
        self.trust: Dict[int, float] = {}
        self.status: Dict[int, str] = {}
        self.blacklist: Set[int] = set()
        self.cert_cache: Dict[str, TrustCertificate] = {}
        self.cert_provider: Dict[str, int] = {}
        self.round_index: Dict[Tuple[int, str], str] = {}
        self.last_round_at: Dict[int, float] = {}
        # Per subject: (responder set, received_at) pairs backing the
        # duplicate-certificate rule.
        self.group_history: Dict[int, List[Tuple[FrozenSet[int], float]]] = {}

    def trust_of(self, subject: int) -> float:
        return self.trust.get(subject, self.params.initial_trust)

    def status_of(self, subject: int) -> str:
        return self.status.get(subject, STATUS_NORMAL)

    def mark_suspected(self, subject: int) -> None:
        if self.status_of(subject) == STATUS_NORMAL:
            self.status[subject] = STATUS_SUSPECTED

    def mark_malicious(self, subject: int) -> None:
        self.status[subject] = STATUS_MALICIOUS
        self.blacklist.add(subject)

    def duplicate_count(self, subject: int, responders: FrozenSet[int], now: float) -> int:
        """k of the duplicate rule: 1 plus the number of recent certificates
        for this subject whose responder group equals or contains this one."""
        hist = self.group_history.get(subject, [])
        cutoff = now - self.params.duplicate_window_s
        hist = [(s, t) for s, t in hist if t >= cutoff]
        self.group_history[subject] = hist
        return 1 + sum(1 for s, _t in hist if responders <= s)

    def apply_certificate(self, cert: TrustCertificate, now: float) -> TrustUpdate:
        """Fold an accepted certificate into the subject's trust value.

        1 - T_new = alpha * (1 - T_old) + beta * (1 - T_cert) - delta, with
        beta = credibility * alpha2_c * alpha3 and alpha3 killed by the
        duplicate rule; the result is clamped to [0, 1].
        """
        p = self.params
        subject = cert.accused
        responders = cert.responder_set()
        k = self.duplicate_count(subject, responders, now)
        alpha3 = 1.0 if k == 1 else 0.0
        beta = cert.credibility * p.alpha2_c * alpha3
        t_old = self.trust_of(subject)
        distrust = p.alpha * (1.0 - t_old) + beta * (1.0 - cert.group_trust) - p.delta
        t_new = clamp01(1.0 - distrust)
        self.trust[subject] = t_new
        self.group_history.setdefault(subject, []).append((responders, now))
        if t_new < p.trust_threshold:
            self.mark_suspected(subject)
        return TrustUpdate(subject, t_old, t_new, k, beta)

    def cache_certificate(self, cert: TrustCertificate, provider: int) -> bool:
        """Returns True when the certificate was new to this cache."""
        if cert.cert_id in self.cert_cache:
            return False
        self.cert_cache[cert.cert_id] = cert
        self.cert_provider[cert.cert_id] = provider
        self.round_index[(cert.assembler, cert.round_id)] = cert.cert_id
        prev = self.last_round_at.get(cert.accused)
        if prev is None or cert.issued_at > prev:
            self.last_round_at[cert.accused] = cert.issued_at
        return True

    def evict_certificate(self, cert_id: str) -> None:
        cert = self.cert_cache.pop(cert_id, None)
        self.cert_provider.pop(cert_id, None)
        if cert is not None:
            self.round_index.pop((cert.assembler, cert.round_id), None)


@dataclass(frozen=True)
class Vote:
    voter: int
    subject: int
    alarm_id: str
    verdict: str                  # condemn | absolve
    last_interaction_age: float   # claimed seconds since last interaction
    timestamp: float
    envelope: AuthEnvelope

    def body(self) -> dict:
        return {
            "t": "vote",
            "voter": self.voter,
            "subject": self.subject,
            "alarm": self.alarm_id,
            "verdict": self.verdict,
            "age": self.last_interaction_age,
            "ts": self.timestamp,
        }

    def payload(self) -> bytes:
        cached = getattr(self, "_payload", None)
        if cached is None:
            cached = canonical_bytes(self.body())
            object.__setattr__(self, "_payload", cached)
        return cached

    def to_wire(self) -> dict:
        return {"body": self.body(), "env": self.envelope.to_wire()}

    @classmethod
    def from_wire(cls, d: dict) -> "Vote":
        b = d["body"]
        return cls(
            b["voter"], b["subject"], b["alarm"], b["verdict"], b["age"], b["ts"],
            AuthEnvelope.from_wire(d["env"]),
        )


def make_vote(
    registry: KeyRegistry,
    voter: int,
    subject: int,
    alarm_id: str,
    verdict: str,
    last_interaction_age: float,
    now: float,
    nonce: int,
) -> Vote:
    from .envelope import sign

    body = {
        "t": "vote",
        "voter": voter,
        "subject": subject,
        "alarm": alarm_id,
        "verdict": verdict,
        "age": last_interaction_age,
        "ts": now,
    }
    env = sign(registry, voter, canonical_bytes(body), now, nonce)
    return Vote(voter, subject, alarm_id, verdict, last_interaction_age, now, env)


def tally_votes(votes: Sequence[Vote], interaction_window: float) -> Tuple[str, int, int]:
    """Close a whistle-blower vote.

    One vote per voter (first kept); votes whose claimed interaction age
    exceeds the window are discarded as ineligible. Condemn requires a strict
    majority of the eligible cast votes; ties and empty votes fall back to
    surveillance. Returns (verdict, condemns, eligible_cast).
    """
    seen: Set[int] = set()
    condemns = 0
    eligible = 0
    for v in sorted(votes, key=lambda v: (v.timestamp, v.voter)):
        if v.voter in seen:
            continue
        seen.add(v.voter)
        if v.last_interaction_age > interaction_window:
            continue
        eligible += 1
        if v.verdict == VERDICT_CONDEMN:
            condemns += 1
    if eligible > 0 and condemns * 2 > eligible:
        return VERDICT_CONDEMN, condemns, eligible
    return VERDICT_SURVEILLANCE, condemns, eligible
