"""Authenticated, timestamped message envelopes over a pre-shared key registry.

Stands in for a public-key layer: every node holds a secret key established
at bootstrap, and any node can check any other node's envelopes (closed
world). Provides sender authenticity, tamper detection, replay rejection,
and freshness. Authenticity is not honesty: a keyed Byzantine node can sign
lies; the consensus layer deals with those.
"""

from __future__ import annotations

import hashlib
import hmac
import json
from dataclasses import dataclass
from typing import Dict, Optional, Set, Tuple

ENCODING_VERSION = "mg1"
DIGEST_ALG = "sha256"
TAG_ALG = "hmac-sha256"

ACCEPT = "ok"
REJECT_TAMPERED = "tampered"
REJECT_REPLAY = "replay"
REJECT_STALE = "stale"
REJECT_UNKNOWN_SENDER = "unknown_sender"


def canonical_bytes(obj) -> bytes:
    """Deterministic byte encoding of a JSON-compatible tree.

    Sorted keys, compact separators, shortest-round-trip floats. This is the
    byte form all digests and tags are computed over (version ENCODING_VERSION).
    """
    return json.dumps(
        obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True, allow_nan=False
    ).encode("ascii")


def payload_digest(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()


class KeyRegistry:
    """Per-node secret keys, populated once before the run and then frozen."""

    def __init__(self, keys: Dict[int, bytes]):
        self._keys = dict(keys)

    @classmethod
    def bootstrap(cls, seed: int, node_ids) -> "KeyRegistry":
        return cls(
            {
                n: hashlib.sha256(f"manetguard-key/{seed}/{n}".encode()).digest()
                for n in node_ids
            }
        )

    def has_key(self, node: int) -> bool:
        return node in self._keys

    def key_for(self, node: int) -> bytes:
        return self._keys[node]


@dataclass(frozen=True)
class AuthEnvelope:
    sender: int
    payload_digest: str
    timestamp: float
    nonce: int
    tag: str

    def to_wire(self) -> dict:
        return {
            "sender": self.sender,
            "digest": self.payload_digest,
            "ts": self.timestamp,
            "nonce": self.nonce,
            "tag": self.tag,
        }

    @classmethod
    def from_wire(cls, d: dict) -> "AuthEnvelope":
        return cls(d["sender"], d["digest"], d["ts"], d["nonce"], d["tag"])


def _tag_input(sender: int, digest: str, timestamp: float, nonce: int) -> bytes:
    # Fixed-order field concatenation; repr() floats round-trip exactly.
    return f"{ENCODING_VERSION}|{sender}|{digest}|{timestamp!r}|{nonce}".encode("ascii")


def sign(registry: KeyRegistry, sender: int, payload: bytes, now: float, nonce: int) -> AuthEnvelope:
    if not registry.has_key(sender):
        raise KeyError(f"no registry key for node {sender}")
    digest = payload_digest(payload)
    tag = hmac.new(
        registry.key_for(sender), _tag_input(sender, digest, now, nonce), hashlib.sha256
    ).hexdigest()
    return AuthEnvelope(sender, digest, now, nonce, tag)


class ReplayGuard:
    """Per-verifier memory of accepted (sender, nonce) pairs.

    Entries older than the freshness window are pruned, which bounds growth:
    anything older would be rejected as stale before the replay check anyway.
    """

    def __init__(self):
        self._seen: Dict[Tuple[int, int], float] = {}

    def seen(self, sender: int, nonce: int) -> bool:
        return (sender, nonce) in self._seen

    def record(self, sender: int, nonce: int, now: float) -> None:
        self._seen[(sender, nonce)] = now

    def prune(self, now: float, window: float) -> None:
        cutoff = now - window
        stale = [k for k, t in self._seen.items() if t < cutoff]
        for k in stale:
            del self._seen[k]

    def __len__(self) -> int:
        return len(self._seen)


def verify(
    registry: KeyRegistry,
    envelope: AuthEnvelope,
    payload: bytes,
    now: float,
    freshness_window: float,
    replay_guard: Optional[ReplayGuard] = None,
) -> str:
    """Check an envelope against its payload.

    Returns ACCEPT or one of the REJECT_* reasons. When a replay guard is
    given, the (sender, nonce) pair must be unseen and is recorded on accept;
    pass None for idempotent object verification (e.g. cached certificates
    re-checked on every exchange).

    The recomputed tag is memoized on the (frozen) envelope instance so a
    broadcast verified by many receivers hashes its inputs once.
    """
    if not registry.has_key(envelope.sender):
        return REJECT_UNKNOWN_SENDER
    if payload_digest(payload) != envelope.payload_digest:
        return REJECT_TAMPERED
    expect = getattr(envelope, "_expected_tag", None)
    if expect is None:
        expect = hmac.new(
            registry.key_for(envelope.sender),
            _tag_input(envelope.sender, envelope.payload_digest, envelope.timestamp, envelope.nonce),
            hashlib.sha256,
        ).hexdigest()
        object.__setattr__(envelope, "_expected_tag", expect)
    if not hmac.compare_digest(expect, envelope.tag):
        return REJECT_TAMPERED
    if now - envelope.timestamp > freshness_window or envelope.timestamp - now > freshness_window:
        return REJECT_STALE
    if replay_guard is not None:
        if replay_guard.seen(envelope.sender, envelope.nonce):
            return REJECT_REPLAY
        replay_guard.record(envelope.sender, envelope.nonce, now)
    return ACCEPT
