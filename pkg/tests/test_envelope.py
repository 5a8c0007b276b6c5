import dataclasses

import pytest

from manetguard.envelope import (
    ACCEPT,
    AuthEnvelope,
    KeyRegistry,
    REJECT_REPLAY,
    REJECT_STALE,
    REJECT_TAMPERED,
    REJECT_UNKNOWN_SENDER,
    ReplayGuard,
    canonical_bytes,
    sign,
    verify,
)

REGISTRY = KeyRegistry.bootstrap(seed=9, node_ids=range(6))
WINDOW = 10.0


def test_sign_then_verify_accepts():
    env = sign(REGISTRY, 2, b"hello", now=5.0, nonce=1)
    assert verify(REGISTRY, env, b"hello", 5.5, WINDOW) == ACCEPT


def test_payload_byte_flip_rejected():
    env = sign(REGISTRY, 2, b"hello", now=5.0, nonce=1)
    assert verify(REGISTRY, env, b"hellp", 5.5, WINDOW) == REJECT_TAMPERED


def test_replay_same_nonce_rejected():
    env = sign(REGISTRY, 2, b"hello", now=5.0, nonce=7)
    guard = ReplayGuard()
    assert verify(REGISTRY, env, b"hello", 5.5, WINDOW, guard) == ACCEPT
    assert verify(REGISTRY, env, b"hello", 6.0, WINDOW, guard) == REJECT_REPLAY


def test_stale_envelope_rejected():
    env = sign(REGISTRY, 1, b"x", now=5.0, nonce=1)
    assert verify(REGISTRY, env, b"x", 15.1, WINDOW) == REJECT_STALE


def test_future_dated_envelope_rejected():
    env = sign(REGISTRY, 1, b"x", now=50.0, nonce=1)
    assert verify(REGISTRY, env, b"x", 5.0, WINDOW) == REJECT_STALE


def test_unknown_sender():
    env = sign(REGISTRY, 1, b"x", now=1.0, nonce=1)
    forged = dataclasses.replace(env, sender=99)
    assert verify(REGISTRY, forged, b"x", 1.0, WINDOW) == REJECT_UNKNOWN_SENDER


def test_sender_forgery_rejected():
    # An envelope keyed under node 1 but claiming sender 3 must not verify.
    env = sign(REGISTRY, 1, b"x", now=1.0, nonce=1)
    forged = dataclasses.replace(env, sender=3)
    assert verify(REGISTRY, forged, b"x", 1.0, WINDOW) == REJECT_TAMPERED


def test_keyed_byzantine_lie_still_accepts():
    # Authenticity is not honesty: a keyed node signing a false claim
    # verifies fine; the consensus layer is what judges content.
    env = sign(REGISTRY, 4, b"false accusation", 2.0, 1)
    assert verify(REGISTRY, env, b"false accusation", 2.0, WINDOW) == ACCEPT


def test_signing_without_key_is_contract_violation():
    with pytest.raises(KeyError):
        sign(REGISTRY, 77, b"x", 0.0, 1)


@pytest.mark.parametrize("field,value", [
    ("sender", 2),
    ("payload_digest", "00" * 32),
    ("timestamp", 3.25),
    ("nonce", 999),
    ("tag", "ab" * 32),
])
def test_single_field_mutations_rejected(field, value):
    env = sign(REGISTRY, 1, b"payload", now=3.0, nonce=5)
    mutated = dataclasses.replace(env, **{field: value})
    assert mutated != env
    assert verify(REGISTRY, mutated, b"payload", 3.0, WINDOW) != ACCEPT


def test_no_forgery_from_observed_envelopes():
    # Fuzz: mutations of recorded envelopes (and tag splices across them)
    # never yield a fresh accepted envelope for a sender.
    import random

    rng = random.Random(1234)
    observed = [
        sign(REGISTRY, s, f"msg-{s}-{n}".encode(), now=1.0 + n, nonce=n)
        for s in range(3)
        for n in range(1, 6)
    ]
    guard = ReplayGuard()
    for env in observed:
        assert verify(REGISTRY, env, f"msg-{env.sender}-{env.nonce}".encode(),
                      env.timestamp, WINDOW, guard) == ACCEPT
    attempts = 0
    for _ in range(500):
        base = rng.choice(observed)
        donor = rng.choice(observed)
        candidate = AuthEnvelope(
            sender=base.sender,
            payload_digest=rng.choice([base.payload_digest, donor.payload_digest]),
            timestamp=rng.choice([base.timestamp, base.timestamp + 0.5]),
            nonce=rng.choice([base.nonce, base.nonce + 100, donor.nonce]),
            tag=rng.choice([base.tag, donor.tag]),
        )
        payload = rng.choice([b"forged", f"msg-{base.sender}-{base.nonce}".encode()])
        if candidate == base and payload == f"msg-{base.sender}-{base.nonce}".encode():
            continue  # unmodified replay, covered elsewhere
        attempts += 1
        assert verify(REGISTRY, candidate, payload, candidate.timestamp, WINDOW, guard) != ACCEPT
    assert attempts > 400


def test_replay_guard_prunes_to_window():
    guard = ReplayGuard()
    for n in range(100):
        env = sign(REGISTRY, 0, b"m", now=float(n), nonce=n)
        assert verify(REGISTRY, env, b"m", float(n), WINDOW, guard) == ACCEPT
    guard.prune(now=100.0, window=WINDOW)
    assert len(guard) <= 11


def test_canonical_bytes_is_deterministic_and_sorted():
    a = canonical_bytes({"b": 1.5, "a": [1, 2, {"z": True, "y": None}]})
    b = canonical_bytes({"a": [1, 2, {"y": None, "z": True}], "b": 1.5})
    assert a == b
    assert a == b'{"a":[1,2,{"y":null,"z":true}],"b":1.5}'
