"""Passive per-node watchdog: probabilistic watch lists over sent and
overheard packets, audit of expected forwards, and suspicion accumulation
that discounts congestion, collision, and link-noise explanations before
blaming a neighbor.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set, Tuple

RESOLVE_CONFIRMED = "confirmed"
RESOLVE_DROP_SUSPECTED = "drop_suspected"
RESOLVE_MODIFIED = "modified"

ORIGIN_SENT = "sent"
ORIGIN_OVERHEARD = "overheard"


@dataclass
class MonitorParams:
    p1: float = 1.0                  # probability of watching a sent packet
    p2: float = 1.0                  # probability of watching an overheard packet
    forward_timeout_s: float = 3.0   # silence beyond this counts as a suspected drop
    suspicion_threshold: float = 0.6
    alpha1_s: float = 0.5            # memory weight of the suspicion update
    alpha2_s: float = 0.5            # evidence weight of the suspicion update
    lambda_f: float = 0.35           # growth constant of the drop-pressure curve
    drop_saturation: int = 8         # drops per window at which pressure saturates
    stats_window_s: float = 10.0
    p_timeout: float = 0.02          # constant link-noise / late-forward rate


def drop_pressure(drops: int, p_malicious: float, lambda_f: float, saturation: int) -> float:
    """Evidence term of the suspicion update: a normalized convex exponential
    in the window's drop count, scaled by the malicious-drop probability.

    Zero drops give zero pressure; the curve rises slowly at first and
    saturates at `saturation` drops per window. Clamped to [0, 1].
    """
    if drops <= 0:
        return 0.0
    d = min(drops, saturation)
    value = p_malicious * math.expm1(lambda_f * d) / math.expm1(lambda_f * saturation)
    return 0.0 if value < 0.0 else 1.0 if value > 1.0 else value


def estimate_p_malicious(p_congestion: float, p_collision: float, p_timeout: float) -> float:
    """Probability that an unexplained missing forward was malicious, after
    discounting congestion, collision, and timeout explanations; clamped."""
    value = 1.0 - (p_congestion + p_collision + p_timeout)
    return 0.0 if value < 0.0 else 1.0 if value > 1.0 else value


def update_suspicion(previous: float, drops: int, p_malicious: float, params: MonitorParams) -> float:
    """One window step of the per-neighbor suspicion recurrence."""
    value = params.alpha1_s * previous + params.alpha2_s * drop_pressure(
        drops, p_malicious, params.lambda_f, params.drop_saturation
    )
    return 0.0 if value < 0.0 else 1.0 if value > 1.0 else value


@dataclass
class WatchEntry:
    packet_id: int
    watched_forwarder: int
    expected_digest: str
    deadline: float
    origin: str
    resolution: Optional[str] = None


@dataclass
class SubjectCounters:
    """Adjudicated watch outcomes for one watched neighbor."""

    watched: int = 0
    confirmed: int = 0
    dropped: int = 0
    modified: int = 0

    def add(self, resolution: str) -> None:
        self.watched += 1
        if resolution == RESOLVE_CONFIRMED:
            self.confirmed += 1
        elif resolution == RESOLVE_MODIFIED:
            self.modified += 1
        else:
            self.dropped += 1

    def reset(self) -> None:
        self.watched = self.confirmed = self.dropped = self.modified = 0


class Watchdog:
    """Watch-list bookkeeping and suspicion state for a single node."""

    def __init__(self, owner: int, params: MonitorParams, rng: random.Random):
        self.owner = owner
        self.params = params
        self.rng = rng
        self.pending: Dict[Tuple[int, int], WatchEntry] = {}
        self.window: Dict[int, SubjectCounters] = {}
        self.lifetime: Dict[int, SubjectCounters] = {}
        self.suspicion: Dict[int, float] = {}
        self.crossed_ever: Set[int] = set()
        self.surveillance: Set[int] = set()

    # -- watch creation ----------------------------------------------------

    def watch_sent(self, packet_id: int, digest: str, next_hop: int, final_dst: int,
                   now: float) -> Optional[WatchEntry]:
        """Watch a packet this node just handed to `next_hop` for forwarding."""
        if next_hop == final_dst:
            return None
        if self.params.p1 < 1.0 and self.rng.random() >= self.params.p1:
            return None
        return self._add(packet_id, digest, next_hop, now, ORIGIN_SENT)

    def watch_overheard(self, packet_id: int, digest: str, next_hop: int, final_dst: int,
                        now: float, next_hop_is_neighbor: bool) -> Optional[WatchEntry]:
        """Watch an overheard packet, but only when its next hop is our
        neighbor (otherwise we could never hear the forward) and the next hop
        is not the final destination."""
        if not next_hop_is_neighbor or next_hop == final_dst:
            return None
        if self.params.p2 < 1.0 and self.rng.random() >= self.params.p2:
            return None
        return self._add(packet_id, digest, next_hop, now, ORIGIN_OVERHEARD)

    def _add(self, packet_id: int, digest: str, forwarder: int, now: float,
             origin: str) -> WatchEntry:
        key = (packet_id, forwarder)
        if key in self.pending:
            return self.pending[key]
        entry = WatchEntry(packet_id, forwarder, digest,
                           now + self.params.forward_timeout_s, origin)
        self.pending[key] = entry
        return entry

    # -- watch resolution --------------------------------------------------

    def on_overheard_forward(self, packet_id: int, forwarder: int, digest: str,
                             now: float) -> Optional[str]:
        """Resolve a pending watch when the forwarder's transmission is heard.

        A matching digest confirms; a mismatch counts as a modification.
        Forwards heard after the deadline are left to expire as suspected
        drops (late forwarding is the timeout category, not exoneration).
        """
        entry = self.pending.get((packet_id, forwarder))
        if entry is None or now > entry.deadline:
            return None
        resolution = RESOLVE_CONFIRMED if digest == entry.expected_digest else RESOLVE_MODIFIED
        self._resolve((packet_id, forwarder), entry, resolution)
        return resolution

    def record_direct_violation(self, subject: int) -> None:
        """Count a protocol-level offence (e.g. a doctored certificate or a
        refused challenge) as one modified-forward observation."""
        self.window.setdefault(subject, SubjectCounters()).add(RESOLVE_MODIFIED)
        self.lifetime.setdefault(subject, SubjectCounters()).add(RESOLVE_MODIFIED)

    def expire(self, now: float) -> int:
        """Turn every pending watch past its deadline into a suspected drop."""
        expired = [k for k, e in self.pending.items() if now > e.deadline]
        for key in expired:
            self._resolve(key, self.pending[key], RESOLVE_DROP_SUSPECTED)
        return len(expired)

    def _resolve(self, key: Tuple[int, int], entry: WatchEntry, resolution: str) -> None:
        entry.resolution = resolution
        del self.pending[key]
        subject = entry.watched_forwarder
        self.window.setdefault(subject, SubjectCounters()).add(resolution)
        self.lifetime.setdefault(subject, SubjectCounters()).add(resolution)

    # -- per-window suspicion update ----------------------------------------

    def tick(self, now: float, p_congestion: float, p_collision: float) -> List[Tuple[int, float]]:
        """Close the stats window: expire stale watches, update suspicion for
        every watched subject, reset window counters (unless the subject is
        under surveillance), and return subjects whose suspicion now exceeds
        the trigger threshold."""
        self.expire(now)
        pm = estimate_p_malicious(p_congestion, p_collision, self.params.p_timeout)
        triggers: List[Tuple[int, float]] = []
        subjects = sorted(set(self.window) | set(self.suspicion))
        for subject in subjects:
            counters = self.window.get(subject)
            drops = (counters.dropped + counters.modified) if counters else 0
            value = update_suspicion(self.suspicion.get(subject, 0.0), drops, pm, self.params)
            self.suspicion[subject] = value
            if counters is not None and subject not in self.surveillance:
                counters.reset()
            if value > self.params.suspicion_threshold:
                self.crossed_ever.add(subject)
                triggers.append((subject, value))
        return triggers

    def suspicion_of(self, subject: int) -> float:
        return self.suspicion.get(subject, 0.0)

    def lifetime_drop_fraction(self, subject: int) -> Tuple[int, float]:
        """(adjudicated watches, fraction that were drops or modifications)."""
        c = self.lifetime.get(subject)
        if c is None or c.watched == 0:
            return 0, 0.0
        return c.watched, (c.dropped + c.modified) / c.watched
