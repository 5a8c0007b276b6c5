"""Packet-level network model: CBR flows, hop-count source routing over the
connectivity graph, a simplified MAC (reservation windows, receiver-side
collisions, rate-limited forwarding with finite queues), promiscuous
overhearing, and adversarial forwarding behavior.
"""

from __future__ import annotations

import hashlib
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, List, Optional, Sequence, Set, Tuple

OUTCOME_DELIVERED = "delivered"
OUTCOME_COLLIDED = "collided"
OUTCOME_QUEUED_DROP = "queued_drop"

ACTION_FORWARDED = "forwarded"
ACTION_DROPPED_MALICIOUS = "dropped_malicious"
ACTION_MODIFIED = "modified"
ACTION_QUEUED_DROP = "queued_drop"

# Terminal packet states tracked for conservation accounting.
STATE_DELIVERED = "delivered"
STATE_DROPPED_MALICIOUS = "dropped_malicious"
STATE_DROPPED_CONGESTION = "dropped_congestion"
STATE_LOST_COLLISION = "lost_collision"
STATE_MODIFY_DETECTED = "modify_detected"
STATE_DROPPED_NOROUTE = "dropped_noroute"
STATE_IN_FLIGHT = "in_flight"


@dataclass
class Packet:
    packet_id: int
    flow_id: int
    src: int
    dst: int
    route: List[int]
    payload_bytes: int
    origin_digest: str
    digest: str
    created_at: float

    @staticmethod
    def content_digest(packet_id: int, src: int, dst: int, payload_bytes: int) -> str:
        seed = f"payload/{packet_id}/{src}/{dst}/{payload_bytes}".encode()
        return hashlib.sha256(seed).hexdigest()

    def tampered_digest(self, modifier: int) -> str:
        return hashlib.sha256(f"{self.digest}/tampered-by/{modifier}".encode()).hexdigest()


@dataclass
class Flow:
    flow_id: int
    src: int
    dst: int
    rate_pps: float
    start: float
    stop: float
    payload_bytes: int

    def tick_times(self) -> int:
        """Number of origination ticks: floor(rate * active_time) + 1."""
        import math

        return int(math.floor(self.rate_pps * (self.stop - self.start))) + 1


@dataclass
class AdversaryPolicy:
    node: int
    drop_probability: float = 1.0
    modify_probability: float = 0.0
    challenge_response: str = "silent"   # silent | honest
    slander_targets: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.drop_probability + self.modify_probability > 1.0 + 1e-12:
            raise ValueError("drop_probability + modify_probability must be <= 1")


def decide_forward_action(policy: Optional[AdversaryPolicy], rng: random.Random) -> str:
    """What a node does with a packet it was asked to forward."""
    if policy is None or (policy.drop_probability == 0.0 and policy.modify_probability == 0.0):
        return ACTION_FORWARDED
    u = rng.random()
    if u < policy.drop_probability:
        return ACTION_DROPPED_MALICIOUS
    if u < policy.drop_probability + policy.modify_probability:
        return ACTION_MODIFIED
    return ACTION_FORWARDED


@dataclass
class TransmissionRecord:
    sender: int
    receiver: int
    packet_id: int
    window: Tuple[float, float]
    outcome: str = OUTCOME_DELIVERED


def shortest_path(neighbor_lists: Sequence[Sequence[int]], src: int, dst: int,
                  excluded: Optional[Set[int]] = None) -> Optional[List[int]]:
    """Hop-count shortest path by BFS, or None when disconnected.

    Neighbors are explored in ascending id order, so equal-length paths break
    ties toward the smallest next hop. `excluded` nodes (a requester's
    blacklist) are skipped as relays and as destination.
    """
    if excluded and (src in excluded or dst in excluded):
        return None
    if src == dst:
        return [src]
    parent: Dict[int, int] = {src: -1}
    frontier = [src]
    while frontier:
        nxt: List[int] = []
        for u in frontier:
            for v in neighbor_lists[u]:
                if v in parent or (excluded and v in excluded):
                    continue
                parent[v] = u
                if v == dst:
                    path = [v]
                    while path[-1] != src:
                        path.append(parent[path[-1]])
                    path.reverse()
                    return path
                nxt.append(v)
        frontier = nxt
    return None


class SlidingCounter:
    """Timestamps of events, queryable as a count over a trailing window."""

    __slots__ = ("_times",)

    def __init__(self):
        self._times: Deque[float] = deque()

    def add(self, t: float) -> None:
        self._times.append(t)

    def count_since(self, cutoff: float) -> int:
        times = self._times
        while times and times[0] < cutoff:
            times.popleft()
        return len(times)


class RtsLog:
    """Reservation windows heard at one node, for the collision estimate."""

    __slots__ = ("_windows",)

    def __init__(self):
        self._windows: Deque[Tuple[float, float]] = deque()

    def add(self, start: float, end: float) -> None:
        self._windows.append((start, end))

    def overlap_fraction(self, cutoff: float) -> float:
        """Fraction of windows heard since `cutoff` that overlapped another.

        Windows arrive sorted by start time, so an entry is involved in an
        overlap iff it starts before the running max end of earlier entries
        or ends after its successor's start.
        """
        windows = self._windows
        while windows and windows[0][0] < cutoff:
            windows.popleft()
        n = len(windows)
        if n == 0:
            return 0.0
        involved = 0
        max_end = float("-inf")
        items = list(windows)
        for i, (start, end) in enumerate(items):
            hit = start < max_end
            if not hit and i + 1 < n and items[i + 1][0] < end:
                hit = True
            if hit:
                involved += 1
            if end > max_end:
                max_end = end
        return involved / n


class NodeNetState:
    """Data-plane state owned by one node: forward queue and local statistics."""

    def __init__(self, node: int, queue_capacity: int):
        self.node = node
        self.queue_capacity = queue_capacity
        self.queue: Deque[Packet] = deque()
        self.server_busy = False
        self.enqueue_attempts = SlidingCounter()
        self.queue_drops = SlidingCounter()
        self.rts_log = RtsLog()

    def enqueue(self, packet: Packet, now: float) -> bool:
        """Admit a packet for transmission; False means congestion drop."""
        self.enqueue_attempts.add(now)
        if self.queue_capacity is not None and len(self.queue) >= self.queue_capacity:
            self.queue_drops.add(now)
            return False
        self.queue.append(packet)
        return True

    def local_congestion(self, now: float, window: float) -> float:
        """Queue-overflow fraction of enqueue attempts over the window."""
        attempts = self.enqueue_attempts.count_since(now - window)
        if attempts == 0:
            return 0.0
        return self.queue_drops.count_since(now - window) / attempts

    def rts_overlap_fraction(self, now: float, window: float) -> float:
        return self.rts_log.overlap_fraction(now - window)
