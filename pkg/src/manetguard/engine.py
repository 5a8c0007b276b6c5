"""Discrete-event core: simulated clock, seeded event queue, random-waypoint
mobility with lazily sampled trajectories, and unit-disk connectivity.

All randomness flows through named substreams of a single master seed so that
a run is a pure function of its configuration.
"""

from __future__ import annotations

import heapq
import math
import random
from bisect import bisect_right
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np


def substream(seed: int, *tags) -> random.Random:
    """Independent RNG derived from the master seed and a tag path.

    Seeding with a string goes through SHA-512 inside random.Random, so the
    stream is stable across processes and interpreter invocations.
    """
    return random.Random(f"{seed}/" + "/".join(str(t) for t in tags))


class SchedulingError(ValueError):
    """Raised when an event is scheduled before the current clock."""


class EventHandle:
    """Cancellation token for a scheduled event."""

    __slots__ = ("_entry",)

    def __init__(self, entry: list):
        self._entry = entry

    def cancel(self) -> None:
        self._entry[3] = None

    @property
    def cancelled(self) -> bool:
        return self._entry[3] is None


class EventQueue:
    """Time-ordered event queue; ties break by insertion order (FIFO)."""

    def __init__(self):
        self.now = 0.0
        self._heap: List[list] = []
        self._seq = 0

    def schedule(self, at: float, callback: Callable[[], None]) -> EventHandle:
        if at < self.now:
            raise SchedulingError(f"cannot schedule at {at!r}; clock is {self.now!r}")
        entry = [at, self._seq, None, callback]
        self._seq += 1
        heapq.heappush(self._heap, entry)
        return EventHandle(entry)

    def schedule_after(self, delay: float, callback: Callable[[], None]) -> EventHandle:
        return self.schedule(self.now + delay, callback)

    def run_until(self, end: float) -> int:
        """Dispatch every pending event with time <= end; returns event count.

        The clock never exceeds `end`, and dequeued event times are
        nondecreasing by heap order.
        """
        dispatched = 0
        while self._heap and self._heap[0][0] <= end:
            at, _seq, _pad, callback = heapq.heappop(self._heap)
            if callback is None:
                continue
            self.now = at
            callback()
            dispatched += 1
        self.now = end
        return dispatched

    def pending(self) -> int:
        return sum(1 for e in self._heap if e[3] is not None)


@dataclass(frozen=True)
class World:
    """Rectangular simulation area with a shared radio range."""

    width: float
    height: float
    range_m: float


@dataclass
class MobilityState:
    """Snapshot of one node's random-waypoint state at a queried instant."""

    current: Tuple[float, float]
    waypoint: Tuple[float, float]
    speed: float
    pause_until: float


class Track:
    """Interface for a node's position as a function of simulated time."""

    def position_at(self, t: float) -> Tuple[float, float]:
        raise NotImplementedError


class StaticTrack(Track):
    def __init__(self, x: float, y: float):
        self._pos = (float(x), float(y))

    def position_at(self, t: float) -> Tuple[float, float]:
        return self._pos


class ScriptedTrack(Track):
    """Piecewise-linear motion through explicit (time, x, y) waypoints.

    Holds the first position before the first waypoint and the last position
    afterwards. Used by tests that need controlled partitions and healings.
    """

    def __init__(self, waypoints: Sequence[Tuple[float, float, float]]):
        if not waypoints:
            raise ValueError("scripted track needs at least one waypoint")
        pts = sorted((float(t), float(x), float(y)) for t, x, y in waypoints)
        self._times = [p[0] for p in pts]
        self._points = [(p[1], p[2]) for p in pts]

    def position_at(self, t: float) -> Tuple[float, float]:
        times = self._times
        if t <= times[0]:
            return self._points[0]
        if t >= times[-1]:
            return self._points[-1]
        i = bisect_right(times, t) - 1
        t0, t1 = times[i], times[i + 1]
        (x0, y0), (x1, y1) = self._points[i], self._points[i + 1]
        u = (t - t0) / (t1 - t0)
        return (x0 + u * (x1 - x0), y0 + u * (y1 - y0))


class RandomWaypointTrack(Track):
    """Random waypoint mobility, sampled lazily and deterministically.

    The node starts at a uniform position and immediately heads for a uniform
    waypoint at a uniform speed in (min_speed, max_speed]; on arrival it
    pauses for `pause_s`, then repeats. There is no initial pause. Legs are
    generated on demand from the track's own RNG, so positions at any time
    are independent of query order.
    """

    def __init__(
        self,
        world: World,
        rng: random.Random,
        pause_s: float,
        min_speed: float,
        max_speed: float,
        start: Optional[Tuple[float, float]] = None,
        first_waypoint: Optional[Tuple[float, float]] = None,
        first_speed: Optional[float] = None,
    ):
        if not (0 < min_speed <= max_speed):
            raise ValueError("need 0 < min_speed <= max_speed")
        self._world = world
        self._rng = rng
        self._pause = float(pause_s)
        self._min_speed = float(min_speed)
        self._max_speed = float(max_speed)
        if start is None:
            start = self._uniform_point()
        # Parallel arrays of segments: [t0, t1) with linear motion.
        self._t0: List[float] = []
        self._t1: List[float] = []
        self._x0: List[float] = []
        self._y0: List[float] = []
        self._vx: List[float] = []
        self._vy: List[float] = []
        if first_waypoint is None:
            first_waypoint = self._uniform_point()
        if first_speed is None:
            first_speed = self._uniform_speed()
        self._append_leg(0.0, start, first_waypoint, first_speed)

    def _uniform_point(self) -> Tuple[float, float]:
        return (
            self._rng.uniform(0.0, self._world.width),
            self._rng.uniform(0.0, self._world.height),
        )

    def _uniform_speed(self) -> float:
        return self._rng.uniform(self._min_speed, self._max_speed)

    def _append_leg(self, depart: float, frm, to, speed: float) -> None:
        dist = math.hypot(to[0] - frm[0], to[1] - frm[1])
        if dist > 0.0:
            dur = dist / speed
            self._t0.append(depart)
            self._t1.append(depart + dur)
            self._x0.append(frm[0])
            self._y0.append(frm[1])
            self._vx.append((to[0] - frm[0]) / dur)
            self._vy.append((to[1] - frm[1]) / dur)
            arrive = depart + dur
        else:
            arrive = depart
        if self._pause > 0.0:
            self._t0.append(arrive)
            self._t1.append(arrive + self._pause)
            self._x0.append(to[0])
            self._y0.append(to[1])
            self._vx.append(0.0)
            self._vy.append(0.0)
        self._last_point = to
        self._speed = speed

    def _extend_to(self, t: float) -> None:
        while self._t1[-1] < t:
            depart = self._t1[-1]
            nxt = self._uniform_point()
            self._append_leg(depart, self._last_point, nxt, self._uniform_speed())

    def position_at(self, t: float) -> Tuple[float, float]:
        self._extend_to(t)
        i = bisect_right(self._t0, t) - 1
        # Exact arrival times fall on a segment boundary; take the later one.
        if i + 1 < len(self._t0) and self._t0[i + 1] <= t:
            i += 1
        dt = t - self._t0[i]
        return (self._x0[i] + self._vx[i] * dt, self._y0[i] + self._vy[i] * dt)

    def state_at(self, t: float) -> MobilityState:
        self._extend_to(t)
        i = bisect_right(self._t0, t) - 1
        if i + 1 < len(self._t0) and self._t0[i + 1] <= t:
            i += 1
        moving = self._vx[i] != 0.0 or self._vy[i] != 0.0
        if moving:
            speed = math.hypot(self._vx[i], self._vy[i])
            waypoint = (
                self._x0[i] + self._vx[i] * (self._t1[i] - self._t0[i]),
                self._y0[i] + self._vy[i] * (self._t1[i] - self._t0[i]),
            )
            pause_until = self._t0[i]
        else:
            speed = 0.0
            waypoint = (self._x0[i], self._y0[i])
            pause_until = self._t1[i]
        return MobilityState(self.position_at(t), waypoint, speed, pause_until)


class ConnectivitySnapshot:
    """Adjacency of the unit-disk graph frozen at one instant.

    Neighbor lists are materialized lazily per node; adjacency tests read a
    boolean matrix directly.
    """

    def __init__(self, time: float, positions: np.ndarray, range_m: float):
        self.time = time
        self.positions = positions
        d2 = ((positions[:, None, :] - positions[None, :, :]) ** 2).sum(axis=2)
        adj = d2 <= range_m * range_m
        np.fill_diagonal(adj, False)
        self._adj = adj
        self._lists: Dict[int, List[int]] = {}

    @property
    def neighbor_lists(self) -> "_LazyNeighborLists":
        return _LazyNeighborLists(self)

    def neighbors(self, node: int) -> List[int]:
        lst = self._lists.get(node)
        if lst is None:
            lst = np.nonzero(self._adj[node])[0].tolist()
            self._lists[node] = lst
        return lst

    def are_neighbors(self, a: int, b: int) -> bool:
        return bool(self._adj[a, b])


class _LazyNeighborLists:
    """Sequence view over a snapshot's per-node neighbor lists."""

    __slots__ = ("_snap",)

    def __init__(self, snap: ConnectivitySnapshot):
        self._snap = snap

    def __getitem__(self, node: int) -> List[int]:
        return self._snap.neighbors(node)

    def __len__(self) -> int:
        return len(self._snap.positions)


class ConnectivityMap:
    """Unit-disk neighbor queries over a set of mobility tracks.

    `neighbors(node, t)` is exact at any instant. For the simulation's hot
    path, `snapshot_for(t)` quantizes time to epochs of `epoch_s` (link state
    refreshed at epoch boundaries, the way hello beacons would); epoch_s = 0
    disables quantization.
    """

    def __init__(self, tracks: Sequence[Track], world: World, epoch_s: float = 0.0):
        self.tracks = list(tracks)
        self.world = world
        self.epoch_s = float(epoch_s)
        self._cache_key: Optional[float] = None
        self._cache: Optional[ConnectivitySnapshot] = None

    def positions_at(self, t: float) -> np.ndarray:
        return np.array([trk.position_at(t) for trk in self.tracks], dtype=float)

    def snapshot_at(self, t: float) -> ConnectivitySnapshot:
        return ConnectivitySnapshot(t, self.positions_at(t), self.world.range_m)

    def snapshot_for(self, t: float) -> ConnectivitySnapshot:
        key = t if self.epoch_s <= 0.0 else math.floor(t / self.epoch_s) * self.epoch_s
        if self._cache_key != key:
            self._cache = self.snapshot_at(key)
            self._cache_key = key
        return self._cache

    def neighbors(self, node: int, t: float) -> List[int]:
        px, py = self.tracks[node].position_at(t)
        r2 = self.world.range_m ** 2
        out = []
        for j, trk in enumerate(self.tracks):
            if j == node:
                continue
            x, y = trk.position_at(t)
            if (x - px) ** 2 + (y - py) ** 2 <= r2:
                out.append(j)
        return out
