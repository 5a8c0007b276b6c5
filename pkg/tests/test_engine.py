import math

import pytest

from manetguard.engine import (
    ConnectivityMap,
    EventQueue,
    RandomWaypointTrack,
    SchedulingError,
    ScriptedTrack,
    StaticTrack,
    World,
    substream,
)


class TestEventQueue:
    def test_fires_at_scheduled_time(self):
        q = EventQueue()
        fired = []
        q.schedule(5.0, lambda: fired.append(q.now))
        q.run_until(3.0)
        assert fired == []
        q.run_until(10.0)
        assert fired == [5.0]

    def test_ties_fire_in_insertion_order(self):
        q = EventQueue()
        order = []
        q.schedule(2.0, lambda: order.append("a"))
        q.schedule(2.0, lambda: order.append("b"))
        q.schedule(1.0, lambda: order.append("first"))
        q.run_until(5.0)
        assert order == ["first", "a", "b"]

    def test_scheduling_in_the_past_rejected(self):
        q = EventQueue()
        q.run_until(3.0)
        with pytest.raises(SchedulingError):
            q.schedule(2.0, lambda: None)

    def test_cancellation(self):
        q = EventQueue()
        fired = []
        handle = q.schedule(1.0, lambda: fired.append(1))
        handle.cancel()
        q.run_until(2.0)
        assert fired == []

    def test_clock_monotone_across_dequeues(self):
        q = EventQueue()
        seen = []
        rng = substream(7, "times")
        for _ in range(200):
            q.schedule(rng.uniform(0, 100), lambda: seen.append(q.now))
        q.run_until(100.0)
        assert seen == sorted(seen)
        assert q.now == 100.0

    def test_events_scheduled_during_run(self):
        q = EventQueue()
        fired = []

        def chain(n):
            fired.append(q.now)
            if n > 0:
                q.schedule_after(1.0, lambda: chain(n - 1))

        q.schedule(0.0, lambda: chain(3))
        q.run_until(10.0)
        assert fired == [0.0, 1.0, 2.0, 3.0]


WORLD = World(1000.0, 1000.0, 50.0)


class TestRandomWaypoint:
    def test_reaches_waypoint_at_stated_speed(self):
        # 8 m/s toward a waypoint 8 m away: after 1 s the node has arrived
        # and the pause has begun.
        track = RandomWaypointTrack(
            WORLD, substream(1, "m"), pause_s=5.0, min_speed=0.1, max_speed=8.0,
            start=(100.0, 100.0), first_waypoint=(108.0, 100.0), first_speed=8.0,
        )
        assert track.position_at(0.5) == (104.0, 100.0)
        assert track.position_at(1.0) == (108.0, 100.0)
        state = track.state_at(1.0)
        assert state.speed == 0.0
        assert state.pause_until == 6.0

    def test_pause_duration(self):
        # Arrival at t=10 with a 5 s pause: stationary until t=15.
        track = RandomWaypointTrack(
            WORLD, substream(2, "m"), pause_s=5.0, min_speed=0.1, max_speed=8.0,
            start=(0.0, 0.0), first_waypoint=(0.0, 40.0), first_speed=4.0,
        )
        arrived = track.position_at(10.0)
        assert arrived == (0.0, 40.0)
        assert track.position_at(14.999) == arrived
        moved = track.position_at(16.0)
        assert moved != arrived

    def test_zero_distance_leg_enters_pause(self):
        track = RandomWaypointTrack(
            WORLD, substream(3, "m"), pause_s=2.0, min_speed=0.1, max_speed=8.0,
            start=(5.0, 5.0), first_waypoint=(5.0, 5.0), first_speed=3.0,
        )
        assert track.position_at(0.0) == (5.0, 5.0)
        assert track.position_at(1.5) == (5.0, 5.0)

    def test_displacement_matches_speed(self):
        # Between waypoint changes, displacement per unit time equals the
        # chosen speed to within 1e-9 m.
        track = RandomWaypointTrack(
            WORLD, substream(4, "m"), pause_s=1.0, min_speed=0.5, max_speed=8.0
        )
        t = 0.0
        dt = 0.05
        while t < 200.0:
            s0 = track.state_at(t)
            s1 = track.state_at(t + dt)
            if s0.speed > 0 and s1.speed > 0 and s0.waypoint == s1.waypoint:
                dist = math.dist(s0.current, s1.current)
                assert abs(dist - s0.speed * dt) < 1e-9
            t += dt

    def test_positions_stay_inside_world(self):
        track = RandomWaypointTrack(
            WORLD, substream(5, "m"), pause_s=0.0, min_speed=0.1, max_speed=8.0
        )
        for i in range(2000):
            x, y = track.position_at(i * 0.5)
            assert 0.0 <= x <= WORLD.width
            assert 0.0 <= y <= WORLD.height

    def test_query_order_independent(self):
        def build():
            return RandomWaypointTrack(
                WORLD, substream(6, "m"), pause_s=2.0, min_speed=0.1, max_speed=8.0
            )

        forward = build()
        ahead = [forward.position_at(t) for t in (1.0, 50.0, 200.0, 999.0)]
        backward = build()
        behind = [backward.position_at(t) for t in (999.0, 200.0, 50.0, 1.0)]
        assert ahead == list(reversed(behind))

    def test_speed_bounds_respected(self):
        track = RandomWaypointTrack(
            WORLD, substream(7, "m"), pause_s=0.5, min_speed=0.1, max_speed=8.0
        )
        track.position_at(2000.0)
        speeds = [
            math.hypot(vx, vy)
            for vx, vy in zip(track._vx, track._vy)
            if vx != 0.0 or vy != 0.0
        ]
        assert speeds, "expected at least one moving leg"
        assert all(0.1 <= s <= 8.0 for s in speeds)


class TestConnectivity:
    def _map(self, positions, range_m=50.0, epoch=0.0):
        tracks = [StaticTrack(x, y) for x, y in positions]
        return ConnectivityMap(tracks, World(1000.0, 1000.0, range_m), epoch)

    def test_boundary_inclusive(self):
        cm = self._map([(0.0, 0.0), (50.0, 0.0)])
        assert cm.neighbors(0, 0.0) == [1]
        assert cm.neighbors(1, 0.0) == [0]

    def test_beyond_boundary_excluded(self):
        cm = self._map([(0.0, 0.0), (50.1, 0.0)])
        assert cm.neighbors(0, 0.0) == []

    def test_isolated_node(self):
        cm = self._map([(0.0, 0.0), (500.0, 500.0), (500.0, 540.0)])
        assert cm.neighbors(0, 0.0) == []
        assert cm.neighbors(1, 0.0) == [2]

    def test_symmetry_under_mobility(self):
        world = World(1000.0, 1000.0, 80.0)
        tracks = [
            RandomWaypointTrack(world, substream(11, "m", i), 1.0, 0.1, 8.0)
            for i in range(12)
        ]
        cm = ConnectivityMap(tracks, world)
        for t in (0.0, 13.7, 99.3, 432.1):
            for a in range(12):
                for b in cm.neighbors(a, t):
                    assert a in cm.neighbors(b, t)
                    assert b != a

    def test_snapshot_matches_exact_query(self):
        world = World(1000.0, 1000.0, 120.0)
        tracks = [
            RandomWaypointTrack(world, substream(12, "m", i), 1.0, 0.1, 8.0)
            for i in range(10)
        ]
        cm = ConnectivityMap(tracks, world)
        snap = cm.snapshot_at(77.7)
        for a in range(10):
            assert snap.neighbors(a) == cm.neighbors(a, 77.7)

    def test_epoch_quantization(self):
        cm = self._map([(0.0, 0.0), (10.0, 0.0)], epoch=1.0)
        s1 = cm.snapshot_for(3.2)
        s2 = cm.snapshot_for(3.9)
        assert s1 is s2
        assert s1.time == 3.0

    def test_scripted_track_interpolation(self):
        track = ScriptedTrack([(0.0, 0.0, 0.0), (10.0, 100.0, 0.0)])
        assert track.position_at(-5.0) == (0.0, 0.0)
        assert track.position_at(5.0) == (50.0, 0.0)
        assert track.position_at(20.0) == (100.0, 0.0)


def test_substream_stability():
    a = substream(42, "mobility", 3)
    b = substream(42, "mobility", 3)
    c = substream(42, "mobility", 4)
    seq_a = [a.random() for _ in range(5)]
    seq_b = [b.random() for _ in range(5)]
    seq_c = [c.random() for _ in range(5)]
    assert seq_a == seq_b
    assert seq_a != seq_c
