import math

import pytest

from conftest import chain_positions, static_config
from manetguard.engine import substream
from manetguard.netsim import (
    ACTION_DROPPED_MALICIOUS,
    ACTION_FORWARDED,
    ACTION_MODIFIED,
    AdversaryPolicy,
    NodeNetState,
    Packet,
    RtsLog,
    decide_forward_action,
    shortest_path,
)
from manetguard.simulation import Simulation
from manetguard.trace import TraceRecorder


class TestRouting:
    def test_unique_path_on_chain(self):
        adjacency = [[1], [0, 2], [1, 3], [2]]
        assert shortest_path(adjacency, 0, 3) == [0, 1, 2, 3]

    def test_source_equals_destination(self):
        adjacency = [[1], [0]]
        assert shortest_path(adjacency, 0, 0) == [0]

    def test_equal_length_paths_prefer_smaller_relay(self):
        # 0 -> {3, 7} -> 9; the route through 3 wins.
        adjacency = {0: [3, 7], 3: [0, 9], 7: [0, 9], 9: [3, 7]}
        table = [adjacency.get(i, []) for i in range(10)]
        assert shortest_path(table, 0, 9) == [0, 3, 9]

    def test_disconnected_returns_none(self):
        adjacency = [[1], [0], [3], [2]]
        assert shortest_path(adjacency, 0, 3) is None

    def test_excluded_nodes_are_avoided(self):
        adjacency = [[1, 2], [0, 3], [0, 3], [1, 2]]
        assert shortest_path(adjacency, 0, 3) == [0, 1, 3]
        assert shortest_path(adjacency, 0, 3, excluded={1}) == [0, 2, 3]
        assert shortest_path(adjacency, 0, 3, excluded={1, 2}) is None

    def test_blacklisted_destination_unreachable(self):
        adjacency = [[1], [0]]
        assert shortest_path(adjacency, 0, 1, excluded={1}) is None


class TestForwardDecision:
    def test_honest_node_forwards(self):
        assert decide_forward_action(None, substream(1, "a")) == ACTION_FORWARDED

    def test_certain_drop(self):
        policy = AdversaryPolicy(3, drop_probability=1.0)
        rng = substream(1, "b")
        assert all(
            decide_forward_action(policy, rng) == ACTION_DROPPED_MALICIOUS
            for _ in range(20)
        )

    def test_certain_modify(self):
        policy = AdversaryPolicy(3, drop_probability=0.0, modify_probability=1.0)
        rng = substream(1, "c")
        assert decide_forward_action(policy, rng) == ACTION_MODIFIED

    def test_mixed_rates_roughly_split(self):
        policy = AdversaryPolicy(3, drop_probability=0.5, modify_probability=0.25)
        rng = substream(1, "d")
        outcomes = [decide_forward_action(policy, rng) for _ in range(4000)]
        drops = outcomes.count(ACTION_DROPPED_MALICIOUS) / len(outcomes)
        mods = outcomes.count(ACTION_MODIFIED) / len(outcomes)
        assert abs(drops - 0.5) < 0.05 and abs(mods - 0.25) < 0.04

    def test_probabilities_must_fit(self):
        with pytest.raises(ValueError):
            AdversaryPolicy(3, drop_probability=0.8, modify_probability=0.4)


def make_packet(pid=1):
    digest = Packet.content_digest(pid, 0, 3, 512)
    return Packet(pid, 0, 0, 3, [0, 1, 2, 3], 512, digest, digest, 0.0)


class TestForwardQueue:
    def test_overflow_drops_arriving_packet(self):
        state = NodeNetState(1, queue_capacity=2)
        assert state.enqueue(make_packet(1), now=0.0)
        assert state.enqueue(make_packet(2), now=0.1)
        assert not state.enqueue(make_packet(3), now=0.2)
        assert [p.packet_id for p in state.queue] == [1, 2]

    def test_congestion_ratio(self):
        state = NodeNetState(1, queue_capacity=8)
        for i in range(8):
            state.enqueue(make_packet(i), now=float(i))
        state.enqueue(make_packet(8), now=8.0)
        state.enqueue(make_packet(9), now=8.5)
        assert state.local_congestion(now=9.0, window=10.0) == pytest.approx(0.2)

    def test_no_attempts_means_no_congestion(self):
        state = NodeNetState(1, queue_capacity=8)
        assert state.local_congestion(now=100.0, window=10.0) == 0.0

    def test_unlimited_capacity(self):
        state = NodeNetState(1, queue_capacity=None)
        for i in range(500):
            assert state.enqueue(make_packet(i), now=0.0)
        assert state.local_congestion(1.0, 10.0) == 0.0

    def test_window_slides(self):
        state = NodeNetState(1, queue_capacity=1)
        state.enqueue(make_packet(1), now=0.0)
        state.enqueue(make_packet(2), now=0.1)  # dropped
        assert state.local_congestion(now=5.0, window=10.0) == pytest.approx(0.5)
        assert state.local_congestion(now=50.0, window=10.0) == 0.0


class TestRtsOverlap:
    def test_empty_window(self):
        log = RtsLog()
        assert log.overlap_fraction(cutoff=0.0) == 0.0

    def test_one_overlapping_pair_among_four(self):
        log = RtsLog()
        log.add(0.0, 1.0)
        log.add(0.5, 1.5)   # overlaps the first
        log.add(3.0, 4.0)
        log.add(5.0, 6.0)
        assert log.overlap_fraction(cutoff=0.0) == pytest.approx(0.5)

    def test_all_mutually_overlapping(self):
        log = RtsLog()
        for start in (0.0, 0.1, 0.2, 0.3):
            log.add(start, start + 5.0)
        assert log.overlap_fraction(cutoff=0.0) == 1.0

    def test_touching_windows_do_not_overlap(self):
        log = RtsLog()
        log.add(0.0, 1.0)
        log.add(1.0, 2.0)
        assert log.overlap_fraction(cutoff=0.0) == 0.0

    def test_chain_of_overlaps_marks_inner_members(self):
        log = RtsLog()
        log.add(0.0, 8.0)
        log.add(8.5, 10.0)   # overlaps only the third
        log.add(9.0, 9.5)
        assert log.overlap_fraction(cutoff=0.0) == pytest.approx(2 / 3)

    def test_pruning_respects_cutoff(self):
        log = RtsLog()
        log.add(0.0, 1.0)
        log.add(0.5, 1.5)
        log.add(100.0, 101.0)
        assert log.overlap_fraction(cutoff=50.0) == 0.0


# ---------------------------------------------------------------------------
# Pipeline-level behavior on controlled topologies
# ---------------------------------------------------------------------------


IDEAL = dict(
    network__queue_capacity=None,
    network__p_col_given_overlap=0.0,
    network__forward_service_rate_pps=50.0,
)


class TestPipeline:
    def test_cbr_origination_count_exact(self):
        # rate r active for T seconds originates floor(r*T) + 1 packets.
        cfg = static_config(
            chain_positions(3), flows=[[0, 2, 5.0, 15.0]], duration=30.0, **IDEAL
        )
        cfg.traffic.rate_pps = 2.0
        metrics = Simulation(cfg).run()
        assert metrics.originated == math.floor(2.0 * 10.0) + 1

    def test_honest_transparency(self):
        # No adversaries, unlimited queues, no collisions: every routed
        # packet is delivered with its content digest unchanged.
        cfg = static_config(
            chain_positions(5), flows=[[0, 4, 1.0, 40.0], [4, 0, 1.5, 40.0]],
            duration=60.0, **IDEAL
        )
        metrics = Simulation(cfg).run()
        assert metrics.originated > 0
        assert metrics.delivered == metrics.originated
        assert metrics.modify_detected == 0
        assert metrics.in_flight == 0

    def test_overhear_completeness(self):
        # In the same idealized setting every neighbor of a transmitting
        # node overhears 100% of its transmissions.
        cfg = static_config(
            chain_positions(4), flows=[[0, 3, 1.0, 20.0]], duration=30.0, **IDEAL
        )
        trace = TraceRecorder(capture=True)
        sim = Simulation(cfg, trace=trace)
        snapshot = sim.connectivity.snapshot_at(0.0)
        metrics = sim.run()
        assert metrics.delivered == metrics.originated
        tx_by_sender = {}
        overhears = {}
        for rec in trace.records:
            if rec["event"] == "tx":
                key = (rec["sender"], rec["packet"])
                tx_by_sender[key] = rec["receiver"]
            elif rec["event"] == "overhear":
                overhears.setdefault((rec["sender"], rec["packet"]), set()).add(rec["listener"])
        assert tx_by_sender
        for (sender, packet), receiver in tx_by_sender.items():
            expected = set(snapshot.neighbors(sender)) - {receiver}
            assert overhears.get((sender, packet), set()) == expected

    def test_hidden_terminal_collision(self):
        # Two transmitters out of carrier-sense range of each other, same
        # receiver, overlapping windows, p_col = 1: both transmissions die.
        positions = [[0.0, 0.0], [100.0, 0.0], [200.0, 0.0]]
        cfg = static_config(
            positions,
            flows=[[0, 1, 1.0, 10.0], [2, 1, 1.0, 10.0]],
            duration=20.0,
            range_m=120.0,
            network__queue_capacity=None,
            network__forward_service_rate_pps=50.0,
            network__p_col_given_overlap=1.0,
        )
        # identical flow phases -> identical service times -> overlap at node 1
        metrics = Simulation(cfg).run()
        assert metrics.lost_collision == metrics.originated
        assert metrics.delivered == 0

    def test_certain_dropper_kills_all_transit(self):
        # naive variant: no detection protocol reacts, pure data plane
        cfg = static_config(
            chain_positions(5), flows=[[0, 4, 1.0, 40.0]], duration=60.0,
            adversary_nodes=[2], detector_variant="naive_watchdog", **IDEAL
        )
        cfg.adversaries.drop_probability = 1.0
        metrics = Simulation(cfg).run()
        assert metrics.delivered == 0
        assert metrics.dropped_malicious == metrics.originated

    def test_modifier_reaches_destination_but_is_detected(self):
        cfg = static_config(
            chain_positions(5), flows=[[0, 4, 1.0, 40.0]], duration=60.0,
            adversary_nodes=[2], detector_variant="naive_watchdog", **IDEAL
        )
        cfg.adversaries.drop_probability = 0.0
        cfg.adversaries.modify_probability = 1.0
        metrics = Simulation(cfg).run()
        assert metrics.delivered == 0
        assert metrics.modify_detected == metrics.originated

    def test_proposed_variant_reroutes_around_condemned_dropper(self):
        # Same chain under the full protocol: the dropper is condemned and
        # the now-blacklisted relay partitions the chain, so late packets die
        # as routeless rather than maliciously dropped.
        cfg = static_config(
            chain_positions(5), flows=[[0, 4, 1.0, 40.0]], duration=60.0,
            adversary_nodes=[2], **IDEAL
        )
        metrics = Simulation(cfg).run()
        assert metrics.condemned == [2]
        assert metrics.dropped_noroute > 0
        assert metrics.dropped_malicious + metrics.dropped_noroute == metrics.originated

    def test_conservation_under_stress(self):
        from manetguard.scenario import table1_connected_preset

        cfg = table1_connected_preset(seed=5)
        cfg.world.duration_s = 120.0
        metrics = Simulation(cfg).run()
        accounted = (
            metrics.delivered
            + metrics.dropped_malicious
            + metrics.dropped_congestion
            + metrics.lost_collision
            + metrics.modify_detected
            + metrics.dropped_noroute
            + metrics.in_flight
        )
        assert accounted == metrics.originated
        assert metrics.in_flight >= 0

    def test_congestion_charged_to_queue_not_malice(self):
        # A relay carrying three flows at a 1.2 pkt/s service cap sheds load
        # as queued drops; the network layer never calls that malice.
        star = [[0.0, 0.0], [0.0, 160.0], [0.0, -160.0], [80.0, 0.0], [160.0, 0.0]]
        cfg = static_config(
            star,
            flows=[[0, 4, 1.0, 50.0], [1, 4, 1.0, 50.0], [2, 4, 1.0, 50.0]],
            duration=80.0,
            range_m=170.0,
            network__queue_capacity=5,
            network__forward_service_rate_pps=1.2,
            network__p_col_given_overlap=0.0,
        )
        metrics = Simulation(cfg).run()
        assert metrics.dropped_congestion > 0
        assert metrics.dropped_malicious == 0
