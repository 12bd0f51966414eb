"""
Tests for the ISL network module.
"""

import unittest

import numpy as np

from src.common.exceptions import OverheadMismatchError, TopologyError
from src.common.interfaces import SchedulingMask
from src.communication.network import (
    IslChannel, ConsensusMessage, IslNetwork, OverheadLedger, build_topology, check_overhead_layout,
    overhead_formula, overhead_report, pack_gains, packed_overhead, transmit_mask, unpack_gains
)


class TestTopology(unittest.TestCase):
    """Tests for ISL graph construction."""

    def test_standard_kinds(self):
        """Test neighbor sets of ring, star and mesh graphs."""
        ring = build_topology("ring", 5)
        self.assertEqual(ring.neighbors(0), (1, 4))
        self.assertEqual(ring.degrees().tolist(), [2] * 5)
        star = build_topology("star", 5)
        self.assertEqual(star.neighbors(0), (1, 2, 3, 4))
        self.assertEqual(star.neighbors(3), (0,))
        mesh = build_topology("mesh", 4)
        self.assertEqual(mesh.degrees().tolist(), [3] * 4)

    def test_two_satellite_ring(self):
        """Test that a ring of two satellites has a single edge."""
        ring = build_topology("ring", 2)
        self.assertEqual(ring.edges, frozenset({(0, 1)}))
        self.assertEqual(ring.degrees().tolist(), [1, 1])

    def test_custom(self):
        """Test a connected custom graph with unordered and duplicate edges."""
        topology = build_topology("custom", 4, [(1, 0), (0, 1), (2, 1), (3, 2)])
        self.assertEqual(topology.edges, frozenset({(0, 1), (1, 2), (2, 3)}))
        self.assertEqual(topology.neighbor_sets, ((1,), (0, 2), (1, 3), (2,)))

    def test_invalid_graphs(self):
        """Test every rejected configuration."""
        with self.assertRaises(TopologyError):
            build_topology("ring", 1)
        with self.assertRaises(TopologyError):
            build_topology("torus", 4)
        with self.assertRaises(TopologyError):
            build_topology("custom", 4, [(0, 1), (2, 3)])
        with self.assertRaises(TopologyError):
            build_topology("custom", 3, [(0, 0), (1, 2)])
        with self.assertRaises(TopologyError):
            build_topology("custom", 3, [(0, 1), (1, 3)])
        with self.assertRaises(TopologyError):
            build_topology("custom", 3, [])


class TestPacking(unittest.TestCase):
    """Tests for the non-zero payload packing."""

    def test_pack_unpack(self):
        """Test payload size and that scheduler zeros come back as zeros."""
        mask = SchedulingMask.from_served_sets([[0, 2], [1]], 3, 2)
        allowed = transmit_mask(mask.delta)
        rng = np.random.default_rng(0)
        g = np.where(allowed, rng.standard_normal((3, 3, 2)) + 1j * rng.standard_normal((3, 3, 2)), 0.0)
        payload = pack_gains(g, mask.delta)
        self.assertEqual(payload.size, 3 * 3)
        np.testing.assert_array_equal(unpack_gains(payload, mask.delta), g)


class TestIslNetwork(unittest.TestCase):
    """Tests for synchronous messaging and the overhead ledger."""

    def setUp(self):
        """Set up test fixtures."""
        self.topology = build_topology("star", 4)
        self.network = IslNetwork(self.topology)

    def test_channels_per_directed_edge(self):
        """Test that each undirected edge has two channels."""
        self.assertEqual(len(self.network.channels), 6)

    def test_messages_wait_for_commit(self):
        """Test the round barrier."""
        self.network.send(1, 0, np.ones(3, dtype=complex))
        self.assertEqual(self.network.receive(0), {})
        counts = self.network.commit()
        self.assertEqual(counts.tolist(), [0, 3, 0, 0])
        inbox = self.network.receive(0)
        self.assertEqual(list(inbox), [1])
        np.testing.assert_array_equal(inbox[1], np.ones(3))
        self.assertEqual(self.network.receive(0), {})

    def test_latest_message_wins(self):
        """Test that a channel delivers only the newest payload."""
        channel = IslChannel(0, 1)
        channel.send(ConsensusMessage(0, 1, 0, np.zeros(2)))
        channel.send(ConsensusMessage(0, 1, 0, np.ones(2)))
        self.assertEqual(channel.commit(), 4)
        np.testing.assert_array_equal(channel.receive().payload, np.ones(2))
        self.assertIsNone(channel.receive())

    def test_send_to_non_neighbor(self):
        """Test that leaves cannot talk to each other in a star."""
        with self.assertRaises(TopologyError):
            self.network.send(1, 2, np.ones(1))

    def test_broadcast_and_ledger(self):
        """Test broadcast counts and the counted/uncounted commit."""
        self.network.broadcast(0, np.ones(5))
        self.network.commit(counted=False)
        self.assertEqual(self.network.ledger.rounds, 0)
        for s in range(4):
            self.network.broadcast(s, np.ones(5))
        counts = self.network.commit()
        self.assertEqual(counts.tolist(), [15, 5, 5, 5])
        self.assertEqual(self.network.ledger.cumulative.tolist(), [15, 5, 5, 5])
        self.assertEqual(self.network.round_index, 2)


class TestOverheadReport(unittest.TestCase):
    """Tests for the overhead formula and report."""

    def setUp(self):
        """Set up test fixtures."""
        self.mask = SchedulingMask.from_served_sets([[0, 1, 2, 3, 4, 5, 6, 7]] * 5, 32, 8)

    def test_reference_values(self):
        """Test the closed form at S=5, U=32, eight users per satellite."""
        self.assertEqual(overhead_formula(build_topology("ring", 5), self.mask).tolist(), [2560] * 5)
        self.assertEqual(overhead_formula(build_topology("mesh", 5), self.mask).tolist(), [5120] * 5)
        self.assertEqual(overhead_formula(build_topology("star", 5), self.mask).tolist(),
                         [5120, 1280, 1280, 1280, 1280])

    def test_report_rows(self):
        """Test the report table after two matching rounds."""
        topology = build_topology("ring", 5)
        ledger = OverheadLedger(5)
        ledger.record(overhead_formula(topology, self.mask))
        ledger.record(overhead_formula(topology, self.mask))
        rows = overhead_report(ledger, topology, self.mask)
        self.assertEqual(len(rows), 5)
        self.assertEqual(rows[0], {"sat": 0, "degree": 2, "served": 8, "per_round_formula": 2560,
                                   "per_round_counted": 2560, "cumulative": 5120, "rounds": 2})

    def test_mismatch_raises(self):
        """Test that a wrong count is reported."""
        topology = build_topology("mesh", 5)
        ledger = OverheadLedger(5)
        ledger.record(np.full(5, 5119))
        with self.assertRaises(OverheadMismatchError):
            overhead_report(ledger, topology, self.mask)

    def test_unequal_served_sets_raise(self):
        """Test that unequal served-set sizes cannot match the closed form."""
        mask = SchedulingMask.from_served_sets([[0, 1], [2], []], 3, 2)
        topology = build_topology("ring", 3)
        self.assertEqual(overhead_formula(topology, mask).tolist(), [36, 18, 0])
        self.assertEqual(packed_overhead(topology, mask).tolist(), [18, 18, 18])
        with self.assertRaises(OverheadMismatchError):
            check_overhead_layout(topology, mask)
        ledger = OverheadLedger(3)
        ledger.record(packed_overhead(topology, mask))
        with self.assertRaises(OverheadMismatchError):
            overhead_report(ledger, topology, mask)

    def test_equal_sizes_match_closed_form(self):
        """Test that different sets of equal size pack exactly |G_s| |U_s| S U scalars."""
        mask = SchedulingMask.from_served_sets([[0, 1], [1, 2], [0, 2]], 3, 2)
        topology = build_topology("star", 3)
        np.testing.assert_array_equal(check_overhead_layout(topology, mask), [36, 18, 18])
        g = np.ones((3, 3, 3), dtype=complex)
        self.assertEqual(pack_gains(g, mask.delta).size * topology.degrees()[0], 36)


if __name__ == "__main__":
    unittest.main()
