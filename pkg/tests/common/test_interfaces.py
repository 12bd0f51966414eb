"""
Tests for the shared data structures.
"""

import unittest

import numpy as np

from src.channel.channel_model import build_T
from src.common.exceptions import ShapeError
from src.common.interfaces import BeamformerSet, ConsensusState, SchedulingMask
from src.metrics.rates import compute_beam_gains, rate_lower_bound
from src.scheduling.baselines import mrt_beamformers
from src.simulation.validation import random_csi, random_mask


class TestStatisticalCsi(unittest.TestCase):
    """Tests for StatisticalCsi."""

    def setUp(self):
        """Set up test fixtures."""
        self.csi = random_csi(np.random.default_rng(0), 3, 4, 2)

    def test_dimensions(self):
        """Test the dimension properties."""
        self.assertEqual((self.csi.n_sats, self.csi.n_uts, self.csi.n_antennas), (3, 4, 2))

    def test_correlation_matches_build_T(self):
        """Test the stacked correlation against the per-user builder."""
        for u in range(4):
            np.testing.assert_allclose(self.csi.correlation[u], build_T(self.csi, u))

    def test_shape_mismatch(self):
        """Test that inconsistent shapes are rejected."""
        with self.assertRaises(ShapeError):
            type(self.csi)(gamma=self.csi.gamma, kappa=self.csi.kappa[:2], alpha_bar=self.csi.alpha_bar,
                           beta=self.csi.beta, b=self.csi.b, noise_power=1.0)
        with self.assertRaises(ShapeError):
            type(self.csi)(gamma=self.csi.gamma, kappa=self.csi.kappa, alpha_bar=self.csi.alpha_bar,
                           beta=self.csi.beta, b=self.csi.b, noise_power=0.0)

    def test_subset(self):
        """Test restriction to some satellites and users."""
        sub = self.csi.subset([2], [1, 3])
        self.assertEqual(sub.b.shape, (1, 2, 2))
        self.assertEqual(sub.gamma[0, 1], self.csi.gamma[2, 3])

    def test_normalized_keeps_rates(self):
        """Test that the normalized description gives the same rates with rescaled gains."""
        rng = np.random.default_rng(4)
        mask = random_mask(rng, 3, 4, 2)
        W = mrt_beamformers(self.csi, mask, np.ones(3))
        norm = self.csi.normalized()
        g = compute_beam_gains(self.csi, mask, W)
        g_norm = compute_beam_gains(norm, mask, W)
        np.testing.assert_allclose(g_norm, g * self.csi.gain_scale().T[:, None, :], rtol=1e-12)
        np.testing.assert_allclose(rate_lower_bound(g_norm, norm), rate_lower_bound(g, self.csi), rtol=1e-10)
        self.assertEqual(norm.noise_power, 1.0)
        np.testing.assert_allclose(norm.alpha_bar ** 2 + norm.beta, 1.0)


class TestSchedulingMask(unittest.TestCase):
    """Tests for SchedulingMask."""

    def test_from_served_sets(self):
        """Test building a mask from served lists."""
        mask = SchedulingMask.from_served_sets([[0, 2], [1]], 3, 2)
        self.assertEqual(mask.served_sets, ((0, 2), (1,)))
        self.assertEqual(mask.served_count().tolist(), [2, 1])
        self.assertEqual(mask.delta.dtype, np.int8)

    def test_invalid_masks(self):
        """Test that non-binary or overloaded masks are rejected."""
        with self.assertRaises(ValueError):
            SchedulingMask(delta=np.array([[0, 2]]), u_max=2)
        with self.assertRaises(ValueError):
            SchedulingMask(delta=np.ones((1, 3)), u_max=2)
        with self.assertRaises(ShapeError):
            SchedulingMask(delta=np.ones(3), u_max=3)


class TestBeamformerSet(unittest.TestCase):
    """Tests for BeamformerSet."""

    def test_feasibility(self):
        """Test the per-satellite power check."""
        w = np.zeros((2, 2, 2), dtype=complex)
        w[0, 0] = [1.0, 0.0]
        W = BeamformerSet(w=w, power_budget=np.array([1.0, 1.0]))
        self.assertTrue(W.is_feasible())
        W.w[1, 1] = [1.0, 1.0]
        self.assertFalse(W.is_feasible())
        np.testing.assert_allclose(W.power_per_satellite(), [1.0, 2.0])


class TestConsensusState(unittest.TestCase):
    """Tests for ConsensusState."""

    def test_views_and_copy(self):
        """Test the derived index sets and deep copy."""
        delta = np.array([[1, 0], [1, 1], [0, 1]], dtype=np.int8)
        g = np.zeros((2, 2, 3), dtype=complex)
        state = ConsensusState(sat=1, neighbors=(2, 0), delta=delta, g_local=g,
                               snapshots={1: g.copy()}, duals={1: np.zeros((2, 2, 2), dtype=complex)},
                               rho_g=1.0, mu=np.zeros(2, dtype=complex), nu=np.ones(2),
                               w=np.zeros((2, 2), dtype=complex))
        self.assertEqual(state.closed_neighborhood, (0, 1, 2))
        self.assertEqual(state.others.tolist(), [0, 2])
        self.assertEqual(state.served, (0, 1))
        clone = state.copy()
        clone.g_local[0, 0, 0] = 1.0
        clone.snapshots[1][0, 0, 0] = 1.0
        self.assertEqual(state.g_local[0, 0, 0], 0.0)
        self.assertEqual(state.snapshots[1][0, 0, 0], 0.0)


if __name__ == "__main__":
    unittest.main()
