"""
Tests for scheduling and the baseline precoders.
"""

import unittest

import numpy as np

from src.common.exceptions import ConfigurationError
from src.common.interfaces import SchedulingMask
from src.scheduling.baselines import (
    mrt_beamformers, network_response, normalized_correlation, schedule_cs, schedule_rs, sss_assign,
    zf_beamformers
)
from src.simulation.validation import random_csi


class TestScheduling(unittest.TestCase):
    """Tests for the CS, RS and SSS schedulers."""

    def setUp(self):
        """Set up test fixtures."""
        self.csi = random_csi(np.random.default_rng(0), 3, 10, 4)

    def test_cs_counts_and_seed(self):
        """Test that CS serves u_max users and starts from the strongest one."""
        mask = schedule_cs(self.csi, 4)
        self.assertEqual(mask.served_count().tolist(), [4, 4, 4])
        for s, served in enumerate(mask.served_sets):
            self.assertIn(int(np.argmax(self.csi.gamma[s])), served)

    def test_cs_second_pick_is_least_correlated(self):
        """Test that the second user is the least correlated with the first."""
        mask = schedule_cs(self.csi, 2, "satellite")
        corr = normalized_correlation(self.csi.b[0])
        first = int(np.argmax(self.csi.gamma[0]))
        scores = corr[first].copy()
        scores[first] = np.inf
        self.assertEqual(set(mask.served_sets[0]), {first, int(np.argmin(scores))})

    def test_cs_network_correlation(self):
        """Test that the network metric compares stacked responses of all satellites."""
        mask = schedule_cs(self.csi, 2)
        corr = normalized_correlation(network_response(self.csi.b))
        for s, served in enumerate(mask.served_sets):
            first = int(np.argmax(self.csi.gamma[s]))
            scores = corr[first].copy()
            scores[first] = np.inf
            self.assertEqual(set(served), {first, int(np.argmin(scores))})

    def test_network_response_layout(self):
        """Test that row u holds b[0, u], then b[1, u], and so on."""
        stacked = network_response(self.csi.b)
        self.assertEqual(stacked.shape, (10, 12))
        np.testing.assert_array_equal(stacked[7, 4:8], self.csi.b[1, 7])

    def test_cs_equal_seeds_share_sets(self):
        """Test that equal seeds give identical sets under the network metric only."""
        csi = random_csi(np.random.default_rng(3), 3, 12, 4)
        gamma = csi.gamma.copy()
        gamma[:, 5] = 10.0
        same_seed = type(csi)(gamma=gamma, kappa=csi.kappa, alpha_bar=csi.alpha_bar, beta=csi.beta,
                              b=csi.b, noise_power=csi.noise_power)
        shared = schedule_cs(same_seed, 4)
        self.assertTrue(all(served == shared.served_sets[0] for served in shared.served_sets))
        with self.assertRaises(ConfigurationError):
            schedule_cs(csi, 4, "global")

    def test_cs_serves_everyone_when_few_users(self):
        """Test that U <= u_max schedules every user."""
        mask = schedule_cs(self.csi, 10)
        self.assertTrue(np.all(mask.delta == 1))

    def test_rs(self):
        """Test random scheduling counts and the u_max guard."""
        mask = schedule_rs(3, 10, 4, np.random.default_rng(1))
        self.assertEqual(mask.served_count().tolist(), [4, 4, 4])
        with self.assertRaises(ConfigurationError):
            schedule_rs(3, 10, 11, np.random.default_rng(1))

    def test_sss(self):
        """Test that every user keeps only its strongest scheduling satellite."""
        mask = schedule_cs(self.csi, 6)
        single = sss_assign(mask, self.csi)
        self.assertTrue(np.all(single.delta.sum(axis=0) <= 1))
        self.assertTrue(np.all(single.delta <= mask.delta))
        for u in range(10):
            sats = np.flatnonzero(mask.delta[:, u])
            if sats.size:
                best = sats[int(np.argmax(self.csi.gamma[sats, u]))]
                self.assertEqual(int(single.delta[best, u]), 1)


class TestBaselinePrecoders(unittest.TestCase):
    """Tests for MRT and ZF."""

    def setUp(self):
        """Set up test fixtures."""
        self.csi = random_csi(np.random.default_rng(2), 2, 5, 4)
        self.mask = SchedulingMask.from_served_sets([[0, 1, 3], [2, 4]], 5, 3)
        self.budgets = np.array([2.0, 3.0])

    def test_mrt(self):
        """Test MRT direction, equal power and zero rows for unserved users."""
        W = mrt_beamformers(self.csi, self.mask, self.budgets)
        np.testing.assert_allclose(W.power_per_satellite(), self.budgets, rtol=1e-12)
        for s, served in enumerate(self.mask.served_sets):
            for u in range(5):
                if u not in served:
                    self.assertTrue(np.all(W.w[s, u] == 0.0))
                    continue
                b = self.csi.b[s, u]
                self.assertAlmostEqual(abs(b @ W.w[s, u]), np.linalg.norm(b) * np.linalg.norm(W.w[s, u]))
                self.assertAlmostEqual(np.linalg.norm(W.w[s, u]) ** 2, self.budgets[s] / len(served))

    def test_zf_nulls_intra_satellite_interference(self):
        """Test that ZF removes interference between users of the same satellite."""
        W = zf_beamformers(self.csi, self.mask, self.budgets)
        np.testing.assert_allclose(W.power_per_satellite(), self.budgets, rtol=1e-12)
        for s, served in enumerate(self.mask.served_sets):
            for u in served:
                for k in served:
                    if k != u:
                        self.assertAlmostEqual(abs(self.csi.b[s, k] @ W.w[s, u]), 0.0, places=10)
                self.assertGreater(abs(self.csi.b[s, u] @ W.w[s, u]), 1e-6)

    def test_zf_empty_null_space(self):
        """Test that a user without a null-space direction gets zero power."""
        csi = random_csi(np.random.default_rng(3), 1, 3, 2)
        mask = SchedulingMask.from_served_sets([[0, 1, 2]], 3, 3)
        W = zf_beamformers(csi, mask, np.ones(1))
        self.assertTrue(np.allclose(W.w, 0.0))


if __name__ == "__main__":
    unittest.main()
