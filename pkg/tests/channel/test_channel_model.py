"""
Tests for the statistical channel model.
"""

import math
import unittest

import numpy as np

from src.channel.channel_model import (
    PEAK_GAIN, build_statistical_csi, build_T, derive_statistics, noise_power, path_gain, radiation_gain,
    sample_gains, steering_vector
)
from src.common.config import ArrayConfig, ChannelConfig, GeometryConfig
from src.common.exceptions import DomainError
from src.common.utils import dbm_to_watt, wavelength
from src.geometry.constellation import build_scene, compute_aods
from src.simulation.validation import random_csi


class TestArrayResponse(unittest.TestCase):
    """Tests for steering vectors and the element pattern."""

    def setUp(self):
        """Set up test fixtures."""
        self.arr = ArrayConfig(n_h=4, n_v=2)

    def test_steering_shape_and_modulus(self):
        """Test broadcasting and unit-modulus entries."""
        az = np.linspace(-3.0, 3.0, 6).reshape(2, 3)
        el = np.full((2, 3), 0.7)
        a = steering_vector(az, el, self.arr)
        self.assertEqual(a.shape, (2, 3, 8))
        np.testing.assert_allclose(np.abs(a), 1.0, rtol=1e-12)

    def test_nadir_is_all_ones(self):
        """Test that the nadir direction has no phase progression."""
        np.testing.assert_allclose(steering_vector(0.3, math.pi / 2, self.arr), np.ones(8), atol=1e-12)

    def test_kronecker_ordering(self):
        """Test that entry k*n_v + m carries the horizontal index k."""
        az, el = 0.4, 0.2
        a = steering_vector(az, el, self.arr)
        phi_h = 0.5 * math.cos(az) * math.cos(el)
        phi_v = 0.5 * math.sin(az) * math.cos(el)
        for k in range(4):
            for m in range(2):
                expected = np.exp(-2j * math.pi * (phi_h * k + phi_v * m))
                self.assertAlmostEqual(a[k * 2 + m], expected, places=12)

    def test_radiation_gain(self):
        """Test the element gain and its domain."""
        self.assertAlmostEqual(radiation_gain(0.0), PEAK_GAIN)
        self.assertAlmostEqual(radiation_gain(math.pi / 2), 0.0, places=12)
        self.assertAlmostEqual(radiation_gain(math.pi / 3), PEAK_GAIN / 2.0)
        with self.assertRaises(DomainError):
            radiation_gain(2.0)
        with self.assertRaises(DomainError):
            radiation_gain(np.array([0.1, -0.5]))


class TestLinkStatistics(unittest.TestCase):
    """Tests for path gain, Rician statistics and noise power."""

    def test_path_gain(self):
        """Test unit gain at lambda / (4*pi) and the inverse-square law."""
        lam = wavelength(5e9)
        self.assertAlmostEqual(path_gain(lam / (4.0 * math.pi), 5e9), 1.0)
        ratio = path_gain(1000.0, 5e9) / path_gain(2000.0, 5e9)
        self.assertAlmostEqual(ratio, 4.0)
        with self.assertRaises(DomainError):
            path_gain(0.0, 5e9)

    def test_rician_split(self):
        """Test that the mean and scattered parts add up to gamma."""
        gamma = np.array([1e-16, 2.0, 5.0])
        kappa = np.array([0.0, 1.0, 31.6])
        alpha_bar, beta = derive_statistics(gamma, kappa)
        np.testing.assert_allclose(2.0 * (alpha_bar ** 2 + beta), gamma, rtol=1e-12)
        np.testing.assert_allclose(alpha_bar ** 2 / beta, kappa, rtol=1e-12)

    def test_noise_power(self):
        """Test N0 + 10 log10(B) + F in dBm."""
        cfg = ChannelConfig()
        expected = dbm_to_watt(-173.855 + 10.0 * math.log10(20e6) + 10.0)
        self.assertAlmostEqual(noise_power(cfg) / expected, 1.0, places=12)

    def test_build_T(self):
        """Test the correlation matrix structure."""
        csi = random_csi(np.random.default_rng(3), 3, 2, 2)
        T = build_T(csi, 1)
        a = csi.alpha_bar[:, 1]
        np.testing.assert_allclose(T, np.outer(a, a) + np.diag(csi.beta[:, 1]))
        np.testing.assert_allclose(T, T.T)

    def test_sample_moments(self):
        """Test the sampled mean and variance of the complex gains."""
        csi = random_csi(np.random.default_rng(4), 2, 2, 1)
        alpha = sample_gains(csi, np.random.default_rng(5), 40000)
        self.assertEqual(alpha.shape, (40000, 2, 2))
        stderr = np.sqrt(csi.beta / 40000)
        self.assertTrue(np.all(np.abs(alpha.real.mean(axis=0) - csi.alpha_bar) < 5.0 * stderr))
        self.assertTrue(np.all(np.abs(alpha.imag.mean(axis=0) - csi.alpha_bar) < 5.0 * stderr))
        np.testing.assert_allclose(alpha.real.var(axis=0), csi.beta, rtol=0.05)


class TestStatisticalCsi(unittest.TestCase):
    """Tests for the drop-level CSI builder."""

    def test_scene_csi(self):
        """Test shapes and magnitudes of CSI built from a real scene."""
        geometry = GeometryConfig(serving_count=3, ut_count=6)
        scene = build_scene(geometry, np.random.default_rng(6))
        cfg = ChannelConfig()
        csi = build_statistical_csi(scene, compute_aods(scene), cfg, np.random.default_rng(7))
        self.assertEqual(csi.b.shape, (3, 6, 16))
        self.assertTrue(np.all(csi.gamma > 0.0))
        kappa_db = 10.0 * np.log10(csi.kappa)
        self.assertTrue(np.all((kappa_db >= 15.0) & (kappa_db <= 20.0)))
        norms = np.linalg.norm(csi.b, axis=2)
        self.assertTrue(np.all(norms <= PEAK_GAIN * 4.0 + 1e-12))
        self.assertEqual(csi.correlation.shape, (6, 3, 3))


if __name__ == "__main__":
    unittest.main()
