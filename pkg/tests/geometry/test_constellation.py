"""
Tests for the constellation geometry module.
"""

import math
import unittest

import numpy as np

from src.common.config import GeometryConfig
from src.common.exceptions import DegenerateGeometryError, InfeasibleSceneError
from src.geometry.constellation import (
    angular_spacing, build_scene, build_walker_delta, compute_aods, direction_from_aod, drop_uts,
    elevation_angles, local_frame, region_center, select_serving_sats
)


class TestWalkerDelta(unittest.TestCase):
    """Tests for the Walker-Delta generator."""

    def setUp(self):
        """Set up test fixtures."""
        self.cfg = GeometryConfig()
        self.constellation = build_walker_delta(self.cfg)

    def test_size_and_radius(self):
        """Test the satellite count and that every satellite is on the shell."""
        self.assertEqual(self.constellation.size, 28 * 60)
        radii = np.linalg.norm(self.constellation.positions, axis=1)
        np.testing.assert_allclose(radii, self.cfg.orbit_radius_km, rtol=1e-12)

    def test_velocity_is_tangent(self):
        """Test unit velocity directions orthogonal to the position."""
        v = self.constellation.velocity_dirs
        np.testing.assert_allclose(np.linalg.norm(v, axis=1), 1.0, rtol=1e-12)
        dots = np.sum(v * self.constellation.positions, axis=1)
        np.testing.assert_allclose(dots, 0.0, atol=1e-8)

    def test_in_plane_spacing(self):
        """Test that satellites within a plane are evenly spaced."""
        plane = self.constellation.positions[:self.cfg.sats_per_plane]
        np.testing.assert_allclose(angular_spacing(plane), 2.0 * math.pi / self.cfg.sats_per_plane, rtol=1e-9)

    def test_inclination_bounds_latitude(self):
        """Test that no satellite exceeds the inclination in latitude."""
        lat = np.arcsin(self.constellation.positions[:, 2] / self.cfg.orbit_radius_km)
        self.assertLessEqual(float(np.max(np.abs(lat))), self.cfg.inclination_rad + 1e-12)


class TestUtDrop(unittest.TestCase):
    """Tests for the UT drop over the service cap."""

    def setUp(self):
        """Set up test fixtures."""
        self.cfg = GeometryConfig(ut_count=500)
        self.uts = drop_uts(self.cfg, np.random.default_rng(1))

    def test_on_surface_inside_cap(self):
        """Test that UTs lie on the Earth inside the cap."""
        np.testing.assert_allclose(np.linalg.norm(self.uts, axis=1), self.cfg.earth_radius_km, rtol=1e-12)
        center = region_center(self.cfg) / self.cfg.earth_radius_km
        angles = np.arccos(np.clip(self.uts @ center / self.cfg.earth_radius_km, -1.0, 1.0))
        psi = self.cfg.region_radius_km / self.cfg.earth_radius_km
        self.assertLessEqual(float(angles.max()), psi + 1e-9)

    def test_reproducible(self):
        """Test that the same generator seed gives the same drop."""
        again = drop_uts(self.cfg, np.random.default_rng(1))
        np.testing.assert_array_equal(self.uts, again)


class TestServingSelection(unittest.TestCase):
    """Tests for serving satellite selection and angles of departure."""

    def setUp(self):
        """Set up test fixtures."""
        self.cfg = GeometryConfig(ut_count=8)
        self.scene = build_scene(self.cfg, np.random.default_rng(2))

    def test_selection(self):
        """Test the count, visibility and distance ordering of the serving set."""
        self.assertEqual(self.scene.n_sats, 5)
        self.assertEqual(self.scene.n_uts, 8)
        center = region_center(self.cfg)
        elevation = elevation_angles(center, self.scene.sat_positions)
        self.assertTrue(np.all(elevation >= math.radians(self.cfg.min_elevation_deg)))
        unit = self.scene.sat_positions / np.linalg.norm(self.scene.sat_positions, axis=1, keepdims=True)
        angles = np.arccos(np.clip(unit @ (center / np.linalg.norm(center)), -1.0, 1.0))
        self.assertTrue(np.all(np.diff(angles) >= -1e-12))

    def test_local_frames(self):
        """Test that array frames are right-handed and point z at the Earth center."""
        for frame, position in zip(self.scene.local_frames, self.scene.sat_positions):
            np.testing.assert_allclose(frame @ frame.T, np.eye(3), atol=1e-12)
            self.assertAlmostEqual(float(np.linalg.det(frame)), 1.0, places=12)
            np.testing.assert_allclose(frame[2], -position / np.linalg.norm(position), atol=1e-12)

    def test_aods(self):
        """Test that angles reproduce the ray directions and stay below the array plane."""
        aods = compute_aods(self.scene)
        self.assertEqual(aods.az.shape, (5, 8))
        self.assertTrue(np.all(aods.off_boresight >= 0.0))
        self.assertTrue(np.all(aods.off_boresight <= math.pi / 2))
        for s in range(self.scene.n_sats):
            for u in range(self.scene.n_uts):
                ray = self.scene.ut_positions[u] - self.scene.sat_positions[s]
                direction = direction_from_aod(self.scene.local_frames[s], aods.az[s, u], aods.el[s, u])
                np.testing.assert_allclose(direction, ray / np.linalg.norm(ray), atol=1e-9)

    def test_infeasible(self):
        """Test that asking for more visible satellites than exist fails."""
        constellation = build_walker_delta(self.cfg)
        with self.assertRaises(InfeasibleSceneError):
            select_serving_sats(constellation, region_center(self.cfg), 1000, 10.0)
        with self.assertRaises(InfeasibleSceneError):
            select_serving_sats(constellation, region_center(self.cfg), 2000, 10.0)

    def test_degenerate_frame(self):
        """Test a velocity parallel to the nadir."""
        position = np.array([7000.0, 0.0, 0.0])
        with self.assertRaises(DegenerateGeometryError):
            local_frame(position, np.array([1.0, 0.0, 0.0]))


if __name__ == "__main__":
    unittest.main()
