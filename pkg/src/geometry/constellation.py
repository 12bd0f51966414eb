"""
Walker-Delta constellation geometry.

Builds the frozen (t=0) constellation, drops UTs uniformly over a spherical
cap, selects the serving satellites nearest to the cap center and computes
angles of departure in every satellite's local array frame.
"""

import math
from typing import Optional, Sequence

import numpy as np

from src.common.config import GeometryConfig
from src.common.exceptions import DegenerateGeometryError, InfeasibleSceneError
from src.common.interfaces import AodSet, Constellation, SceneGeometry
from src.common.utils import get_logger

logger = get_logger(__name__)


def geodetic_to_ecef(lat_rad: float, lon_rad: float, radius_km: float) -> np.ndarray:
    """Point on a sphere from spherical latitude/longitude."""
    return radius_km * np.array([
        math.cos(lat_rad) * math.cos(lon_rad),
        math.cos(lat_rad) * math.sin(lon_rad),
        math.sin(lat_rad),
    ])


def build_walker_delta(cfg: GeometryConfig) -> Constellation:
    """Generate the full Walker-Delta constellation.

    RAAN is spread evenly over 2*pi across planes and the anomaly evenly
    within each plane; plane p is phased by 2*pi*F*p/T.

    Args:
        cfg: Geometry configuration.

    Returns:
        Constellation with planes * sats_per_plane positions (km) and unit
        velocity directions, ordered plane by plane.

    Raises:
        ConfigurationError: If cfg is invalid.
    """
    cfg.validate()
    total = cfg.planes * cfg.sats_per_plane
    plane = np.repeat(np.arange(cfg.planes), cfg.sats_per_plane)
    slot = np.tile(np.arange(cfg.sats_per_plane), cfg.planes)

    raan = 2.0 * np.pi * plane / cfg.planes
    anomaly = 2.0 * np.pi * slot / cfg.sats_per_plane + 2.0 * np.pi * cfg.phasing * plane / total
    inc = cfg.inclination_rad

    cos_o, sin_o = np.cos(raan), np.sin(raan)
    cos_t, sin_t = np.cos(anomaly), np.sin(anomaly)
    cos_i, sin_i = math.cos(inc), math.sin(inc)

    positions = cfg.orbit_radius_km * np.stack([
        cos_o * cos_t - sin_o * sin_t * cos_i,
        sin_o * cos_t + cos_o * sin_t * cos_i,
        sin_t * sin_i,
    ], axis=1)
    velocity = np.stack([
        -cos_o * sin_t - sin_o * cos_t * cos_i,
        -sin_o * sin_t + cos_o * cos_t * cos_i,
        cos_t * sin_i,
    ], axis=1)
    logger.debug(f"Built Walker-Delta constellation with {total} satellites")
    return Constellation(positions=positions, velocity_dirs=velocity)


def region_center(cfg: GeometryConfig) -> np.ndarray:
    """ECEF position (km) of the service region center."""
    lat, lon = cfg.region_center_rad
    return geodetic_to_ecef(lat, lon, cfg.earth_radius_km)


def drop_uts(cfg: GeometryConfig, rng: np.random.Generator) -> np.ndarray:
    """Drop U UTs uniformly over the service cap.

    The cosine of the angular distance from the center is uniform over
    [cos(psi), 1], which makes the drop uniform in area.

    Args:
        cfg: Geometry configuration.
        rng: Random generator owned by the caller.

    Returns:
        U x 3 array of ECEF positions (km) on the Earth's surface.
    """
    cfg.validate()
    psi = cfg.region_radius_km / cfg.earth_radius_km
    lat, lon = cfg.region_center_rad

    cos_c = rng.uniform(math.cos(psi), 1.0, size=cfg.ut_count)
    bearing = rng.uniform(0.0, 2.0 * np.pi, size=cfg.ut_count)
    sin_c = np.sqrt(np.clip(1.0 - cos_c ** 2, 0.0, None))

    up = geodetic_to_ecef(lat, lon, 1.0)
    east = np.array([-math.sin(lon), math.cos(lon), 0.0])
    north = np.cross(up, east)

    directions = (cos_c[:, None] * up[None, :]
                  + sin_c[:, None] * (np.cos(bearing)[:, None] * north[None, :]
                                      + np.sin(bearing)[:, None] * east[None, :]))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    return cfg.earth_radius_km * directions


def elevation_angles(ground: np.ndarray, sat_positions: np.ndarray) -> np.ndarray:
    """Elevation (rad) of each satellite above the local horizon of ground."""
    up = ground / np.linalg.norm(ground)
    rays = sat_positions - ground[None, :]
    ranges = np.linalg.norm(rays, axis=1)
    if np.any(ranges == 0.0):
        raise DegenerateGeometryError("satellite coincides with the ground point")
    return np.arcsin(np.clip(rays @ up / ranges, -1.0, 1.0))


def local_frame(position: np.ndarray, velocity_dir: np.ndarray) -> np.ndarray:
    """Rows x (along-track), y, z (toward Earth center) of the array frame.

    Raises:
        DegenerateGeometryError: If velocity is parallel to the nadir.
    """
    z = -position / np.linalg.norm(position)
    x = velocity_dir - np.dot(velocity_dir, z) * z
    norm = np.linalg.norm(x)
    if norm < 1e-12:
        raise DegenerateGeometryError("velocity direction parallel to nadir")
    x = x / norm
    y = np.cross(z, x)
    return np.stack([x, y, z])


def select_serving_sats(constellation: Constellation, cap_center: np.ndarray, n_serving: int,
                        min_elevation_deg: float = 10.0) -> SceneGeometry:
    """Pick the satellites closest to the cap center.

    Distance is the geodesic angle between the sub-satellite point and the
    cap center; ties go to the lower satellite index.

    Args:
        constellation: Full constellation.
        cap_center: ECEF position of the cap center (km).
        n_serving: Number S of serving satellites.
        min_elevation_deg: Visibility threshold seen from the cap center.

    Returns:
        SceneGeometry without UTs (use with_uts to attach a drop).

    Raises:
        InfeasibleSceneError: Fewer than S satellites are visible.
    """
    if n_serving > constellation.size:
        raise InfeasibleSceneError(
            f"requested {n_serving} serving satellites from a constellation of {constellation.size}")
    center_dir = cap_center / np.linalg.norm(cap_center)
    sub_dirs = constellation.positions / np.linalg.norm(constellation.positions, axis=1, keepdims=True)
    angles = np.arccos(np.clip(sub_dirs @ center_dir, -1.0, 1.0))

    elevation = elevation_angles(cap_center, constellation.positions)
    visible = np.flatnonzero(elevation >= math.radians(min_elevation_deg))
    if visible.size < n_serving:
        raise InfeasibleSceneError(
            f"only {visible.size} satellites above {min_elevation_deg} deg, need {n_serving}")

    order = visible[np.argsort(angles[visible], kind="stable")]
    chosen = order[:n_serving]
    positions = constellation.positions[chosen]
    velocities = constellation.velocity_dirs[chosen]
    frames = np.stack([local_frame(p, v) for p, v in zip(positions, velocities)])
    logger.info(f"Selected serving satellites {chosen.tolist()}")
    return SceneGeometry(
        sat_indices=tuple(int(i) for i in chosen),
        sat_positions=positions,
        sat_velocity_dirs=velocities,
        ut_positions=np.zeros((0, 3)),
        local_frames=frames,
    )


def compute_aods(scene: SceneGeometry) -> AodSet:
    """Angles of departure of every satellite-to-UT ray.

    Elevation is measured from the array plane, so nadir gives pi/2.

    Raises:
        DegenerateGeometryError: If a UT coincides with a satellite.
    """
    rays = scene.ut_positions[None, :, :] - scene.sat_positions[:, None, :]
    ranges = np.linalg.norm(rays, axis=2)
    if np.any(ranges == 0.0):
        raise DegenerateGeometryError("UT located exactly at a satellite position")
    local = np.einsum('sij,suj->sui', scene.local_frames, rays) / ranges[:, :, None]
    az = np.arctan2(local[:, :, 1], local[:, :, 0])
    el = np.arcsin(np.clip(local[:, :, 2], -1.0, 1.0))
    return AodSet(az=az, el=el, off_boresight=np.pi / 2 - el)


def link_distances_m(scene: SceneGeometry) -> np.ndarray:
    """Satellite-to-UT slant ranges in metres, S x U."""
    rays = scene.ut_positions[None, :, :] - scene.sat_positions[:, None, :]
    return 1e3 * np.linalg.norm(rays, axis=2)


def direction_from_aod(frame: np.ndarray, az: float, el: float) -> np.ndarray:
    """World-frame unit vector for a local (az, el) pair."""
    local = np.array([math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), math.sin(el)])
    return frame.T @ local


def build_scene(cfg: GeometryConfig, rng: np.random.Generator,
                constellation: Optional[Constellation] = None) -> SceneGeometry:
    """Serving satellites plus a fresh UT drop for one experiment drop."""
    constellation = constellation if constellation is not None else build_walker_delta(cfg)
    scene = select_serving_sats(constellation, region_center(cfg), cfg.serving_count,
                                cfg.min_elevation_deg)
    return scene.with_uts(drop_uts(cfg, rng))


def angular_spacing(positions: Sequence[np.ndarray]) -> np.ndarray:
    """Angles (rad) between consecutive position vectors."""
    pts = np.asarray(positions, dtype=float)
    unit = pts / np.linalg.norm(pts, axis=1, keepdims=True)
    nxt = np.roll(unit, -1, axis=0)
    return np.arccos(np.clip(np.sum(unit * nxt, axis=1), -1.0, 1.0))
