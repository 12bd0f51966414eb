"""
Experiment configuration.

The JSON configuration file maps one-to-one onto the dataclasses below.
Angles are given in degrees and powers in dBm in the file; conversion to
radians and watts happens here and nowhere else.
"""

import dataclasses
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from src.common.exceptions import ConfigurationError
from src.common.utils import dbm_to_watt, get_logger

logger = get_logger(__name__)

THREADS_ENV = "LEOCOOPBF_THREADS"

SOLVER_NAMES = ("centralized", "decentralized", "mrt", "zf", "sss")
SWEEP_AXES = ("power_dbm", "n_antennas", "n_sats", "n_uts")
TOPOLOGY_KINDS = ("ring", "star", "mesh", "custom")


@dataclass
class GeometryConfig:
    """Constellation, service region and drop sizes."""
    earth_radius_km: float = 6371.0
    altitude_km: float = 550.0
    planes: int = 28
    sats_per_plane: int = 60
    inclination_deg: float = 53.0
    phasing: int = 1
    region_center_lat_deg: float = 20.0
    region_center_lon_deg: float = 40.0
    region_radius_km: float = 800.0
    serving_count: int = 5
    ut_count: int = 32
    min_elevation_deg: float = 10.0
    seed: int = 0

    def validate(self) -> None:
        """Check invariants.

        Raises:
            ConfigurationError: Naming the first offending field.
        """
        if self.planes < 1:
            raise ConfigurationError("planes", "must be >= 1")
        if self.sats_per_plane < 1:
            raise ConfigurationError("sats_per_plane", "must be >= 1")
        if not self.earth_radius_km > 0:
            raise ConfigurationError("earth_radius_km", "must be positive")
        if not self.altitude_km > 0:
            raise ConfigurationError("altitude_km", "must be positive")
        if not 0 < self.region_radius_km < math.pi * self.earth_radius_km:
            raise ConfigurationError("region_radius_km", "must lie in (0, pi * earth_radius_km)")
        if self.serving_count < 1 or self.serving_count > self.planes * self.sats_per_plane:
            raise ConfigurationError("serving_count", "must lie in [1, planes * sats_per_plane]")
        if self.ut_count < 1:
            raise ConfigurationError("ut_count", "must be >= 1")
        if not 0 <= self.min_elevation_deg < 90:
            raise ConfigurationError("min_elevation_deg", "must lie in [0, 90)")
        if self.seed < 0:
            raise ConfigurationError("seed", "must be unsigned")

    @property
    def orbit_radius_km(self) -> float:
        return self.earth_radius_km + self.altitude_km

    @property
    def inclination_rad(self) -> float:
        return math.radians(self.inclination_deg)

    @property
    def region_center_rad(self) -> Tuple[float, float]:
        return math.radians(self.region_center_lat_deg), math.radians(self.region_center_lon_deg)


@dataclass
class ArrayConfig:
    """Uniform planar array at every satellite."""
    n_h: int = 4
    n_v: int = 4
    spacing_over_lambda: float = 0.5
    carrier_hz: float = 5e9

    def validate(self) -> None:
        if self.n_h < 1:
            raise ConfigurationError("n_h", "must be >= 1")
        if self.n_v < 1:
            raise ConfigurationError("n_v", "must be >= 1")
        if not self.spacing_over_lambda > 0:
            raise ConfigurationError("spacing_over_lambda", "must be positive")
        if not self.carrier_hz > 0:
            raise ConfigurationError("carrier_hz", "must be positive")

    @property
    def n_antennas(self) -> int:
        return self.n_h * self.n_v


@dataclass
class ChannelConfig:
    """Carrier, noise and fading parameters."""
    f_c_hz: float = 5e9
    bandwidth_hz: float = 20e6
    noise_psd_dbm_hz: float = -173.855
    noise_figure_db: float = 10.0
    kappa_db_range: Tuple[float, float] = (15.0, 20.0)
    arrays: ArrayConfig = field(default_factory=ArrayConfig)

    def __post_init__(self) -> None:
        self.kappa_db_range = tuple(float(v) for v in self.kappa_db_range)  # type: ignore[assignment]
        self.arrays.carrier_hz = self.f_c_hz

    def validate(self) -> None:
        if not self.f_c_hz > 0:
            raise ConfigurationError("f_c_hz", "must be positive")
        if not self.bandwidth_hz > 0:
            raise ConfigurationError("bandwidth_hz", "must be positive")
        if len(self.kappa_db_range) != 2 or self.kappa_db_range[0] > self.kappa_db_range[1]:
            raise ConfigurationError("kappa_db_range", "must be [low, high] with low <= high")
        self.arrays.validate()


@dataclass
class TopologyConfig:
    """ISL graph kind; edges only for kind == 'custom'."""
    kind: str = "mesh"
    edges: Optional[List[Tuple[int, int]]] = None

    def validate(self) -> None:
        if self.kind not in TOPOLOGY_KINDS:
            raise ConfigurationError("topology.kind", f"must be one of {TOPOLOGY_KINDS}")
        if self.kind == "custom" and not self.edges:
            raise ConfigurationError("topology.edges", "required for a custom topology")


@dataclass
class SweepConfig:
    """Sweep axis, its values and the strategies compared along it."""
    axis: Optional[str] = None
    values: List[float] = field(default_factory=list)
    solvers: List[str] = field(default_factory=list)
    topologies: List[str] = field(default_factory=list)

    def validate(self) -> None:
        if self.axis is None:
            return
        if self.axis not in SWEEP_AXES:
            raise ConfigurationError("sweep.axis", f"must be one of {SWEEP_AXES}")
        if not self.values:
            raise ConfigurationError("sweep.values", "must be non-empty")
        for name in self.solvers:
            if name not in SOLVER_NAMES:
                raise ConfigurationError("sweep.solvers", f"unknown solver {name!r}")
        for kind in self.topologies:
            if kind not in ("ring", "star", "mesh"):
                raise ConfigurationError("sweep.topologies", f"unknown topology {kind!r}")


@dataclass
class Tolerances:
    """Convergence thresholds shared by the solvers."""
    tol: float = 1e-4
    bcd_tol: float = 1e-8
    max_sweeps: int = 100
    line_search_tol: float = 1e-10
    eig_floor: float = 1e-12
    max_bisect: int = 200

    def validate(self) -> None:
        for name in ("tol", "bcd_tol", "line_search_tol", "eig_floor"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"tolerances.{name}", "must be positive")
        if self.max_sweeps < 1:
            raise ConfigurationError("tolerances.max_sweeps", "must be >= 1")
        if self.max_bisect < 1:
            raise ConfigurationError("tolerances.max_bisect", "must be >= 1")


@dataclass
class ExperimentConfig:
    """Top-level experiment description."""
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    scheduler: str = "cs"
    cs_correlation: str = "network"
    baseline: str = "none"
    solver: str = "centralized"
    solvers: List[str] = field(default_factory=list)
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    power_budget_dbm: float = 50.0
    u_max: int = 8
    rho_g: float = 1.0
    rho_scaling: str = "absolute"
    adaptive_rho: bool = False
    schedule: str = "flattened"
    init_copies: str = "zero"
    local_solver: str = "low_complexity"
    max_outer: Optional[int] = None
    inner_tol: float = 1e-4
    max_inner: int = 50
    sweep: SweepConfig = field(default_factory=SweepConfig)
    n_drops: int = 1
    seed: int = 0
    output_dir: str = "results"
    tolerances: Tolerances = field(default_factory=Tolerances)

    def validate(self) -> None:
        """Validate every section.

        Raises:
            ConfigurationError: Naming the first offending field.
        """
        self.geometry.validate()
        self.channel.validate()
        self.topology.validate()
        self.sweep.validate()
        self.tolerances.validate()
        if self.scheduler not in ("cs", "rs"):
            raise ConfigurationError("scheduler", "must be 'cs' or 'rs'")
        if self.cs_correlation not in ("network", "satellite"):
            raise ConfigurationError("cs_correlation", "must be 'network' or 'satellite'")
        if self.baseline not in ("mrt", "zf", "sss", "none"):
            raise ConfigurationError("baseline", "must be 'mrt', 'zf', 'sss' or 'none'")
        if self.solver not in SOLVER_NAMES:
            raise ConfigurationError("solver", f"must be one of {SOLVER_NAMES}")
        for name in self.solvers:
            if name not in SOLVER_NAMES:
                raise ConfigurationError("solvers", f"unknown solver {name!r}")
        if self.u_max < 1:
            raise ConfigurationError("u_max", "must be >= 1")
        if self.scheduler == "rs" and self.u_max > self.geometry.ut_count:
            raise ConfigurationError("u_max", "random scheduling needs u_max <= ut_count")
        if not self.rho_g > 0:
            raise ConfigurationError("rho_g", "must be positive")
        if self.rho_scaling not in ("curvature", "absolute"):
            raise ConfigurationError("rho_scaling", "must be 'curvature' or 'absolute'")
        if self.schedule not in ("flattened", "nested"):
            raise ConfigurationError("schedule", "must be 'flattened' or 'nested'")
        if self.init_copies not in ("zero", "mrt"):
            raise ConfigurationError("init_copies", "must be 'zero' or 'mrt'")
        if self.local_solver not in ("low_complexity", "generic"):
            raise ConfigurationError("local_solver", "must be 'low_complexity' or 'generic'")
        if self.max_outer is not None and self.max_outer < 1:
            raise ConfigurationError("max_outer", "must be >= 1")
        if not self.inner_tol > 0:
            raise ConfigurationError("inner_tol", "must be positive")
        if self.max_inner < 1:
            raise ConfigurationError("max_inner", "must be >= 1")
        if self.n_drops < 1:
            raise ConfigurationError("n_drops", "must be >= 1")
        if self.seed < 0:
            raise ConfigurationError("seed", "must be unsigned")
        if "decentralized" in self.solver_names() and self.geometry.serving_count < 2:
            raise ConfigurationError("geometry.serving_count", "decentralized runs need at least 2 satellites")

    @property
    def power_budget_w(self) -> float:
        """Per-satellite budget in W (the only dBm to W conversion point)."""
        return dbm_to_watt(self.power_budget_dbm)

    def solver_names(self) -> List[str]:
        """Strategies to run, in order, without duplicates."""
        names = list(self.solvers) if self.solvers else [self.solver]
        if not self.solvers and self.baseline != "none" and self.baseline not in names:
            names.append(self.baseline)
        return names

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form."""
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def with_axis(self, axis: str, value: float) -> 'ExperimentConfig':
        """Copy of the config with one sweep axis set to value."""
        cfg = from_dict(self.to_dict())
        if axis == "power_dbm":
            cfg.power_budget_dbm = float(value)
        elif axis == "n_antennas":
            cfg.channel.arrays.n_h, cfg.channel.arrays.n_v = split_antennas(int(value))
        elif axis == "n_sats":
            cfg.geometry.serving_count = int(value)
        elif axis == "n_uts":
            cfg.geometry.ut_count = int(value)
        else:
            raise ConfigurationError("sweep.axis", f"must be one of {SWEEP_AXES}")
        cfg.validate()
        return cfg


def split_antennas(n_antennas: int) -> Tuple[int, int]:
    """Square UPA when n is a perfect square, otherwise a horizontal line."""
    if n_antennas < 1:
        raise ConfigurationError("n_antennas", "must be >= 1")
    root = math.isqrt(n_antennas)
    if root * root == n_antennas:
        return root, root
    return n_antennas, 1


def _build(cls: Any, data: Dict[str, Any], section: str) -> Any:
    if not isinstance(data, dict):
        raise ConfigurationError(section or "config", "must be a JSON object")
    known = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigurationError(f"{section}.{key}" if section else key, "unknown key")
    return cls(**data)


def from_dict(data: Dict[str, Any]) -> ExperimentConfig:
    """Build an ExperimentConfig from a parsed JSON object.

    Raises:
        ConfigurationError: On unknown keys or invalid values.
    """
    data = dict(data)
    geometry = _build(GeometryConfig, data.pop("geometry", {}), "geometry")
    channel_data = dict(data.pop("channel", {}))
    arrays = _build(ArrayConfig, channel_data.pop("arrays", {}), "channel.arrays")
    channel = _build(ChannelConfig, {**channel_data, "arrays": arrays}, "channel")
    topology_data = dict(data.pop("topology", {}))
    if topology_data.get("edges") is not None:
        topology_data["edges"] = [tuple(int(v) for v in edge) for edge in topology_data["edges"]]
    topology = _build(TopologyConfig, topology_data, "topology")
    sweep = _build(SweepConfig, data.pop("sweep", {}), "sweep")
    tolerances = _build(Tolerances, data.pop("tolerances", {}), "tolerances")
    try:
        cfg = _build(ExperimentConfig, {
            **data,
            "geometry": geometry,
            "channel": channel,
            "topology": topology,
            "sweep": sweep,
            "tolerances": tolerances,
        }, "")
    except TypeError as exc:
        raise ConfigurationError("config", str(exc)) from exc
    cfg.validate()
    return cfg


def load_config(path: str) -> ExperimentConfig:
    """Load and validate a JSON experiment configuration.

    Raises:
        ConfigurationError: If the file is missing, malformed or invalid.
    """
    config_path = Path(path)
    try:
        data = json.loads(config_path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigurationError("config", f"file not found: {config_path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError("config", f"invalid JSON: {exc}") from exc
    cfg = from_dict(data)
    logger.info(f"Loaded configuration {config_path} (hash {cfg.config_hash()[:12]})")
    return cfg


def worker_count(default: int = 4) -> int:
    """Worker pool size, overridable through LEOCOOPBF_THREADS."""
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return max(1, min(default, os.cpu_count() or 1))
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigurationError(THREADS_ENV, f"not an integer: {raw!r}") from exc
    if value < 1:
        raise ConfigurationError(THREADS_ENV, "must be >= 1")
    return value
