"""
Interface definitions for the cooperative beamforming library.

This module defines the data structures passed between modules and the
abstract contract every beamforming strategy implements.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.common.exceptions import ShapeError


# Data structures for inter-module communication

@dataclass(frozen=True, eq=False)
class Constellation:
    """Full constellation snapshot at t=0 (ECEF, km)."""
    positions: np.ndarray
    velocity_dirs: np.ndarray

    @property
    def size(self) -> int:
        """Number of satellites."""
        return int(self.positions.shape[0])


@dataclass(frozen=True, eq=False)
class SceneGeometry:
    """Serving satellites and UTs of one drop.

    local_frames[s] stacks the unit axes (x, y, z) of satellite s as rows:
    x along-track, z boresight toward the Earth center, y = z cross x.
    """
    sat_indices: Tuple[int, ...]
    sat_positions: np.ndarray
    sat_velocity_dirs: np.ndarray
    ut_positions: np.ndarray
    local_frames: np.ndarray

    @property
    def n_sats(self) -> int:
        return int(self.sat_positions.shape[0])

    @property
    def n_uts(self) -> int:
        return int(self.ut_positions.shape[0])

    def with_uts(self, ut_positions: np.ndarray) -> 'SceneGeometry':
        """Copy of the scene with a different UT drop."""
        return SceneGeometry(
            sat_indices=self.sat_indices,
            sat_positions=self.sat_positions,
            sat_velocity_dirs=self.sat_velocity_dirs,
            ut_positions=np.asarray(ut_positions, dtype=float),
            local_frames=self.local_frames,
        )


@dataclass(frozen=True, eq=False)
class AodSet:
    """Angles of departure in each satellite's array frame, all S x U."""
    az: np.ndarray
    el: np.ndarray
    off_boresight: np.ndarray


@dataclass(frozen=True, eq=False)
class StatisticalCsi:
    """Per-link Rician statistics and effective array responses.

    All matrices are indexed [s, u]; b is S x U x N with b[s, u] = G * a.
    """
    gamma: np.ndarray
    kappa: np.ndarray
    alpha_bar: np.ndarray
    beta: np.ndarray
    b: np.ndarray
    noise_power: float
    distances_m: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        shape = self.gamma.shape
        for name in ("kappa", "alpha_bar", "beta"):
            if getattr(self, name).shape != shape:
                raise ShapeError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        if self.b.ndim != 3 or self.b.shape[:2] != shape:
            raise ShapeError(f"b has shape {self.b.shape}, expected {shape} x N")
        if not self.noise_power > 0.0:
            raise ShapeError("noise_power must be positive")

    @property
    def n_sats(self) -> int:
        return int(self.gamma.shape[0])

    @property
    def n_uts(self) -> int:
        return int(self.gamma.shape[1])

    @property
    def n_antennas(self) -> int:
        return int(self.b.shape[2])

    @cached_property
    def correlation(self) -> np.ndarray:
        """Stacked T_u = alpha_u alpha_u^T + diag(beta_u), shape U x S x S."""
        a = self.alpha_bar.T
        return a[:, :, None] * a[:, None, :] + np.einsum('us,st->ust', self.beta.T, np.eye(self.n_sats))

    def gain_scale(self) -> np.ndarray:
        """sqrt(gamma / 2) / sigma per link: factor from physical to normalized beam-domain gains."""
        return np.sqrt(self.gamma / 2.0) / np.sqrt(self.noise_power)

    def normalized(self) -> 'StatisticalCsi':
        """The same links with unit noise and unit per-component mean power.

        gamma becomes 2 and b is multiplied by gain_scale, so every gain g
        maps to gain_scale * g while the SINR of every user stays unchanged.
        Beamformers are shared between the two descriptions.
        """
        scale = self.gain_scale()
        amplitude = np.sqrt(self.gamma / 2.0)
        return StatisticalCsi(
            gamma=np.full_like(self.gamma, 2.0),
            kappa=self.kappa.copy(),
            alpha_bar=self.alpha_bar / amplitude,
            beta=self.beta / amplitude ** 2,
            b=self.b * scale[:, :, None],
            noise_power=1.0,
            distances_m=self.distances_m,
        )

    def subset(self, sats: List[int], uts: Optional[List[int]] = None) -> 'StatisticalCsi':
        """Statistics restricted to some satellites and (optionally) UTs."""
        uts_idx = np.arange(self.n_uts) if uts is None else np.asarray(uts, dtype=int)
        rows = np.asarray(sats, dtype=int)
        pick = np.ix_(rows, uts_idx)
        return StatisticalCsi(
            gamma=self.gamma[pick],
            kappa=self.kappa[pick],
            alpha_bar=self.alpha_bar[pick],
            beta=self.beta[pick],
            b=self.b[pick],
            noise_power=self.noise_power,
            distances_m=None if self.distances_m is None else self.distances_m[pick],
        )


@dataclass(frozen=True, eq=False)
class SchedulingMask:
    """Binary scheduler delta[s, u] with at most u_max users per satellite."""
    delta: np.ndarray
    u_max: int

    def __post_init__(self) -> None:
        delta = np.asarray(self.delta)
        if delta.ndim != 2:
            raise ShapeError(f"delta must be S x U, got shape {delta.shape}")
        if not np.all((delta == 0) | (delta == 1)):
            raise ValueError("delta must be binary")
        if np.any(delta.sum(axis=1) > self.u_max):
            raise ValueError(f"a satellite serves more than u_max={self.u_max} users")
        object.__setattr__(self, "delta", delta.astype(np.int8))

    @classmethod
    def from_served_sets(cls, served_sets: List[List[int]], n_uts: int, u_max: int) -> 'SchedulingMask':
        """Build a mask from per-satellite served lists."""
        delta = np.zeros((len(served_sets), n_uts), dtype=np.int8)
        for s, served in enumerate(served_sets):
            delta[s, list(served)] = 1
        return cls(delta=delta, u_max=u_max)

    @property
    def served_sets(self) -> Tuple[Tuple[int, ...], ...]:
        """Ascending served UT indices per satellite."""
        return tuple(tuple(int(u) for u in np.flatnonzero(row)) for row in self.delta)

    @property
    def n_sats(self) -> int:
        return int(self.delta.shape[0])

    @property
    def n_uts(self) -> int:
        return int(self.delta.shape[1])

    def served_count(self) -> np.ndarray:
        """|U_s| per satellite."""
        return self.delta.sum(axis=1).astype(int)


@dataclass
class BeamformerSet:
    """Per-satellite beamformers w[s, u] (zero for unserved u) and budgets."""
    w: np.ndarray
    power_budget: np.ndarray

    def power_per_satellite(self) -> np.ndarray:
        return np.sum(np.abs(self.w) ** 2, axis=(1, 2))

    def is_feasible(self, slack: float = 1e-9) -> bool:
        """Whether every satellite respects its power budget."""
        return bool(np.all(self.power_per_satellite() <= self.power_budget * (1.0 + slack)))

    def copy(self) -> 'BeamformerSet':
        return BeamformerSet(w=self.w.copy(), power_budget=self.power_budget.copy())


@dataclass
class WmmseAux:
    """Receive scalars mu (complex) and MSE weights nu (positive) per user."""
    mu: np.ndarray
    nu: np.ndarray


@dataclass
class SolveReport:
    """Traces and bookkeeping of one beamforming solve."""
    iterations: int = 0
    objective_trace: List[float] = field(default_factory=list)
    sum_rate_trace: List[float] = field(default_factory=list)
    converged: bool = False
    wall_time_s: float = 0.0
    residual_trace: List[float] = field(default_factory=list)
    overhead_trace: List[np.ndarray] = field(default_factory=list)


@dataclass
class SolveOutcome:
    """Result of a BeamformingSolver run."""
    beamformers: BeamformerSet
    report: SolveReport
    ledger: Optional['OverheadLedgerLike'] = None


class OverheadLedgerLike(ABC):
    """Minimal view of an overhead ledger used by reporting code."""

    @property
    @abstractmethod
    def cumulative(self) -> np.ndarray:
        """Cumulative transmitted complex scalars per satellite."""


# Beamforming strategy interface

class BeamformingSolver(ABC):
    """Interface for every beamforming strategy (optimizers and baselines)."""

    name: str = "abstract"

    @abstractmethod
    def solve(self, csi: StatisticalCsi, mask: SchedulingMask,
              budgets: np.ndarray) -> SolveOutcome:
        """Compute beamformers for one drop."""
        pass


@dataclass
class ConsensusState:
    """Local view of satellite `sat` in the decentralized solve.

    g_local is U x U x S; snapshots[j] holds the last copy received from
    j (or the own previous copy for j == sat); duals[j] is U x U x (S-1)
    over the entries other than `sat`. delta is the network-wide scheduler.
    """
    sat: int
    neighbors: Tuple[int, ...]
    delta: np.ndarray
    g_local: np.ndarray
    snapshots: Dict[int, np.ndarray]
    duals: Dict[int, np.ndarray]
    rho_g: float
    mu: np.ndarray
    nu: np.ndarray
    w: np.ndarray

    @property
    def closed_neighborhood(self) -> Tuple[int, ...]:
        """G_s together with s itself, ascending."""
        return tuple(sorted(set(self.neighbors) | {self.sat}))

    @property
    def others(self) -> np.ndarray:
        """Satellite indices other than `sat`."""
        return np.array([i for i in range(self.delta.shape[0]) if i != self.sat], dtype=int)

    @property
    def served(self) -> Tuple[int, ...]:
        return tuple(int(u) for u in np.flatnonzero(self.delta[self.sat]))

    def copy(self) -> 'ConsensusState':
        return ConsensusState(
            sat=self.sat,
            neighbors=self.neighbors,
            delta=self.delta,
            g_local=self.g_local.copy(),
            snapshots={j: v.copy() for j, v in self.snapshots.items()},
            duals={j: v.copy() for j, v in self.duals.items()},
            rho_g=self.rho_g,
            mu=self.mu.copy(),
            nu=self.nu.copy(),
            w=self.w.copy(),
        )
