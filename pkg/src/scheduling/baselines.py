"""
User scheduling and baseline precoders.

Correlation-aware (CS) and random (RS) scheduling, the single-satellite
serving (SSS) assignment, and the MRT / ZF baseline beamformers. Baselines
use the statistical direction b(theta) only, like the optimizers.
"""

from typing import List

import numpy as np
import scipy.linalg

from src.common.exceptions import ConfigurationError
from src.common.interfaces import BeamformerSet, SchedulingMask, StatisticalCsi
from src.common.utils import get_logger

logger = get_logger(__name__)


def normalized_correlation(b: np.ndarray) -> np.ndarray:
    """|b_i^H b_j| / (||b_i|| ||b_j||) for the rows of b (U x N).

    Zero-norm responses are treated as fully correlated with everything.
    """
    norms = np.linalg.norm(b, axis=1)
    gram = np.abs(b.conj() @ b.T)
    denom = np.outer(norms, norms)
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = np.where(denom > 0.0, gram / np.where(denom > 0.0, denom, 1.0), 1.0)
    return corr


def network_response(b: np.ndarray) -> np.ndarray:
    """Per-UT responses of all satellites stacked: (S, U, N) -> (U, S * N)."""
    S, U, N = b.shape
    return np.transpose(b, (1, 0, 2)).reshape(U, S * N)


def schedule_cs(csi: StatisticalCsi, u_max: int, correlation: str = "network") -> SchedulingMask:
    """Greedy correlation-aware scheduling.

    Each satellite starts from its strongest UT (largest gamma) and keeps
    adding the candidate whose worst correlation with the selected set is
    smallest; ties go to the lower UT index. With correlation "network" the
    UTs are compared through their stacked responses from all satellites,
    so satellites differ only in their seed; "satellite" uses each
    satellite's own responses.

    Raises:
        ConfigurationError: For an unknown correlation kind.
    """
    if correlation not in ("network", "satellite"):
        raise ConfigurationError("cs_correlation", "must be 'network' or 'satellite'")
    S, U = csi.gamma.shape
    shared = normalized_correlation(network_response(csi.b)) if correlation == "network" else None
    served: List[List[int]] = []
    for s in range(S):
        if U <= u_max:
            served.append(list(range(U)))
            continue
        corr = shared if shared is not None else normalized_correlation(csi.b[s])
        chosen = [int(np.argmax(csi.gamma[s]))]
        worst = corr[chosen[0]].copy()
        while len(chosen) < u_max:
            candidates = np.ones(U, dtype=bool)
            candidates[chosen] = False
            scores = np.where(candidates, worst, np.inf)
            pick = int(np.argmin(scores))
            chosen.append(pick)
            worst = np.maximum(worst, corr[pick])
        served.append(sorted(chosen))
    logger.debug(f"CS scheduling served sets: {served}")
    return SchedulingMask.from_served_sets(served, U, u_max)


def schedule_rs(n_sats: int, n_uts: int, u_max: int, rng: np.random.Generator) -> SchedulingMask:
    """Uniform random u_max-subset per satellite.

    Raises:
        ConfigurationError: If u_max exceeds the number of UTs.
    """
    if u_max > n_uts:
        raise ConfigurationError("u_max", f"{u_max} exceeds the number of UTs {n_uts}")
    served = [sorted(int(u) for u in rng.choice(n_uts, size=u_max, replace=False))
              for _ in range(n_sats)]
    return SchedulingMask.from_served_sets(served, n_uts, u_max)


def sss_assign(mask: SchedulingMask, csi: StatisticalCsi) -> SchedulingMask:
    """Keep each UT only on its strongest scheduling satellite.

    Ties go to the lower satellite index.
    """
    delta = np.zeros_like(mask.delta)
    for u in range(mask.n_uts):
        sats = np.flatnonzero(mask.delta[:, u])
        if sats.size == 0:
            continue
        best = sats[int(np.argmax(csi.gamma[sats, u]))]
        delta[best, u] = 1
    return SchedulingMask(delta=delta, u_max=mask.u_max)


def _equal_power(directions: np.ndarray, budget: float) -> np.ndarray:
    """Normalize non-zero rows to an equal share of the budget."""
    norms = np.linalg.norm(directions, axis=1)
    active = norms > 0.0
    out = np.zeros_like(directions)
    if np.any(active):
        scale = np.sqrt(budget / np.count_nonzero(active))
        out[active] = directions[active] / norms[active, None] * scale
    return out


def mrt_beamformers(csi: StatisticalCsi, mask: SchedulingMask, budgets: np.ndarray) -> BeamformerSet:
    """Maximum-ratio transmission w[s, u] proportional to conj(b[s, u])."""
    S, U, N = csi.b.shape
    budgets = np.broadcast_to(np.asarray(budgets, dtype=float), (S,)).copy()
    w = np.zeros((S, U, N), dtype=complex)
    for s, served in enumerate(mask.served_sets):
        if served:
            w[s, list(served)] = _equal_power(csi.b[s, list(served)].conj(), budgets[s])
    return BeamformerSet(w=w, power_budget=budgets)


def zf_beamformers(csi: StatisticalCsi, mask: SchedulingMask, budgets: np.ndarray) -> BeamformerSet:
    """Zero-forcing within each satellite's served set.

    conj(b[s, u]) is projected onto the null space of the responses of the
    other users served by s. A user whose projection vanishes gets no power
    and a warning is logged.
    """
    S, U, N = csi.b.shape
    budgets = np.broadcast_to(np.asarray(budgets, dtype=float), (S,)).copy()
    w = np.zeros((S, U, N), dtype=complex)
    for s, served in enumerate(mask.served_sets):
        directions = np.zeros((len(served), N), dtype=complex)
        for k, u in enumerate(served):
            others = [j for j in served if j != u]
            target = csi.b[s, u].conj()
            if others:
                basis = scipy.linalg.null_space(csi.b[s, others])
                target = basis @ (basis.conj().T @ target)
            if np.linalg.norm(target) <= 1e-12 * max(np.linalg.norm(csi.b[s, u]), 1e-300):
                logger.warning(f"Empty ZF null-space projection for UT {u} at satellite {s}; zero power")
                target = np.zeros(N, dtype=complex)
            directions[k] = target
        if served:
            w[s, list(served)] = _equal_power(directions, budgets[s])
    return BeamformerSet(w=w, power_budget=budgets)
