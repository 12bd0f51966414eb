"""
Reference solvers used to cross-check the fast paths.

None of these exploit the block structure the production solvers rely on:
the elimination is solved entry by entry with dense linear systems, the
beamformer step bisects on the full-size KKT system, and the projected
gradient method only needs the Hessian and the linear term.
"""

from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from src.common.exceptions import NumericError
from src.common.interfaces import ConsensusState, SchedulingMask, StatisticalCsi, WmmseAux
from src.common.utils import get_logger
from src.optimization.local_solver import local_lagrangian

logger = get_logger(__name__)


def dense_elimination(state: ConsensusState, csi: StatisticalCsi, w_fixed: np.ndarray) -> np.ndarray:
    """Copies of the other satellites' entries by one dense solve per (u, l).

    Only entries i with l served by i are unknowns; the others stay zero.

    Returns:
        U x U x (S-1) array.
    """
    s = state.sat
    S, U, _ = csi.b.shape
    others = [i for i in range(S) if i != s]
    degree = len(state.neighbors) + 1
    rho = state.rho_g
    x = np.zeros((U, U, S - 1), dtype=complex)
    for u in range(U):
        T_u = np.outer(csi.alpha_bar[:, u], csi.alpha_bar[:, u]) + np.diag(csi.beta[:, u])
        c_u = state.nu[u] * abs(state.mu[u]) ** 2
        for l in range(U):
            keep = [k for k, i in enumerate(others) if state.delta[i, l]]
            if not keep:
                continue
            rows = [others[k] for k in keep]
            own = csi.b[s, u] @ w_fixed[l] * state.delta[s, l]
            q = c_u * T_u[np.ix_(rows, rows)] + 0.5 * rho * degree * np.eye(len(rows))
            f = np.zeros(len(rows), dtype=complex)
            for j in state.closed_neighborhood:
                f += 0.5 * rho * (state.snapshots[j][u, l, rows] - state.duals[j][u, l, keep] / rho)
            f -= c_u * T_u[rows, s] * own
            if l == u:
                f += state.nu[u] * np.conj(state.mu[u]) * csi.alpha_bar[rows, u]
            x[u, l, keep] = scipy.linalg.solve(q, f, assume_a="her")
    return x


def _fill_copies(state: ConsensusState, w: np.ndarray, csi: StatisticalCsi, x: np.ndarray) -> np.ndarray:
    g = np.zeros((csi.n_uts, csi.n_uts, csi.n_sats), dtype=complex)
    g[:, :, state.others] = x
    g[:, :, state.sat] = csi.b[state.sat] @ (w * state.delta[state.sat][:, None]).T
    return g


def _full_size_ball_solve(hessian: np.ndarray, linear: np.ndarray, budget: float,
                          tol: float = 1e-12, max_iter: int = 500) -> np.ndarray:
    """argmin x^H H x - 2 Re(r^H x) s.t. ||x||^2 <= P on the full-size system."""
    if not np.any(linear):
        return np.zeros_like(linear)
    x0 = scipy.linalg.lstsq(hessian, linear)[0]
    residual = np.linalg.norm(hessian @ x0 - linear)
    if residual <= 1e-10 * np.linalg.norm(linear) and np.linalg.norm(x0) ** 2 <= budget:
        return x0
    eye = np.eye(hessian.shape[0])

    def norm_sq(lam: float) -> float:
        return float(np.linalg.norm(scipy.linalg.solve(hessian + lam * eye, linear, assume_a="her")) ** 2)

    scale = max(float(np.max(np.abs(np.linalg.eigvalsh(hessian)))), np.linalg.norm(linear) / np.sqrt(budget))
    lo, hi = 0.0, scale * 1e-6
    while norm_sq(hi) > budget:
        lo, hi = hi, 2.0 * hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if norm_sq(mid) > budget:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * max(hi, 1e-300):
            break
    return scipy.linalg.solve(hessian + hi * eye, linear, assume_a="her")


def _w_step(state: ConsensusState, csi: StatisticalCsi, x: np.ndarray, budget: float) -> np.ndarray:
    """Exact beamformer minimization with the copies held fixed."""
    s = state.sat
    U, N = csi.n_uts, csi.n_antennas
    served = list(state.served)
    w = np.zeros((U, N), dtype=complex)
    if not served:
        return w
    c = state.nu * np.abs(state.mu) ** 2
    T = csi.correlation
    others = state.others
    size = len(served) * N
    hessian = np.zeros((size, size), dtype=complex)
    linear = np.zeros(size, dtype=complex)
    for k, l in enumerate(served):
        block = slice(k * N, (k + 1) * N)
        for u in range(U):
            b = csi.b[s, u]
            hessian[block, block] += c[u] * T[u, s, s] * np.outer(b.conj(), b)
            linear[block] -= c[u] * (T[u, s, others] @ x[u, l]) * b.conj()
        linear[block] += state.nu[l] * np.conj(state.mu[l]) * csi.alpha_bar[s, l] * csi.b[s, l].conj()
    solution = _full_size_ball_solve(hessian, linear, budget)
    w[served] = solution.reshape(len(served), N)
    return w


def generic_local_oracle(state: ConsensusState, csi: StatisticalCsi, budget: float, tol: float = 1e-12,
                         max_iter: int = 20000,
                         trace: Optional[List[float]] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Alternate exact copy and beamformer minimizations of the local problem.

    Args:
        state: Local state of the satellite.
        csi: Statistical CSI.
        budget: Power budget of the satellite in W.
        tol: Stop when the relative improvement drops below this.
        max_iter: Upper bound on alternations.
        trace: If given, receives the objective after each alternation.

    Returns:
        (w, g) with w of shape U x N and g of shape U x U x S.
    """
    w = np.array(state.w, dtype=complex, copy=True)
    previous = np.inf
    g = _fill_copies(state, w, csi, dense_elimination(state, csi, w))
    for iteration in range(max_iter):
        x = dense_elimination(state, csi, w)
        w = _w_step(state, csi, x, budget)
        x = dense_elimination(state, csi, w)
        g = _fill_copies(state, w, csi, x)
        value = local_lagrangian(state, csi, w, g)
        if trace is not None:
            trace.append(value)
        if np.isfinite(previous) and previous - value <= tol * max(1.0, abs(value)):
            logger.debug(f"Generic local oracle stopped after {iteration + 1} alternations")
            break
        previous = value
    return w, g


def project_onto_balls(x: np.ndarray, groups: Sequence[np.ndarray], budgets: Sequence[float]) -> np.ndarray:
    """Scale each group of coordinates back into its ball."""
    out = x.copy()
    for idx, budget in zip(groups, budgets):
        norm = np.linalg.norm(out[idx])
        limit = np.sqrt(budget)
        if norm > limit:
            out[idx] *= limit / norm
    return out


def projected_gradient_oracle(hessian: np.ndarray, linear: np.ndarray, groups: Sequence[np.ndarray],
                              budgets: Sequence[float], n_steps: int = 100000,
                              x0: Optional[np.ndarray] = None) -> Tuple[np.ndarray, float]:
    """FISTA for min x^H H x - 2 Re(r^H x) over a product of balls.

    Step size is 1 / lambda_max(H).

    Returns:
        The final iterate and its objective.

    Raises:
        NumericError: If the Hessian is not finite.
    """
    hessian = 0.5 * (hessian + hessian.conj().T)
    if not np.all(np.isfinite(hessian)):
        raise NumericError("non-finite Hessian in projected gradient oracle")
    lipschitz = float(np.max(np.linalg.eigvalsh(hessian)))
    x = np.zeros_like(linear) if x0 is None else project_onto_balls(np.asarray(x0, dtype=complex),
                                                                    groups, budgets)
    if lipschitz <= 0.0:
        # linear objective: the optimum sits on each ball's boundary along r
        x = np.zeros_like(linear)
        for idx, budget in zip(groups, budgets):
            norm = np.linalg.norm(linear[idx])
            if norm > 0.0:
                x[idx] = linear[idx] * np.sqrt(budget) / norm
        return x, quadratic_value(hessian, linear, x)
    step = 1.0 / lipschitz
    y = x.copy()
    t = 1.0
    for _ in range(n_steps):
        x_next = project_onto_balls(y - step * (hessian @ y - linear), groups, budgets)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = x_next + ((t - 1.0) / t_next) * (x_next - x)
        x, t = x_next, t_next
    return x, quadratic_value(hessian, linear, x)


def quadratic_value(hessian: np.ndarray, linear: np.ndarray, x: np.ndarray) -> float:
    return float((x.conj() @ hessian @ x).real - 2.0 * (linear.conj() @ x).real)


def ball_projected_gradient(theta: np.ndarray, xi: np.ndarray, budget: float,
                            n_steps: int = 100000) -> Tuple[np.ndarray, float]:
    """Projected gradient on a block-diagonal quadratic under one power ball.

    Args:
        theta: K x N x N blocks.
        xi: K x N linear terms.
        budget: Power budget.

    Returns:
        K x N blocks of w and the objective.
    """
    K, N = xi.shape
    hessian = scipy.linalg.block_diag(*theta) if K else np.zeros((0, 0), dtype=complex)
    x, value = projected_gradient_oracle(hessian, xi.reshape(-1), [np.arange(K * N)], [budget], n_steps)
    return x.reshape(K, N), value


def centralized_quadratic(aux: WmmseAux, csi: StatisticalCsi,
                          mask: SchedulingMask) -> Tuple[np.ndarray, np.ndarray, List[np.ndarray], List[Tuple[int, int]]]:
    """Dense form of the joint beamformer problem for fixed (mu, nu).

    Variables are the served w[s, l] stacked in (s, l) order.

    Returns:
        Hessian, linear term, per-satellite coordinate groups and the
        (s, l) label of every N-block.
    """
    S, U, N = csi.b.shape
    labels = [(s, l) for s in range(S) for l in mask.served_sets[s]]
    size = len(labels) * N
    hessian = np.zeros((size, size), dtype=complex)
    linear = np.zeros(size, dtype=complex)
    c = aux.nu * np.abs(aux.mu) ** 2
    T = csi.correlation
    for a, (s, l) in enumerate(labels):
        rows = slice(a * N, (a + 1) * N)
        linear[rows] = aux.nu[l] * np.conj(aux.mu[l]) * csi.alpha_bar[s, l] * csi.b[s, l].conj()
        for b_idx, (t, k) in enumerate(labels):
            if k != l:
                continue
            cols = slice(b_idx * N, (b_idx + 1) * N)
            for u in range(U):
                hessian[rows, cols] += c[u] * T[u, s, t] * np.outer(csi.b[s, u].conj(), csi.b[t, u])
    groups = []
    for s in range(S):
        blocks = [np.arange(a * N, (a + 1) * N) for a, (t, _) in enumerate(labels) if t == s]
        groups.append(np.concatenate(blocks) if blocks else np.zeros(0, dtype=int))
    return hessian, linear, groups, labels
