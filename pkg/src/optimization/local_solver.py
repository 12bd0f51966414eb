"""
Low-complexity per-satellite solver.

Solves satellite s's augmented-Lagrangian subproblem in three steps:

1. The consensus copies of the other satellites' entries are eliminated in
   closed form. For every (u, l) they solve Q_ul x = f_ul, and the solution
   is affine in w[s, l]: x_ul = gamma_ul * (b[s,u]^T delta[s,l] w[s,l]) + zeta_ul.
2. Substituting back yields, for every served l, a quadratic
   w^H Theta_l w - 2 Re(xi_l^H w) with Theta_l = sum_u theta_ul conj(b_su) b_su^T.
3. The power-constrained problem over the block-diagonal Theta is solved by
   eigendecomposition of each block plus a scalar line search on the
   Lagrange multiplier.

Entries i of g_ul with l not served by i are scheduler-forced zeros. They
are removed from every linear system through the active mask.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from src.common.exceptions import NumericError
from src.common.interfaces import ConsensusState, StatisticalCsi, WmmseAux
from src.common.utils import get_logger
from src.metrics.rates import weighted_mse

logger = get_logger(__name__)


@dataclass
class EliminationOperators:
    """Closed-form elimination data of one satellite.

    Arrays are indexed [u, l, ...]; the last axis runs over the S-1 other
    satellites (`others`) or over all S satellites for omega_vec and eta.
    Gamma_ul = gamma_vec_ul b_su^T delta_sl and Omega_ul = omega_vec_ul b_su^T delta_sl.
    """
    sat: int
    others: np.ndarray
    active: np.ndarray
    q: np.ndarray
    q_inv: np.ndarray
    gamma_vec: np.ndarray
    zeta: np.ndarray
    g_bar: np.ndarray
    omega_vec: np.ndarray
    eta: np.ndarray
    penalty: float
    degree: int

    def gamma_matrix(self, csi: StatisticalCsi, u: int, l: int) -> np.ndarray:
        """Dense (S-1) x N operator Gamma_ul."""
        return np.outer(self.gamma_vec[u, l], csi.b[self.sat, u])

    def omega_matrix(self, csi: StatisticalCsi, u: int, l: int) -> np.ndarray:
        """Dense S x N operator Omega_ul."""
        return np.outer(self.omega_vec[u, l], csi.b[self.sat, u])


@dataclass
class ReducedQuadratic:
    """Block-diagonal quadratic over the served users of one satellite."""
    served: Tuple[int, ...]
    theta: np.ndarray
    xi: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray
    varpi: np.ndarray
    budget: float

    @classmethod
    def from_blocks(cls, served: Tuple[int, ...], theta: np.ndarray, xi: np.ndarray,
                    budget: float) -> 'ReducedQuadratic':
        """Eigendecompose every block and project xi onto the eigenbases.

        Raises:
            NumericError: If a block has non-finite entries.
        """
        theta = np.asarray(theta, dtype=complex)
        xi = np.asarray(xi, dtype=complex)
        if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(xi))):
            raise NumericError("non-finite reduced quadratic")
        theta = 0.5 * (theta + np.conj(np.swapaxes(theta, -1, -2)))
        if theta.shape[0] == 0:
            n = theta.shape[-1] if theta.ndim == 3 else 0
            return cls(served=tuple(served), theta=theta, xi=xi, eigvals=np.zeros((0, n)),
                       eigvecs=np.zeros((0, n, n), dtype=complex), varpi=np.zeros((0, n), dtype=complex),
                       budget=float(budget))
        eigvals, eigvecs = np.linalg.eigh(theta)
        varpi = np.einsum('knm,kn->km', eigvecs.conj(), xi)
        return cls(served=tuple(served), theta=theta, xi=xi, eigvals=eigvals, eigvecs=eigvecs,
                   varpi=varpi, budget=float(budget))

    def objective(self, w_blocks: np.ndarray) -> float:
        """Sum of w^H Theta w - 2 Re(xi^H w) over blocks."""
        quad = np.einsum('kn,knm,km->', w_blocks.conj(), self.theta, w_blocks).real
        lin = np.sum(self.xi.conj() * w_blocks).real
        return float(quad - 2.0 * lin)

    def h_eigen(self, lam: float) -> float:
        """||w(lam)||^2 - P via the eigen form."""
        omega = np.maximum(self.eigvals, 0.0)
        return float(np.sum(np.abs(self.varpi) ** 2 / (omega + lam) ** 2) - self.budget)

    def h_inverse(self, lam: float) -> float:
        """||w(lam)||^2 - P via direct solves of (Theta + lam I) w = xi."""
        n = self.theta.shape[-1]
        w = np.linalg.solve(self.theta + lam * np.eye(n)[None], self.xi[..., None])[..., 0]
        return float(np.sum(np.abs(w) ** 2) - self.budget)


@dataclass
class LocalSolution:
    """Output of one local solve."""
    w: np.ndarray
    g: np.ndarray
    lam: float
    reduced_objective: float


def _local_aux(state: ConsensusState) -> WmmseAux:
    return WmmseAux(mu=state.mu, nu=state.nu)


def scheduler_zero_mask(delta: np.ndarray) -> np.ndarray:
    """U x U x S boolean mask of entries g[u, l, i] allowed to be non-zero."""
    S, U = delta.shape
    return np.broadcast_to(delta.T.astype(bool)[None, :, :], (U, U, S))


def consensus_average(state: ConsensusState) -> np.ndarray:
    """g_bar = sum over j in G_s + {s} of (snapshot_j - z_j / rho), other entries only."""
    others = state.others
    g_bar = np.zeros(state.g_local.shape[:2] + (others.size,), dtype=complex)
    for j in state.closed_neighborhood:
        g_bar += state.snapshots[j][..., others] - state.duals[j] / state.rho_g
    return g_bar


def elimination_operators(state: ConsensusState, csi: StatisticalCsi) -> EliminationOperators:
    """Closed-form elimination of the consensus copies.

    Raises:
        NumericError: If rho_g is not positive or some Q_ul is singular.
    """
    if not state.rho_g > 0.0:
        raise NumericError(f"penalty rho_g must be positive, got {state.rho_g}")
    s = state.sat
    S, U, _ = csi.b.shape
    others = state.others
    n_o = others.size
    degree = len(state.neighbors) + 1
    penalty = 0.5 * state.rho_g * degree

    T = csi.correlation
    c = state.nu * np.abs(state.mu) ** 2
    t_oo = T[:, others][:, :, others]
    t_os = T[:, others, s]
    active = state.delta[others, :].T.astype(float)
    eye = np.eye(n_o)

    # Q_ul = M_l (c_u T_u + penalty I) M_l + (I - M_l)
    outer = active[:, :, None] * active[:, None, :]
    q = (c[:, None, None, None] * t_oo[:, None, :, :] * outer[None, :, :, :]
         + eye[None, None] * (penalty * active + (1.0 - active))[None, :, None, :])
    try:
        q_inv = np.linalg.inv(q)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"singular elimination system at satellite {s}") from exc

    g_bar = consensus_average(state) * active[None, :, :]
    rhs = 0.5 * state.rho_g * g_bar
    lin = state.nu * np.conj(state.mu)
    idx = np.arange(U)
    rhs[idx, idx, :] += lin[:, None] * csi.alpha_bar[others, :].T * active
    zeta = np.einsum('ulij,ulj->uli', q_inv, rhs) * active[None, :, :]

    serve = state.delta[s].astype(float)
    gamma_vec = -c[:, None, None] * np.einsum('ulij,ulj->uli', q_inv, active[None, :, :] * t_os[:, None, :])
    gamma_vec = gamma_vec * serve[None, :, None] * active[None, :, :]

    omega_vec = np.zeros((U, U, S), dtype=complex)
    omega_vec[:, :, s] = serve[None, :]
    omega_vec[:, :, others] = gamma_vec
    eta = np.zeros((U, U, S), dtype=complex)
    eta[:, :, others] = zeta
    return EliminationOperators(sat=s, others=others, active=active, q=q, q_inv=q_inv,
                                gamma_vec=gamma_vec, zeta=zeta, g_bar=g_bar, omega_vec=omega_vec,
                                eta=eta, penalty=penalty, degree=degree)


def own_gains(state: ConsensusState, csi: StatisticalCsi, w_s: np.ndarray) -> np.ndarray:
    """c[u, l] = b[s, u]^T delta[s, l] w[s, l]."""
    s = state.sat
    return csi.b[s] @ (w_s * state.delta[s][:, None]).T


def stationarity_rhs(state: ConsensusState, csi: StatisticalCsi, ops: EliminationOperators,
                     w_s: np.ndarray) -> np.ndarray:
    """f_ul of the elimination system Q_ul x_ul = f_ul for a given w."""
    s = state.sat
    U = csi.n_uts
    c = state.nu * np.abs(state.mu) ** 2
    own = own_gains(state, csi, w_s)
    t_os = csi.correlation[:, ops.others, s]
    f = 0.5 * state.rho_g * ops.g_bar - c[:, None, None] * t_os[:, None, :] * own[:, :, None] * ops.active[None]
    idx = np.arange(U)
    f[idx, idx, :] += (state.nu * np.conj(state.mu))[:, None] * csi.alpha_bar[ops.others, :].T * ops.active
    return f


def eliminate_g(state: ConsensusState, csi: StatisticalCsi, w_fixed: np.ndarray,
                ops: Optional[EliminationOperators] = None) -> np.ndarray:
    """Optimal copies of the other satellites' entries for fixed w[s].

    Args:
        state: Local state of satellite s.
        csi: Statistical CSI.
        w_fixed: U x N beamformers of satellite s.
        ops: Precomputed operators (built when omitted).

    Returns:
        U x U x (S-1) array x_ul = gamma_ul * c_ul + zeta_ul.
    """
    ops = ops if ops is not None else elimination_operators(state, csi)
    own = own_gains(state, csi, w_fixed)
    return ops.gamma_vec * own[:, :, None] + ops.zeta


def assemble_reduced(state: ConsensusState, csi: StatisticalCsi, budget: float = 1.0,
                     ops: Optional[EliminationOperators] = None) -> ReducedQuadratic:
    """Reduced quadratic in w[s] after eliminating the consensus copies."""
    ops = ops if ops is not None else elimination_operators(state, csi)
    s = state.sat
    T = csi.correlation
    c = state.nu * np.abs(state.mu) ** 2
    U = csi.n_uts

    t_omega = np.einsum('ust,ult->uls', T, ops.omega_vec)
    theta_w = (ops.penalty * np.sum(np.abs(ops.gamma_vec) ** 2, axis=2)
               + c[:, None] * np.sum(ops.omega_vec.conj() * t_omega, axis=2).real)

    chi = ops.penalty * np.sum(ops.gamma_vec.conj() * (ops.g_bar / ops.degree - ops.zeta), axis=2)
    t_eta = np.einsum('ust,ult->uls', T, ops.eta)
    chi -= c[:, None] * np.sum(ops.omega_vec.conj() * t_eta, axis=2)
    idx = np.arange(U)
    chi[idx, idx] += (state.nu * np.conj(state.mu)
                      * np.sum(ops.omega_vec[idx, idx].conj() * csi.alpha_bar.T, axis=1))

    b_s = csi.b[s]
    served = np.asarray(state.served, dtype=int)
    theta = np.einsum('ul,un,um->lnm', theta_w[:, served], b_s.conj(), b_s)
    xi = np.einsum('ul,un->ln', chi[:, served], b_s.conj())
    return ReducedQuadratic.from_blocks(state.served, theta, xi, budget)


def solve_ball_constrained(quad: ReducedQuadratic, line_search_tol: float = 1e-10,
                           eig_floor: float = 1e-12, max_bisect: int = 200) -> Tuple[np.ndarray, float]:
    """Minimize sum_k w_k^H Theta_k w_k - 2 Re(xi_k^H w_k) s.t. sum ||w_k||^2 <= P.

    KKT: (Theta + lam I) w = xi, lam >= 0, lam (||w||^2 - P) = 0. In the
    eigenbasis ||w(lam)||^2 = sum |varpi|^2 / (omega + lam)^2, which is
    strictly decreasing in lam, so lam is found by bracketing and bisection.

    Returns:
        Blocks of w (one row per served user) and the multiplier lam.

    Raises:
        NumericError: If the eigenvalues are not finite.
    """
    omega = quad.eigvals
    if omega.size == 0:
        return np.zeros_like(quad.xi), 0.0
    if not np.all(np.isfinite(omega)):
        raise NumericError("non-finite eigenvalues in reduced quadratic")
    power = np.abs(quad.varpi) ** 2
    budget = quad.budget
    if not np.any(power > 0.0):
        return np.zeros_like(quad.xi), 0.0

    omega_max = max(float(omega.max()), 0.0)
    floored = np.maximum(omega, eig_floor * omega_max)
    with np.errstate(divide="ignore"):
        h0 = np.sum(np.where(power > 0.0, power / floored ** 2, 0.0)) - budget
    if omega_max > 0.0 and h0 <= 0.0:
        weights = np.where(power > 0.0, 1.0 / floored, 0.0)
        return np.einsum('knm,km->kn', quad.eigvecs, weights * quad.varpi), 0.0

    omega = np.maximum(omega, 0.0)

    def h(lam: float) -> float:
        return float(np.sum(power / (omega + lam) ** 2) - budget)

    lo = 0.0
    hi = omega_max * 1e-6 if omega_max > 0.0 else np.sqrt(np.sum(power) / budget) * 1e-6
    while h(hi) > 0.0:
        lo = hi
        hi *= 2.0
    lam = hi
    for _ in range(max_bisect):
        mid = 0.5 * (lo + hi)
        value = h(mid)
        if abs(value) < line_search_tol * budget:
            lam = mid
            break
        if value > 0.0:
            lo = mid
        else:
            hi = mid
        lam = hi
    w = np.einsum('knm,km->kn', quad.eigvecs, quad.varpi / (omega + lam))
    return w, float(lam)


def recover_gains(state: ConsensusState, csi: StatisticalCsi, ops: EliminationOperators,
                  w_s: np.ndarray) -> np.ndarray:
    """Full local copy g = Omega w + eta, with the own entry set from w."""
    own = own_gains(state, csi, w_s)
    g = ops.omega_vec * own[:, :, None] + ops.eta
    g[:, :, state.sat] = own
    return np.where(scheduler_zero_mask(state.delta), g, 0.0)


def solve_local(state: ConsensusState, csi: StatisticalCsi, budget: float,
                line_search_tol: float = 1e-10, eig_floor: float = 1e-12,
                max_bisect: int = 200) -> LocalSolution:
    """Optimal local solve: eliminate, assemble, line search, recover."""
    ops = elimination_operators(state, csi)
    quad = assemble_reduced(state, csi, budget, ops)
    w_blocks, lam = solve_ball_constrained(quad, line_search_tol, eig_floor, max_bisect)
    w = np.zeros((csi.n_uts, csi.n_antennas), dtype=complex)
    if quad.served:
        w[list(quad.served)] = w_blocks
    g = recover_gains(state, csi, ops, w)
    return LocalSolution(w=w, g=g, lam=lam, reduced_objective=quad.objective(w_blocks))


def local_lagrangian(state: ConsensusState, csi: StatisticalCsi, w_s: np.ndarray,
                     g_local: np.ndarray) -> float:
    """Augmented Lagrangian of satellite s (without the constant -ln nu terms).

    The own entry of g_local is overwritten with b^T delta w before evaluation.
    """
    g = np.array(g_local, dtype=complex, copy=True)
    g[:, :, state.sat] = own_gains(state, csi, w_s)
    value = weighted_mse(_local_aux(state), g, csi)
    x = g[:, :, state.others]
    for j in state.closed_neighborhood:
        diff = x - state.snapshots[j][:, :, state.others]
        value += float(np.sum(np.conj(state.duals[j]) * diff).real)
        value += 0.5 * state.rho_g * float(np.sum(np.abs(diff) ** 2))
    return value
