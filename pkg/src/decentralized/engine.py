"""
Decentralized WMMSE with consensus ADMM over the ISL graph.

Every satellite keeps its own copy of the network-wide beam-domain gains,
its own receive scalars and weights, and one dual variable per member of
its closed neighborhood. A consensus round is a parallel map of local
solves over satellites followed by a barrier at which all messages are
committed at once, so results do not depend on the worker count.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from src.common.config import worker_count
from src.common.exceptions import LocalSolveError, LeoCoopBfError
from src.common.interfaces import (
    BeamformerSet, BeamformingSolver, ConsensusState, SchedulingMask, SolveOutcome, SolveReport,
    StatisticalCsi, WmmseAux
)
from src.common.utils import get_logger
from src.communication.network import (
    IslNetwork, IslTopology, OverheadLedger, build_topology, check_overhead_layout, overhead_report, pack_gains,
    unpack_gains
)
from src.metrics.rates import compute_beam_gains, optimal_aux, sum_rate, update_mu, update_nu, wmmse_objective
from src.optimization.local_solver import solve_local
from src.optimization.oracles import generic_local_oracle
from src.scheduling.baselines import mrt_beamformers

logger = get_logger(__name__)


@dataclass
class DecentralizedOptions:
    """Schedule, penalty and stopping rules of the decentralized solve."""
    rho_g: float = 1.0
    rho_scaling: str = "absolute"
    adaptive_rho: bool = False
    schedule: str = "flattened"
    init_copies: str = "zero"
    local_solver: str = "low_complexity"
    tol: float = 1e-4
    max_outer: int = 500
    inner_tol: float = 1e-4
    max_inner: int = 50
    line_search_tol: float = 1e-10
    eig_floor: float = 1e-12
    max_bisect: int = 200
    workers: Optional[int] = None


def reference_curvature(g: np.ndarray, csi: StatisticalCsi) -> float:
    """Typical curvature nu |mu|^2 mean(diag T_u) of the objective at g, averaged over users."""
    aux = optimal_aux(g, csi)
    diag_mean = np.mean(np.diagonal(csi.correlation, axis1=1, axis2=2), axis=1)
    value = float(np.mean(aux.nu * np.abs(aux.mu) ** 2 * diag_mean))
    return value if value > 0.0 else 1.0


def init_consensus_states(csi: StatisticalCsi, mask: SchedulingMask, budgets: np.ndarray,
                          topology: IslTopology, opts: DecentralizedOptions) -> List[ConsensusState]:
    """MRT beamformers, own-entry copies, zero duals.

    With init_copies == "zero" the entries of the other satellites start at
    zero; with "mrt" every satellite starts from the full MRT gains.
    Snapshots of neighbors are filled by the first exchange.
    """
    W = mrt_beamformers(csi, mask, budgets)
    g_mrt = compute_beam_gains(csi, mask, W)
    rho = opts.rho_g
    if opts.rho_scaling == "curvature":
        rho *= reference_curvature(g_mrt, csi)
    S, U = mask.delta.shape
    states = []
    for s in range(S):
        if opts.init_copies == "mrt":
            g_local = g_mrt.copy()
        else:
            g_local = np.zeros_like(g_mrt)
            g_local[:, :, s] = g_mrt[:, :, s]
        neighbors = topology.neighbors(s)
        closed = sorted(set(neighbors) | {s})
        states.append(ConsensusState(
            sat=s,
            neighbors=neighbors,
            delta=mask.delta,
            g_local=g_local,
            snapshots={s: g_local.copy()},
            duals={j: np.zeros((U, U, S - 1), dtype=complex) for j in closed},
            rho_g=rho,
            mu=np.zeros(U, dtype=complex),
            nu=np.ones(U),
            w=W.w[s].copy(),
        ))
    logger.debug(f"Initialized {S} consensus states with rho_g={rho:.3e}")
    return states


def local_outer_update(state: ConsensusState, csi: StatisticalCsi) -> WmmseAux:
    """Receive scalars then weights, evaluated on the satellite's local copy."""
    mu = update_mu(state.g_local, csi)
    nu = update_nu(WmmseAux(mu=mu, nu=np.ones(mu.shape)), state.g_local, csi)
    return WmmseAux(mu=mu, nu=nu)


def local_objective(state: ConsensusState, csi: StatisticalCsi) -> float:
    return wmmse_objective(WmmseAux(mu=state.mu, nu=state.nu), state.g_local, csi)


def exchange(states: List[ConsensusState], network: IslNetwork, counted: bool = True) -> np.ndarray:
    """Send every local copy to its neighbors, commit, and store the receptions."""
    for state in states:
        network.broadcast(state.sat, pack_gains(state.g_local, state.delta))
    counts = network.commit(counted=counted)
    for state in states:
        for sender, payload in network.receive(state.sat).items():
            state.snapshots[sender] = unpack_gains(payload, state.delta)
        state.snapshots[state.sat] = state.g_local.copy()
    return counts


def primal_residual(states: List[ConsensusState]) -> float:
    """max over s, j in G_s of ||g^(s) - g~^(j)||_inf."""
    worst = 0.0
    for state in states:
        for j in state.neighbors:
            diff = np.abs(state.g_local - state.snapshots[j])
            worst = max(worst, float(diff.max()) if diff.size else 0.0)
    return worst


def _local_step(state: ConsensusState, csi: StatisticalCsi, budget: float,
                opts: DecentralizedOptions) -> Tuple[np.ndarray, np.ndarray]:
    try:
        if opts.local_solver == "generic":
            return generic_local_oracle(state, csi, budget, tol=1e-12)
        solution = solve_local(state, csi, budget, opts.line_search_tol, opts.eig_floor, opts.max_bisect)
        return solution.w, solution.g
    except LeoCoopBfError as exc:
        raise LocalSolveError(state.sat, str(exc), exc) from exc
    except np.linalg.LinAlgError as exc:
        raise LocalSolveError(state.sat, str(exc), exc) from exc


def consensus_round(states: List[ConsensusState], network: IslNetwork, csi: StatisticalCsi,
                    budgets: np.ndarray, opts: DecentralizedOptions,
                    executor: ThreadPoolExecutor) -> Tuple[List[ConsensusState], np.ndarray]:
    """One synchronous C-ADMM round.

    All satellites solve against the pre-round snapshots, their new copies
    are exchanged at the barrier, then each dual moves along the fresh
    disagreement z_j <- z_j + rho (g^(s) - g~^(j)) on the entries other than s.

    Returns:
        The new states and the scalars sent per satellite.

    Raises:
        LocalSolveError: If any local solve fails, naming the satellite.
    """
    results = list(executor.map(lambda st: _local_step(st, csi, float(budgets[st.sat]), opts), states))
    updated = []
    for state, (w, g) in zip(states, results):
        new = state.copy()
        new.w = w
        new.g_local = g
        updated.append(new)
    counts = exchange(updated, network)
    for state in updated:
        others = state.others
        for j in state.closed_neighborhood:
            state.duals[j] = state.duals[j] + state.rho_g * (
                state.g_local[:, :, others] - state.snapshots[j][:, :, others]
            )
    return updated, counts


def _adapt_rho(states: List[ConsensusState], previous: List[ConsensusState], residual: float) -> None:
    """Residual balancing: grow rho when disagreement dominates, shrink it when motion does."""
    motion = max(float(np.abs(new.g_local - old.g_local).max()) for new, old in zip(states, previous))
    dual_residual = states[0].rho_g * motion
    factor = 1.0
    if residual > 10.0 * dual_residual:
        factor = 2.0
    elif dual_residual > 10.0 * residual:
        factor = 0.5
    if factor != 1.0:
        for state in states:
            state.rho_g *= factor
        logger.debug(f"Adapted rho_g to {states[0].rho_g:.3e}")


def _beamformers(states: List[ConsensusState], budgets: np.ndarray) -> BeamformerSet:
    return BeamformerSet(w=np.stack([state.w for state in states]),
                         power_budget=np.asarray(budgets, dtype=float).copy())


def run_decentralized(csi: StatisticalCsi, mask: SchedulingMask, budgets: np.ndarray,
                      topology: IslTopology,
                      opts: DecentralizedOptions = DecentralizedOptions()
                      ) -> Tuple[BeamformerSet, SolveReport, OverheadLedger]:
    """Decentralized solve over a connected ISL topology.

    The consensus runs on csi.normalized(), so copies, duals, rho_g and the
    primal residual all live on the unit-noise gain scale while rates and
    beamformers are those of the physical links. Copies and duals carry
    over from one outer iteration to the next.

    Stops when satellite 0's local objective changes by less than tol
    (relative) and the primal residual is below inner_tol, or after
    max_outer outer iterations.

    Returns:
        Beamformers, traces (sum rate, satellite-0 objective, residual,
        cumulative overhead) and the overhead ledger.

    Raises:
        OverheadMismatchError: If the served-set sizes cannot give the
            closed-form overhead.
        LocalSolveError: If a local solve fails.
    """
    started = time.perf_counter()
    check_overhead_layout(topology, mask)
    budgets = np.broadcast_to(np.asarray(budgets, dtype=float), (csi.n_sats,)).copy()
    work = csi.normalized()
    network = IslNetwork(topology)
    states = init_consensus_states(work, mask, budgets, topology, opts)
    exchange(states, network, counted=False)
    for state in states:
        aux = local_outer_update(state, work)
        state.mu, state.nu = aux.mu, aux.nu

    report = SolveReport()
    W = _beamformers(states, budgets)
    report.sum_rate_trace.append(sum_rate(compute_beam_gains(csi, mask, W), csi))
    report.objective_trace.append(local_objective(states[0], work))
    report.residual_trace.append(primal_residual(states))
    report.overhead_trace.append(network.ledger.cumulative.copy())

    inner_limit = 1 if opts.schedule == "flattened" else opts.max_inner
    workers = opts.workers if opts.workers is not None else worker_count()
    with ThreadPoolExecutor(max_workers=workers) as executor:
        for outer in range(1, opts.max_outer + 1):
            if outer > 1:
                for state in states:
                    aux = local_outer_update(state, work)
                    state.mu, state.nu = aux.mu, aux.nu
            residual = np.inf
            for _ in range(inner_limit):
                previous = states
                states, _ = consensus_round(states, network, work, budgets, opts, executor)
                residual = primal_residual(states)
                if opts.adaptive_rho:
                    _adapt_rho(states, previous, residual)
                if residual < opts.inner_tol:
                    break
            W = _beamformers(states, budgets)
            value = local_objective(states[0], work)
            last = report.objective_trace[-1]
            report.sum_rate_trace.append(sum_rate(compute_beam_gains(csi, mask, W), csi))
            report.objective_trace.append(value)
            report.residual_trace.append(residual)
            report.overhead_trace.append(network.ledger.cumulative.copy())
            report.iterations = outer
            change = abs(last - value) / max(abs(last), 1e-300)
            if change < opts.tol and residual < opts.inner_tol:
                report.converged = True
                break
    if not report.converged:
        logger.warning(f"Decentralized solve hit max_outer={opts.max_outer}, "
                       f"residual {report.residual_trace[-1]:.3e}")
    report.wall_time_s = time.perf_counter() - started
    logger.info(f"Decentralized solve on {topology.kind}: {report.iterations} iterations, "
                f"sum rate {report.sum_rate_trace[-1]:.4f} bps/Hz, converged={report.converged}")
    return W, report, network.ledger


class DecentralizedSolver(BeamformingSolver):
    """Decentralized WMMSE over a fixed ISL topology kind."""

    name = "decentralized"

    def __init__(self, topology_kind: str = "mesh", edges=None,
                 options: DecentralizedOptions = DecentralizedOptions()):
        self.topology_kind = topology_kind
        self.edges = edges
        self.options = options

    def solve(self, csi: StatisticalCsi, mask: SchedulingMask, budgets: np.ndarray) -> SolveOutcome:
        topology = build_topology(self.topology_kind, csi.n_sats, self.edges)
        W, report, ledger = run_decentralized(csi, mask, budgets, topology, self.options)
        overhead_report(ledger, topology, mask)
        return SolveOutcome(beamformers=W, report=report, ledger=ledger)
