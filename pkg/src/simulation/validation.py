"""
Self-checks behind `leocoopbf validate`.

The quick suite covers closed-form cases and small oracle comparisons; the
full suite adds Monte-Carlo bound checks, the local-solver oracle
cross-check, the decentralized-versus-centralized gap and a runtime
comparison. Each check reports a name, a pass flag and a short detail.
"""

import time
from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np

from src.channel.channel_model import derive_statistics
from src.common.exceptions import LeoCoopBfError
from src.common.interfaces import (
    ConsensusState, SchedulingMask, StatisticalCsi
)
from src.common.utils import get_logger, time_function
from src.communication.network import IslNetwork, build_topology, overhead_formula
from src.decentralized.engine import DecentralizedOptions, exchange, init_consensus_states, run_decentralized
from src.metrics.rates import compute_beam_gains, monte_carlo_rate, rate_lower_bound
from src.optimization.centralized import CentralizedOptions, run_centralized
from src.optimization.local_solver import (
    ReducedQuadratic, eliminate_g, elimination_operators, local_lagrangian, solve_ball_constrained, solve_local
)
from src.optimization.oracles import ball_projected_gradient, dense_elimination, generic_local_oracle
from src.scheduling.baselines import mrt_beamformers

logger = get_logger(__name__)


@dataclass
class CheckResult:
    """Outcome of one validation check."""
    name: str
    passed: bool
    detail: str = ""


def random_csi(rng: np.random.Generator, n_sats: int, n_uts: int, n_antennas: int,
               noise_power: float = 0.1, with_variance: bool = True) -> StatisticalCsi:
    """Well-scaled synthetic statistical CSI for checks and tests."""
    gamma = rng.uniform(0.5, 2.0, size=(n_sats, n_uts))
    kappa = rng.uniform(2.0, 20.0, size=(n_sats, n_uts))
    alpha_bar, beta = derive_statistics(gamma, kappa)
    if not with_variance:
        beta = np.zeros_like(beta)
    b = (rng.standard_normal((n_sats, n_uts, n_antennas))
         + 1j * rng.standard_normal((n_sats, n_uts, n_antennas))) / np.sqrt(2.0)
    return StatisticalCsi(gamma=gamma, kappa=kappa, alpha_bar=alpha_bar, beta=beta, b=b,
                          noise_power=noise_power)


def random_mask(rng: np.random.Generator, n_sats: int, n_uts: int, u_max: int) -> SchedulingMask:
    """u_max random users per satellite."""
    served = [sorted(rng.choice(n_uts, size=min(u_max, n_uts), replace=False).tolist()) for _ in range(n_sats)]
    return SchedulingMask.from_served_sets(served, n_uts, u_max)


def _complex(rng: np.random.Generator, shape: Tuple[int, ...]) -> np.ndarray:
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_state(rng: np.random.Generator, csi: StatisticalCsi, mask: SchedulingMask, sat: int,
                 neighbors: Tuple[int, ...], rho_g: float = 1.0, budget: float = 1.0) -> ConsensusState:
    """Consensus state with random copies, duals, receive scalars and weights.

    Scheduler-forced zeros are respected in every copy and dual.
    """
    S, U, N = csi.b.shape
    allowed = np.broadcast_to(mask.delta.T.astype(bool)[None], (U, U, S))
    others = [i for i in range(S) if i != sat]
    closed = sorted(set(neighbors) | {sat})
    g_local = np.where(allowed, _complex(rng, (U, U, S)), 0.0)
    snapshots = {j: np.where(allowed, _complex(rng, (U, U, S)), 0.0) for j in closed}
    snapshots[sat] = g_local.copy()
    duals = {j: np.where(allowed[:, :, others], 0.3 * _complex(rng, (U, U, S - 1)), 0.0) for j in closed}
    w = np.where(mask.delta[sat][:, None].astype(bool), _complex(rng, (U, N)), 0.0)
    norm = np.linalg.norm(w)
    if norm > 0.0:
        w *= 0.5 * np.sqrt(budget) / norm
    return ConsensusState(sat=sat, neighbors=tuple(neighbors), delta=mask.delta, g_local=g_local,
                          snapshots=snapshots, duals=duals, rho_g=rho_g,
                          mu=0.5 * _complex(rng, (U,)), nu=rng.uniform(0.5, 2.0, size=U), w=w)


def _check(name: str, func: Callable[[], Tuple[bool, str]]) -> CheckResult:
    try:
        passed, detail = func()
    except (LeoCoopBfError, ArithmeticError, ValueError) as exc:
        return CheckResult(name, False, f"{type(exc).__name__}: {exc}")
    return CheckResult(name, bool(passed), detail)


def check_topology_degrees() -> Tuple[bool, str]:
    expected = {"ring": [2] * 5, "star": [4, 1, 1, 1, 1], "mesh": [4] * 5}
    got = {kind: build_topology(kind, 5).degrees().tolist() for kind in expected}
    return got == expected, str(got)


def check_overhead_exactness() -> Tuple[bool, str]:
    """One counted exchange at S=5, U=32, U_max=8 against the closed form."""
    rng = np.random.default_rng(7)
    csi = random_csi(rng, 5, 32, 2)
    mask = random_mask(rng, 5, 32, 8)
    budgets = np.ones(5)
    details = []
    expected = {"ring": [2560] * 5, "mesh": [5120] * 5, "star": [5120, 1280, 1280, 1280, 1280]}
    ok = True
    for kind, values in expected.items():
        topology = build_topology(kind, 5)
        states = init_consensus_states(csi, mask, budgets, topology, DecentralizedOptions())
        counts = exchange(states, IslNetwork(topology))
        formula = overhead_formula(topology, mask)
        ok = ok and counts.tolist() == values and formula.tolist() == values
        details.append(f"{kind}={counts.tolist()}")
    return ok, ", ".join(details)


def check_ball_closed_forms() -> Tuple[bool, str]:
    identity = ReducedQuadratic.from_blocks((0, 1), np.stack([np.eye(2)] * 2),
                                            np.array([[1.0, 1.0], [1.0, 1.0]], dtype=complex), 1.0)
    w, lam = solve_ball_constrained(identity)
    ok_identity = abs(lam - 1.0) < 1e-8 and abs(np.linalg.norm(w) - 1.0) < 1e-8
    xi = np.array([[3.0, 4.0j]])
    zero = ReducedQuadratic.from_blocks((0,), np.zeros((1, 2, 2)), xi, 4.0)
    w0, lam0 = solve_ball_constrained(zero)
    ok_zero = abs(lam0 - 5.0 / 2.0) < 1e-8 and np.allclose(w0, xi * 2.0 / 5.0, atol=1e-8)
    return ok_identity and ok_zero, f"lambda(I)={lam:.6g}, lambda(0)={lam0:.6g}"


def check_elimination(rho_g: float = 1.0, instances: int = 100) -> Tuple[bool, str]:
    """Closed-form copies against dense per-entry solves; Q must be positive definite."""
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(instances):
        S = int(rng.choice([2, 3, 5]))
        U = int(rng.choice([2, 4]))
        csi = random_csi(rng, S, U, 3)
        mask = random_mask(rng, S, U, max(1, U - 1))
        state = random_state(rng, csi, mask, 0, tuple(range(1, S)), rho_g=rho_g)
        ops = elimination_operators(state, csi)
        eigs = np.linalg.eigvalsh(ops.q)
        if eigs.min() <= 0.0:
            return False, f"Q not positive definite (min eigenvalue {eigs.min():.3e})"
        fast = eliminate_g(state, csi, state.w, ops)
        slow = dense_elimination(state, csi, state.w)
        worst = max(worst, float(np.linalg.norm(fast - slow) / max(np.linalg.norm(slow), 1e-300)))
    return worst < 1e-10, f"max relative error {worst:.3e}"


def check_centralized_monotone(instances: int = 100) -> Tuple[bool, str]:
    rng = np.random.default_rng(13)
    for k in range(instances):
        csi = random_csi(rng, 2, 3, 2)
        mask = random_mask(rng, 2, 3, 2)
        W, report = run_centralized(csi, mask, np.ones(2), CentralizedOptions(max_outer=20))
        trace = np.array(report.objective_trace)
        if np.any(np.diff(trace) > 1e-9 * np.maximum(1.0, np.abs(trace[:-1]))):
            return False, f"objective increased on instance {k}"
        if not W.is_feasible():
            return False, f"power budget violated on instance {k}"
    return True, f"{instances} instances monotone and feasible"


def check_bound_without_variance() -> Tuple[bool, str]:
    """With beta = 0 the Monte-Carlo estimate equals the bound."""
    rng = np.random.default_rng(17)
    csi = random_csi(rng, 2, 3, 2, with_variance=False)
    mask = random_mask(rng, 2, 3, 2)
    W = mrt_beamformers(csi, mask, np.ones(2))
    bound = rate_lower_bound(compute_beam_gains(csi, mask, W), csi)
    estimate, _ = monte_carlo_rate(csi, mask, W, 1000, rng)
    gap = float(np.max(np.abs(bound - estimate)))
    return gap < 1e-9, f"max gap {gap:.3e}"


def check_monte_carlo_bound(instances: int = 10, n_samples: int = 100000) -> Tuple[bool, str]:
    rng = np.random.default_rng(19)
    for k in range(instances):
        csi = random_csi(rng, 3, 4, 4)
        mask = random_mask(rng, 3, 4, 3)
        W = mrt_beamformers(csi, mask, np.ones(3))
        bound = rate_lower_bound(compute_beam_gains(csi, mask, W), csi)
        mean, stderr = monte_carlo_rate(csi, mask, W, n_samples, rng)
        if np.any(bound > mean + 3.0 * stderr):
            return False, f"bound above Monte-Carlo estimate on instance {k}"
    return True, f"{instances} instances"


def check_local_oracle(instances: int = 5) -> Tuple[bool, str]:
    rng = np.random.default_rng(23)
    worst = -np.inf
    for _ in range(instances):
        csi = random_csi(rng, 3, 3, 4)
        mask = random_mask(rng, 3, 3, 2)
        state = random_state(rng, csi, mask, 0, (1, 2))
        fast = solve_local(state, csi, 1.0)
        w_ref, g_ref = generic_local_oracle(state, csi, 1.0)
        gap = local_lagrangian(state, csi, fast.w, fast.g) - local_lagrangian(state, csi, w_ref, g_ref)
        worst = max(worst, gap)
    return worst < 1e-6, f"worst gap {worst:.3e}"


def check_ball_oracle(instances: int = 10) -> Tuple[bool, str]:
    rng = np.random.default_rng(29)
    worst = -np.inf
    for _ in range(instances):
        K, N = int(rng.integers(1, 4)), int(rng.integers(2, 6))
        A = _complex(rng, (K, N, N))
        theta = np.einsum('knm,kpm->knp', A, A.conj()) / N
        xi = 2.0 * _complex(rng, (K, N))
        quad = ReducedQuadratic.from_blocks(tuple(range(K)), theta, xi, 1.0)
        w, lam = solve_ball_constrained(quad)
        _, reference = ball_projected_gradient(theta, xi, 1.0)
        worst = max(worst, quad.objective(w) - reference)
        if lam * (np.sum(np.abs(w) ** 2) - 1.0) > 1e-8:
            return False, "complementary slackness violated"
    return worst < 1e-7, f"worst gap {worst:.3e}"


def check_decentralized_gap(drops: int = 5) -> Tuple[bool, str]:
    rng = np.random.default_rng(31)
    worst = 0.0
    for _ in range(drops):
        csi = random_csi(rng, 3, 6, 4)
        mask = random_mask(rng, 3, 6, 3)
        _, central = run_centralized(csi, mask, np.ones(3))
        for kind in ("mesh", "ring", "star"):
            _, report, _ = run_decentralized(csi, mask, np.ones(3), build_topology(kind, 3))
            gap = abs(report.sum_rate_trace[-1] - central.sum_rate_trace[-1]) / central.sum_rate_trace[-1]
            worst = max(worst, gap)
    return worst < 0.02, f"worst relative gap {worst:.3%}"


def check_runtime(n_antennas: int = 64) -> Tuple[bool, str]:
    """Low-complexity local solve against five generic alternations at S=5, U=32, |U_s|=8."""
    rng = np.random.default_rng(37)
    csi = random_csi(rng, 5, 32, n_antennas)
    mask = random_mask(rng, 5, 32, 8)
    state = random_state(rng, csi, mask, 0, (1, 4))
    started = time.perf_counter()
    solve_local(state, csi, 1.0)
    fast = time.perf_counter() - started
    started = time.perf_counter()
    generic_local_oracle(state, csi, 1.0, tol=1e-8, max_iter=5)
    slow = time.perf_counter() - started
    return slow >= 10.0 * fast, f"low-complexity {fast:.3f}s, generic {slow:.3f}s"


def check_solver_runtimes(rounds: int = 10) -> Tuple[bool, str]:
    """Wall time of centralized, generic-decentralized and low-complexity-decentralized solves on one drop.

    Both decentralized runs do the same number of rounds; the low-complexity
    one must take less time per round.
    """
    rng = np.random.default_rng(41)
    csi = random_csi(rng, 3, 6, 4)
    mask = random_mask(rng, 3, 6, 3)
    budgets = np.ones(3)
    topology = build_topology("mesh", 3)
    _, central = run_centralized(csi, mask, budgets)
    per_round = {}
    for local_solver in ("generic", "low_complexity"):
        opts = DecentralizedOptions(local_solver=local_solver, max_outer=rounds, tol=0.0, inner_tol=0.0, workers=1)
        _, report, _ = run_decentralized(csi, mask, budgets, topology, opts)
        per_round[local_solver] = report.wall_time_s / max(report.iterations, 1)
    detail = (f"centralized {central.wall_time_s:.3f}s, decentralized generic {per_round['generic']:.4f}s/round, "
              f"low-complexity {per_round['low_complexity']:.4f}s/round")
    return per_round["low_complexity"] < per_round["generic"], detail


@time_function
def run_validation(full: bool = False, rho_g: float = 1.0) -> List[CheckResult]:
    """Run the quick suite, plus the heavy checks when full is set.

    Args:
        full: Include the Monte-Carlo, oracle, gap and runtime checks.
        rho_g: Penalty injected into the elimination check; a non-positive
            value must make the Q positive-definiteness check fail.
    """
    checks: List[Tuple[str, Callable[[], Tuple[bool, str]]]] = [
        ("topology degrees", check_topology_degrees),
        ("overhead exactness", check_overhead_exactness),
        ("ball-constrained closed forms", check_ball_closed_forms),
        ("Q positive definiteness and elimination", lambda: check_elimination(rho_g)),
        ("centralized monotonicity", check_centralized_monotone),
        ("bound equals Monte-Carlo without variance", check_bound_without_variance),
    ]
    if full:
        checks += [
            ("hardening bound below Monte-Carlo", check_monte_carlo_bound),
            ("local solver against generic oracle", check_local_oracle),
            ("line search against projected gradient", check_ball_oracle),
            ("decentralized against centralized", check_decentralized_gap),
            ("low-complexity speedup", check_runtime),
            ("solver runtimes", check_solver_runtimes),
        ]
    results = []
    for name, func in checks:
        result = _check(name, func)
        level = logger.info if result.passed else logger.error
        level(f"[{'PASS' if result.passed else 'FAIL'}] {name}: {result.detail}")
        results.append(result)
    return results
