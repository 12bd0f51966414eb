"""
Experiment pipeline.

Turns an ExperimentConfig into drops (geometry, statistical CSI and
scheduling), runs every configured beamforming strategy on each drop and
writes per-iteration traces, summary tables and run metadata.
"""

import csv
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.channel.channel_model import build_statistical_csi
from src.common.config import ExperimentConfig, worker_count
from src.common.exceptions import ConfigurationError, LeoCoopBfError
from src.common.interfaces import (
    BeamformerSet, BeamformingSolver, SchedulingMask, SolveOutcome, SolveReport, StatisticalCsi
)
from src.common.utils import format_exact, get_logger, time_function
from src.communication.network import OverheadLedger, build_topology, overhead_formula, overhead_report
from src.decentralized.engine import DecentralizedOptions, DecentralizedSolver
from src.geometry.constellation import build_scene, build_walker_delta, compute_aods
from src.metrics.rates import compute_beam_gains, optimal_aux, sum_rate, wmmse_objective
from src.optimization.centralized import CentralizedOptions, CentralizedSolver, run_centralized
from src.scheduling.baselines import mrt_beamformers, schedule_cs, schedule_rs, sss_assign, zf_beamformers

TRACE_PREFIX = ["iter", "sum_rate_bps_hz", "objective", "primal_residual"]
SUMMARY_FIELDS = [
    "drop", "axis", "axis_value", "solver", "topology", "scheduler", "status", "sum_rate_bps_hz",
    "iterations", "converged", "overhead_formula_per_round", "overhead_counted_per_round",
    "overhead_total", "trace_path", "error",
]
SWEEP_FIELDS = [
    "axis", "value", "solver", "topology", "n_ok", "mean_sum_rate_bps_hz", "stderr_sum_rate",
    "mean_iterations", "mean_overhead_formula", "mean_overhead_counted",
]


def trace_header(n_sats: int) -> List[str]:
    """Column names of a per-iteration trace CSV."""
    return TRACE_PREFIX + [f"overhead_cum_s{s}" for s in range(n_sats)]


@dataclass
class DropContext:
    """Everything a solver needs for one drop."""
    drop: int
    csi: StatisticalCsi
    mask: SchedulingMask
    budgets: np.ndarray


@dataclass
class RunRecord:
    """One (drop, solver, topology) run."""
    config_hash: str
    seed: int
    drop: int
    solver: str
    topology: str
    scheduler: str
    local_solver: str = "-"
    axis: str = ""
    axis_value: Optional[float] = None
    status: str = "ok"
    sum_rate_bps_hz: float = float("nan")
    iterations: int = 0
    converged: bool = False
    wall_time_s: float = 0.0
    overhead_formula_per_round: List[int] = field(default_factory=list)
    overhead_counted_per_round: List[int] = field(default_factory=list)
    overhead_total: List[int] = field(default_factory=list)
    trace_path: str = ""
    error: str = ""
    report: Optional[SolveReport] = field(default=None, repr=False)


class MrtSolver(BeamformingSolver):
    """Maximum-ratio transmission with equal power split."""

    name = "mrt"

    def solve(self, csi: StatisticalCsi, mask: SchedulingMask, budgets: np.ndarray) -> SolveOutcome:
        started = time.perf_counter()
        return _single_shot(mrt_beamformers(csi, mask, budgets), csi, mask, started)


class ZfSolver(BeamformingSolver):
    """Per-satellite zero forcing with equal power split."""

    name = "zf"

    def solve(self, csi: StatisticalCsi, mask: SchedulingMask, budgets: np.ndarray) -> SolveOutcome:
        started = time.perf_counter()
        return _single_shot(zf_beamformers(csi, mask, budgets), csi, mask, started)


class SssSolver(BeamformingSolver):
    """
    Single-satellite serving.

    Each UT keeps only its strongest scheduled link; every satellite then runs
    the centralized WMMSE alone on its own users, without cooperation, and
    the result is evaluated on the full network.
    """

    name = "sss"

    def __init__(self, options: CentralizedOptions = CentralizedOptions()):
        self.logger = get_logger(__name__)
        self.options = options

    def solve(self, csi: StatisticalCsi, mask: SchedulingMask, budgets: np.ndarray) -> SolveOutcome:
        started = time.perf_counter()
        budgets = np.broadcast_to(np.asarray(budgets, dtype=float), (csi.n_sats,)).copy()
        assigned = sss_assign(mask, csi)
        w = np.zeros_like(csi.b, dtype=complex)
        iterations = 0
        converged = True
        for s, served in enumerate(assigned.served_sets):
            if not served:
                continue
            sub_csi = csi.subset([s], list(served))
            sub_mask = SchedulingMask(delta=np.ones((1, len(served)), dtype=np.int8), u_max=mask.u_max)
            W_s, sub_report = run_centralized(sub_csi, sub_mask, budgets[s:s + 1], self.options)
            w[s, list(served)] = W_s.w[0]
            iterations = max(iterations, sub_report.iterations)
            converged = converged and sub_report.converged
        self.logger.debug(f"SSS served sets {assigned.served_sets}")
        outcome = _single_shot(BeamformerSet(w=w, power_budget=budgets), csi, assigned, started)
        outcome.report.iterations = iterations
        outcome.report.converged = converged
        return outcome


def _single_shot(W: BeamformerSet, csi: StatisticalCsi, mask: SchedulingMask, started: float) -> SolveOutcome:
    g = compute_beam_gains(csi, mask, W)
    report = SolveReport(converged=True)
    report.sum_rate_trace.append(sum_rate(g, csi))
    report.objective_trace.append(wmmse_objective(optimal_aux(g, csi), g, csi))
    report.wall_time_s = time.perf_counter() - started
    return SolveOutcome(beamformers=W, report=report)


def centralized_options(cfg: ExperimentConfig) -> CentralizedOptions:
    tol = cfg.tolerances
    return CentralizedOptions(
        tol=tol.tol,
        max_outer=cfg.max_outer if cfg.max_outer is not None else 50,
        bcd_tol=tol.bcd_tol,
        max_sweeps=tol.max_sweeps,
        line_search_tol=tol.line_search_tol,
        eig_floor=tol.eig_floor,
        max_bisect=tol.max_bisect,
    )


def decentralized_options(cfg: ExperimentConfig, workers: Optional[int] = None) -> DecentralizedOptions:
    tol = cfg.tolerances
    return DecentralizedOptions(
        rho_g=cfg.rho_g,
        rho_scaling=cfg.rho_scaling,
        adaptive_rho=cfg.adaptive_rho,
        schedule=cfg.schedule,
        init_copies=cfg.init_copies,
        local_solver=cfg.local_solver,
        tol=tol.tol,
        max_outer=cfg.max_outer if cfg.max_outer is not None else 500,
        inner_tol=cfg.inner_tol,
        max_inner=cfg.max_inner,
        line_search_tol=tol.line_search_tol,
        eig_floor=tol.eig_floor,
        max_bisect=tol.max_bisect,
        workers=workers,
    )


def build_solver(name: str, cfg: ExperimentConfig, topology: Optional[str] = None,
                 workers: Optional[int] = None) -> BeamformingSolver:
    """Solver registry.

    Raises:
        ConfigurationError: On an unknown solver name.
    """
    if name == "centralized":
        return CentralizedSolver(centralized_options(cfg))
    if name == "decentralized":
        kind = topology or cfg.topology.kind
        edges = cfg.topology.edges if kind == "custom" else None
        return DecentralizedSolver(kind, edges, decentralized_options(cfg, workers))
    if name == "mrt":
        return MrtSolver()
    if name == "zf":
        return ZfSolver()
    if name == "sss":
        return SssSolver(centralized_options(cfg))
    raise ConfigurationError("solver", f"unknown solver {name!r}")


def drop_rng(seed: int, drop: int, axis_index: int = 0) -> np.random.Generator:
    """Independent stream per (seed, drop, axis index)."""
    return np.random.default_rng(np.random.SeedSequence([seed, drop, axis_index]))


class Simulator:
    """
    Experiment driver.

    Builds the constellation once per configuration and runs drops,
    strategies and topologies over it. Drops run on a thread pool; results
    are gathered in submission order and written from the calling thread.
    """

    def __init__(self, cfg: ExperimentConfig, workers: Optional[int] = None):
        self.logger = get_logger(__name__)
        self.cfg = cfg
        self.workers = workers if workers is not None else worker_count()
        self.constellation = build_walker_delta(cfg.geometry)
        self.logger.info(f"Simulator initialized with {self.constellation.size} satellites, "
                         f"{self.workers} workers")

    def prepare_drop(self, drop: int, axis_index: int = 0) -> DropContext:
        """Geometry, statistical CSI and scheduling of one drop.

        Raises:
            InfeasibleSceneError: If too few satellites are visible.
        """
        cfg = self.cfg
        rng = drop_rng(cfg.seed, drop, axis_index)
        scene = build_scene(cfg.geometry, rng, self.constellation)
        aods = compute_aods(scene)
        csi = build_statistical_csi(scene, aods, cfg.channel, rng)
        if cfg.scheduler == "rs":
            mask = schedule_rs(csi.n_sats, csi.n_uts, cfg.u_max, rng)
        else:
            mask = schedule_cs(csi, cfg.u_max, cfg.cs_correlation)
        budgets = np.full(csi.n_sats, cfg.power_budget_w)
        return DropContext(drop=drop, csi=csi, mask=mask, budgets=budgets)

    def runs(self) -> List[Tuple[str, str]]:
        """(solver, topology) pairs run on every drop."""
        topologies = self.cfg.sweep.topologies or [self.cfg.topology.kind]
        pairs = []
        for name in self.cfg.solver_names():
            if name == "decentralized":
                pairs.extend((name, kind) for kind in topologies)
            else:
                pairs.append((name, "-"))
        return pairs

    @time_function
    def run_drop(self, drop: int, axis: str = "", axis_value: Optional[float] = None,
                 axis_index: int = 0) -> List[RunRecord]:
        """Run every configured strategy on one drop.

        Library errors are caught and turned into failure records.
        """
        cfg = self.cfg
        base = dict(config_hash=cfg.config_hash(), seed=cfg.seed, drop=drop, scheduler=cfg.scheduler,
                    axis=axis, axis_value=axis_value)
        try:
            ctx = self.prepare_drop(drop, axis_index)
        except LeoCoopBfError as exc:
            self.logger.warning(f"Drop {drop} failed during scene generation: {exc}")
            return [RunRecord(solver=name, topology=kind, status="failed", error=str(exc), **base)
                    for name, kind in self.runs()]
        records = []
        for name, kind in self.runs():
            record = RunRecord(solver=name, topology=kind, **base)
            if name == "decentralized":
                record.local_solver = cfg.local_solver
            try:
                solver = build_solver(name, cfg, None if kind == "-" else kind, workers=self.workers)
                outcome = solver.solve(ctx.csi, ctx.mask, ctx.budgets)
                self._fill(record, outcome, ctx, kind)
            except LeoCoopBfError as exc:
                self.logger.warning(f"Drop {drop}, solver {name} ({kind}) failed: {exc}")
                record.status = "failed"
                record.error = str(exc)
            records.append(record)
        return records

    def _fill(self, record: RunRecord, outcome: SolveOutcome, ctx: DropContext, kind: str) -> None:
        report = outcome.report
        record.report = report
        record.sum_rate_bps_hz = report.sum_rate_trace[-1]
        record.iterations = report.iterations
        record.converged = report.converged
        record.wall_time_s = report.wall_time_s
        if isinstance(outcome.ledger, OverheadLedger):
            topology = build_topology(kind, ctx.csi.n_sats, self.cfg.topology.edges if kind == "custom" else None)
            rows = overhead_report(outcome.ledger, topology, ctx.mask)
            record.overhead_formula_per_round = [row["per_round_formula"] for row in rows]
            record.overhead_counted_per_round = [row["per_round_counted"] for row in rows]
            record.overhead_total = [row["cumulative"] for row in rows]

    def run_drops(self, axis: str = "", axis_value: Optional[float] = None,
                  axis_index: int = 0) -> List[RunRecord]:
        """All drops of the current configuration, in drop order."""
        drops = range(self.cfg.n_drops)
        with ThreadPoolExecutor(max_workers=self.workers) as executor:
            batches = list(executor.map(lambda d: self.run_drop(d, axis, axis_value, axis_index), drops))
        return [record for batch in batches for record in batch]


def write_trace_csv(path: Path, report: SolveReport, n_sats: int) -> None:
    """Per-iteration trace; floats are written in their exact repr form."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(trace_header(n_sats))
        for k, rate in enumerate(report.sum_rate_trace):
            objective = report.objective_trace[k] if k < len(report.objective_trace) else float("nan")
            residual = format_exact(report.residual_trace[k]) if k < len(report.residual_trace) else ""
            overhead = (report.overhead_trace[k] if k < len(report.overhead_trace)
                        else np.zeros(n_sats, dtype=np.int64))
            writer.writerow([k, format_exact(rate), format_exact(objective), residual]
                            + [int(v) for v in overhead])


def trace_name(record: RunRecord, axis_index: Optional[int] = None) -> str:
    parts = ["trace", record.solver]
    if record.topology != "-":
        parts.append(record.topology)
    if axis_index is not None:
        parts.append(f"{record.axis}{axis_index}")
    parts.append(f"drop{record.drop}")
    return "_".join(parts) + ".csv"


def write_traces(out_dir: Path, records: Sequence[RunRecord], n_sats_of: Dict[int, int],
                 axis_index: Optional[int] = None) -> None:
    """Write the trace file of every successful record and remember its path."""
    for record in records:
        if record.report is None:
            continue
        path = out_dir / trace_name(record, axis_index)
        n_sats = n_sats_of.get(record.drop, len(record.overhead_total))
        write_trace_csv(path, record.report, n_sats)
        record.trace_path = str(path)


def _summary_row(record: RunRecord) -> List[str]:
    data = asdict(record)
    data.pop("report")
    row = []
    for name in SUMMARY_FIELDS:
        value = data[name]
        if isinstance(value, list):
            value = " ".join(str(v) for v in value)
        elif isinstance(value, float):
            value = format_exact(value)
        elif value is None:
            value = ""
        row.append(str(value))
    return row


def write_summary_csv(path: Path, records: Sequence[RunRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(SUMMARY_FIELDS)
        for record in records:
            writer.writerow(_summary_row(record))


def aggregate_timings(records: Sequence[RunRecord]) -> List[Dict[str, object]]:
    """Mean wall time per (solver, topology, local solver) over successful runs."""
    groups: Dict[Tuple[str, str, str], List[float]] = {}
    for record in records:
        if record.status == "ok":
            key = (record.solver, record.topology, record.local_solver)
            groups.setdefault(key, []).append(record.wall_time_s)
    return [{"solver": solver, "topology": topology, "local_solver": local_solver, "runs": len(times),
             "mean_wall_time_s": float(np.mean(times))}
            for (solver, topology, local_solver), times in groups.items()]


def write_runs_json(path: Path, records: Sequence[RunRecord], cfg: ExperimentConfig) -> None:
    """Configuration, every run record and the timing table; wall times live only here."""
    payload = {
        "config_hash": cfg.config_hash(),
        "config": cfg.to_dict(),
        "runs": [{k: v for k, v in asdict(r).items() if k != "report"} for r in records],
        "timings": aggregate_timings(records),
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str), encoding="utf-8")


def aggregate_sweep(records: Sequence[RunRecord]) -> List[Dict[str, object]]:
    """Mean and standard error per (axis value, solver, topology)."""
    groups: Dict[Tuple[float, str, str], List[RunRecord]] = {}
    for record in records:
        key = (float(record.axis_value), record.solver, record.topology)
        groups.setdefault(key, []).append(record)
    rows = []
    for (value, solver, topology), group in groups.items():
        ok = [r for r in group if r.status == "ok"]
        rates = np.array([r.sum_rate_bps_hz for r in ok])
        n = rates.size
        stderr = float(np.std(rates, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        formula = [np.mean(r.overhead_formula_per_round) for r in ok if r.overhead_formula_per_round]
        counted = [np.mean(r.overhead_counted_per_round) for r in ok if r.overhead_counted_per_round]
        rows.append({
            "axis": group[0].axis,
            "value": value,
            "solver": solver,
            "topology": topology,
            "n_ok": n,
            "mean_sum_rate_bps_hz": float(np.mean(rates)) if n else float("nan"),
            "stderr_sum_rate": stderr,
            "mean_iterations": float(np.mean([r.iterations for r in ok])) if n else float("nan"),
            "mean_overhead_formula": float(np.mean(formula)) if formula else float("nan"),
            "mean_overhead_counted": float(np.mean(counted)) if counted else float("nan"),
        })
    return rows


def write_sweep_csv(path: Path, rows: Sequence[Dict[str, object]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(SWEEP_FIELDS)
        for row in rows:
            writer.writerow([format_exact(row[k]) if isinstance(row[k], float) else row[k]
                             for k in SWEEP_FIELDS])


def run_simulate(cfg: ExperimentConfig, out_dir: Optional[str] = None,
                 workers: Optional[int] = None) -> List[RunRecord]:
    """Run every drop and write traces, summary.csv and runs.json."""
    logger = get_logger(__name__)
    target = Path(out_dir or cfg.output_dir)
    target.mkdir(parents=True, exist_ok=True)
    simulator = Simulator(cfg, workers)
    records = simulator.run_drops()
    n_sats = cfg.geometry.serving_count
    write_traces(target, records, {r.drop: n_sats for r in records})
    write_summary_csv(target / "summary.csv", records)
    write_runs_json(target / "runs.json", records, cfg)
    logger.info(f"Wrote {len(records)} run records to {target}")
    return records


def run_sweep(cfg: ExperimentConfig, axis: str, values: Sequence[float], out_dir: Optional[str] = None,
              workers: Optional[int] = None) -> Tuple[List[RunRecord], List[Dict[str, object]]]:
    """Run all drops at every sweep value and write the aggregated table.

    Raises:
        ConfigurationError: If the axis or a value is invalid.
    """
    logger = get_logger(__name__)
    if not values:
        raise ConfigurationError("sweep.values", "must be non-empty")
    target = Path(out_dir or cfg.output_dir)
    target.mkdir(parents=True, exist_ok=True)
    all_records: List[RunRecord] = []
    for index, value in enumerate(values):
        point = cfg.with_axis(axis, value)
        simulator = Simulator(point, workers)
        records = simulator.run_drops(axis, float(value), index)
        n_sats = point.geometry.serving_count
        write_traces(target, records, {r.drop: n_sats for r in records}, axis_index=index)
        all_records.extend(records)
        logger.info(f"Sweep {axis}={value}: {sum(r.status == 'ok' for r in records)}/{len(records)} runs ok")
    rows = aggregate_sweep(all_records)
    write_sweep_csv(target / f"sweep_{axis}.csv", rows)
    write_summary_csv(target / "summary.csv", all_records)
    write_runs_json(target / "runs.json", all_records, cfg)
    return all_records, rows
