"""
Unified scheme commands: latency-load tradeoff sweep and the computation-load optimum
"""
import argparse
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional

import structlog
from pydantic import BaseModel, Field, field_validator

from codedfog.commands.common import OutputFormat, add_output_flags, config_echo, emit_table, request_from, resolve_seed
from codedfog.core.errors import UnsupportedSize
from codedfog.core.progress_emitter import ProgressEmitter
from codedfog.schemes import index_coding
from codedfog.schemes.mbc_shuffle import load_formula
from codedfog.schemes.straggler import ShiftedExponential
from codedfog.schemes.unified import (
    DemandModel,
    Normalization,
    UnifiedSpec,
    build_unified_plan,
    minimal_task_count,
    optimal_computation_load,
    parse_fraction,
    tradeoff_sweep,
)

logger = structlog.get_logger(__name__)

TRADEOFF_COLUMNS = [
    "q",
    "map_latency_s",
    "normalized_load",
    "normalized_load_fraction",
    "shuffle_time_s",
    "total_time_s",
    "is_optimal",
]

RSTAR_COLUMNS = ["r_star", "continuous_r", "total_coded_s", "total_uncoded_s", "speedup"]


class UnifiedRequest(BaseModel):
    nodes: int = Field(default=18, ge=2)
    mu: str = "1/3"
    tasks: Optional[int] = Field(default=None, ge=1)
    q: Optional[int] = Field(default=None, ge=1)
    shift: float = Field(default=1.0, ge=0.0)
    rate: float = Field(default=1.0, gt=0.0)
    net_bps: float = Field(default=10e6, gt=0.0)
    value_bits: int = Field(default=16, ge=1)
    rows: int = Field(default=10**6, ge=1)
    columns: int = Field(default=1, ge=1)
    normalization: Normalization = Normalization.ROW
    demand_model: DemandModel = DemandModel.FINISHERS
    trials: int = Field(default=100_000, ge=2)
    seed: Optional[int] = None
    out: Optional[Path] = None
    format: OutputFormat = OutputFormat.CSV

    @field_validator("mu")
    @classmethod
    def _check_mu(cls, value: str) -> str:
        return str(parse_fraction(value))


class RStarRequest(BaseModel):
    t_task: float = Field(default=1.0, gt=0.0)
    t_data: float = Field(default=100.0, ge=0.0)
    nodes: int = Field(default=10, ge=1)
    out: Optional[Path] = None
    format: OutputFormat = OutputFormat.CSV


def _checks(request: UnifiedRequest, mu: Fraction, points) -> Dict[str, Any]:
    """Latency monotone in q, and the q=K load equal to the closed form at r = mu*K"""
    latencies = [point.map_latency for point in points]
    checks: Dict[str, Any] = {
        "map_latency_increasing": all(left < right for left, right in zip(latencies, latencies[1:])),
    }
    last = points[-1]
    if request.demand_model != DemandModel.CLIENT_COLLECTS and last.q == request.nodes:
        _, coded = load_formula(request.nodes, int(mu * request.nodes))
        checks["endpoint_load_matches"] = last.normalized_load == coded
    return checks


def _plan_summary(request: UnifiedRequest, mu: Fraction, tasks: int, seed: int) -> Dict[str, Any]:
    spec = UnifiedSpec(K=request.nodes, mu=mu, m=tasks, q=request.q)
    plan = build_unified_plan(spec, seed=seed, with_code=False)
    return {
        "q": spec.q,
        "coded_tasks": spec.coded_task_count,
        "source_tasks": spec.m,
        "hosts_per_task": spec.storage_degree,
        "tasks_per_subset": spec.tasks_per_subset,
        "tasks_per_node": spec.tasks_per_node,
        "coverage_minimum": plan.coverage_minimum,
        "warnings": list(plan.warnings),
    }


def _index_coding_gaps(request: UnifiedRequest, mu: Fraction, tasks: int, seed: int, points) -> List[Dict[str, Any]]:
    """Greedy vs best XOR code on the first q nodes, for every swept q of a tiny cluster"""
    gaps = []
    for point in points:
        spec = UnifiedSpec(K=request.nodes, mu=mu, m=tasks, q=point.q)
        plan = build_unified_plan(spec, seed=seed, with_code=False)
        try:
            gaps.append(index_coding.optimality_gap(plan, range(1, point.q + 1), request.demand_model))
        except UnsupportedSize as exc:
            gaps.append({"q": point.q, "skipped": exc.message})
    return gaps


def cmd_unified_tradeoff(args: argparse.Namespace) -> int:
    """
    Sweep every feasible q and report the latency-load pairs and the best q.

    Returns:
        0 when Map latency increases with q and the q=K load matches the closed form
    """
    request = request_from(args, UnifiedRequest)
    seed = resolve_seed(request.seed)
    mu = parse_fraction(request.mu)
    tasks = request.tasks or minimal_task_count(request.nodes, mu)
    progress = ProgressEmitter(f"unified-{request.nodes}-{mu}")
    progress.emit("sweep_started", f"m={tasks}", 0, {"tasks": tasks})

    sweep = tradeoff_sweep(
        request.nodes,
        mu,
        tasks,
        ShiftedExponential(shift=request.shift, rate=request.rate),
        request.net_bps,
        request.value_bits,
        request.trials,
        seed,
        rows=request.rows,
        columns=request.columns,
        normalization=request.normalization,
        demand_model=request.demand_model,
        emitter=progress,
    )
    checks = _checks(request, mu, sweep.points)
    passed = all(checks.values())

    rows = []
    for point in sweep.points:
        row = point.to_row()
        row["normalized_load_fraction"] = point.normalized_load
        row["normalized_load"] = float(point.normalized_load)
        rows.append(row)

    summary: Dict[str, Any] = dict(sweep.summary)
    summary["tasks"] = tasks
    summary["checks"] = checks
    summary["points"] = [
        {
            "q": point.q,
            "map_latency_mc_s": point.map_latency_mc,
            "map_latency_stderr_s": point.map_latency_stderr,
            "finisher_sets": point.finisher_sets,
        }
        for point in sweep.points
    ]
    if request.q is not None:
        summary["plan"] = _plan_summary(request, mu, tasks, seed)
    if request.nodes <= index_coding.MAX_NODES:
        summary["index_coding"] = _index_coding_gaps(request, mu, tasks, seed, sweep.points)

    config = config_echo("unified", request, seed)
    config["tasks"] = tasks
    emit_table(
        TRADEOFF_COLUMNS,
        rows,
        config,
        request.out,
        request.format,
        extra={"summary": summary, "progress": progress.snapshot(), "passed": passed},
    )
    if not passed:
        logger.error("unified_checks_failed", checks=checks)
    return 0 if passed else 1


def cmd_rstar(args: argparse.Namespace) -> int:
    """Best integer computation load for given Map and shuffle times"""
    request = request_from(args, RStarRequest)
    choice = optimal_computation_load(request.t_task, request.t_data, request.nodes)
    row = {
        "r_star": choice.r_star,
        "continuous_r": choice.continuous,
        "total_coded_s": choice.total_coded,
        "total_uncoded_s": choice.total_uncoded,
        "speedup": choice.speedup,
    }
    emit_table(RSTAR_COLUMNS, [row], config_echo("rstar", request), request.out, request.format)
    return 0


def register(subparsers: argparse._SubParsersAction) -> None:
    sweep = subparsers.add_parser("unified", help="latency-load tradeoff of the unified scheme")
    sweep.add_argument("--nodes", type=int, help="K")
    sweep.add_argument("--mu", type=str, help="storage fraction, e.g. 1/3")
    sweep.add_argument("--tasks", type=int, help="m (smallest feasible for every q when omitted)")
    sweep.add_argument("--q", type=int, help="also report the plan built for this q")
    sweep.add_argument("--shift", type=float)
    sweep.add_argument("--rate", type=float)
    sweep.add_argument("--net-bps", type=float)
    sweep.add_argument("--value-bits", type=int)
    sweep.add_argument("--rows", type=int)
    sweep.add_argument("--columns", type=int)
    sweep.add_argument("--normalization", choices=[item.value for item in Normalization])
    sweep.add_argument("--demand-model", choices=[item.value for item in DemandModel])
    sweep.add_argument("--trials", type=int)
    add_output_flags(sweep)
    sweep.set_defaults(handler=cmd_unified_tradeoff)

    rstar = subparsers.add_parser("rstar", help="optimal computation load")
    rstar.add_argument("--t-task", type=float, help="Map time at r = 1")
    rstar.add_argument("--t-data", type=float, help="shuffle time at r = 1")
    rstar.add_argument("--nodes", type=int, help="K")
    add_output_flags(rstar)
    rstar.set_defaults(handler=cmd_rstar)
