"""
Minimum Latency Code command: analytic vs simulated latency of uncoded, repetition and MDS execution
"""
import argparse
from pathlib import Path
from typing import List, Optional

import structlog
from pydantic import BaseModel, Field, model_validator

from codedfog.commands.common import (
    OutputFormat,
    add_output_flags,
    config_echo,
    emit_table,
    int_list,
    request_from,
    resolve_seed,
)
from codedfog.core.progress_emitter import ProgressEmitter
from codedfog.schemes.straggler import (
    ExecutionScheme,
    ShiftedExponential,
    optimal_mds_k,
    scheme_grid,
    scheme_latency_mc,
)

logger = structlog.get_logger(__name__)

LATENCY_COLUMNS = [
    "scheme",
    "n",
    "k",
    "s",
    "lambda",
    "analytic_mean",
    "mc_mean",
    "mc_stderr",
    "trials",
    "seed",
    "z_score",
    "within_tolerance",
]


class MlcSimRequest(BaseModel):
    nodes: List[int] = Field(default_factory=lambda: [2, 4, 10, 20])
    k: Optional[List[int]] = None
    shift: float = Field(default=1.0, ge=0.0)
    rate: float = Field(default=1.0, gt=0.0)
    trials: int = Field(default=100_000, ge=2)
    tolerance_se: float = Field(default=3.0, gt=0.0)
    seed: Optional[int] = None
    out: Optional[Path] = None
    format: OutputFormat = OutputFormat.CSV

    @model_validator(mode="after")
    def _check_grid(self) -> "MlcSimRequest":
        if not self.nodes or any(n < 1 for n in self.nodes):
            raise ValueError("node counts must be positive")
        return self

    def schemes(self) -> List[ExecutionScheme]:
        return [scheme for n in self.nodes for scheme in scheme_grid(n, self.k)]


def cmd_mlc_sim(args: argparse.Namespace) -> int:
    """
    Simulate every scheme of the grid and compare with the closed forms.

    Returns:
        0 when every simulated mean lies within tolerance_se standard errors
    """
    for name in ("nodes", "k"):
        if isinstance(getattr(args, name, None), str):
            setattr(args, name, int_list(getattr(args, name)))
    request = request_from(args, MlcSimRequest)
    seed = resolve_seed(request.seed)
    model = ShiftedExponential(shift=request.shift, rate=request.rate)
    schemes = request.schemes()
    progress = ProgressEmitter(f"mlc-sim-{seed}")

    rows = []
    for position, scheme in enumerate(schemes):
        estimate = scheme_latency_mc(scheme, model, request.trials, [seed, scheme.n, scheme.k, position])
        rows.append(
            {
                "scheme": scheme.kind.value,
                "n": scheme.n,
                "k": scheme.k,
                "s": model.shift,
                "lambda": model.rate,
                "analytic_mean": estimate.analytic_mean,
                "mc_mean": estimate.mc_mean,
                "mc_stderr": estimate.mc_stderr,
                "trials": estimate.trials,
                "seed": seed,
                "z_score": estimate.z_score,
                "within_tolerance": estimate.z_score <= request.tolerance_se,
            }
        )
        progress.emit("scheme_simulated", f"{scheme.kind.value} n={scheme.n} k={scheme.k}",
                      round(100 * (position + 1) / len(schemes)))

    optimal = []
    for n in request.nodes:
        best_k, speedup = optimal_mds_k(n, model)
        optimal.append({"n": n, "k_star": best_k, "speedup": speedup})

    passed = all(row["within_tolerance"] for row in rows)
    emit_table(
        LATENCY_COLUMNS,
        rows,
        config_echo("mlc-sim", request, seed),
        request.out,
        request.format,
        extra={"optimal_mds": optimal, "passed": passed},
    )
    if not passed:
        logger.error("mlc_sim_out_of_tolerance", failing=[row for row in rows if not row["within_tolerance"]])
    return 0 if passed else 1


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("mlc-sim", help="straggler latency of coded execution")
    parser.add_argument("--nodes", type=str, help="n values such as 2,4,10,20")
    parser.add_argument("--k", type=str, help="k values (divisors of n by default)")
    parser.add_argument("--shift", type=float)
    parser.add_argument("--rate", type=float)
    parser.add_argument("--trials", type=int)
    parser.add_argument("--tolerance-se", type=float)
    add_output_flags(parser)
    parser.set_defaults(handler=cmd_mlc_sim)
