"""
Coded matrix multiplication demo command
"""
import argparse
import asyncio
from pathlib import Path
from typing import List, Optional

from pydantic import BaseModel, Field

from codedfog.commands.common import OutputFormat, add_output_flags, config_echo, int_list, request_from, resolve_seed
from codedfog.core.emitters import render_json, write_output
from codedfog.schemes.coded_matmul import ClockMode, CodePreset, MatMulConfig, make_job, run_job
from codedfog.schemes.straggler import ShiftedExponential

RELATIVE_TOLERANCE = 1e-8


class MatMulRequest(BaseModel):
    rows: int = Field(default=6, ge=1)
    inner: int = Field(default=4, ge=1)
    cols: int = Field(default=3, ge=1)
    n: int = Field(default=3, ge=1)
    k: int = Field(default=2, ge=1)
    shift: float = Field(default=1.0, ge=0.0)
    rate: float = Field(default=1.0, gt=0.0)
    stragglers: List[int] = Field(default_factory=list)
    failures: List[int] = Field(default_factory=list)
    clock: ClockMode = ClockMode.SIMULATED
    preset: CodePreset = CodePreset.RANDOM
    seed: Optional[int] = None
    out: Optional[Path] = None
    format: OutputFormat = OutputFormat.JSON

    def job_config(self, seed: int) -> MatMulConfig:
        return MatMulConfig(
            rows=self.rows,
            inner=self.inner,
            cols=self.cols,
            n=self.n,
            k=self.k,
            model=ShiftedExponential(shift=self.shift, rate=self.rate),
            stragglers=tuple(self.stragglers),
            failures=tuple(self.failures),
            clock=self.clock,
            preset=self.preset,
            seed=seed,
        )


def cmd_matmul_demo(args: argparse.Namespace) -> int:
    """Run one coded job and report per-task outcomes, makespan and error vs the direct product"""
    for name in ("stragglers", "failures"):
        if isinstance(getattr(args, name, None), str):
            setattr(args, name, int_list(getattr(args, name)))
    request = request_from(args, MatMulRequest)
    seed = resolve_seed(request.seed)
    job = make_job(request.job_config(seed))
    report = asyncio.run(run_job(job))

    passed = report.relative_error <= RELATIVE_TOLERANCE
    document = {
        "config": config_echo("matmul", request, seed),
        "tasks": [task.to_record() for task in report.tasks],
        "makespan_s": report.makespan,
        "decode_indices": report.decode_indices,
        "relative_error": report.relative_error,
        "overhead_budget": report.overhead_budget,
        "warnings": report.warnings,
        "passed": passed,
    }
    write_output(render_json(document), request.out)
    return 0 if passed else 1


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("matmul", help="coded matrix multiplication with stragglers")
    parser.add_argument("--rows", type=int, help="p, rows of A")
    parser.add_argument("--inner", type=int, help="d, columns of A")
    parser.add_argument("--cols", type=int, help="b, columns of X")
    parser.add_argument("--n", type=int, help="coded tasks")
    parser.add_argument("--k", type=int, help="source blocks")
    parser.add_argument("--shift", type=float)
    parser.add_argument("--rate", type=float)
    parser.add_argument("--stragglers", type=str, help="forced slow workers, e.g. 2 or 1,3")
    parser.add_argument("--failures", type=str, help="workers that never return")
    parser.add_argument("--clock", choices=[mode.value for mode in ClockMode])
    parser.add_argument("--preset", choices=[preset.value for preset in CodePreset])
    add_output_flags(parser, default_format=OutputFormat.JSON)
    parser.set_defaults(handler=cmd_matmul_demo)
