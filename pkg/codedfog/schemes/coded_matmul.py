"""
Coded Matrix Multiplication - Minimum Latency Code demonstration
Splits A into k row blocks, encodes them into n coded blocks, runs the n block products on an
async worker pool with injected straggler delays, keeps the fastest k and decodes A·X
"""
import asyncio
import heapq
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, model_validator

from codedfog.config import settings
from codedfog.core.errors import InvalidArgument, JobFailed, WorkerFailure
from codedfog.schemes import erasure
from codedfog.schemes.erasure import CodeField, MdsCode
from codedfog.schemes.straggler import ShiftedExponential

logger = structlog.get_logger(__name__)


class ClockMode(str, Enum):
    SIMULATED = "simulated"
    WALL = "wall"


class CodePreset(str, Enum):
    RANDOM = "random"
    SINGLE_PARITY = "single-parity"


class TaskStatus(str, Enum):
    COMPLETED = "completed"
    CANCELLED = "cancelled"
    FAILED = "failed"


class MatMulConfig(BaseModel):
    """Dimensions, code parameters and the straggler injection of one demo job"""

    model_config = ConfigDict(frozen=True)

    rows: int = Field(default=6, ge=1, description="p, rows of A")
    inner: int = Field(default=4, ge=1, description="d, columns of A and rows of X")
    cols: int = Field(default=3, ge=1, description="b, columns of X")
    n: int = Field(default=3, ge=1)
    k: int = Field(default=2, ge=1)
    model: ShiftedExponential = ShiftedExponential()
    stragglers: Tuple[int, ...] = ()
    failures: Tuple[int, ...] = ()
    clock: ClockMode = ClockMode.SIMULATED
    preset: CodePreset = CodePreset.RANDOM
    jitter: bool = True
    overhead_budget: float = Field(default=0.05, ge=0.0)
    seed: int = settings.CODEDFOG_SEED

    @model_validator(mode="after")
    def _check_shapes(self) -> "MatMulConfig":
        if self.k > self.n:
            raise ValueError(f"k={self.k} exceeds n={self.n}")
        if self.rows % self.k:
            raise ValueError(f"rows={self.rows} is not divisible by k={self.k}")
        for worker in self.stragglers + self.failures:
            if not 1 <= worker <= self.n:
                raise ValueError(f"worker {worker} outside 1..{self.n}")
        if self.preset == CodePreset.SINGLE_PARITY and (self.n, self.k) != (3, 2):
            raise ValueError("the single-parity preset is a (3,2) code")
        return self


@dataclass(frozen=True)
class MatMulJob:
    A: np.ndarray
    X: np.ndarray
    code: MdsCode
    config: MatMulConfig


@dataclass(frozen=True)
class TaskResult:
    coded_index: int
    product: Optional[np.ndarray]
    wall_time: float
    status: TaskStatus
    injected_delay: float

    def to_record(self) -> Dict[str, object]:
        return {
            "coded_index": self.coded_index,
            "worker": self.coded_index + 1,
            "status": self.status.value,
            "wall_time_s": self.wall_time,
            "injected_delay_s": self.injected_delay,
        }


@dataclass(frozen=True)
class JobReport:
    result: np.ndarray
    tasks: List[TaskResult]
    makespan: float
    decode_indices: List[int]
    relative_error: float
    overhead_budget: float
    warnings: List[str] = field(default_factory=list)


def make_job(
    config: MatMulConfig,
    A: Optional[np.ndarray] = None,
    X: Optional[np.ndarray] = None,
) -> MatMulJob:
    """Seeded random A and X unless given; the code is the single-parity preset or a seeded real MDS code"""
    rng = np.random.default_rng(config.seed)
    A = rng.standard_normal((config.rows, config.inner)) if A is None else np.asarray(A, dtype=np.float64)
    X = rng.standard_normal((config.inner, config.cols)) if X is None else np.asarray(X, dtype=np.float64)
    if A.shape != (config.rows, config.inner) or X.shape != (config.inner, config.cols):
        raise InvalidArgument(
            "matrix shapes do not match the configuration",
            details={"A": list(A.shape), "X": list(X.shape)},
        )
    if config.preset == CodePreset.SINGLE_PARITY:
        code = erasure.single_parity_code()
    else:
        code = erasure.make_mds(config.n, config.k, field=CodeField.REAL, seed=config.seed)
    return MatMulJob(A=A, X=X, code=code, config=config)


def split_encode(A: np.ndarray, code: MdsCode) -> List[np.ndarray]:
    """Row-wise split of A into k blocks, coded block i = sum_j g_ij A_j"""
    if code.field != CodeField.REAL:
        raise InvalidArgument("matrix blocks need a real-field code")
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] % code.k:
        raise InvalidArgument(
            f"A with {A.shape[0]} rows cannot be split into {code.k} equal blocks",
            details={"shape": list(A.shape), "k": code.k},
        )
    return erasure.encode(code, np.split(A, code.k, axis=0))


def injected_delays(config: MatMulConfig) -> np.ndarray:
    """Per-worker delays: w*s + Exp(rate/w) with w = 1/k, plus the forced straggler penalty"""
    work = 1.0 / config.k
    if config.jitter:
        delays = config.model.sample(work, config.n, np.random.default_rng([config.seed, config.n, config.k]))
    else:
        delays = np.full(config.n, work * config.model.shift)
    for worker in config.stragglers:
        delays[worker - 1] += settings.STRAGGLER_PENALTY_SECONDS
    return delays


class VirtualClock:
    """Simulated time: sleepers wake strictly in deadline order, ties in arrival order"""

    def __init__(self):
        self.now = 0.0
        self._sleepers: List[Tuple[float, int, int, asyncio.Future]] = []
        self._arrivals = 0

    def pending(self) -> int:
        return sum(1 for entry in self._sleepers if not entry[3].done())

    async def sleep(self, delay: float, owner: int) -> None:
        future = asyncio.get_running_loop().create_future()
        heapq.heappush(self._sleepers, (self.now + delay, self._arrivals, owner, future))
        self._arrivals += 1
        await future

    def advance(self) -> Optional[int]:
        """Wake the earliest sleeper; returns its owner, or None when nobody sleeps"""
        while self._sleepers:
            deadline, _, owner, future = heapq.heappop(self._sleepers)
            if future.done():
                continue
            self.now = deadline
            future.set_result(None)
            return owner
        return None


class CodedMatMulPool:
    """Runs the n coded block products and collects the fastest k"""

    def __init__(self, job: MatMulJob):
        self.job = job
        self.config = job.config
        self.blocks = split_encode(job.A, job.code)
        self.delays = injected_delays(self.config)
        self.outcomes: Dict[int, TaskResult] = {}

    def _compute(self, index: int) -> np.ndarray:
        return self.blocks[index] @ self.job.X

    async def _worker_simulated(self, index: int, clock: VirtualClock) -> np.ndarray:
        product = self._compute(index)
        await clock.sleep(float(self.delays[index]), index)
        if index + 1 in self.config.failures:
            raise WorkerFailure(f"worker {index + 1} failed", details={"worker": index + 1})
        return product

    async def _worker_wall(self, index: int, semaphore: asyncio.Semaphore) -> np.ndarray:
        async with semaphore:
            product = self._compute(index)
            await asyncio.sleep(float(self.delays[index]) * settings.WALL_CLOCK_SCALE)
            if index + 1 in self.config.failures:
                raise WorkerFailure(f"worker {index + 1} failed", details={"worker": index + 1})
            return product

    def _record(self, index: int, task: asyncio.Task, finished_at: float) -> None:
        if index in self.outcomes:
            return
        completed = sum(1 for outcome in self.outcomes.values() if outcome.status == TaskStatus.COMPLETED)
        error = task.exception()
        if error is not None:
            logger.warning("worker_failed", worker=index + 1, error=str(error))
            status, product = TaskStatus.FAILED, None
        elif completed >= self.config.k:
            # late completion after the k-th result is discarded
            status, product = TaskStatus.CANCELLED, None
        else:
            status, product = TaskStatus.COMPLETED, task.result()
        self.outcomes[index] = TaskResult(
            coded_index=index,
            product=product,
            wall_time=finished_at,
            status=status,
            injected_delay=float(self.delays[index]),
        )

    async def _cancel_rest(self, tasks: Sequence[asyncio.Task], now: float) -> None:
        for task in tasks:
            if not task.done():
                task.cancel()
        await asyncio.gather(*tasks, return_exceptions=True)
        for index in range(len(tasks)):
            if index not in self.outcomes:
                self.outcomes[index] = TaskResult(
                    coded_index=index,
                    product=None,
                    wall_time=now,
                    status=TaskStatus.CANCELLED,
                    injected_delay=float(self.delays[index]),
                )

    def _completed(self) -> int:
        return sum(1 for outcome in self.outcomes.values() if outcome.status == TaskStatus.COMPLETED)

    async def _collect_simulated(self) -> float:
        clock = VirtualClock()
        tasks = [asyncio.create_task(self._worker_simulated(index, clock)) for index in range(self.config.n)]

        async def settle() -> None:
            while sum(1 for task in tasks if not task.done()) > clock.pending():
                await asyncio.sleep(0)

        await settle()
        while self._completed() < self.config.k:
            owner = clock.advance()
            if owner is None:
                break
            await settle()
            self._record(owner, tasks[owner], clock.now)
        await self._cancel_rest(tasks, clock.now)
        return clock.now

    async def _collect_wall(self) -> float:
        loop = asyncio.get_running_loop()
        semaphore = asyncio.Semaphore(settings.MAX_CONCURRENT_WORKERS)
        tasks = [asyncio.create_task(self._worker_wall(index, semaphore)) for index in range(self.config.n)]
        index_of = {task: index for index, task in enumerate(tasks)}
        start = loop.time()
        pending = set(tasks)
        elapsed = 0.0
        while pending and self._completed() < self.config.k:
            done, pending = await asyncio.wait(pending, return_when=asyncio.FIRST_COMPLETED)
            elapsed = (loop.time() - start) / settings.WALL_CLOCK_SCALE
            for task in sorted(done, key=index_of.get):
                self._record(index_of[task], task, elapsed)
        await self._cancel_rest(tasks, elapsed)
        return elapsed

    async def run(self) -> JobReport:
        """
        Dispatch all n tasks and decode from the first k completions.

        Returns:
            JobReport with the decoded product, per-task outcomes and the makespan
        """
        if self.config.clock == ClockMode.SIMULATED:
            makespan = await self._collect_simulated()
        else:
            makespan = await self._collect_wall()

        completed = {
            index: outcome.product
            for index, outcome in self.outcomes.items()
            if outcome.status == TaskStatus.COMPLETED
        }
        if len(completed) < self.config.k:
            raise JobFailed(
                f"only {len(completed)} of the {self.config.k} needed results came back",
                details={"surviving": len(completed), "needed": self.config.k, "n": self.config.n},
            )

        decoded = erasure.decode(self.job.code, completed)
        result = np.vstack(decoded.blocks)
        direct = self.job.A @ self.job.X
        scale = np.linalg.norm(direct)
        error = float(np.linalg.norm(result - direct) / scale) if scale else float(np.linalg.norm(result))
        report = JobReport(
            result=result,
            tasks=[self.outcomes[index] for index in range(self.config.n)],
            makespan=makespan,
            decode_indices=list(decoded.indices),
            relative_error=error,
            overhead_budget=self.config.overhead_budget,
            warnings=list(decoded.warnings),
        )
        logger.info(
            "matmul_job_done",
            n=self.config.n,
            k=self.config.k,
            makespan=makespan,
            decode_indices=report.decode_indices,
            relative_error=error,
        )
        return report


async def run_job(job: MatMulJob) -> JobReport:
    return await CodedMatMulPool(job).run()
