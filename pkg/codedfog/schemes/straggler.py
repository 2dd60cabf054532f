"""
Straggler model - shifted-exponential runtimes, order-statistic latency formulas
and Monte Carlo simulation of uncoded, repetition-coded and MDS-coded execution
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, model_validator

from codedfog.config import settings
from codedfog.core.errors import InvalidArgument

logger = structlog.get_logger(__name__)

Seed = Union[int, Sequence[int]]


class ShiftedExponential(BaseModel):
    """A task of work w runs for w*shift + Exp(rate/w)"""

    model_config = ConfigDict(frozen=True)

    shift: float = Field(default=1.0, ge=0.0, description="deterministic seconds per unit work")
    rate: float = Field(default=1.0, gt=0.0, description="straggling parameter per unit work")

    def sample(self, work: float, size, rng: np.random.Generator) -> np.ndarray:
        if work <= 0:
            raise InvalidArgument(f"work must be positive, got {work}")
        return work * self.shift + rng.exponential(scale=work / self.rate, size=size)


class SchemeKind(str, Enum):
    UNCODED = "uncoded"
    REPETITION = "repetition"
    MDS = "mds"


class ExecutionScheme(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: SchemeKind
    n: int = Field(ge=1)
    k: Optional[int] = None

    @model_validator(mode="after")
    def _check_parameters(self) -> "ExecutionScheme":
        if self.kind == SchemeKind.UNCODED:
            if self.k is not None and self.k != self.n:
                raise ValueError("uncoded execution has k = n")
            object.__setattr__(self, "k", self.n)
        elif self.k is None or not 1 <= self.k <= self.n:
            raise ValueError(f"{self.kind.value} needs 1 <= k <= n")
        elif self.kind == SchemeKind.REPETITION and self.n % self.k:
            raise ValueError(f"repetition needs k | n, got n={self.n}, k={self.k}")
        return self

    @property
    def work(self) -> float:
        """Work of one task relative to the whole job"""
        return 1.0 / self.k


@dataclass(frozen=True)
class LatencyEstimate:
    analytic_mean: float
    mc_mean: float
    mc_stderr: float
    trials: int

    @property
    def z_score(self) -> float:
        if self.mc_stderr == 0:
            return 0.0 if self.mc_mean == self.analytic_mean else math.inf
        return abs(self.mc_mean - self.analytic_mean) / self.mc_stderr


@lru_cache(maxsize=4096)
def harmonic(m: int) -> float:
    """H_m by direct summation, H_0 = 0"""
    return sum(1.0 / i for i in range(1, m + 1))


def exp_order_stat_mean(n: int, q: int, rate: float) -> float:
    """Mean of the q-th smallest of n iid Exp(rate): (H_n - H_{n-q}) / rate"""
    if not 1 <= q <= n:
        raise InvalidArgument(f"order statistic q={q} out of range for n={n}")
    if rate <= 0:
        raise InvalidArgument(f"rate must be positive, got {rate}")
    return (harmonic(n) - harmonic(n - q)) / rate


def scheme_latency_analytic(scheme: ExecutionScheme, model: ShiftedExponential) -> float:
    n, k = scheme.n, scheme.k
    s, rate = model.shift, model.rate
    if scheme.kind == SchemeKind.UNCODED:
        return s / n + harmonic(n) / (rate * n)
    if scheme.kind == SchemeKind.REPETITION:
        return s / k + harmonic(k) / (rate * n)
    return s / k + (harmonic(n) - harmonic(n - k)) / (rate * k)


def _completion_sampler(
    scheme: ExecutionScheme, model: ShiftedExponential
) -> Callable[[np.random.Generator, int], np.ndarray]:
    n, k = scheme.n, scheme.k

    def sample(rng: np.random.Generator, count: int) -> np.ndarray:
        durations = model.sample(scheme.work, (count, n), rng)
        if scheme.kind == SchemeKind.UNCODED:
            return durations.max(axis=1)
        if scheme.kind == SchemeKind.REPETITION:
            # every group finished at least once
            return durations.reshape(count, k, n // k).min(axis=2).max(axis=1)
        return np.partition(durations, k - 1, axis=1)[:, k - 1]

    return sample


def run_chunked(
    sampler: Callable[[np.random.Generator, int], np.ndarray],
    trials: int,
    seed: Seed,
    workers: Optional[int] = None,
) -> np.ndarray:
    """
    Draw `trials` samples in fixed-size chunks, one spawned stream per chunk.

    Chunks are concatenated in order, so the output does not depend on `workers`.
    """
    if trials < 1:
        raise InvalidArgument(f"trials must be >= 1, got {trials}")
    chunk = settings.MC_CHUNK_TRIALS
    counts = [min(chunk, trials - start) for start in range(0, trials, chunk)]
    streams = np.random.SeedSequence(seed).spawn(len(counts))

    def run(job: Tuple[np.random.SeedSequence, int]) -> np.ndarray:
        stream, count = job
        return sampler(np.random.default_rng(stream), count)

    pool_size = max(1, workers or settings.MC_WORKERS)
    if pool_size == 1 or len(counts) == 1:
        parts = [run(job) for job in zip(streams, counts)]
    else:
        with ThreadPoolExecutor(max_workers=pool_size) as pool:
            parts = list(pool.map(run, zip(streams, counts)))
    return np.concatenate(parts)


def summarize(samples: np.ndarray, analytic: float) -> LatencyEstimate:
    trials = int(samples.size)
    stderr = float(samples.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return LatencyEstimate(
        analytic_mean=analytic,
        mc_mean=float(samples.mean()),
        mc_stderr=stderr,
        trials=trials,
    )


def scheme_latency_mc(
    scheme: ExecutionScheme,
    model: ShiftedExponential,
    trials: int,
    seed: Seed,
    workers: Optional[int] = None,
) -> LatencyEstimate:
    samples = run_chunked(_completion_sampler(scheme, model), trials, seed, workers)
    estimate = summarize(samples, scheme_latency_analytic(scheme, model))
    logger.debug(
        "latency_simulated",
        scheme=scheme.kind.value,
        n=scheme.n,
        k=scheme.k,
        analytic=estimate.analytic_mean,
        mc_mean=estimate.mc_mean,
        trials=trials,
    )
    return estimate


def order_statistic_estimate(
    nodes: int,
    q: int,
    work: float,
    model: ShiftedExponential,
    trials: int,
    seed: Seed,
    workers: Optional[int] = None,
) -> LatencyEstimate:
    """Completion of the q-th fastest of `nodes` iid tasks of the given work"""
    analytic = work * model.shift + exp_order_stat_mean(nodes, q, model.rate / work)

    def sample(rng: np.random.Generator, count: int) -> np.ndarray:
        durations = model.sample(work, (count, nodes), rng)
        return np.partition(durations, q - 1, axis=1)[:, q - 1]

    return summarize(run_chunked(sample, trials, seed, workers), analytic)


def optimal_mds_k(n: int, model: ShiftedExponential) -> Tuple[int, float]:
    """Best k for an (n,k) MDS execution and its speedup over uncoded; ties go to larger k"""
    if n < 1:
        raise InvalidArgument(f"n must be >= 1, got {n}")
    uncoded = scheme_latency_analytic(ExecutionScheme(kind=SchemeKind.UNCODED, n=n), model)
    best_k, best_latency = 1, math.inf
    for k in range(1, n + 1):
        latency = scheme_latency_analytic(ExecutionScheme(kind=SchemeKind.MDS, n=n, k=k), model)
        if latency <= best_latency:
            best_k, best_latency = k, latency
    return best_k, uncoded / best_latency


def scheme_grid(n: int, ks: Optional[Sequence[int]] = None) -> List[ExecutionScheme]:
    """
    Schemes compared by the latency command for one n: uncoded, then repetition for every
    k dividing n, then MDS for every k. ks defaults to the divisors of n.
    """
    if ks is None:
        ks = [k for k in range(1, n + 1) if n % k == 0]
    ks = sorted({k for k in ks if 1 <= k <= n})
    schemes = [ExecutionScheme(kind=SchemeKind.UNCODED, n=n)]
    schemes += [ExecutionScheme(kind=SchemeKind.REPETITION, n=n, k=k) for k in ks if n % k == 0]
    schemes += [ExecutionScheme(kind=SchemeKind.MDS, n=n, k=k) for k in ks]
    return schemes
