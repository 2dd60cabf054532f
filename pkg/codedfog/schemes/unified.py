"""
Unified scheme - MDS-coded Map tasks placed repetitively, Map phase stopped at the fastest q
nodes, greedy coded-multicast shuffle among the finishers.

Load accounting works on task-result "parts": every coded task result is split evenly
over the reducers, one part each. A reducer needs its part of each of the m decodable
results; normalized_load is the shuffled volume divided by the m results.
"""
import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from functools import cached_property
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from codedfog.config import settings
from codedfog.core.errors import (
    DecodeIncomplete,
    InfeasibleSweep,
    InvalidArgument,
    PlanInfeasible,
    ShuffleInfeasible,
    UnsupportedSize,
)
from codedfog.core.progress_emitter import ProgressEmitter
from codedfog.schemes import erasure
from codedfog.schemes.erasure import CodeField, MdsCode
from codedfog.schemes.mbc_shuffle import LoadReport, map_value
from codedfog.schemes.placement import Subset, enumerate_subsets
from codedfog.schemes.straggler import LatencyEstimate, ShiftedExponential, order_statistic_estimate

logger = structlog.get_logger(__name__)

CLIENT = 0


class DemandModel(str, Enum):
    FINISHERS = "finishers"
    ALL_NODES = "all-nodes"
    CLIENT_COLLECTS = "client-collects"


class Normalization(str, Enum):
    ROW = "row"
    ENTRY = "entry"


def parse_fraction(value: Union[str, int, float, Fraction]) -> Fraction:
    """'1/3', '0.5', 1, 0.25 -> Fraction"""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ValueError(f"not a fraction: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(value).limit_denominator(10**6)
    try:
        return Fraction(str(value).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a fraction: {value!r}") from exc


class UnifiedSpec(BaseModel):
    """K nodes, storage fraction mu, m source Map tasks, Map phase ended by the fastest q"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    K: int = Field(ge=2)
    mu: Fraction
    m: int = Field(ge=1)
    q: int = Field(ge=1)
    network_rate: float = Field(default=10e6, gt=0, description="bits per second")
    bits_per_value: int = Field(default=16, ge=1)
    rows: int = Field(default=10**6, ge=1)
    columns: int = Field(default=1, ge=1)
    normalization: Normalization = Normalization.ROW

    @field_validator("mu", mode="before")
    @classmethod
    def _parse_mu(cls, value: Any) -> Fraction:
        return parse_fraction(value)

    @model_validator(mode="after")
    def _check_ranges(self) -> "UnifiedSpec":
        if not Fraction(1, self.K) <= self.mu <= 1:
            raise ValueError(f"mu={self.mu} outside [1/K, 1] for K={self.K}")
        if not math.ceil(1 / self.mu) <= self.q <= self.K:
            raise ValueError(f"q={self.q} outside [ceil(1/mu), K] = [{math.ceil(1 / self.mu)}, {self.K}]")
        return self

    def violations(self) -> List[str]:
        """Failing divisibility constraints (empty when a plan can be built)"""
        problems = []
        if (self.mu * self.q).denominator != 1:
            problems.append(f"mu*q={self.mu * self.q} is not an integer")
        if (self.K * self.m) % self.q:
            problems.append(f"(K/q)*m={Fraction(self.K * self.m, self.q)} is not an integer")
        elif not problems and self.coded_task_count % self.subset_count:
            problems.append(
                f"(K/q)*m={self.coded_task_count} is not divisible by C(K,mu*q)={self.subset_count}"
            )
        if (self.mu * self.m).denominator != 1:
            problems.append(f"mu*m={self.mu * self.m} is not an integer")
        return problems

    @property
    def storage_degree(self) -> int:
        """t = mu*q, the number of nodes hosting each coded task"""
        return int(self.mu * self.q)

    @property
    def coded_task_count(self) -> int:
        return self.K * self.m // self.q

    @property
    def subset_count(self) -> int:
        return math.comb(self.K, self.storage_degree)

    @property
    def tasks_per_subset(self) -> int:
        return self.coded_task_count // self.subset_count

    @property
    def tasks_per_node(self) -> int:
        return int(self.mu * self.m)

    @property
    def total_value_bits(self) -> int:
        """Bits of the whole job output that one unit of normalized load stands for"""
        entries = self.columns if self.normalization == Normalization.ENTRY else 1
        return self.rows * entries * self.bits_per_value


@dataclass(frozen=True)
class UnifiedPlan:
    """Coded task i lives on subsets[i mod C(K, t)]"""

    spec: UnifiedSpec
    subsets: Tuple[Subset, ...]
    code: Optional[MdsCode]
    coverage_minimum: int
    warnings: Tuple[str, ...] = ()

    @property
    def coded_task_count(self) -> int:
        return self.spec.coded_task_count

    def host_of(self, task_id: int) -> Subset:
        return self.subsets[task_id % len(self.subsets)]

    def tasks_on_subset(self, index: int) -> int:
        return len(range(index, self.coded_task_count, len(self.subsets)))

    @cached_property
    def host_sets(self) -> Dict[int, Subset]:
        return {task_id: self.host_of(task_id) for task_id in range(self.coded_task_count)}

    def tasks_of(self, node: int) -> List[int]:
        return [task_id for task_id, hosts in self.host_sets.items() if node in hosts]


def _available_count(plan: UnifiedPlan, finishers: Iterable[int]) -> int:
    chosen = set(finishers)
    return sum(
        plan.tasks_on_subset(index)
        for index, subset in enumerate(plan.subsets)
        if chosen.intersection(subset)
    )


def coverage_minimum(plan: UnifiedPlan) -> int:
    """Fewest tasks any q finishers jointly hold, by enumerating every q-subset"""
    spec = plan.spec
    return min(
        _available_count(plan, finishers)
        for finishers in itertools.combinations(range(1, spec.K + 1), spec.q)
    )


def build_unified_plan(
    spec: UnifiedSpec,
    field: CodeField = CodeField.GF256,
    seed: int = 0,
    with_code: bool = True,
) -> UnifiedPlan:
    """
    Place (K/q)m coded tasks round-robin over the lexicographic (mu*q)-subsets of nodes.

    Returns:
        UnifiedPlan with the MDS code attached when requested and (K/q)m <= UNIFIED_CODE_LIMIT
    """
    violations = spec.violations()
    if violations:
        raise PlanInfeasible("; ".join(violations), details={"violations": violations})

    subsets = tuple(enumerate_subsets(spec.K, spec.storage_degree))
    warnings: List[str] = []

    code = None
    if with_code and spec.coded_task_count <= settings.UNIFIED_CODE_LIMIT:
        code = erasure.make_mds(spec.coded_task_count, spec.m, field=field, seed=seed)
    elif with_code:
        warnings.append(f"MDS code of length {spec.coded_task_count} not materialised")

    plan = UnifiedPlan(spec=spec, subsets=subsets, code=code, coverage_minimum=0)
    if spec.K <= settings.COVERAGE_EXHAUSTIVE_MAX_NODES:
        minimum = coverage_minimum(plan)
    else:
        # closed form for the uniform placement: only tasks hosted entirely outside F are lost
        minimum = spec.coded_task_count - spec.tasks_per_subset * math.comb(
            spec.K - spec.q, spec.storage_degree
        )
        warnings.append(f"coverage not enumerated for K={spec.K}; counted in closed form")
        logger.warning("coverage_not_enumerated", K=spec.K, q=spec.q)

    if minimum < spec.m:
        raise PlanInfeasible(
            f"some {spec.q} finishers hold only {minimum} < m={spec.m} tasks",
            details={"constraint": "coverage", "minimum": minimum, "m": spec.m},
        )

    plan = replace(plan, coverage_minimum=minimum, warnings=tuple(warnings))
    logger.debug(
        "unified_plan_built",
        K=spec.K,
        q=spec.q,
        coded_tasks=spec.coded_task_count,
        coverage_minimum=minimum,
    )
    return plan


def minimal_task_count(K: int, mu: Union[str, Fraction]) -> int:
    """Smallest m for which every q with integral mu*q satisfies the divisibility constraints"""
    mu = parse_fraction(mu)
    if not Fraction(1, K) <= mu <= 1:
        raise InvalidArgument(f"mu={mu} outside [1/K, 1] for K={K}")
    candidates = [q for q in range(math.ceil(1 / mu), K + 1) if (mu * q).denominator == 1]
    if not candidates:
        raise InfeasibleSweep(f"no q in [ceil(1/mu), K] makes mu*q an integer for mu={mu}, K={K}")
    step = mu.denominator
    for q in candidates:
        blocks = q * math.comb(K, int(mu * q))
        step = math.lcm(step, blocks // math.gcd(K, blocks))
    return step


def feasible_q_values(K: int, mu: Union[str, Fraction], m: int) -> List[int]:
    mu = parse_fraction(mu)
    values = []
    for q in range(math.ceil(1 / mu), K + 1):
        if not UnifiedSpec(K=K, mu=mu, m=m, q=q).violations():
            values.append(q)
    return values


def map_phase_latency(
    spec: UnifiedSpec,
    model: ShiftedExponential,
    trials: int,
    seed: int,
    workers: Optional[int] = None,
) -> LatencyEstimate:
    """q-th order statistic of the K node completion times, work mu*m/m per node"""
    work = spec.tasks_per_node / spec.m
    return order_statistic_estimate(spec.K, spec.q, work, model, trials, [seed, spec.q], workers)


def normalize_finishers(spec: UnifiedSpec, finishers: Iterable[int]) -> Subset:
    chosen = tuple(sorted(set(finishers)))
    if len(chosen) != spec.q or not all(1 <= node <= spec.K for node in chosen):
        raise InvalidArgument(
            f"finishers must be {spec.q} distinct nodes in 1..{spec.K}",
            details={"finishers": list(finishers)},
        )
    return chosen


def reducers_for(spec: UnifiedSpec, finishers: Subset, demand_model: DemandModel) -> Tuple[int, ...]:
    demand_model = DemandModel(demand_model)
    if demand_model == DemandModel.FINISHERS:
        return finishers
    if demand_model == DemandModel.ALL_NODES:
        return tuple(range(1, spec.K + 1))
    return ()


@dataclass(frozen=True)
class DecodableSelection:
    """The m results reducers decode from, grouped by which finishers hold them"""

    finishers: Subset
    taken: Dict[int, int]
    groups: Dict[Subset, int]

    def task_ids(self, plan: UnifiedPlan) -> List[int]:
        stride = len(plan.subsets)
        return sorted(index + stride * j for index, count in self.taken.items() for j in range(count))


def select_decodable(plan: UnifiedPlan, finishers: Subset) -> DecodableSelection:
    """
    Pick m available tasks, most widely held first, lower task id on ties.

    Raises:
        ShuffleInfeasible: when the finishers hold fewer than m tasks
    """
    chosen = set(finishers)
    levels: Dict[int, List[int]] = defaultdict(list)
    for index, subset in enumerate(plan.subsets):
        levels[len(chosen.intersection(subset))].append(index)

    available = sum(plan.tasks_on_subset(index) for level, idx in levels.items() if level for index in idx)
    if available < plan.spec.m:
        raise ShuffleInfeasible(
            f"finishers {list(finishers)} hold {available} < m={plan.spec.m} tasks",
            details={"finishers": list(finishers), "available": available, "m": plan.spec.m},
        )

    taken: Dict[int, int] = {}
    remaining = plan.spec.m
    for level in sorted((level for level in levels if level), reverse=True):
        indices = levels[level]
        total = sum(plan.tasks_on_subset(index) for index in indices)
        if remaining >= total:
            for index in indices:
                taken[index] = plan.tasks_on_subset(index)
            remaining -= total
        else:
            # ids on one level interleave subset by subset, so a prefix spreads evenly
            base, extra = divmod(remaining, len(indices))
            for rank, index in enumerate(indices):
                count = base + (1 if rank < extra else 0)
                if count:
                    taken[index] = count
            remaining = 0
        if not remaining:
            break

    groups: Dict[Subset, int] = defaultdict(int)
    for index, count in taken.items():
        groups[tuple(node for node in plan.subsets[index] if node in chosen)] += count
    return DecodableSelection(finishers=tuple(finishers), taken=taken, groups=dict(groups))


def _without(subset: Subset, node: int) -> Subset:
    return tuple(member for member in subset if member != node)


def _greedy_parts(groups: Dict[Subset, int], finishers: Subset, degree: int) -> Tuple[Fraction, int]:
    """
    Parts shuffled among finishers and messages used.

    Level a >= 2: for every (a+1)-subset S of finishers each j in S multicasts the XOR of
    its segments of V(k, S\\{k}), k in S\\{j}; a segment is 1/a of its group.
    Level 1: the only holder unicasts.
    """
    q = len(finishers)
    parts = Fraction(0)
    messages = 0
    for level in range(degree, 1, -1):
        entries = {subset: count for subset, count in groups.items() if len(subset) == level and count}
        if not entries:
            continue
        values = set(entries.values())
        if len(entries) == math.comb(q, level) and len(values) == 1:
            (count,) = values
            sets = math.comb(q, level + 1)
            parts += Fraction(sets * (level + 1) * count, level)
            messages += sets * (level + 1)
            continue
        for subset in itertools.combinations(finishers, level + 1):
            for sender in subset:
                cost = max(entries.get(_without(subset, target), 0) for target in subset if target != sender)
                if cost:
                    parts += Fraction(cost, level)
                    messages += 1

    for holder in finishers:
        count = groups.get((holder,), 0)
        if count:
            parts += count * (q - 1)
            messages += q - 1
    return parts, messages


def shuffle_load(
    plan: UnifiedPlan,
    finishers: Iterable[int],
    demand_model: DemandModel = DemandModel.FINISHERS,
) -> LoadReport:
    """
    Exact load of the greedy shuffle for one finisher set.

    Returns:
        LoadReport where value_units counts whole task results and total_bits is
        normalized_load times the job's total value bits
    """
    spec = plan.spec
    chosen = normalize_finishers(spec, finishers)
    demand_model = DemandModel(demand_model)
    selection = select_decodable(plan, chosen)
    if demand_model == DemandModel.CLIENT_COLLECTS:
        return LoadReport(Fraction(0), 0, Fraction(0), Fraction(0))

    reducers = reducers_for(spec, chosen, demand_model)
    parts, messages = _greedy_parts(selection.groups, chosen, spec.storage_degree)
    if demand_model == DemandModel.ALL_NODES:
        # unfinished reducers hold nothing; lowest-id holder in F sends each result part
        outside = spec.K - spec.q
        senders = {min(subset) for subset, count in selection.groups.items() if count}
        parts += outside * spec.m
        messages += outside * len(senders)

    units = parts / len(reducers)
    normalized = units / spec.m
    return LoadReport(
        total_bits=normalized * spec.total_value_bits,
        message_count=messages,
        normalized_load=normalized,
        value_units=units,
    )


def level_totals(spec: UnifiedSpec) -> Dict[int, int]:
    """Tasks whose hosts meet any fixed finisher set in exactly a nodes, per a >= 1"""
    t, c = spec.storage_degree, spec.tasks_per_subset
    return {
        level: c * math.comb(spec.q, level) * math.comb(spec.K - spec.q, t - level)
        for level in range(t, 0, -1)
    }


def is_finisher_symmetric(spec: UnifiedSpec) -> bool:
    """True when the decodable set takes whole availability levels, so every F costs the same"""
    cumulative = 0
    for total in level_totals(spec).values():
        cumulative += total
        if cumulative == spec.m:
            return True
        if cumulative > spec.m:
            return False
    return False


def finisher_sets(spec: UnifiedSpec, seed: int) -> List[Subset]:
    """One set when symmetric; all q-subsets when few; otherwise seeded samples"""
    nodes = range(1, spec.K + 1)
    if is_finisher_symmetric(spec):
        return [tuple(range(1, spec.q + 1))]
    if math.comb(spec.K, spec.q) <= settings.FINISHER_EXHAUSTIVE_LIMIT:
        return list(itertools.combinations(nodes, spec.q))
    rng = np.random.default_rng([seed, spec.q])
    return [
        tuple(sorted(int(node) + 1 for node in rng.choice(spec.K, size=spec.q, replace=False)))
        for _ in range(settings.FINISHER_SAMPLES)
    ]


def average_load(
    plan: UnifiedPlan,
    sets: Sequence[Subset],
    demand_model: DemandModel = DemandModel.FINISHERS,
) -> Fraction:
    total = sum((shuffle_load(plan, finishers, demand_model).normalized_load for finishers in sets), Fraction(0))
    return total / len(sets)


@dataclass(frozen=True)
class TradeoffPoint:
    q: int
    map_latency: float
    map_latency_mc: float
    map_latency_stderr: float
    normalized_load: Fraction
    shuffle_time: float
    total_time: float
    finisher_sets: int
    is_optimal: bool = False

    def to_row(self) -> Dict[str, Any]:
        return {
            "q": self.q,
            "map_latency_s": self.map_latency,
            "normalized_load": self.normalized_load,
            "shuffle_time_s": self.shuffle_time,
            "total_time_s": self.total_time,
            "is_optimal": self.is_optimal,
        }


@dataclass(frozen=True)
class SweepResult:
    points: List[TradeoffPoint]
    q_star: int
    summary: Dict[str, Any] = field(default_factory=dict)


def evaluate_point(
    spec: UnifiedSpec,
    model: ShiftedExponential,
    trials: int,
    seed: int,
    demand_model: DemandModel = DemandModel.FINISHERS,
    workers: Optional[int] = None,
) -> TradeoffPoint:
    plan = build_unified_plan(spec, seed=seed, with_code=False)
    latency = map_phase_latency(spec, model, trials, seed, workers)
    sets = finisher_sets(spec, seed)
    load = average_load(plan, sets, demand_model)
    shuffle_time = float(load) * spec.total_value_bits / spec.network_rate
    return TradeoffPoint(
        q=spec.q,
        map_latency=latency.analytic_mean,
        map_latency_mc=latency.mc_mean,
        map_latency_stderr=latency.mc_stderr,
        normalized_load=load,
        shuffle_time=shuffle_time,
        total_time=latency.analytic_mean + shuffle_time,
        finisher_sets=len(sets),
    )


def _gain(reference: float, best: float) -> float:
    return 100.0 * (reference - best) / reference if reference else 0.0


def tradeoff_sweep(
    K: int,
    mu: Union[str, Fraction],
    m: int,
    model: ShiftedExponential,
    network_rate: float,
    bits_per_value: int,
    trials: int,
    seed: int,
    rows: int = 10**6,
    columns: int = 1,
    normalization: Normalization = Normalization.ROW,
    demand_model: DemandModel = DemandModel.FINISHERS,
    workers: Optional[int] = None,
    emitter: Optional[ProgressEmitter] = None,
) -> SweepResult:
    """
    One TradeoffPoint per feasible q, plus the q minimising total response time.

    Raises:
        InfeasibleSweep: when no q in [ceil(1/mu), K] satisfies the divisibility constraints
    """
    mu = parse_fraction(mu)
    qs = feasible_q_values(K, mu, m)
    if not qs:
        raise InfeasibleSweep(
            f"no feasible q for K={K}, mu={mu}, m={m}",
            details={"K": K, "mu": str(mu), "m": m, "suggested_m": minimal_task_count(K, mu)},
        )

    points = []
    for position, q in enumerate(qs):
        spec = UnifiedSpec(
            K=K,
            mu=mu,
            m=m,
            q=q,
            network_rate=network_rate,
            bits_per_value=bits_per_value,
            rows=rows,
            columns=columns,
            normalization=normalization,
        )
        point = evaluate_point(spec, model, trials, seed, demand_model, workers)
        points.append(point)
        if emitter:
            emitter.emit(
                "sweep",
                f"q={q} evaluated",
                round(100 * (position + 1) / len(qs)),
                {"q": q, "total_time_s": point.total_time, "finisher_sets": point.finisher_sets},
            )

    best = min(points, key=lambda point: (point.total_time, point.q))
    points = [replace(point, is_optimal=point.q == best.q) for point in points]
    first, last = points[0], points[-1]
    summary = {
        "q_star": best.q,
        "total_time_q_star_s": best.total_time,
        "q_min": first.q,
        "total_time_q_min_s": first.total_time,
        "q_max": last.q,
        "total_time_q_max_s": last.total_time,
        "gain_vs_min_latency_pct": _gain(first.total_time, best.total_time),
        "gain_vs_min_bandwidth_pct": _gain(last.total_time, best.total_time),
        "interior_optimum": first.q < best.q < last.q,
    }
    logger.info("tradeoff_sweep_done", K=K, mu=str(mu), m=m, points=len(points), q_star=best.q)
    return SweepResult(points=points, q_star=best.q, summary=summary)


@dataclass(frozen=True)
class ComputationLoadChoice:
    r_star: int
    continuous: float
    total_coded: float
    total_uncoded: float

    @property
    def speedup(self) -> float:
        return self.total_uncoded / self.total_coded


def optimal_computation_load(t_task: float, t_data: float, K: int) -> ComputationLoadChoice:
    """Minimise r*t_task + t_data/r over integer r in [1, K]"""
    if t_task <= 0 or t_data < 0 or K < 1:
        raise InvalidArgument(
            "need t_task > 0, t_data >= 0 and K >= 1",
            details={"t_task": t_task, "t_data": t_data, "K": K},
        )
    continuous = min(max(math.sqrt(t_data / t_task), 1.0), float(K))

    def total(r: int) -> float:
        return r * t_task + t_data / r

    candidates = sorted({min(max(math.floor(continuous), 1), K), min(max(math.ceil(continuous), 1), K)})
    r_star = min(candidates, key=lambda r: (total(r), r))
    return ComputationLoadChoice(
        r_star=r_star,
        continuous=continuous,
        total_coded=total(r_star),
        total_uncoded=total(1),
    )


@dataclass(frozen=True)
class UnifiedJobReport:
    finishers: Subset
    decodable: Tuple[int, ...]
    demand_model: DemandModel
    multicasts: int
    unicasts: int
    value_units: Fraction
    normalized_load: Fraction
    decoded: Dict[int, bool]
    max_relative_error: float
    warnings: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return bool(self.decoded) and all(self.decoded.values())


def _source_parts(code: MdsCode, m: int, reducers: int, length: int, seed: int) -> np.ndarray:
    if code.field == CodeField.GF256:
        return np.array(
            [
                [np.frombuffer(map_value(part + 1, task + 1, seed, 8 * length).payload, dtype=np.uint8)
                 for part in range(reducers)]
                for task in range(m)
            ],
            dtype=np.uint8,
        )
    return np.random.default_rng(seed).standard_normal((m, reducers, length))


def run_unified_job(
    plan: UnifiedPlan,
    finishers: Iterable[int],
    demand_model: DemandModel = DemandModel.FINISHERS,
    value_length: int = 12,
    seed: int = 0,
) -> UnifiedJobReport:
    """
    Execute the greedy shuffle on real payloads and MDS-decode at every reducer.

    Each source result is one part per reducer of `value_length` symbols. GF(2^8) plans
    combine with XOR, real plans with add/subtract; segments are zero padded.
    """
    code = plan.code
    if code is None:
        raise UnsupportedSize(
            f"plan with {plan.coded_task_count} coded tasks carries no MDS code",
            details={"coded_tasks": plan.coded_task_count, "limit": settings.UNIFIED_CODE_LIMIT},
        )
    spec = plan.spec
    chosen = normalize_finishers(spec, finishers)
    demand_model = DemandModel(demand_model)
    selection = select_decodable(plan, chosen)
    decodable = selection.task_ids(plan)
    reducers = reducers_for(spec, chosen, demand_model) or (CLIENT,)
    slot = {node: index for index, node in enumerate(reducers)}

    binary = code.field == CodeField.GF256
    dtype = np.uint8 if binary else np.float64

    def add(left: np.ndarray, right: np.ndarray) -> np.ndarray:
        return left ^ right if binary else left + right

    def sub(left: np.ndarray, right: np.ndarray) -> np.ndarray:
        return left ^ right if binary else left - right

    sources = _source_parts(code, spec.m, len(reducers), value_length, seed)
    coded = np.empty((code.n, len(reducers), value_length), dtype=dtype)
    for part in range(len(reducers)):
        encoded = erasure.encode(code, [sources[task, part] for task in range(spec.m)])
        for task, symbol in enumerate(encoded):
            coded[task, part] = np.frombuffer(symbol, dtype=np.uint8) if binary else symbol

    available = {task: tuple(node for node in plan.host_of(task) if node in chosen) for task in decodable}
    grouped: Dict[Subset, List[int]] = defaultdict(list)
    for task in decodable:
        grouped[available[task]].append(task)

    received: Dict[int, Dict[int, np.ndarray]] = {node: {} for node in reducers}
    multicasts = unicasts = elements = 0

    if demand_model == DemandModel.CLIENT_COLLECTS:
        received[CLIENT] = {task: coded[task, 0] for task in decodable}
    else:
        for node in reducers:
            if node in chosen:
                for task in decodable:
                    if node in available[task]:
                        received[node][task] = coded[task, slot[node]]

        def group_vector(target: int, batch: Subset) -> np.ndarray:
            tasks = grouped.get(batch, [])
            if not tasks:
                return np.zeros(0, dtype=dtype)
            return np.concatenate([coded[task, slot[target]] for task in tasks])

        for level in range(spec.storage_degree, 1, -1):
            for subset in itertools.combinations(chosen, level + 1):
                vectors = {node: group_vector(node, _without(subset, node)) for node in subset}
                seg = {node: -(-vectors[node].size // level) for node in subset}
                padded = {
                    node: np.concatenate([vectors[node], np.zeros(seg[node] * level - vectors[node].size, dtype=dtype)])
                    for node in subset
                }

                def segment(target: int, sender: int) -> np.ndarray:
                    index = _without(subset, target).index(sender)
                    return padded[target][index * seg[target]:(index + 1) * seg[target]]

                pieces: Dict[int, Dict[int, np.ndarray]] = {node: {} for node in subset}
                for sender in subset:
                    targets = [node for node in subset if node != sender]
                    length = max(seg[node] for node in targets)
                    if not length:
                        continue
                    payload = np.zeros(length, dtype=dtype)
                    for target in targets:
                        payload[: seg[target]] = add(payload[: seg[target]], segment(target, sender))
                    multicasts += 1
                    elements += length
                    for target in targets:
                        view = payload.copy()
                        for other in targets:
                            if other != target:
                                # target is in subset\{other}, so it hosts every task of that group
                                view[: seg[other]] = sub(view[: seg[other]], segment(other, sender))
                        pieces[target][sender] = view[: seg[target]]

                for node in subset:
                    batch = _without(subset, node)
                    if not vectors[node].size:
                        continue
                    joined = np.concatenate([pieces[node][sender] for sender in batch])[: vectors[node].size]
                    for offset, task in enumerate(grouped[batch]):
                        received[node][task] = joined[offset * value_length:(offset + 1) * value_length]

        for holder in chosen:
            tasks = grouped.get((holder,), [])
            if not tasks:
                continue
            for node in chosen:
                if node == holder:
                    continue
                for task in tasks:
                    received[node][task] = coded[task, slot[node]]
                unicasts += 1
                elements += len(tasks) * value_length

        for node in reducers:
            if node in chosen:
                continue
            senders = set()
            for task in decodable:
                senders.add(min(available[task]))
                received[node][task] = coded[task, slot[node]]
                elements += value_length
            unicasts += len(senders)

    decoded: Dict[int, bool] = {}
    warnings: List[str] = []
    worst = 0.0
    for node in reducers:
        have = received[node]
        missing = [task for task in decodable if task not in have]
        if missing:
            raise DecodeIncomplete(
                f"reducer {node} is missing {len(missing)} coded results",
                details={"node": node, "missing": missing},
            )
        symbols = {task: have[task].tobytes() if binary else have[task] for task in decodable}
        result = erasure.decode(code, symbols)
        warnings.extend(result.warnings)
        expected = sources[:, slot[node]]
        if binary:
            decoded[node] = all(block == expected[task].tobytes() for task, block in enumerate(result.blocks))
        else:
            error = float(np.linalg.norm(np.stack(result.blocks) - expected) / np.linalg.norm(expected))
            worst = max(worst, error)
            decoded[node] = error <= 1e-8

    parts = Fraction(elements, value_length)
    units = parts / len(reducers) if demand_model != DemandModel.CLIENT_COLLECTS else Fraction(0)
    report = UnifiedJobReport(
        finishers=chosen,
        decodable=tuple(decodable),
        demand_model=demand_model,
        multicasts=multicasts,
        unicasts=unicasts,
        value_units=units,
        normalized_load=units / spec.m,
        decoded=decoded,
        max_relative_error=worst,
        warnings=warnings,
    )
    logger.info(
        "unified_job_done",
        finishers=list(chosen),
        multicasts=multicasts,
        unicasts=unicasts,
        ok=report.ok,
    )
    return report
