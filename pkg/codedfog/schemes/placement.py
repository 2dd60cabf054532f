"""
Placement - repetitive Map/Reduce assignment underlying Minimum Bandwidth Codes
Files are split into batches indexed by r-subsets of nodes; reduce functions are spread round-robin
"""
import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, List, Tuple

import structlog
from pydantic import BaseModel, ConfigDict, Field, model_validator

from codedfog.core.errors import InvalidArgument, PlacementInfeasible, ShuffleInfeasible

logger = structlog.get_logger(__name__)

Subset = Tuple[int, ...]


class JobSpec(BaseModel):
    """K nodes computing Q output functions from N input files at computation load r"""

    model_config = ConfigDict(frozen=True)

    K: int = Field(ge=2, description="node count")
    N: int = Field(ge=1, description="input file count")
    Q: int = Field(ge=1, description="output function count")
    r: int = Field(ge=1, description="computation load")
    T: int = Field(default=8, ge=8, description="intermediate value size in bits")

    @model_validator(mode="after")
    def _check_ranges(self) -> "JobSpec":
        if self.r > self.K:
            raise ValueError(f"computation load r={self.r} exceeds node count K={self.K}")
        if self.T % 8:
            raise ValueError(f"value size T={self.T} bits is not a multiple of 8")
        return self

    @property
    def batch_count(self) -> int:
        return math.comb(self.K, self.r)

    @property
    def files_per_batch(self) -> int:
        return self.N // self.batch_count

    @property
    def functions_per_node(self) -> int:
        return self.Q // self.K

    @property
    def value_bytes(self) -> int:
        return self.T // 8

    def divisibility_violations(self) -> List[str]:
        """Names of the failing placement constraints (empty when feasible)"""
        violations = []
        if self.N % self.batch_count:
            violations.append(f"N={self.N} is not a multiple of C(K,r)={self.batch_count}")
        if self.Q % self.K:
            violations.append(f"Q={self.Q} is not a multiple of K={self.K}")
        return violations

    def segment_bits(self) -> int:
        """Length in bits of one coded multicast segment"""
        total = self.functions_per_node * self.files_per_batch * self.T
        if total % self.r:
            raise ShuffleInfeasible(
                f"(Q/K)*eta*T={total} bits is not divisible by r={self.r}",
                details={"constraint": "segment", "suggestion": nearest_feasible(self)},
            )
        return total // self.r


def nearest_feasible(spec: JobSpec) -> Dict[str, int]:
    """Smallest N >= spec.N and Q >= spec.Q satisfying every divisibility constraint"""
    q_step = spec.K
    q_feasible = -(-spec.Q // q_step) * q_step
    per_node = q_feasible // spec.K
    # eta * (Q/K) * T must be divisible by r
    eta_step = spec.r // math.gcd(spec.r, per_node * spec.T)
    n_step = spec.batch_count * eta_step
    n_feasible = -(-spec.N // n_step) * n_step
    return {"N": n_feasible, "Q": q_feasible}


def enumerate_subsets(K: int, size: int) -> List[Subset]:
    """All size-subsets of {1..K} in lexicographic order"""
    if K < 0 or size < 0 or size > K:
        raise InvalidArgument(
            f"subset size {size} out of range for K={K}",
            details={"K": K, "size": size},
        )
    return list(itertools.combinations(range(1, K + 1), size))


@dataclass(frozen=True)
class PlacementPlan:
    """Which node maps which file batch and which node reduces which functions"""

    K: int
    N: int
    Q: int
    r: int
    batches: Dict[Subset, Tuple[int, ...]]
    reduce_assignment: Dict[int, Tuple[int, ...]]
    files_per_batch: int

    @cached_property
    def _subsets(self) -> List[Subset]:
        return list(self.batches)

    @cached_property
    def _stored(self) -> Dict[int, Tuple[int, ...]]:
        stored: Dict[int, List[int]] = {node: [] for node in range(1, self.K + 1)}
        for subset, batch in self.batches.items():
            for node in subset:
                stored[node].extend(batch)
        return {node: tuple(sorted(files)) for node, files in stored.items()}

    def files_of(self, node: int) -> Tuple[int, ...]:
        """Files stored (and mapped) by a node, ascending"""
        return self._stored[node]

    def holders_of(self, file_id: int) -> Subset:
        return self._subsets[(file_id - 1) // self.files_per_batch]

    def to_document(self) -> Dict[str, Any]:
        return {
            "k": self.K,
            "n_files": self.N,
            "q_functions": self.Q,
            "r": self.r,
            "batches": {
                ",".join(str(node) for node in subset): list(files)
                for subset, files in self.batches.items()
            },
            "reduce": {str(node): list(functions) for node, functions in self.reduce_assignment.items()},
        }


def build_placement(spec: JobSpec) -> PlacementPlan:
    """
    Assign files to lexicographic r-subsets in consecutive blocks of eta
    and functions round-robin (node k reduces k, k+K, k+2K, ...)
    """
    violations = spec.divisibility_violations()
    if violations:
        raise PlacementInfeasible(
            "; ".join(violations),
            details={"violations": violations, "suggestion": nearest_feasible(spec)},
        )

    eta = spec.files_per_batch
    batches: Dict[Subset, Tuple[int, ...]] = {}
    for index, subset in enumerate(enumerate_subsets(spec.K, spec.r)):
        first = index * eta + 1
        batches[subset] = tuple(range(first, first + eta))

    reduce_assignment = {
        node: tuple(range(node, spec.Q + 1, spec.K)) for node in range(1, spec.K + 1)
    }

    plan = PlacementPlan(
        K=spec.K,
        N=spec.N,
        Q=spec.Q,
        r=spec.r,
        batches=batches,
        reduce_assignment=reduce_assignment,
        files_per_batch=eta,
    )
    logger.debug("placement_built", K=spec.K, r=spec.r, batches=len(batches), eta=eta)
    return plan


def check_plan(plan: PlacementPlan) -> List[str]:
    """Brute-force count of every PlacementPlan invariant; returns the violations found"""
    problems = []
    seen: Dict[int, int] = {}
    for subset, files in plan.batches.items():
        if len(files) != plan.files_per_batch:
            problems.append(f"batch {subset} holds {len(files)} files")
        for file_id in files:
            seen[file_id] = seen.get(file_id, 0) + 1
    if sorted(seen) != list(range(1, plan.N + 1)) or any(count != 1 for count in seen.values()):
        problems.append("files are not partitioned across batches")

    per_node = plan.r * plan.N // plan.K
    for node in range(1, plan.K + 1):
        count = len(plan.files_of(node))
        if count != per_node:
            problems.append(f"node {node} stores {count} files, expected {per_node}")

    stored = {node: set(plan.files_of(node)) for node in range(1, plan.K + 1)}
    for file_id in range(1, plan.N + 1):
        replicas = sum(1 for node in stored if file_id in stored[node])
        if replicas != plan.r:
            problems.append(f"file {file_id} is mapped on {replicas} nodes")

    owners: Dict[int, int] = {}
    for node, functions in plan.reduce_assignment.items():
        if len(functions) != plan.Q // plan.K:
            problems.append(f"node {node} reduces {len(functions)} functions")
        for function_id in functions:
            owners[function_id] = owners.get(function_id, 0) + 1
    if sorted(owners) != list(range(1, plan.Q + 1)) or any(count != 1 for count in owners.values()):
        problems.append("functions are not partitioned across nodes")
    return problems
