"""
Brute-force index coding for tiny unified-scheme instances.

Every demanded part is split into subpackets; a message is the XOR of subpackets one
finisher holds. The search looks for the fewest messages after which each reducer can
solve for everything it demands, working in GF(2) over bitmasks.
"""
import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Sequence, Set, Tuple

import structlog

from codedfog.config import settings
from codedfog.core.errors import UnsupportedSize
from codedfog.schemes.unified import (
    DemandModel,
    UnifiedPlan,
    normalize_finishers,
    reducers_for,
    select_decodable,
    shuffle_load,
)

logger = structlog.get_logger(__name__)

MAX_NODES = 4


@dataclass(frozen=True)
class IndexCodingInstance:
    variables: Tuple[Tuple[int, int, int], ...]  # (task, reducer, subpacket)
    known: Dict[int, int]  # reducer -> bitmask of known variables
    demands: Dict[int, int]  # reducer -> bitmask of demanded variables
    candidates: Tuple[int, ...]


def _rank_basis(vectors: Iterable[int]) -> Dict[int, int]:
    """Reduced GF(2) basis keyed by leading bit"""
    basis: Dict[int, int] = {}
    for vector in vectors:
        while vector:
            lead = vector.bit_length() - 1
            if lead not in basis:
                basis[lead] = vector
                break
            vector ^= basis[lead]
    return basis


def _in_span(basis: Dict[int, int], vector: int) -> bool:
    while vector:
        lead = vector.bit_length() - 1
        if lead not in basis:
            return False
        vector ^= basis[lead]
    return True


def _bits(mask: int) -> List[int]:
    return [index for index in range(mask.bit_length()) if mask >> index & 1]


def build_instance(
    plan: UnifiedPlan,
    finishers: Iterable[int],
    demand_model: DemandModel,
    subpackets: int = 1,
) -> IndexCodingInstance:
    spec = plan.spec
    if spec.K > MAX_NODES:
        raise UnsupportedSize(f"index coding search supports K <= {MAX_NODES}, got {spec.K}")
    chosen = normalize_finishers(spec, finishers)
    reducers = reducers_for(spec, chosen, demand_model)
    tasks = select_decodable(plan, chosen).task_ids(plan)
    holders = {task: set(plan.host_of(task)) & set(chosen) for task in tasks}

    variables: List[Tuple[int, int, int]] = []
    known: Dict[int, int] = {reducer: 0 for reducer in reducers}
    demands: Dict[int, int] = {reducer: 0 for reducer in reducers}
    owned: Dict[int, int] = {sender: 0 for sender in chosen}
    for task in tasks:
        for reducer in reducers:
            if reducer in holders[task]:
                continue
            # only demanded subpackets enter the code
            for piece in range(subpackets):
                bit = 1 << len(variables)
                variables.append((task, reducer, piece))
                demands[reducer] |= bit
                for sender in holders[task]:
                    owned[sender] |= bit
                for other in reducers:
                    if other in holders[task]:
                        known[other] |= bit

    candidates: Set[int] = set()
    for mask in owned.values():
        members = _bits(mask)
        if 2 ** len(members) - 1 > settings.INDEX_CODING_MAX_CANDIDATES:
            raise UnsupportedSize(
                f"a finisher holding {len(members)} subpackets exceeds the search limit",
                details={"subpackets_held": len(members), "limit": settings.INDEX_CODING_MAX_CANDIDATES},
            )
        for size in range(1, len(members) + 1):
            for combo in itertools.combinations(members, size):
                candidates.add(sum(1 << index for index in combo))
    if len(candidates) > settings.INDEX_CODING_MAX_CANDIDATES:
        raise UnsupportedSize(
            f"{len(candidates)} candidate messages exceed the search limit",
            details={"candidates": len(candidates), "limit": settings.INDEX_CODING_MAX_CANDIDATES},
        )
    return IndexCodingInstance(
        variables=tuple(variables),
        known=known,
        demands=demands,
        candidates=tuple(sorted(candidates)),
    )


def satisfies(instance: IndexCodingInstance, messages: Sequence[int]) -> bool:
    """Every reducer can solve for each demanded variable from the messages and its side information"""
    for reducer, demand in instance.demands.items():
        if not demand:
            continue
        unknown = ~instance.known[reducer]
        basis = _rank_basis(message & unknown for message in messages)
        if not all(_in_span(basis, 1 << index) for index in _bits(demand)):
            return False
    return True


def minimum_messages(instance: IndexCodingInstance) -> int:
    """Iterative deepening from the largest single-reducer demand"""
    total = len(instance.variables)
    if not total:
        return 0
    floor = max(bin(demand).count("1") for demand in instance.demands.values())
    tried = 0
    for count in range(floor, total + 1):
        for messages in itertools.combinations(instance.candidates, count):
            if satisfies(instance, messages):
                return count
            tried += 1
            if tried >= settings.INDEX_CODING_MAX_SEARCH:
                raise UnsupportedSize(
                    f"no code with {count} messages found within {tried} tries",
                    details={"messages": count, "limit": settings.INDEX_CODING_MAX_SEARCH},
                )
    return total


def optimal_index_coding_load(
    plan: UnifiedPlan,
    finishers: Iterable[int],
    demand_model: DemandModel = DemandModel.FINISHERS,
    subpackets: int = 1,
) -> Fraction:
    """
    Least shuffle volume of any XOR code over demanded subpackets.

    Returns:
        value units on the same scale as LoadReport.value_units of the greedy shuffle
    """
    demand_model = DemandModel(demand_model)
    if demand_model == DemandModel.CLIENT_COLLECTS:
        return Fraction(0)
    instance = build_instance(plan, finishers, demand_model, subpackets)
    count = minimum_messages(instance)
    reducers = len(instance.demands)
    logger.debug("index_coding_solved", messages=count, variables=len(instance.variables))
    return Fraction(count, subpackets * reducers)


def optimality_gap(
    plan: UnifiedPlan,
    finishers: Iterable[int],
    demand_model: DemandModel = DemandModel.FINISHERS,
    max_subpackets: int = MAX_NODES - 1,
) -> Dict[str, object]:
    """
    Greedy shuffle volume against the best XOR code found with 1..max_subpackets
    subpackets per part. Splits whose search exceeds the limits are skipped.

    Raises:
        UnsupportedSize: when no split could be searched
    """
    chosen = normalize_finishers(plan.spec, finishers)
    greedy = shuffle_load(plan, chosen, demand_model).value_units
    best, best_split = None, None
    for subpackets in range(1, max_subpackets + 1):
        try:
            optimal = optimal_index_coding_load(plan, chosen, demand_model, subpackets)
        except UnsupportedSize as exc:
            logger.debug("index_coding_split_skipped", subpackets=subpackets, reason=str(exc))
            continue
        if best is None or optimal < best:
            best, best_split = optimal, subpackets
    if best is None:
        raise UnsupportedSize(
            f"no subpacket split up to {max_subpackets} fits the search limits",
            details={"K": plan.spec.K, "q": plan.spec.q},
        )
    return {
        "q": plan.spec.q,
        "finishers": list(chosen),
        "greedy_units": greedy,
        "optimal_units": best,
        "subpackets": best_split,
        "greedy_ratio": greedy / best if best else None,
    }
