"""
MBC Shuffle - bit-exact Minimum Bandwidth Code data shuffle
Builds XOR-coded multicasts over (r+1)-subsets, decodes them at receivers and accounts the load
"""
import hashlib
import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog

from codedfog.core.errors import DecodeIncomplete, InvalidArgument, ShuffleInfeasible
from codedfog.schemes.placement import JobSpec, PlacementPlan, Subset, enumerate_subsets

logger = structlog.get_logger(__name__)

SEED_MASK = (1 << 64) - 1
_DIGEST_BYTES = 64

ValueKey = Tuple[int, int]  # (function id, file id)


@dataclass(frozen=True)
class IntermediateValue:
    function_id: int
    file_id: int
    payload: bytes


@dataclass(frozen=True)
class SegmentDescriptor:
    target: int
    batch_subset: Subset
    segment_index: int


@dataclass(frozen=True)
class MulticastMessage:
    """One XOR-coded packet sent by one node to the r other members of its subset"""

    sender: int
    recipients: Tuple[int, ...]
    subset: Subset
    payload: bytes
    bit_length: int
    descriptors: Tuple[SegmentDescriptor, ...]

    def to_record(self) -> Dict[str, Any]:
        return {
            "sender": self.sender,
            "recipients": list(self.recipients),
            "subset": list(self.subset),
            "bits": self.bit_length,
            "payload": self.payload.hex(),
            "descriptors": [
                {
                    "target": descriptor.target,
                    "batch": list(descriptor.batch_subset),
                    "segment": descriptor.segment_index,
                }
                for descriptor in self.descriptors
            ],
        }


@dataclass(frozen=True)
class Unicast:
    sender: int
    recipient: int
    function_id: int
    file_id: int
    payload: bytes


@dataclass(frozen=True)
class LoadReport:
    """Exact shuffle accounting; normalized_load = total_bits / (Q*N*T)"""

    total_bits: Fraction
    message_count: int
    normalized_load: Fraction
    value_units: Fraction = field(default=Fraction(0))


@dataclass(frozen=True)
class WirelessLoad:
    coded: Fraction
    uncoded: Fraction
    gain: Optional[Fraction]


def map_value(function_id: int, file_id: int, seed: int, T: int) -> IntermediateValue:
    """
    Synthetic Map output: keyed BLAKE2b in counter mode.

    Identical bytes on every platform for identical (function, file, seed, T).
    """
    if T <= 0 or T % 8:
        raise InvalidArgument(f"value size T={T} bits is not a positive multiple of 8")
    size = T // 8
    key = (seed & SEED_MASK).to_bytes(8, "big")
    blocks = []
    for counter in range(-(-size // _DIGEST_BYTES)):
        digest = hashlib.blake2b(
            struct.pack(">QQQ", function_id, file_id, counter),
            key=key,
            digest_size=_DIGEST_BYTES,
        )
        blocks.append(digest.digest())
    return IntermediateValue(function_id, file_id, b"".join(blocks)[:size])


def _to_bits(payload: bytes) -> np.ndarray:
    return np.unpackbits(np.frombuffer(payload, dtype=np.uint8))


def _from_bits(bits: np.ndarray) -> bytes:
    return np.packbits(bits).tobytes()


def _group_bits(
    node: int, batch: Subset, plan: PlacementPlan, spec: JobSpec, seed: int
) -> np.ndarray:
    """V(node, batch): values node needs from the batch, function-then-file order, as bits"""
    payload = b"".join(
        map_value(function_id, file_id, seed, spec.T).payload
        for function_id in plan.reduce_assignment[node]
        for file_id in plan.batches[batch]
    )
    return _to_bits(payload)


def _without(subset: Subset, node: int) -> Subset:
    return tuple(member for member in subset if member != node)


def _normalized(total_bits: Fraction, spec: JobSpec) -> Fraction:
    return Fraction(total_bits) / (spec.Q * spec.N * spec.T)


def _empty_report() -> LoadReport:
    return LoadReport(Fraction(0), 0, Fraction(0), Fraction(0))


def coded_shuffle(
    plan: PlacementPlan,
    spec: JobSpec,
    seed: int,
    per_recipient: bool = False,
) -> Tuple[List[MulticastMessage], LoadReport]:
    """
    Build every coded multicast of the Minimum Bandwidth Code.

    For each (r+1)-subset S and sender j in S, j multicasts the XOR over k in S\\{j}
    of its segment of V(k, S\\{k}). Messages come out sorted by subset, then sender.
    A multicast costs its payload once unless per_recipient accounting is requested.
    """
    if spec.r == spec.K:
        return [], _empty_report()
    try:
        segment = spec.segment_bits()
    except ShuffleInfeasible:
        logger.warning("shuffle_infeasible", K=spec.K, r=spec.r, N=spec.N, Q=spec.Q, T=spec.T)
        raise

    messages: List[MulticastMessage] = []
    for subset in enumerate_subsets(spec.K, spec.r + 1):
        demands = {
            node: _group_bits(node, _without(subset, node), plan, spec, seed) for node in subset
        }
        for sender in subset:
            coded = np.zeros(segment, dtype=np.uint8)
            descriptors = []
            for target in subset:
                if target == sender:
                    continue
                batch = _without(subset, target)
                index = batch.index(sender)
                coded ^= demands[target][index * segment:(index + 1) * segment]
                descriptors.append(SegmentDescriptor(target, batch, index))
            messages.append(
                MulticastMessage(
                    sender=sender,
                    recipients=_without(subset, sender),
                    subset=subset,
                    payload=_from_bits(coded),
                    bit_length=segment,
                    descriptors=tuple(descriptors),
                )
            )

    copies = spec.r if per_recipient else 1
    total_bits = Fraction(len(messages) * segment * copies)
    report = LoadReport(
        total_bits=total_bits,
        message_count=len(messages),
        normalized_load=_normalized(total_bits, spec),
        value_units=total_bits / spec.T,
    )
    logger.info(
        "coded_shuffle_built",
        K=spec.K,
        r=spec.r,
        messages=report.message_count,
        total_bits=int(total_bits),
        per_recipient=per_recipient,
    )
    return messages, report


def decode_shuffle(
    node_id: int,
    messages: Sequence[MulticastMessage],
    plan: PlacementPlan,
    spec: JobSpec,
    seed: int,
) -> Dict[ValueKey, IntermediateValue]:
    """
    Recover every value (q, n) with q reduced by node_id, using only locally mapped
    values and the received multicasts.
    """
    local_files = set(plan.files_of(node_id))
    functions = plan.reduce_assignment[node_id]
    recovered: Dict[ValueKey, IntermediateValue] = {}
    for function_id in functions:
        for file_id in sorted(local_files):
            recovered[(function_id, file_id)] = map_value(function_id, file_id, seed, spec.T)

    if spec.r < spec.K:
        segment = spec.segment_bits()
        inbox = {
            (message.subset, message.sender): message
            for message in messages
            if node_id in message.recipients
        }
        for subset in enumerate_subsets(spec.K, spec.r + 1):
            if node_id not in subset:
                continue
            wanted = _without(subset, node_id)
            pieces: List[Optional[np.ndarray]] = [None] * spec.r
            for sender in wanted:
                message = inbox.get((subset, sender))
                if message is None:
                    continue
                bits = _to_bits(message.payload)[: message.bit_length].copy()
                for other in subset:
                    if other in (sender, node_id):
                        continue
                    batch = _without(subset, other)
                    # node_id belongs to batch, so these values are mapped locally
                    if not set(plan.batches[batch]) <= local_files:
                        raise DecodeIncomplete(
                            f"node {node_id} cannot cancel batch {batch}",
                            details={"node": node_id, "batch": list(batch)},
                        )
                    index = batch.index(sender)
                    known = _group_bits(other, batch, plan, spec, seed)
                    bits ^= known[index * segment:(index + 1) * segment]
                pieces[wanted.index(sender)] = bits
            if any(piece is None for piece in pieces):
                continue
            payload = _from_bits(np.concatenate(pieces))
            size = spec.value_bytes
            offset = 0
            for function_id in functions:
                for file_id in plan.batches[wanted]:
                    recovered[(function_id, file_id)] = IntermediateValue(
                        function_id, file_id, payload[offset:offset + size]
                    )
                    offset += size

    unmet = [
        (function_id, file_id)
        for function_id in functions
        for file_id in range(1, spec.N + 1)
        if (function_id, file_id) not in recovered
    ]
    if unmet:
        raise DecodeIncomplete(
            f"node {node_id} is missing {len(unmet)} intermediate values",
            details={"node": node_id, "unmet": unmet},
        )
    return recovered


def uncoded_shuffle(
    plan: PlacementPlan, spec: JobSpec, seed: int
) -> Tuple[List[Unicast], LoadReport]:
    """Unicast every missing value once, from the lowest-id node holding its file"""
    unicasts: List[Unicast] = []
    for node in range(1, spec.K + 1):
        local_files = set(plan.files_of(node))
        for function_id in plan.reduce_assignment[node]:
            for file_id in range(1, spec.N + 1):
                if file_id in local_files:
                    continue
                sender = plan.holders_of(file_id)[0]
                value = map_value(function_id, file_id, seed, spec.T)
                unicasts.append(Unicast(sender, node, function_id, file_id, value.payload))

    total_bits = Fraction(len(unicasts) * spec.T)
    report = LoadReport(
        total_bits=total_bits,
        message_count=len(unicasts),
        normalized_load=_normalized(total_bits, spec),
        value_units=Fraction(len(unicasts)),
    )
    logger.info("uncoded_shuffle_built", K=spec.K, r=spec.r, unicasts=len(unicasts))
    return unicasts, report


def verify_reconstruction(
    plan: PlacementPlan,
    spec: JobSpec,
    seed: int,
    messages: Sequence[MulticastMessage],
) -> List[Dict[str, Any]]:
    """Decode at every node and compare against map_value; returns the mismatches"""
    mismatches = []
    for node in range(1, spec.K + 1):
        recovered = decode_shuffle(node, messages, plan, spec, seed)
        for (function_id, file_id), value in recovered.items():
            expected = map_value(function_id, file_id, seed, spec.T)
            if value.payload != expected.payload:
                mismatches.append({"node": node, "function": function_id, "file": file_id})
    return mismatches


def load_formula(K: int, r: int) -> Tuple[Fraction, Fraction]:
    """(uncoded, coded) = (1 - r/K, (1/r)(1 - r/K)) as exact rationals"""
    if K < 1 or not 1 <= r <= K:
        raise InvalidArgument(f"computation load r={r} out of range for K={K}", details={"K": K, "r": r})
    uncoded = 1 - Fraction(r, K)
    return uncoded, uncoded / r


def wireless_load(mu: Fraction, K: int) -> WirelessLoad:
    """Loads of the wireless platform where each of K users processes a fraction mu"""
    mu = Fraction(mu)
    if K < 1 or not Fraction(1, K) <= mu <= 1:
        raise InvalidArgument(f"storage fraction mu={mu} out of range [1/K, 1] for K={K}")
    coded = 1 / mu - 1
    uncoded = K * (1 - mu)
    gain = uncoded / coded if mu < 1 else None
    return WirelessLoad(coded=coded, uncoded=uncoded, gain=gain)


def shuffle_bit_counts(spec: JobSpec) -> Tuple[LoadReport, LoadReport]:
    """(coded, uncoded) reports by counting alone, without building payloads"""
    missing = spec.functions_per_node * (spec.N - spec.r * spec.N // spec.K)
    uncoded_values = spec.K * missing
    uncoded_bits = Fraction(uncoded_values * spec.T)
    uncoded = LoadReport(uncoded_bits, uncoded_values, _normalized(uncoded_bits, spec), Fraction(uncoded_values))
    if spec.r == spec.K:
        return _empty_report(), uncoded
    message_count = (spec.r + 1) * math.comb(spec.K, spec.r + 1)
    coded_bits = Fraction(message_count * spec.segment_bits())
    coded = LoadReport(coded_bits, message_count, _normalized(coded_bits, spec), coded_bits / spec.T)
    return coded, uncoded


@dataclass(frozen=True)
class StageReport:
    """Stage-level accounting of one sort-style job, uncoded versus coded"""

    spec: JobSpec
    stages: List[Dict[str, Any]]
    shuffle_reduction: Fraction


def stage_accounting(
    spec: JobSpec,
    seconds_per_value: Optional[float] = None,
    network_bps: Optional[float] = None,
) -> StageReport:
    """
    Count the work of each stage (map, encode, shuffle, decode, reduce) for the uncoded
    and the coded execution; optional rates turn the counts into seconds.

    Both rows use the same r-fold placement, so both map r*N*Q values and differ only
    in how the shuffle is delivered (unicast vs coded multicast).
    """
    coded, uncoded = shuffle_bit_counts(spec)
    map_values = spec.r * spec.N * spec.Q
    segments_per_message = spec.r
    xor_terms = coded.message_count * max(segments_per_message - 1, 0)
    stages = []
    for scheme, report in (("uncoded", uncoded), ("coded", coded)):
        encode = xor_terms if scheme == "coded" else 0
        row = {
            "scheme": scheme,
            "map_values": map_values,
            "encode_xors": encode,
            "shuffle_messages": report.message_count,
            "shuffle_bits": report.total_bits,
            "decode_xors": encode,
            "reduce_values": spec.Q * spec.N,
            "normalized_load": report.normalized_load,
        }
        if seconds_per_value is not None:
            row["map_seconds"] = map_values * seconds_per_value
        if network_bps:
            row["shuffle_seconds"] = float(report.total_bits) / network_bps
        stages.append(row)
    reduction = uncoded.total_bits / coded.total_bits if coded.total_bits else Fraction(0)
    return StageReport(spec=spec, stages=stages, shuffle_reduction=reduction)
