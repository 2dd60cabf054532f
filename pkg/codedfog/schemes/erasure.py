"""
Erasure codes - (n,k) MDS codes over GF(2^8) and the reals, plus the repetition baseline
Provides the "any k of n" recovery primitive used by Minimum Latency Codes and the unified scheme
"""
import io
import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import scipy.linalg
import structlog

from codedfog.config import settings
from codedfog.core.errors import (
    ConstructionFailure,
    InvalidArgument,
    NotEnoughSymbols,
    UnsupportedSize,
)
from codedfog.schemes import gf256

logger = structlog.get_logger(__name__)

Payload = Union[bytes, np.ndarray]


class CodeField(str, Enum):
    GF256 = "gf256"
    REAL = "real"


@dataclass(frozen=True)
class MdsCode:
    """Generator is n x k: uint8 for GF256, float64 for Real"""

    n: int
    k: int
    field: CodeField
    generator: np.ndarray
    systematic: bool = True
    name: str = ""


@dataclass(frozen=True)
class DecodeResult:
    blocks: List[Payload]
    indices: List[int]
    condition_number: Optional[float] = None
    warnings: List[str] = field(default_factory=list)


@dataclass(frozen=True)
class RepetitionCode:
    """Each of the k source symbols is copied n/k times; copies of one source are contiguous"""

    n: int
    k: int

    def __post_init__(self):
        if not 1 <= self.k <= self.n or self.n % self.k:
            raise InvalidArgument(f"repetition code needs k | n, got n={self.n}, k={self.k}")

    @property
    def replication(self) -> int:
        return self.n // self.k

    def source_of(self, index: int) -> int:
        return index // self.replication

    def encode(self, blocks: Sequence[Payload]) -> List[Payload]:
        if len(blocks) != self.k:
            raise InvalidArgument(f"expected {self.k} source blocks, got {len(blocks)}")
        return [blocks[self.source_of(index)] for index in range(self.n)]

    def missing_sources(self, available: Sequence[int]) -> List[int]:
        covered = {self.source_of(index) for index in available}
        return [source for source in range(self.k) if source not in covered]

    def recoverable(self, available: Sequence[int]) -> bool:
        return not self.missing_sources(available)

    def decode(self, available: Mapping[int, Payload]) -> List[Payload]:
        missing = self.missing_sources(list(available))
        if missing:
            raise NotEnoughSymbols(
                f"{len(missing)} source symbols have no surviving copy",
                details={"missing_sources": missing},
            )
        sources: Dict[int, Payload] = {}
        for index in sorted(available):
            sources.setdefault(self.source_of(index), available[index])
        return [sources[source] for source in range(self.k)]


def _identity(k: int, field: CodeField) -> np.ndarray:
    dtype = np.uint8 if field == CodeField.GF256 else np.float64
    return np.eye(k, dtype=dtype)


def single_parity_code() -> MdsCode:
    """The (3,2) code that adds one redundant task A1 + A2"""
    generator = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    return MdsCode(n=3, k=2, field=CodeField.REAL, generator=generator, systematic=True, name="single-parity")


def _gf256_generator(n: int, k: int) -> np.ndarray:
    # Vandermonde on the distinct points 0..n-1, reduced to systematic form
    vandermonde = [[gf256.power(point, j) for j in range(k)] for point in range(n)]
    top_inverse = gf256.mat_inverse(vandermonde[:k])
    return np.array(gf256.mat_mul(vandermonde, top_inverse), dtype=np.uint8)


def _real_submatrices_ok(generator: np.ndarray, k: int) -> bool:
    for rows in itertools.combinations(range(generator.shape[0]), k):
        condition = np.linalg.cond(generator[list(rows)])
        if not np.isfinite(condition) or condition > settings.REAL_CONDITION_THRESHOLD:
            return False
    return True


def make_mds(n: int, k: int, field: CodeField = CodeField.GF256, seed: int = 0) -> MdsCode:
    """
    Build a systematic (n,k) MDS code.

    GF256: systematic Reed-Solomon from a Vandermonde matrix.
    Real: identity on top of seeded Gaussian parity rows, resampled when a
    k x k submatrix of the sampled instance is singular or ill-conditioned.
    """
    field = CodeField(field)
    if not 1 <= k <= n:
        raise InvalidArgument(f"need 1 <= k <= n, got n={n}, k={k}")
    if field == CodeField.GF256 and n > gf256.FIELD_ORDER:
        raise UnsupportedSize(f"GF(2^8) codes support n <= 255, got n={n}", details={"n": n})

    if n == k:
        return MdsCode(n=n, k=k, field=field, generator=_identity(k, field))

    if field == CodeField.GF256:
        code = MdsCode(n=n, k=k, field=field, generator=_gf256_generator(n, k))
        if n <= settings.GF256_EXHAUSTIVE_LIMIT and not is_mds(code):
            raise ConstructionFailure(f"GF(2^8) generator ({n},{k}) is not MDS")
        logger.debug("mds_built", field=field.value, n=n, k=k)
        return code

    rng = np.random.default_rng(seed)
    check = math.comb(n, k) <= settings.REAL_MDS_CHECK_LIMIT
    for attempt in range(settings.REAL_MDS_RETRIES):
        parity = rng.standard_normal((n - k, k))
        generator = np.vstack([np.eye(k), parity])
        if not check or _real_submatrices_ok(generator, k):
            logger.debug("mds_built", field=field.value, n=n, k=k, attempt=attempt, checked=check)
            return MdsCode(n=n, k=k, field=field, generator=generator)
        logger.warning("mds_resample", n=n, k=k, attempt=attempt)
    raise ConstructionFailure(
        f"no well-conditioned real ({n},{k}) code after {settings.REAL_MDS_RETRIES} draws",
        details={"n": n, "k": k, "seed": seed},
    )


def is_mds(code: MdsCode) -> bool:
    """Exhaustive check that every k x k submatrix of the generator is invertible"""
    for rows in itertools.combinations(range(code.n), code.k):
        sub = code.generator[list(rows)]
        if code.field == CodeField.GF256:
            if not gf256.is_invertible(sub.astype(int).tolist()):
                return False
        elif not np.isfinite(np.linalg.cond(sub)) or np.linalg.matrix_rank(sub) < code.k:
            return False
    return True


def _as_gf256_blocks(blocks: Sequence[Payload]) -> List[np.ndarray]:
    arrays = [np.frombuffer(bytes(block), dtype=np.uint8) if not isinstance(block, np.ndarray)
              else block.astype(np.uint8, copy=False).ravel() for block in blocks]
    if len({array.size for array in arrays}) > 1:
        raise InvalidArgument("GF(2^8) blocks must all have the same length")
    return arrays


def _as_real_blocks(blocks: Sequence[Payload]) -> np.ndarray:
    arrays = [np.asarray(block, dtype=np.float64) for block in blocks]
    if len({array.shape for array in arrays}) > 1:
        raise InvalidArgument("real blocks must all have the same shape")
    return np.stack(arrays)


def encode(code: MdsCode, blocks: Sequence[Payload]) -> List[Payload]:
    """coded[i] = sum_j generator[i][j] * blocks[j] in the code's algebra"""
    if len(blocks) != code.k:
        raise InvalidArgument(f"expected {code.k} source blocks, got {len(blocks)}")
    if code.field == CodeField.GF256:
        arrays = _as_gf256_blocks(blocks)
        return [
            gf256.combine([int(c) for c in code.generator[row]], arrays).tobytes()
            for row in range(code.n)
        ]
    stacked = _as_real_blocks(blocks)
    coded = np.tensordot(code.generator, stacked, axes=1)
    return [coded[row] for row in range(code.n)]


def decode(code: MdsCode, available: Mapping[int, Payload]) -> DecodeResult:
    """Recover the k sources from the lowest k available coded indices"""
    if len(available) < code.k:
        raise NotEnoughSymbols(
            f"need {code.k} coded symbols, have {len(available)}",
            details={"needed": code.k, "available": len(available), "deficit": code.k - len(available)},
        )
    indices = sorted(available)[: code.k]
    symbols = [available[index] for index in indices]

    if code.systematic and indices == list(range(code.k)):
        if code.field == CodeField.GF256:
            return DecodeResult(blocks=[bytes(symbol) for symbol in symbols], indices=indices)
        return DecodeResult(blocks=[np.asarray(symbol, dtype=np.float64) for symbol in symbols],
                            indices=indices, condition_number=1.0)

    sub = code.generator[indices]
    if code.field == CodeField.GF256:
        inverse = gf256.mat_inverse(sub.astype(int).tolist())
        arrays = _as_gf256_blocks(symbols)
        blocks = [gf256.combine(inverse[row], arrays).tobytes() for row in range(code.k)]
        return DecodeResult(blocks=blocks, indices=indices)

    stacked = _as_real_blocks(symbols)
    shape = stacked.shape[1:]
    condition = float(np.linalg.cond(sub))
    warnings = []
    if not np.isfinite(condition) or condition > settings.REAL_CONDITION_THRESHOLD:
        warnings.append(f"ill-conditioned decode submatrix (cond={condition:.3e})")
        logger.warning("ill_conditioned_decode", indices=indices, condition=condition)
    factor = scipy.linalg.lu_factor(sub)
    solved = scipy.linalg.lu_solve(factor, stacked.reshape(code.k, -1))
    blocks = [solved[row].reshape(shape) for row in range(code.k)]
    return DecodeResult(blocks=blocks, indices=indices, condition_number=condition, warnings=warnings)


def export_generator(code: MdsCode) -> str:
    """CSV for real generators, a hex grid for GF(2^8) generators"""
    if code.field == CodeField.GF256:
        return "".join(" ".join(f"{int(value):02x}" for value in row) + "\n" for row in code.generator)
    buffer = io.StringIO()
    np.savetxt(buffer, code.generator, delimiter=",", fmt="%.17g")
    return buffer.getvalue()
