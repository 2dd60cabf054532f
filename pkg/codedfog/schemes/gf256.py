"""
GF(2^8) arithmetic over the polynomial x^8+x^4+x^3+x^2+1 (0x11d)
Scalar ops on log/antilog tables built by reedsolo, vector ops in numpy
"""
from typing import List, Sequence

import numpy as np
import reedsolo

from codedfog.core.errors import InvalidArgument

PRIMITIVE_POLY = 0x11d
FIELD_ORDER = 255

_gf_log, _gf_exp, _ = reedsolo.init_tables(prim=PRIMITIVE_POLY, generator=2, c_exp=8)
LOG = np.array(list(_gf_log), dtype=np.int32)
EXP = np.array(list(_gf_exp), dtype=np.uint8)

Matrix = List[List[int]]


def mul(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return int(EXP[(LOG[a] + LOG[b]) % FIELD_ORDER])


def inverse(a: int) -> int:
    if a == 0:
        raise ZeroDivisionError("0 has no inverse in GF(2^8)")
    return int(EXP[(FIELD_ORDER - LOG[a]) % FIELD_ORDER])


def power(a: int, exponent: int) -> int:
    if exponent == 0:
        return 1
    if a == 0:
        return 0
    return int(EXP[(LOG[a] * exponent) % FIELD_ORDER])


def scale(coefficient: int, vector: np.ndarray) -> np.ndarray:
    """coefficient * vector, element-wise, for a uint8 vector"""
    if coefficient == 0:
        return np.zeros_like(vector)
    if coefficient == 1:
        return vector.copy()
    out = EXP[(LOG[vector] + LOG[coefficient]) % FIELD_ORDER]
    out[vector == 0] = 0
    return out


def combine(coefficients: Sequence[int], vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Linear combination sum_j c_j * v_j (addition is XOR)"""
    out = np.zeros_like(vectors[0])
    for coefficient, vector in zip(coefficients, vectors):
        if coefficient:
            out ^= scale(coefficient, vector)
    return out


def mat_mul(left: Matrix, right: Matrix) -> Matrix:
    rows, inner, cols = len(left), len(right), len(right[0])
    out = [[0] * cols for _ in range(rows)]
    for i in range(rows):
        for t in range(inner):
            a = left[i][t]
            if not a:
                continue
            for j in range(cols):
                out[i][j] ^= mul(a, right[t][j])
    return out


def mat_inverse(matrix: Matrix) -> Matrix:
    """Gauss-Jordan inversion; raises ZeroDivisionError when singular"""
    size = len(matrix)
    if any(len(row) != size for row in matrix):
        raise InvalidArgument("only square matrices can be inverted")
    work = [list(row) + [1 if i == j else 0 for j in range(size)] for i, row in enumerate(matrix)]
    for col in range(size):
        pivot = next((row for row in range(col, size) if work[row][col]), None)
        if pivot is None:
            raise ZeroDivisionError("singular matrix over GF(2^8)")
        work[col], work[pivot] = work[pivot], work[col]
        factor = inverse(work[col][col])
        work[col] = [mul(factor, value) for value in work[col]]
        for row in range(size):
            if row != col and work[row][col]:
                coefficient = work[row][col]
                work[row] = [
                    value ^ mul(coefficient, pivot_value)
                    for value, pivot_value in zip(work[row], work[col])
                ]
    return [row[size:] for row in work]


def is_invertible(matrix: Matrix) -> bool:
    try:
        mat_inverse(matrix)
    except ZeroDivisionError:
        return False
    return True
