import numpy as np
import pytest

from codedfog.schemes import gf256


def test_multiplication_table_edges():
    assert gf256.mul(0, 77) == 0
    assert gf256.mul(1, 77) == 77
    assert gf256.mul(2, 0x80) == 0x1D  # reduction by 0x11d


def test_every_nonzero_element_has_an_inverse():
    for a in range(1, 256):
        assert gf256.mul(a, gf256.inverse(a)) == 1
    with pytest.raises(ZeroDivisionError):
        gf256.inverse(0)


def test_power_cycles_with_field_order():
    assert gf256.power(2, 255) == 1
    assert gf256.power(0, 0) == 1
    assert gf256.power(0, 3) == 0


def test_scale_matches_scalar_multiplication():
    vector = np.arange(256, dtype=np.uint8)
    scaled = gf256.scale(0x53, vector)
    assert [int(value) for value in scaled] == [gf256.mul(0x53, int(value)) for value in vector]


def test_combine_is_xor_for_unit_coefficients():
    left = np.array([1, 2, 3], dtype=np.uint8)
    right = np.array([7, 7, 7], dtype=np.uint8)
    assert gf256.combine([1, 1], [left, right]).tolist() == [6, 5, 4]


def test_inverse_of_product():
    matrix = [[1, 2, 3], [0, 1, 4], [0, 0, 5]]
    inverse = gf256.mat_inverse(matrix)
    assert gf256.mat_mul(matrix, inverse) == [[1, 0, 0], [0, 1, 0], [0, 0, 1]]


def test_singular_matrix_detected():
    assert not gf256.is_invertible([[1, 2], [1, 2]])
    assert gf256.is_invertible([[1, 1], [0, 1]])
