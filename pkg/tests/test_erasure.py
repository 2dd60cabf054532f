import itertools

import numpy as np
import pytest

from codedfog.core.errors import InvalidArgument, NotEnoughSymbols, UnsupportedSize
from codedfog.schemes import erasure
from codedfog.schemes.erasure import CodeField, RepetitionCode


def test_single_parity_rows():
    code = erasure.single_parity_code()
    assert code.generator.tolist() == [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]
    assert erasure.is_mds(code)


def test_gf256_five_three_is_mds():
    code = erasure.make_mds(5, 3, field=CodeField.GF256)
    assert code.generator.dtype == np.uint8
    assert erasure.is_mds(code)


def test_gf256_any_three_of_six_decode_bit_exactly(seed):
    code = erasure.make_mds(6, 3, field=CodeField.GF256)
    rng = np.random.default_rng(seed)
    sources = [rng.integers(0, 256, size=32, dtype=np.uint8).tobytes() for _ in range(3)]
    coded = erasure.encode(code, sources)

    for subset in itertools.combinations(range(6), 3):
        result = erasure.decode(code, {index: coded[index] for index in subset})
        assert result.blocks == sources
        assert result.indices == list(subset)


def test_systematic_prefix_is_passed_through():
    code = erasure.make_mds(4, 2, field=CodeField.GF256)
    coded = erasure.encode(code, [b"\x01\x02", b"\x03\x04"])
    assert coded[:2] == [b"\x01\x02", b"\x03\x04"]


def test_real_code_recovers_matrix_blocks(seed):
    code = erasure.make_mds(5, 3, field=CodeField.REAL, seed=seed)
    rng = np.random.default_rng(seed)
    sources = [rng.standard_normal((2, 4)) for _ in range(3)]
    coded = erasure.encode(code, sources)

    result = erasure.decode(code, {1: coded[1], 3: coded[3], 4: coded[4]})

    for decoded, source in zip(result.blocks, sources):
        np.testing.assert_allclose(decoded, source, rtol=1e-9, atol=1e-9)
    assert result.condition_number is not None
    assert result.warnings == []


def test_single_parity_recovers_from_sum():
    code = erasure.single_parity_code()
    first, second = np.array([1.0, 2.0]), np.array([3.0, 5.0])
    coded = erasure.encode(code, [first, second])

    result = erasure.decode(code, {0: coded[0], 2: coded[2]})

    np.testing.assert_allclose(result.blocks[1], second)


def test_decode_needs_k_symbols():
    code = erasure.make_mds(4, 3)
    with pytest.raises(NotEnoughSymbols) as caught:
        erasure.decode(code, {0: b"\x00", 1: b"\x00"})
    assert caught.value.details["deficit"] == 1


def test_gf256_length_limit():
    with pytest.raises(UnsupportedSize):
        erasure.make_mds(256, 4)


def test_invalid_dimensions():
    with pytest.raises(InvalidArgument):
        erasure.make_mds(2, 3)


def test_repetition_code_groups_copies():
    code = RepetitionCode(n=6, k=3)
    assert code.encode(["a", "b", "c"]) == ["a", "a", "b", "b", "c", "c"]
    assert code.recoverable([1, 2, 5])
    assert code.missing_sources([0, 1, 4]) == [1]
    assert code.decode({1: "a", 3: "b", 4: "c"}) == ["a", "b", "c"]
    with pytest.raises(NotEnoughSymbols):
        code.decode({0: "a", 1: "a"})


def test_repetition_needs_divisible_length():
    with pytest.raises(InvalidArgument):
        RepetitionCode(n=5, k=2)


def test_export_generator_formats():
    assert erasure.export_generator(erasure.make_mds(3, 2)).splitlines()[0] == "01 00"
    assert erasure.export_generator(erasure.single_parity_code()).splitlines()[2] == "1,1"


def relative_error(decoded, sources):
    return np.linalg.norm(np.stack(decoded) - np.stack(sources)) / np.linalg.norm(np.stack(sources))


@pytest.mark.parametrize("n", range(1, 13))
def test_gf256_every_k_subset_decodes(n, seed):
    rng = np.random.default_rng([seed, n])
    for k in range(1, n + 1):
        code = erasure.make_mds(n, k, field=CodeField.GF256)
        sources = [rng.integers(0, 256, size=8, dtype=np.uint8).tobytes() for _ in range(k)]
        coded = erasure.encode(code, sources)

        for subset in itertools.combinations(range(n), k):
            result = erasure.decode(code, {index: coded[index] for index in subset})
            assert result.blocks == sources, (n, k, subset)


@pytest.mark.parametrize("n, k", [(5, 3), (8, 4), (10, 5), (12, 6)])
def test_real_code_every_k_subset_round_trips(n, k, seed):
    code = erasure.make_mds(n, k, field=CodeField.REAL, seed=seed)
    rng = np.random.default_rng([seed, n, k])
    sources = [rng.standard_normal((3, 4)) for _ in range(k)]
    coded = erasure.encode(code, sources)

    for subset in itertools.combinations(range(n), k):
        result = erasure.decode(code, {index: coded[index] for index in subset})
        assert relative_error(result.blocks, sources) <= 1e-8, subset


@pytest.mark.parametrize("n, k", [(4, 2), (6, 3), (12, 5)])
def test_gf256_encoding_is_linear_over_xor(n, k, seed):
    code = erasure.make_mds(n, k, field=CodeField.GF256)
    rng = np.random.default_rng([seed, n, k])
    a = [rng.integers(0, 256, size=16, dtype=np.uint8) for _ in range(k)]
    b = [rng.integers(0, 256, size=16, dtype=np.uint8) for _ in range(k)]

    summed = erasure.encode(code, [(x ^ y).tobytes() for x, y in zip(a, b)])
    separate = zip(erasure.encode(code, [x.tobytes() for x in a]), erasure.encode(code, [y.tobytes() for y in b]))

    for combined, (left, right) in zip(summed, separate):
        expected = np.frombuffer(left, dtype=np.uint8) ^ np.frombuffer(right, dtype=np.uint8)
        assert combined == expected.tobytes()


def test_real_encoding_is_linear(seed):
    code = erasure.make_mds(7, 4, field=CodeField.REAL, seed=seed)
    rng = np.random.default_rng(seed)
    a = [rng.standard_normal(5) for _ in range(4)]
    b = [rng.standard_normal(5) for _ in range(4)]

    summed = erasure.encode(code, [x + 2.5 * y for x, y in zip(a, b)])
    left, right = erasure.encode(code, a), erasure.encode(code, b)

    for combined, x, y in zip(summed, left, right):
        np.testing.assert_allclose(combined, x + 2.5 * y, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("n, k", [(1, 1), (4, 1), (4, 2), (6, 2), (6, 3), (8, 4)])
def test_repetition_recoverability_is_exact(n, k):
    code = RepetitionCode(n=n, k=k)
    sources = [f"s{source}" for source in range(k)]
    coded = code.encode(sources)

    for size in range(n + 1):
        for subset in itertools.combinations(range(n), size):
            covers_every_group = {index // (n // k) for index in subset} == set(range(k))
            assert code.recoverable(subset) == covers_every_group
            if covers_every_group:
                assert code.decode({index: coded[index] for index in subset}) == sources
            else:
                with pytest.raises(NotEnoughSymbols):
                    code.decode({index: coded[index] for index in subset})
