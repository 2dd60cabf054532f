import random
from fractions import Fraction

import pytest

from codedfog.core.errors import InvalidArgument, ShuffleInfeasible
from codedfog.schemes.mbc_shuffle import (
    coded_shuffle,
    decode_shuffle,
    load_formula,
    map_value,
    shuffle_bit_counts,
    stage_accounting,
    uncoded_shuffle,
    verify_reconstruction,
    wireless_load,
)
from codedfog.schemes.placement import JobSpec, build_placement, nearest_feasible


def minimal_spec(K: int, r: int, T: int = 8) -> JobSpec:
    suggestion = nearest_feasible(JobSpec(K=K, N=1, Q=K, r=r, T=T))
    return JobSpec(K=K, N=suggestion["N"], Q=suggestion["Q"], r=r, T=T)


def test_map_value_is_deterministic(seed):
    first = map_value(1, 1, seed, 64)
    assert first == map_value(1, 1, seed, 64)
    assert first.payload != map_value(1, 2, seed, 64).payload
    assert len(map_value(3, 4, seed, 8).payload) == 1


def test_map_value_rejects_partial_bytes(seed):
    with pytest.raises(InvalidArgument):
        map_value(1, 1, seed, 12)


def test_three_node_loads_in_value_units(seed):
    single = JobSpec(K=3, N=6, Q=3, r=1)
    double = JobSpec(K=3, N=6, Q=3, r=2)

    _, uncoded_single = uncoded_shuffle(build_placement(single), single, seed)
    _, uncoded_double = uncoded_shuffle(build_placement(double), double, seed)
    messages, coded_double = coded_shuffle(build_placement(double), double, seed)

    assert uncoded_single.value_units == 12
    assert uncoded_single.normalized_load == Fraction(2, 3)
    assert uncoded_double.value_units == 6
    assert coded_double.value_units == 3
    assert coded_double.message_count == 3
    assert coded_double.total_bits == 24
    assert coded_double.normalized_load == Fraction(1, 6)
    assert [message.sender for message in messages] == [1, 2, 3]


def test_node_two_recovers_from_two_multicasts(seed):
    spec = JobSpec(K=3, N=6, Q=3, r=2)
    plan = build_placement(spec)
    messages, _ = coded_shuffle(plan, spec, seed)

    recovered = decode_shuffle(2, messages, plan, spec, seed)

    # files 3 and 4 sit on {1,3}, the only batch node 2 misses
    assert recovered[(2, 3)] == map_value(2, 3, seed, spec.T)
    assert recovered[(2, 4)] == map_value(2, 4, seed, spec.T)
    assert sum(1 for message in messages if 2 in message.recipients) == 2


def test_full_load_sends_nothing(seed):
    spec = JobSpec(K=3, N=1, Q=3, r=3)
    messages, report = coded_shuffle(build_placement(spec), spec, seed)

    assert messages == []
    assert report.normalized_load == 0


@pytest.mark.parametrize("K", range(2, 9))
def test_measured_loads_match_closed_form(K, seed):
    for r in range(1, K + 1):
        spec = minimal_spec(K, r)
        plan = build_placement(spec)
        uncoded_formula, coded_formula = load_formula(K, r)

        _, coded = coded_shuffle(plan, spec, seed)
        _, uncoded = uncoded_shuffle(plan, spec, seed)

        assert coded.normalized_load == coded_formula
        assert uncoded.normalized_load == uncoded_formula


@pytest.mark.parametrize("K", [3, 4, 5])
def test_every_node_reconstructs_bit_exactly(K, seed):
    for r in range(1, K):
        spec = minimal_spec(K, r, T=16)
        plan = build_placement(spec)
        messages, _ = coded_shuffle(plan, spec, seed)

        assert verify_reconstruction(plan, spec, seed, messages) == []


def test_random_feasible_jobs_rebuild_bit_exactly(seed):
    rng = random.Random(seed)
    for _ in range(200):
        K = rng.randint(2, 6)
        r = rng.randint(1, K)
        base = minimal_spec(K, r, T=8 * rng.randint(1, 3))
        spec = JobSpec(K=K, N=base.N * rng.randint(1, 2), Q=K * rng.randint(1, 2), r=r, T=base.T)
        plan = build_placement(spec)
        messages, coded = coded_shuffle(plan, spec, seed)
        _, uncoded = uncoded_shuffle(plan, spec, seed)
        counted, _ = shuffle_bit_counts(spec)

        assert verify_reconstruction(plan, spec, seed, messages) == [], spec
        assert (uncoded.normalized_load, coded.normalized_load) == load_formula(K, r)
        assert counted.total_bits == coded.total_bits


def test_counting_agrees_with_built_messages(seed):
    spec = minimal_spec(5, 2)
    plan = build_placement(spec)
    _, built = coded_shuffle(plan, spec, seed)
    counted, _ = shuffle_bit_counts(spec)

    assert counted.total_bits == built.total_bits
    assert counted.message_count == built.message_count


def test_per_recipient_accounting_scales_by_load(seed):
    spec = minimal_spec(4, 2)
    plan = build_placement(spec)
    _, shared = coded_shuffle(plan, spec, seed)
    _, per_recipient = coded_shuffle(plan, spec, seed, per_recipient=True)

    assert per_recipient.total_bits == 2 * shared.total_bits


def test_segment_split_failure_is_reported(seed):
    spec = JobSpec(K=5, N=10, Q=5, r=3)
    with pytest.raises(ShuffleInfeasible):
        coded_shuffle(build_placement(spec), spec, seed)


def test_load_formula_points():
    assert load_formula(10, 2) == (Fraction(4, 5), Fraction(2, 5))
    assert load_formula(10, 5) == (Fraction(1, 2), Fraction(1, 10))
    with pytest.raises(InvalidArgument):
        load_formula(10, 11)


def test_wireless_load():
    half = wireless_load(Fraction(1, 2), 10)
    assert (half.coded, half.uncoded, half.gain) == (1, 5, 5)
    assert wireless_load(Fraction(1), 7).coded == 0
    assert wireless_load(Fraction(1), 7).gain is None
    assert wireless_load(Fraction(1, 4), 8).coded == wireless_load(Fraction(1, 4), 40).coded == 3


def test_sixteen_node_stage_accounting():
    spec = minimal_spec(16, 5)
    report = stage_accounting(spec, seconds_per_value=1e-6, network_bps=1e9)
    uncoded, coded = report.stages

    assert report.shuffle_reduction == 5
    assert coded["shuffle_bits"] * 5 == uncoded["shuffle_bits"]
    assert coded["map_values"] == uncoded["map_values"] == 5 * spec.N * spec.Q
    assert coded["map_seconds"] == uncoded["map_seconds"]
    assert coded["shuffle_seconds"] < uncoded["shuffle_seconds"]
