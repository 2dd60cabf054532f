import pytest
from pydantic import ValidationError

from codedfog.core.errors import InvalidArgument, PlacementInfeasible
from codedfog.schemes.placement import JobSpec, build_placement, check_plan, enumerate_subsets, nearest_feasible


def test_enumerate_subsets_is_lexicographic():
    assert enumerate_subsets(3, 2) == [(1, 2), (1, 3), (2, 3)]
    assert enumerate_subsets(3, 3) == [(1, 2, 3)]
    assert len(enumerate_subsets(6, 2)) == 15


def test_enumerate_subsets_rejects_oversized():
    with pytest.raises(InvalidArgument):
        enumerate_subsets(3, 4)


def test_three_node_placement_with_two_replicas():
    plan = build_placement(JobSpec(K=3, N=6, Q=3, r=2))

    assert plan.batches == {(1, 2): (1, 2), (1, 3): (3, 4), (2, 3): (5, 6)}
    assert plan.files_of(1) == (1, 2, 3, 4)
    assert plan.reduce_assignment == {1: (1,), 2: (2,), 3: (3,)}
    assert plan.holders_of(5) == (2, 3)
    assert check_plan(plan) == []


def test_single_replica_placement():
    plan = build_placement(JobSpec(K=3, N=6, Q=3, r=1))

    for node in (1, 2, 3):
        assert len(plan.files_of(node)) == 2
    assert check_plan(plan) == []


def test_four_nodes_one_file_per_batch():
    plan = build_placement(JobSpec(K=4, N=6, Q=4, r=2))

    assert len(plan.batches) == 6
    assert all(len(files) == 1 for files in plan.batches.values())
    assert all(len(plan.files_of(node)) == 3 for node in range(1, 5))
    assert check_plan(plan) == []


def test_infeasible_file_count_suggests_fix():
    spec = JobSpec(K=4, N=5, Q=4, r=2)

    with pytest.raises(PlacementInfeasible) as caught:
        build_placement(spec)

    assert caught.value.details["suggestion"]["N"] == 6
    assert "N=5" in caught.value.details["violations"][0]


def test_nearest_feasible_accounts_for_segment_split():
    # eta*(Q/K)*T must split into r=3 segments, so eta steps by 3
    suggestion = nearest_feasible(JobSpec(K=5, N=1, Q=5, r=3))

    assert suggestion == {"N": 30, "Q": 5}
    JobSpec(K=5, N=30, Q=5, r=3).segment_bits()


def test_load_above_node_count_is_rejected():
    with pytest.raises(ValidationError):
        JobSpec(K=3, N=6, Q=3, r=4)


def test_plan_document_keys():
    document = build_placement(JobSpec(K=3, N=6, Q=3, r=2)).to_document()

    assert document["batches"]["1,3"] == [3, 4]
    assert document["reduce"]["2"] == [2]
