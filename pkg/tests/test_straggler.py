import numpy as np
import pytest
from pydantic import ValidationError

from codedfog.config import settings
from codedfog.core.errors import InvalidArgument
from codedfog.schemes.straggler import (
    ExecutionScheme,
    SchemeKind,
    ShiftedExponential,
    exp_order_stat_mean,
    harmonic,
    optimal_mds_k,
    order_statistic_estimate,
    run_chunked,
    scheme_grid,
    scheme_latency_analytic,
    scheme_latency_mc,
)

TOLERANCE_SE = 3.0
UNIT = ShiftedExponential(shift=1.0, rate=1.0)
NO_SHIFT = ShiftedExponential(shift=0.0, rate=1.0)
LATENCY_GRID = [scheme for n in (2, 4, 10, 20) for scheme in scheme_grid(n)]


def test_harmonic_numbers():
    assert harmonic(0) == 0
    assert harmonic(1) == 1
    assert harmonic(4) == pytest.approx(25 / 12)


def test_order_statistic_means():
    assert exp_order_stat_mean(1, 1, 1.0) == pytest.approx(1.0)
    assert exp_order_stat_mean(2, 1, 1.0) == pytest.approx(0.5)
    assert exp_order_stat_mean(10, 5, 1.0) == pytest.approx(0.6456349, abs=1e-7)
    with pytest.raises(InvalidArgument):
        exp_order_stat_mean(3, 4, 1.0)


def test_analytic_scheme_latencies():
    uncoded = ExecutionScheme(kind=SchemeKind.UNCODED, n=10)
    mds = ExecutionScheme(kind=SchemeKind.MDS, n=10, k=5)
    repetition = ExecutionScheme(kind=SchemeKind.REPETITION, n=4, k=2)

    assert scheme_latency_analytic(uncoded, UNIT) == pytest.approx(0.392897, abs=1e-6)
    assert scheme_latency_analytic(mds, UNIT) == pytest.approx(0.329127, abs=1e-6)
    assert scheme_latency_analytic(repetition, NO_SHIFT) == pytest.approx(0.375)


def test_uncoded_scheme_fills_k():
    assert ExecutionScheme(kind=SchemeKind.UNCODED, n=7).k == 7


@pytest.mark.parametrize(
    "kind, n, k",
    [(SchemeKind.REPETITION, 5, 2), (SchemeKind.MDS, 3, 4), (SchemeKind.UNCODED, 4, 2)],
)
def test_invalid_schemes_rejected(kind, n, k):
    with pytest.raises(ValidationError):
        ExecutionScheme(kind=kind, n=n, k=k)


@pytest.mark.parametrize(
    "scheme, model",
    [
        (ExecutionScheme(kind=SchemeKind.MDS, n=3, k=2), NO_SHIFT),
        (ExecutionScheme(kind=SchemeKind.UNCODED, n=1), UNIT),
        (ExecutionScheme(kind=SchemeKind.REPETITION, n=4, k=2), NO_SHIFT),
        (ExecutionScheme(kind=SchemeKind.MDS, n=10, k=5), UNIT),
    ],
)
def test_simulation_agrees_with_closed_form(scheme, model, seed):
    estimate = scheme_latency_mc(scheme, model, 200_000, [seed, scheme.n, scheme.k])

    assert estimate.trials == 200_000
    assert estimate.z_score <= TOLERANCE_SE


def test_order_statistic_simulation(seed):
    estimate = order_statistic_estimate(10, 5, 1.0, NO_SHIFT, 200_000, seed)

    assert estimate.analytic_mean == pytest.approx(0.6456349, abs=1e-7)
    assert estimate.z_score <= TOLERANCE_SE


def test_chunked_draws_ignore_worker_count(small_chunks, seed):
    def sampler(rng, count):
        return rng.standard_normal(count)

    serial = run_chunked(sampler, 4500, seed, workers=1)
    pooled = run_chunked(sampler, 4500, seed, workers=4)

    assert serial.size == 4500
    np.testing.assert_array_equal(serial, pooled)


def test_run_chunked_needs_trials(seed):
    with pytest.raises(InvalidArgument):
        run_chunked(lambda rng, count: rng.random(count), 0, seed)


def test_mds_optimum_and_speedup_growth():
    assert optimal_mds_k(1, UNIT) == (1, pytest.approx(1.0))
    best_k, speedup_10 = optimal_mds_k(10, UNIT)
    _, speedup_100 = optimal_mds_k(100, UNIT)

    assert 1 <= best_k <= 10
    assert speedup_10 > 1.0
    assert speedup_100 > speedup_10


def test_shifted_exponential_floor(seed):
    samples = UNIT.sample(0.5, 1000, np.random.default_rng(seed))
    assert samples.min() >= 0.5


def test_scheme_grid_skips_repetition_without_divisor():
    kinds = [scheme.kind for scheme in scheme_grid(5, [2])]
    assert kinds == [SchemeKind.UNCODED, SchemeKind.MDS]


def test_default_grid_uses_divisors():
    ten = scheme_grid(10)

    assert [(scheme.kind, scheme.k) for scheme in ten if scheme.kind == SchemeKind.MDS] == [
        (SchemeKind.MDS, k) for k in (1, 2, 5, 10)
    ]
    assert len(LATENCY_GRID) == 34


@pytest.mark.parametrize(
    "position, scheme",
    list(enumerate(LATENCY_GRID)),
    ids=[f"{scheme.kind.value}-n{scheme.n}-k{scheme.k}" for scheme in LATENCY_GRID],
)
def test_latency_grid_within_three_standard_errors(position, scheme):
    seed = [settings.CODEDFOG_SEED, scheme.n, scheme.k, position]

    estimate = scheme_latency_mc(scheme, UNIT, 100_000, seed)

    assert estimate.z_score <= TOLERANCE_SE


@pytest.mark.parametrize("n", range(1, 31))
def test_order_statistic_mean_is_monotone(n):
    by_q = [exp_order_stat_mean(n, q, 1.0) for q in range(1, n + 1)]
    assert all(lower < higher for lower, higher in zip(by_q, by_q[1:]))

    for q in range(1, n + 1):
        assert exp_order_stat_mean(n + 1, q, 1.0) < exp_order_stat_mean(n, q, 1.0)


@pytest.mark.parametrize("model", [UNIT, NO_SHIFT, ShiftedExponential(shift=5.0, rate=0.5)])
def test_best_mds_never_slower_than_uncoded(model):
    for n in range(1, 41):
        best_k, speedup = optimal_mds_k(n, model)
        best = scheme_latency_analytic(ExecutionScheme(kind=SchemeKind.MDS, n=n, k=best_k), model)
        uncoded = scheme_latency_analytic(ExecutionScheme(kind=SchemeKind.UNCODED, n=n), model)

        assert best <= uncoded
        assert speedup >= 1.0
