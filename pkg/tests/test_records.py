import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from ewens_coupling.errors import DomainError, RejectionError
from ewens_coupling.ewens import exact_distribution, num_cycles_pmf
from ewens_coupling.perm import CycleCounts, Permutation
from ewens_coupling.records import (
    RecordTrace,
    Stretch,
    density_ratio_log,
    log_density_ratio_batch,
    lower_records,
    record_mask,
    record_permutation,
    record_permutation_batch,
    sample_ptheta,
    sample_ptheta_batch,
    sample_ptheta_until,
    sample_ptheta_until_batch,
    segment_length_counts,
    spacing_counts_from_records,
    stretches,
)
from ewens_coupling.stats import EmpiricalDistribution, chi_square_gof

distinct_unit = st.lists(st.floats(1e-9, 1 - 1e-9), min_size=1, max_size=25, unique=True)


def test_lower_records_example():
    u = (0.6, 0.8, 0.3, 0.5, 0.1, 0.9)
    assert lower_records(u) == ((1, 3, 5), (1, 0, 1, 0, 1, 0))
    with pytest.raises(RejectionError):
        lower_records((0.2, 0.5, 0.2))


def test_stretches_example():
    trace = RecordTrace.from_values((0.6, 0.8, 0.3, 0.5, 0.1, 0.9))
    complete, trailing = stretches(trace)
    assert [s.values for s in complete] == [(0.6, 0.8), (0.3, 0.5)]
    assert trailing.values == (0.1, 0.9)
    complete, trailing = stretches(trace, 4)
    assert [s.values for s in complete] == [(0.6, 0.8)] and trailing.values == (0.3, 0.5)
    assert stretches(RecordTrace.from_values(()), 0) == ([], None)


def test_stretch_requires_leading_minimum():
    with pytest.raises(ValueError):
        Stretch((0.5, 0.4))
    with pytest.raises(ValueError):
        Stretch(())
    assert Stretch((0.2, 0.7)).initial == 0.2


def test_record_permutation_examples():
    trace = RecordTrace.from_values((0.6, 0.8, 0.3, 0.5, 0.1, 0.9))
    assert record_permutation(trace).cycles() == [[1, 6], [2, 3], [4, 5]]
    trace = RecordTrace.from_values((0.3, 0.9, 0.5, 0.1))
    assert record_permutation(trace).cycles() == [[1], [2, 4, 3]]
    assert record_permutation(RecordTrace.from_values((0.1, 0.2, 0.3))) == Permutation.from_cycles([[1, 2, 3]])
    assert record_permutation(RecordTrace.from_values((0.9, 0.5, 0.2))) == Permutation.identity(3)


def test_density_ratio_examples():
    assert density_ratio_log((0.5, 0.25), 2.0) == pytest.approx(0.0, abs=1e-15)
    assert density_ratio_log((0.3, 0.7, 0.1), 1.0) == 0.0
    assert density_ratio_log((0.4,), 3.0) == pytest.approx(math.log(3) + 2 * math.log(0.4))
    for bad in ((0.0, 0.5), (0.5, 1.0), ()):
        with pytest.raises(DomainError):
            density_ratio_log(bad, 2.0)
    with pytest.raises(RejectionError):
        density_ratio_log((0.3, 0.3), 2.0)


@settings(max_examples=200, deadline=None)
@given(distinct_unit)
def test_trace_invariants(u):
    trace = RecordTrace.from_values(u)
    assert trace.indicators[0] == 1
    assert list(trace.running_min) == list(np.minimum.accumulate(u))
    assert [i for i, b in enumerate(trace.indicators, 1) if b] == list(trace.record_indices)
    perm = record_permutation(trace)
    assert perm.num_cycles() == len(trace.record_indices)
    assert perm.cycle_counts() == spacing_counts_from_records(trace)


@settings(max_examples=200, deadline=None)
@given(distinct_unit)
def test_batch_helpers_match_scalar(u):
    row = np.array([u])
    assert record_mask(row)[0].astype(int).tolist() == list(lower_records(u)[1])
    assert tuple(record_permutation_batch(row)[0]) == record_permutation(RecordTrace.from_values(u)).image
    assert log_density_ratio_batch(row, 1.7)[0] == pytest.approx(density_ratio_log(u, 1.7))
    counts = segment_length_counts(record_mask(row), np.array([len(u)]), len(u))[0]
    assert CycleCounts(tuple(counts)) == spacing_counts_from_records(RecordTrace.from_values(u))


def test_nan_padded_segments():
    u = np.array([[0.5, 0.7, 0.2, np.nan], [np.nan] * 4, [0.9, 0.8, 0.85, 0.95]])
    lengths = np.array([3, 0, 4])
    counts = segment_length_counts(record_mask(u), lengths, 4)
    assert counts.tolist() == [[1, 1, 0, 0], [0, 0, 0, 0], [1, 0, 1, 0]]


def test_first_value_is_beta(rng):
    first = [sample_ptheta(1, 2.0, rng).u[0] for _ in range(4000)]
    assert sps.kstest(first, lambda x: x**2).pvalue > 1e-3
    batch = sample_ptheta_batch(20000, 1, 0.5, rng)[:, 0]
    assert sps.kstest(batch, lambda x: np.sqrt(x)).pvalue > 1e-3


def test_theta_one_is_iid_uniform(rng):
    u = sample_ptheta_batch(20000, 4, 1.0, rng)
    for j in range(4):
        assert sps.kstest(u[:, j], "uniform").pvalue > 1e-3
    r = np.corrcoef(u[:, 0], u[:, 1])[0, 1]
    assert abs(r) * math.sqrt(u.shape[0]) < 4


def test_scalar_sampler_values(rng):
    for theta in (0.3, 1.0, 4.0):
        trace = sample_ptheta(30, theta, rng)
        assert len(trace) == 30 and len(set(trace.u)) == 30
        assert all(0 < v < 1 for v in trace.u)
    with pytest.raises(DomainError):
        sample_ptheta(0, 1.0, rng)
    with pytest.raises(DomainError):
        sample_ptheta(3, -1.0, rng)


@pytest.mark.parametrize("n,theta", [(4, 0.5), (5, 2.5)])
def test_record_permutation_is_ewens(rng, n, theta):
    exact = exact_distribution(n, theta)
    keys = sorted(exact)
    reps = 200_000
    emp = EmpiricalDistribution.from_rows(record_permutation_batch(sample_ptheta_batch(reps, n, theta, rng)))
    res = chi_square_gof([emp.counts.get(k, 0) for k in keys], [reps * exact[k] for k in keys])
    assert res.p_value >= 1e-3
    reps = 20_000
    emp = EmpiricalDistribution.from_samples(
        record_permutation(sample_ptheta(n, theta, rng)).image for _ in range(reps))
    res = chi_square_gof([emp.counts.get(k, 0) for k in keys], [reps * exact[k] for k in keys])
    assert res.p_value >= 1e-3


def test_change_of_measure(rng):
    # E_1[dP_theta/dP_1 * f] = E_theta[f]; here f is the number of records
    n, theta, reps = 6, 2.0, 200_000
    u = sample_ptheta_batch(reps, n, 1.0, rng)
    w = np.exp(log_density_ratio_batch(u, theta))
    assert abs(w.mean() - 1.0) < 4 * w.std() / math.sqrt(reps)
    k = record_mask(u).sum(axis=1)
    est = (w * k).mean()
    exact = sum(j * p for j, p in enumerate(num_cycles_pmf(n, theta)))
    assert abs(est - exact) < 4 * (w * k).std() / math.sqrt(reps)


def test_stopped_sampler(rng):
    trace, stop = sample_ptheta_until(0.5, 1.0, rng)
    assert stop < 0.5 and all(v >= 0.5 for v in trace.u)
    with pytest.raises(DomainError):
        sample_ptheta_until(1.0, 1.0, rng)
    u, lengths = sample_ptheta_until_batch(50_000, 0.4, 1.0, rng)
    assert u.shape[1] == lengths.max()
    assert np.all(np.isnan(u[np.arange(u.shape[1]) >= lengths[:, None]]))
    assert np.all(u[np.arange(u.shape[1]) < lengths[:, None]] >= 0.4)
    # theta = 1: geometric number of values above the level, mean (1 - p) / p
    assert abs(lengths.mean() - 1.5) < 4 * math.sqrt(0.6 / 0.16 / 50_000)


TRACE = (0.5, 0.7, 0.2, 0.9, 0.1)


def test_reference_trace():
    assert lower_records(TRACE) == ((1, 3, 5), (1, 0, 1, 0, 1))
    trace = RecordTrace.from_values(TRACE)
    complete, trailing = stretches(trace, 5)
    assert [s.values for s in complete] == [(0.5, 0.7), (0.2, 0.9)] and trailing.values == (0.1,)
    assert record_permutation(trace).cycles() == [[1], [2, 5], [3, 4]]
    assert spacing_counts_from_records(trace) == CycleCounts((1, 2))


def test_monotone_and_short_traces():
    dec = (0.9, 0.6, 0.4, 0.1)
    inc = (0.1, 0.4, 0.6, 0.9)
    assert lower_records(dec)[0] == (1, 2, 3, 4) and lower_records(inc)[0] == (1,)
    complete, trailing = stretches(RecordTrace.from_values(dec[:3]))
    assert [s.values for s in complete] == [(0.9,), (0.6,)] and trailing.values == (0.4,)
    assert spacing_counts_from_records(RecordTrace.from_values(dec)) == CycleCounts((4,))
    assert record_permutation(RecordTrace.from_values(inc)) == Permutation.from_cycles([[1, 2, 3, 4]])
    single = RecordTrace.from_values((0.3,))
    assert stretches(single) == ([], Stretch((0.3,)))
    assert record_permutation(single) == Permutation.identity(1)
    assert spacing_counts_from_records(single) == CycleCounts((1,))


def test_density_ratio_reference_values():
    assert density_ratio_log((0.5, 0.7), 2.0) == pytest.approx(0.0, abs=1e-15)
    assert density_ratio_log((0.5,), 2.0) == pytest.approx(0.0, abs=1e-15)
    assert density_ratio_log((0.25,), 2.0) == pytest.approx(math.log(0.5))
    assert density_ratio_log(TRACE, 1.0) == 0.0
