import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ewens_coupling.errors import StructuralError
from ewens_coupling.ewens import exact_distribution
from ewens_coupling.feller import (
    BernoulliTrace,
    InsertionSequence,
    _FreeSet,
    coupling_inequality_check,
    images_from_runs,
    insertion_batch,
    last_spacing,
    permutation_from_insertion,
    sample_bernoulli,
    sample_bernoulli_batch,
    sample_feller,
    sample_feller_batch,
    sample_insertion,
    spacing_counts,
    spacing_lengths_batch,
    truncated_infinite_spacings,
    window_spacing_counts,
)
from ewens_coupling.perm import CycleCounts, Permutation
from ewens_coupling.stats import EmpiricalDistribution, chi_square_gof, tv_distance

PAPER_BITS = (1, 0, 1, 0, 0, 1, 1, 0, 0)
PAPER_X = (1, 7, 3, 2, 4, 9, 5, 6, 8)


def _flags(n, starts):
    return tuple(i in starts for i in range(1, n + 1))


def test_bernoulli_first_trial_always_succeeds(rng):
    for theta in (0.01, 1.0, 50.0):
        assert all(sample_bernoulli(5, theta, rng).bits[0] == 1 for _ in range(200))


def test_bernoulli_frequencies(rng):
    reps = 40000
    bits = sample_bernoulli_batch(reps, 6, 1.0, rng)
    for i in range(1, 7):
        p = 1 / i
        se = math.sqrt(p * (1 - p) / reps) or 1e-12
        assert abs(bits[:, i - 1].mean() - p) <= 4 * se + 1e-12
    scalar = np.array([sample_bernoulli(3, 2.0, rng).bits[2] for _ in range(reps)])
    assert abs(scalar.mean() - 0.5) <= 4 * math.sqrt(0.25 / reps)


def test_free_set_matches_sorted_list():
    rnd = np.random.default_rng(0)
    for n in (1, 2, 7, 33, 100):
        fs = _FreeSet(n)
        free = list(range(1, n + 1))
        while free:
            k = int(rnd.integers(len(free)))
            assert fs.kth(k) == free[k]
            assert fs.kth(0) == free[0]
            fs.remove(free[k])
            free.pop(k)


def test_insertion_all_successes_is_forced(rng):
    ins = sample_insertion(BernoulliTrace((1,) * 6, 1.0), rng)
    assert ins.x == (1, 2, 3, 4, 5, 6)
    assert all(ins.cycle_start)
    assert permutation_from_insertion(ins) == Permutation.identity(6)
    ins2 = sample_insertion(BernoulliTrace((1, 1), 1.0), rng)
    assert ins2.x == (1, 2) and ins2.cycle_start == (True, True)


def test_insertion_worked_example(rng):
    trace = BernoulliTrace(PAPER_BITS, 1.0)
    hits = 0
    reps = 200_000
    for _ in range(reps):
        ins = sample_insertion(trace, rng)
        assert ins.cycle_start == _flags(9, {1, 4, 5, 8})
        used = set()
        for v, start in zip(ins.x, ins.cycle_start):
            if start:
                assert v == min(set(range(1, 10)) - used)
            used.add(v)
        hits += ins.x == PAPER_X
    # free choices at positions 2, 3, 6, 7, 9 have 8, 7, 4, 3, 1 options
    p = 1 / (8 * 7 * 4 * 3 * 1)
    assert abs(hits - reps * p) <= 4 * math.sqrt(reps * p * (1 - p))


def test_permutation_from_insertion_examples():
    ins = InsertionSequence(PAPER_X, _flags(9, {1, 4, 5, 8}))
    sigma = permutation_from_insertion(ins)
    assert sigma.cycles() == [[1, 7, 3], [2], [4, 9, 5], [6, 8]]
    three = permutation_from_insertion(InsertionSequence((1, 2, 3), (True, False, False)))
    assert three == Permutation.from_cycles([[1, 2, 3]])
    with pytest.raises(StructuralError):
        permutation_from_insertion(InsertionSequence((1, 2), (False, True)))


def test_spacing_counts_examples():
    assert spacing_counts(PAPER_BITS, 9) == CycleCounts((1, 1, 2))
    assert spacing_counts((1,) * 5, 5) == CycleCounts((5,))
    assert spacing_counts((1, 0, 0, 0), 4) == CycleCounts((0, 0, 0, 1))
    degenerate = spacing_counts((0, 1, 0), 3)
    assert degenerate.degenerate and degenerate.counts == (0, 1)
    assert degenerate.total_size() != 3


def test_truncated_spacings(rng):
    assert window_spacing_counts((1, 1)) == CycleCounts((1,))
    for _ in range(200):
        c = truncated_infinite_spacings(50, 1.3, rng)
        assert all(c[ell] <= 50 // ell for ell in range(1, 51))
    reps = 4000
    ones = [truncated_infinite_spacings(2000, 1.5, rng)[1] for _ in range(reps)]
    # Poisson(1.5) mean; truncation bias is about theta^2/m
    assert abs(np.mean(ones) - 1.5) <= 4 * math.sqrt(1.5 / reps)


def test_coupling_inequality_examples():
    assert coupling_inequality_check((1,) * 10, 5) is True
    assert last_spacing((1,) * 10, 5) == 1
    assert coupling_inequality_check((1, 0, 1, 0), 2) is True
    assert spacing_counts((1, 0), 2)[2] == 1 and last_spacing((1, 0), 2) == 2
    assert coupling_inequality_check((1, 0, 0, 0), 2) is None
    assert coupling_inequality_check((1, 0), 2) is None


def test_coupling_inequality_random_paths(rng):
    decided = 0
    while decided < 10_000:
        bits = sample_bernoulli(200, 1.0, rng).bits
        ok = coupling_inequality_check(bits, 15)
        if ok is None:
            continue
        decided += 1
        assert ok


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 30), st.floats(0.05, 20.0), st.integers(0, 2**32))
def test_cycle_counts_equal_spacing_counts(n, theta, seed):
    trace, perm = sample_feller(n, theta, np.random.default_rng(seed))
    assert perm.cycle_counts() == spacing_counts(trace.bits, n)
    assert spacing_counts(trace.bits, n).total_size() == n


def test_batch_images_match_scalar_construction(rng):
    bits = sample_bernoulli_batch(500, 7, 1.2, rng)
    x, starts = insertion_batch(bits, rng)
    images = images_from_runs(x, starts)
    for row in range(500):
        ins = InsertionSequence(tuple(int(v) for v in x[row]), tuple(bool(f) for f in starts[row]))
        assert ins.cycle_start == _flags(7, {1} | {9 - i for i in range(2, 8) if bits[row, i - 1]})
        assert permutation_from_insertion(ins).image == tuple(images[row])


def test_spacing_lengths_batch():
    bits = np.array([[1, 0, 1, 1, 0, 0, 1], [1, 0, 0, 0, 0, 0, 0]], dtype=bool)
    assert spacing_lengths_batch(bits, 3).tolist() == [[1, 1, 1], [0, 0, 0]]


@pytest.mark.parametrize("n,theta", [(3, 0.5), (4, 2.0), (6, 1.0)])
def test_scalar_sampler_is_ewens(rng, n, theta):
    exact = exact_distribution(n, theta)
    reps = 60_000
    emp = EmpiricalDistribution.from_samples(sample_feller(n, theta, rng)[1].image for _ in range(reps))
    keys = sorted(exact)
    res = chi_square_gof([emp.counts.get(k, 0) for k in keys], [reps * exact[k] for k in keys])
    assert res.p_value >= 1e-3


@pytest.mark.parametrize("n,theta", [(2, 1.0), (5, 0.3), (6, 3.7)])
def test_batch_sampler_is_ewens(rng, n, theta):
    exact = exact_distribution(n, theta)
    reps = 300_000
    _, images = sample_feller_batch(reps, n, theta, rng)
    emp = EmpiricalDistribution.from_rows(images)
    keys = sorted(exact)
    res = chi_square_gof([emp.counts.get(k, 0) for k in keys], [reps * exact[k] for k in keys])
    assert res.p_value >= 1e-3
    assert tv_distance(emp, exact) < 0.02
