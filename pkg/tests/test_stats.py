import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats as sps

from ewens_coupling.errors import RefusalError
from ewens_coupling.stats import (
    EmpiricalDistribution,
    Verdict,
    bernoulli_z,
    chi2_sf,
    chi_square_gof,
    chi_square_homogeneity,
    independence_check,
    poisson_gof,
    tv_distance,
)


def test_tv_examples():
    emp = EmpiricalDistribution.from_samples("aabb")
    assert tv_distance(emp, {"a": 0.5, "b": 0.5}) == 0.0
    assert tv_distance(emp, {"c": 1.0}) == 1.0
    assert tv_distance(emp, {"a": 0.75, "b": 0.25}) == pytest.approx(0.25)
    assert tv_distance(emp, EmpiricalDistribution.from_samples("ab")) == 0.0
    with pytest.raises(ValueError):
        tv_distance(emp, {"a": 0.6, "b": 0.6})


def test_empirical_from_rows():
    emp = EmpiricalDistribution.from_rows(np.array([[1, 2], [2, 1], [1, 2]]))
    assert emp.counts == {(1, 2): 2, (2, 1): 1} and emp.total == 3
    with pytest.raises(ValueError):
        EmpiricalDistribution({}, 0)


@given(st.floats(0.01, 200.0), st.integers(1, 60))
def test_chi2_sf_matches_scipy(x, k):
    assert chi2_sf(x, k) == pytest.approx(sps.chi2.sf(x, k), rel=1e-9, abs=1e-300)


def test_chi_square_examples():
    res = chi_square_gof([60, 40], [50, 50])
    assert res.statistic == pytest.approx(4.0) and res.dof == 1
    assert res.p_value == pytest.approx(sps.chi2.sf(4.0, 1))
    same = chi_square_gof([10, 20, 30], [10, 20, 30])
    assert same.statistic == 0.0 and same.p_value == 1.0
    with pytest.raises(RefusalError):
        chi_square_gof([3, 1], [2, 2])
    with pytest.raises(ValueError):
        chi_square_gof([10, 10], [5, 5])


def test_sparse_bins_are_merged():
    # bins become (52 | 2 + 1 + 45) against (50 | 1 + 1 + 48)
    res = chi_square_gof([52, 2, 1, 45], [50, 1, 1, 48])
    assert res.dof == 1
    assert res.statistic == pytest.approx(4 / 50 + 4 / 50)


def test_poisson_gof(rng):
    x = rng.poisson(3.0, 5000)
    _, p = poisson_gof(x, 3.0)
    assert p > 1e-3
    _, p = poisson_gof(x, 4.0)
    assert p < 1e-6
    assert poisson_gof([0] * 100, 1e-6) == (0.0, 1.0)
    stat, p = poisson_gof([0] * 99 + [1], 1e-6)
    assert stat == 1.0 and p < 1e-3


def test_homogeneity(rng):
    a = dict(zip(*np.unique(rng.poisson(2.0, 4000), return_counts=True)))
    b = dict(zip(*np.unique(rng.poisson(2.0, 6000), return_counts=True)))
    c = dict(zip(*np.unique(rng.poisson(2.5, 6000), return_counts=True)))
    assert chi_square_homogeneity(a, b).p_value > 1e-3
    assert chi_square_homogeneity(a, c).p_value < 1e-6
    with pytest.raises(RefusalError):
        chi_square_homogeneity({"x": 5}, {})


def test_independence():
    x = np.arange(10.0)
    assert independence_check(x, x) == (pytest.approx(1.0), pytest.approx(math.sqrt(10)))
    assert independence_check(x, -x)[0] == pytest.approx(-1.0)
    with pytest.raises(RefusalError):
        independence_check(x, np.ones(10))
    with pytest.raises(ValueError):
        independence_check(x, x[:5])


def test_bernoulli_z():
    assert bernoulli_z(50, 100, 0.5) == 0.0
    assert bernoulli_z(60, 100, 0.5) == pytest.approx(2.0)
    assert bernoulli_z(0, 10, 0.0) == 0.0


def test_verdict_json():
    v = Verdict("demo", 1.5, 0.2, True, {"n": 3}, "ok")
    d = json.loads(v.to_json())
    assert d == {"test": "demo", "statistic": 1.5, "p_value": 0.2, "pass": True,
                 "config": {"n": 3}, "detail": "ok"}


def test_tv_weighted_example():
    emp = EmpiricalDistribution({"a": 75, "b": 25}, 100)
    assert tv_distance(emp, {"a": 0.5, "b": 0.5}) == pytest.approx(0.25)


def test_poisson_gof_reference_cases():
    stat, p = poisson_gof([0] * 1000, 1e-9)
    assert p > 1e-3
    _, p = poisson_gof([2] * 1000, 2.0)
    assert p < 1e-10


def test_poisson_gof_calibration():
    passes = sum(poisson_gof(np.random.default_rng(s).poisson(1.5, 100_000), 1.5)[1] >= 1e-3
                 for s in range(200))
    assert passes >= 195
    pvals = [poisson_gof(np.random.default_rng(1000 + s).poisson(1.5, 2000), 1.5)[1] for s in range(300)]
    # p-values of a discrete test are only roughly uniform; check the bulk
    assert 0.35 < np.mean(pvals) < 0.65
    assert np.mean(np.array(pvals) < 0.1) < 0.2


def test_independence_calibration():
    zs = [independence_check(*np.random.default_rng(s).poisson(2.0, (2, 100_000)))[1] for s in range(200)]
    assert max(abs(z) for z in zs) <= 4
