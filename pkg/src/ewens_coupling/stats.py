"""Goodness-of-fit and distance checks used by the verification suite.

All functions are deterministic in their inputs.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Any, Hashable, Iterable, Mapping, NamedTuple, Sequence

import numpy as np
from scipy import special
from scipy.stats import binom

from .errors import RefusalError
from .shepp_lloyd import poisson_pmf

MIN_EXPECTED = 5.0


@dataclass(frozen=True)
class EmpiricalDistribution:
    counts: Mapping[Hashable, int]
    total: int

    def __post_init__(self):
        if self.total <= 0:
            raise ValueError("empirical distribution needs at least one observation")
        if sum(self.counts.values()) != self.total:
            raise ValueError("counts do not sum to total")

    @classmethod
    def from_samples(cls, samples: Iterable[Hashable]) -> "EmpiricalDistribution":
        c = Counter(samples)
        return cls(dict(c), sum(c.values()))

    @classmethod
    def from_rows(cls, rows: np.ndarray) -> "EmpiricalDistribution":
        """Outcomes are the rows of a 2-D integer array, keyed as tuples."""
        uniq, cnt = np.unique(rows, axis=0, return_counts=True)
        return cls({tuple(int(v) for v in row): int(c) for row, c in zip(uniq, cnt)}, int(cnt.sum()))

    def frequencies(self) -> dict[Hashable, float]:
        return {k: v / self.total for k, v in self.counts.items()}


class GofResult(NamedTuple):
    statistic: float
    dof: int
    p_value: float


def chi2_sf(statistic: float, dof: int) -> float:
    """Upper tail of the chi-square law via the regularized incomplete gamma function."""
    if statistic <= 0.0:
        return 1.0
    return float(special.gammaincc(dof / 2.0, statistic / 2.0))


def tv_distance(emp: EmpiricalDistribution, exact: Mapping[Hashable, float] | EmpiricalDistribution) -> float:
    """Half the L1 distance between empirical frequencies and a reference pmf.

    The reference may itself be empirical, in which case it is converted to
    frequencies first.
    """
    if isinstance(exact, EmpiricalDistribution):
        ref = exact.frequencies()
    else:
        ref = dict(exact)
        if any(p < 0 or not math.isfinite(p) for p in ref.values()):
            raise ValueError("reference table has negative or non-finite entries")
        if abs(sum(ref.values()) - 1.0) > 1e-9:
            raise ValueError(f"reference table sums to {sum(ref.values())!r}, not 1")
    freq = emp.frequencies()
    keys = set(freq) | set(ref)
    return 0.5 * sum(abs(freq.get(k, 0.0) - ref.get(k, 0.0)) for k in keys)


def _merge_bins(observed: Sequence[float], expected: Sequence[float]) -> tuple[list[float], list[float]]:
    """Merge neighbouring bins left to right until each has expected count >= 5.

    A short remainder is folded into the last complete bin.
    """
    obs_out: list[float] = []
    exp_out: list[float] = []
    acc_o = acc_e = 0.0
    for o, e in zip(observed, expected):
        acc_o += o
        acc_e += e
        if acc_e >= MIN_EXPECTED:
            obs_out.append(acc_o)
            exp_out.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0 or acc_o > 0:
        if exp_out:
            obs_out[-1] += acc_o
            exp_out[-1] += acc_e
        else:
            obs_out.append(acc_o)
            exp_out.append(acc_e)
    return obs_out, exp_out


def chi_square_gof(observed: Sequence[float], expected: Sequence[float], ddof: int = 0) -> GofResult:
    """Pearson chi-square test of ``observed`` against ``expected`` bin counts."""
    observed = [float(v) for v in observed]
    expected = [float(v) for v in expected]
    if len(observed) != len(expected):
        raise ValueError("observed and expected have different lengths")
    if any(e < 0 for e in expected):
        raise ValueError("expected counts must be nonnegative")
    so, se = sum(observed), sum(expected)
    if abs(so - se) > 1e-6 * max(so, se, 1.0):
        raise ValueError(f"observed total {so} and expected total {se} differ")
    obs, exp = _merge_bins(observed, expected)
    if len(obs) < 2:
        raise RefusalError("fewer than 2 bins left after merging sparse bins")
    stat = sum((o - e) ** 2 / e for o, e in zip(obs, exp))
    dof = len(obs) - 1 - ddof
    if dof < 1:
        raise RefusalError("no degrees of freedom left")
    return GofResult(stat, dof, chi2_sf(stat, dof))


def poisson_gof(samples: Sequence[int], lam: float) -> tuple[float, float]:
    """Chi-square fit of integer samples to Poisson(``lam``); returns ``(statistic, p_value)``.

    Bins are the values ``0..max(samples)`` plus an upper tail bin.  When the
    reference law is so concentrated that merging leaves a single bin, the
    test falls back to an exact binomial tail: the statistic is the number of
    samples off the modal value and the p-value is the probability of at
    least that many.
    """
    x = np.asarray(samples, dtype=np.int64)
    if x.size == 0:
        raise ValueError("no samples")
    if lam < 0:
        raise ValueError("Poisson mean must be nonnegative")
    n = x.size
    top = int(x.max())
    observed = np.bincount(x, minlength=top + 1).astype(float).tolist() + [0.0]
    pmf = [poisson_pmf(lam, k) for k in range(top + 1)]
    expected = [n * p for p in pmf] + [n * max(0.0, 1.0 - sum(pmf))]
    obs, _ = _merge_bins(observed, expected)
    if len(obs) >= 2:
        res = chi_square_gof(observed, expected)
        return res.statistic, res.p_value
    mode = int(math.floor(lam))
    off_prob = 1.0 - poisson_pmf(lam, mode)
    off = int(np.count_nonzero(x != mode))
    if off == 0:
        return 0.0, 1.0
    return float(off), float(binom.sf(off - 1, n, off_prob))


def chi_square_homogeneity(a: Mapping[Hashable, int], b: Mapping[Hashable, int]) -> GofResult:
    """Two-sample chi-square test that two count tables share one distribution.

    Categories are ordered by pooled frequency and the rare ones merged until
    every expected cell count is at least 5.
    """
    keys = sorted(set(a) | set(b), key=lambda k: (-(a.get(k, 0) + b.get(k, 0)), repr(k)))
    na, nb = sum(a.values()), sum(b.values())
    if na == 0 or nb == 0:
        raise RefusalError("both samples need observations")
    total = na + nb
    scale = min(na, nb) / total
    cols: list[tuple[float, float]] = []
    acc_a = acc_b = 0.0
    for k in keys:
        acc_a += a.get(k, 0)
        acc_b += b.get(k, 0)
        if (acc_a + acc_b) * scale >= MIN_EXPECTED:
            cols.append((acc_a, acc_b))
            acc_a = acc_b = 0.0
    if acc_a or acc_b:
        if cols:
            ca, cb = cols[-1]
            cols[-1] = (ca + acc_a, cb + acc_b)
        else:
            cols.append((acc_a, acc_b))
    if len(cols) < 2:
        raise RefusalError("fewer than 2 categories left after merging")
    stat = 0.0
    for ca, cb in cols:
        c = ca + cb
        ea, eb = na * c / total, nb * c / total
        stat += (ca - ea) ** 2 / ea + (cb - eb) ** 2 / eb
    dof = len(cols) - 1
    return GofResult(stat, dof, chi2_sf(stat, dof))


def independence_check(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Pearson correlation and its z-score ``r * sqrt(n)`` under independence."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D of equal length")
    if x.size < 2:
        raise ValueError("need at least 2 pairs")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise RefusalError("zero variance input: correlation undefined")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    return r, r * math.sqrt(x.size)


def bernoulli_z(successes: int, trials: int, prob: float) -> float:
    """Deviation of an empirical frequency from ``prob`` in binomial standard errors."""
    se = math.sqrt(prob * (1.0 - prob) / trials)
    freq = successes / trials
    if se == 0.0:
        return 0.0 if freq == prob else math.inf
    return (freq - prob) / se


@dataclass
class Verdict:
    test: str
    statistic: float | None
    p_value: float | None
    passed: bool
    config: dict[str, Any] = field(default_factory=dict)
    detail: str = ""

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, default=float)
