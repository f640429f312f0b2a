"""Ewens permutations of negative-binomial random size.

Run a P_theta sequence until the first value below ``p``; the values before
that time carry a record permutation of random size ``N ~ NegBin(theta, p)``
whose cycle counts are independent ``Poisson(theta (1-p)^l / l)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .ewens import check_theta, log_rising_factorial
from .perm import CycleCounts, Permutation
from .records import (
    RecordTrace,
    record_mask,
    record_permutation,
    sample_ptheta_until,
    sample_ptheta_until_batch,
    segment_lengths,
)


@dataclass(frozen=True)
class RandomSizePermutation:
    size: int
    perm: Permutation

    def __post_init__(self):
        if self.size != self.perm.n:
            raise ValueError(f"size {self.size} does not match permutation order {self.perm.n}")

    def cycle_counts(self) -> CycleCounts:
        return self.perm.cycle_counts()


def _check_p(p: float) -> None:
    if not 0.0 < p < 1.0:
        raise DomainError(f"p must lie in (0, 1), got {p}")


def negbin_log_pmf(theta: float, p: float, n: int) -> float:
    check_theta(theta)
    _check_p(p)
    if n < 0:
        return -math.inf
    return (log_rising_factorial(theta, n) - math.lgamma(n + 1)
            + n * math.log1p(-p) + theta * math.log(p))


def negbin_pmf(theta: float, p: float, n: int) -> float:
    """``(theta)_n / n! * (1 - p)^n * p^theta`` for ``n >= 0``."""
    return math.exp(negbin_log_pmf(theta, p, n))


def negbin_support(theta: float, p: float, tail: float = 1e-12) -> np.ndarray:
    """pmf values for ``n = 0, 1, ...`` until the remaining mass is provably below ``tail``.

    Past the mode the term ratio ``(theta + n)(1 - p) / (n + 1)`` decreases, so
    once it is below 1 the tail after term ``t`` is at most ``t * rho / (1 - rho)``.
    """
    out = [negbin_pmf(theta, p, 0)]
    n = 0
    while True:
        rho = (theta + n) * (1.0 - p) / (n + 1)
        nxt = out[-1] * rho
        out.append(nxt)
        n += 1
        rho_next = (theta + n) * (1.0 - p) / (n + 1)
        if rho_next < 1.0 and nxt * rho_next / (1.0 - rho_next) < tail:
            return np.array(out)


def poisson_pmf(lam: float, k: int) -> float:
    """``exp(-lam) lam^k / k!`` in log space."""
    if lam < 0:
        raise DomainError(f"Poisson mean must be nonnegative, got {lam}")
    if k < 0:
        return 0.0
    if lam == 0.0:
        return 1.0 if k == 0 else 0.0
    return math.exp(-lam + k * math.log(lam) - math.lgamma(k + 1))


def sample_random_size_ewens(theta: float, p: float, rng: np.random.Generator) -> RandomSizePermutation:
    _check_p(p)
    trace, _ = sample_ptheta_until(p, theta, rng)
    if not trace.u:
        return RandomSizePermutation(0, Permutation(()))
    perm = record_permutation(trace)
    return RandomSizePermutation(perm.n, perm)


def levy_identity_check(rsp: RandomSizePermutation) -> bool:
    """``size == sum_l l * K_l(perm)``."""
    return rsp.size == rsp.cycle_counts().total_size()


def sample_random_size_batch(size: int, theta: float, p: float, rng: np.random.Generator,
                             max_len: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(sizes, cycle_counts, cycle_total)`` for ``size`` independent samples.

    ``cycle_counts`` is ``(size, max_len)`` and omits cycles longer than
    ``max_len``; ``cycle_total`` is ``sum_l l*K_l`` over all cycles of each row.
    """
    _check_p(p)
    u, lengths = sample_ptheta_until_batch(size, p, theta, rng)
    rows, gaps = segment_lengths(record_mask(u), lengths)
    keep = gaps <= max_len
    counts = np.zeros((size, max_len), dtype=np.int64)
    np.add.at(counts, (rows[keep], gaps[keep] - 1), 1)
    total = np.bincount(rows, weights=gaps, minlength=size).astype(np.int64)
    return lengths, counts, total
