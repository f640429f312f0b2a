"""Exact Ewens(theta) probabilities and the Chinese restaurant oracle sampler."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import TextIO

import numpy as np

from .errors import DomainError, RefusalError
from .perm import Permutation, cycle_counts, enumerate_permutations

MAX_EXACT_N = 8


@dataclass(frozen=True)
class EwensParams:
    theta: float

    def __post_init__(self):
        check_theta(self.theta)


def check_theta(theta: float) -> float:
    if not (isinstance(theta, (int, float, np.floating)) and math.isfinite(theta) and theta > 0):
        raise DomainError(f"theta must be a finite positive real, got {theta!r}")
    return float(theta)


def log_rising_factorial(theta: float, n: int) -> float:
    """``log (theta)_n`` via log-gamma."""
    check_theta(theta)
    if n < 0:
        raise DomainError(f"n must be nonnegative, got {n}")
    if n == 0:
        return 0.0
    return math.lgamma(theta + n) - math.lgamma(theta)


def rising_factorial(theta: float, n: int) -> float:
    """``(theta)_n = theta (theta + 1) ... (theta + n - 1)``, with ``(theta)_0 = 1``.

    Small ``n`` is an exact running product; larger ``n`` goes through log space
    (and may return ``inf`` when the value overflows a double).
    """
    check_theta(theta)
    if n < 0:
        raise DomainError(f"n must be nonnegative, got {n}")
    if n <= 64:
        out = 1.0
        for j in range(n):
            out *= theta + j
        return out
    lv = log_rising_factorial(theta, n)
    return math.exp(lv) if lv < 709.0 else math.inf


def ewens_log_pmf(p: Permutation, theta: float) -> float:
    return p.num_cycles() * math.log(theta) - log_rising_factorial(theta, p.n)


def ewens_pmf(p: Permutation, theta: float) -> float:
    """``theta^K(p) / (theta)_n``."""
    check_theta(theta)
    return math.exp(ewens_log_pmf(p, theta))


def crp_sample(n: int, theta: float, rng: np.random.Generator) -> Permutation:
    """Ewens(theta) permutation by sequential cycle insertion.

    With ``i`` elements placed, element ``i + 1`` is spliced in right after a
    uniformly chosen placed element with probability ``i / (i + theta)``, or
    opens a new cycle with probability ``theta / (i + theta)``.
    """
    if n < 1:
        raise DomainError(f"n must be positive, got {n}")
    theta = check_theta(theta)
    image = [0] * n
    image[0] = 1
    for i in range(1, n):
        x = rng.random() * (i + theta)
        if x < i:
            j = int(x)  # 0-based element after which i+1 is inserted
            image[i] = image[j]
            image[j] = i + 1
        else:
            image[i] = i + 1
    return Permutation(tuple(image))


def exact_distribution(n: int, theta: float) -> dict[tuple[int, ...], float]:
    """Map one-line image tuple -> Ewens(theta) probability, for every permutation of [n]."""
    check_theta(theta)
    if n > MAX_EXACT_N:
        raise RefusalError(f"exact table limited to n <= {MAX_EXACT_N}, got {n}")
    log_norm = log_rising_factorial(theta, n)
    log_theta = math.log(theta)
    return {
        p.image: math.exp(p.num_cycles() * log_theta - log_norm)
        for p in enumerate_permutations(n)
    }


def num_cycles_pmf(n: int, theta: float) -> list[float]:
    """Law of the number of cycles ``K`` of an Ewens(theta) permutation of [n], indexed by ``k = 0..n``.

    ``K`` is a sum of independent Bernoulli(theta / (theta + i - 1)), so the
    pmf is the coefficient list of the product of their generating polynomials.
    """
    check_theta(theta)
    coef = [1.0]
    for i in range(1, n + 1):
        q = theta / (theta + i - 1)
        nxt = [0.0] * (len(coef) + 1)
        for k, c in enumerate(coef):
            nxt[k] += c * (1.0 - q)
            nxt[k + 1] += c * q
        coef = nxt
    return coef


def write_exact_distribution_csv(n: int, theta: float, fh: TextIO) -> None:
    """CSV with columns ``permutation`` (space separated one-line form), ``K``, ``probability``."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["permutation", "K", "probability"])
    for image, prob in exact_distribution(n, theta).items():
        p = Permutation(image)
        writer.writerow([p.one_line(), p.num_cycles(), repr(prob)])


def pgf_check(n: int, theta: float) -> tuple[float, float]:
    """``(E_1[theta^K], (theta)_n / n!)``: the uniform-average side by enumeration, and the closed form."""
    check_theta(theta)
    if n > MAX_EXACT_N:
        raise RefusalError(f"enumeration limited to n <= {MAX_EXACT_N}, got {n}")
    terms = [theta ** cycle_counts(p).num_cycles() for p in enumerate_permutations(n)]
    return math.fsum(terms) / len(terms), rising_factorial(theta, n) / math.factorial(n)
