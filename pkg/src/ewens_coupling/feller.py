"""The Feller coupling between Bernoulli(theta/(theta+i-1)) trials and Ewens permutations.

Trial ``B_i`` (1-based) succeeds with probability ``theta / (theta + i - 1)``.
Given the trials, the insertion sequence ``X_1 .. X_n`` is built left to right;
position ``i >= 2`` is governed by trial ``B_{n+2-i}``: a success forces the
smallest unused element and opens a new cycle, a failure draws an unused
element uniformly and extends the current cycle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, StructuralError
from .ewens import check_theta
from .perm import CycleCounts, Permutation


@dataclass(frozen=True)
class BernoulliTrace:
    bits: tuple[int, ...]
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "bits", tuple(int(b) for b in self.bits))
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("bits must be 0/1")

    @property
    def length(self) -> int:
        return len(self.bits)


@dataclass(frozen=True)
class InsertionSequence:
    x: tuple[int, ...]
    cycle_start: tuple[bool, ...]

    def __post_init__(self):
        if len(self.x) != len(self.cycle_start):
            raise StructuralError("x and cycle_start lengths differ")
        if sorted(self.x) != list(range(1, len(self.x) + 1)):
            raise StructuralError(f"x is not a permutation of [n]: {self.x}")


class _FreeSet:
    """Fenwick tree over [n] supporting k-th smallest free element and removal in O(log n)."""

    def __init__(self, n: int):
        self.n = n
        self.tree = [0] * (n + 1)
        for i in range(1, n + 1):
            self.tree[i] += 1
            j = i + (i & -i)
            if j <= n:
                self.tree[j] += self.tree[i]
        self.top = 1 << n.bit_length()

    def remove(self, i: int) -> None:
        while i <= self.n:
            self.tree[i] -= 1
            i += i & -i

    def kth(self, k: int) -> int:
        """The (k+1)-th smallest free element (k is 0-based)."""
        pos = 0
        step = self.top
        while step:
            nxt = pos + step
            if nxt <= self.n and self.tree[nxt] <= k:
                pos = nxt
                k -= self.tree[nxt]
            step >>= 1
        return pos + 1


def success_probabilities(n: int, theta: float) -> np.ndarray:
    """``theta / (theta + i - 1)`` for ``i = 1..n``."""
    return theta / (theta + np.arange(n, dtype=float))


def sample_bernoulli(n: int, theta: float, rng: np.random.Generator) -> BernoulliTrace:
    if n < 1:
        raise DomainError(f"n must be positive, got {n}")
    theta = check_theta(theta)
    bits = rng.random(n) < success_probabilities(n, theta)
    bits[0] = True
    return BernoulliTrace(tuple(int(b) for b in bits), theta)


def sample_insertion(trace: BernoulliTrace, rng: np.random.Generator) -> InsertionSequence:
    """Draw ``X_1 .. X_n`` given the trials; consumes one integer draw per failed trial."""
    n = trace.length
    bits = trace.bits
    free = _FreeSet(n)
    free.remove(1)
    x = [1]
    starts = [True]
    for i in range(2, n + 1):
        remaining = n - i + 1
        if bits[n + 1 - i]:  # B_{n+2-i}
            v = free.kth(0)
            starts.append(True)
        else:
            v = free.kth(int(rng.integers(remaining)))
            starts.append(False)
        free.remove(v)
        x.append(v)
    return InsertionSequence(tuple(x), tuple(starts))


def insertion_cycles(ins: InsertionSequence) -> list[list[int]]:
    if not ins.cycle_start or not ins.cycle_start[0]:
        raise StructuralError("position 1 of an insertion sequence must start a cycle")
    cycles: list[list[int]] = []
    for v, start in zip(ins.x, ins.cycle_start):
        if start:
            cycles.append([v])
        else:
            cycles[-1].append(v)
    return cycles


def permutation_from_insertion(ins: InsertionSequence) -> Permutation:
    """Cut ``X`` at the cycle starts; each run is one cycle."""
    return Permutation.from_cycles(insertion_cycles(ins), len(ins.x))


def sample_feller(n: int, theta: float, rng: np.random.Generator) -> tuple[BernoulliTrace, Permutation]:
    trace = sample_bernoulli(n, theta, rng)
    return trace, permutation_from_insertion(sample_insertion(trace, rng))


def _one_positions(bits: Sequence[int]) -> list[int]:
    return [i for i, b in enumerate(bits, start=1) if b]


def spacing_counts(bits: Sequence[int], n: int) -> CycleCounts:
    """Number of l-spacings in ``bits[1..n], 1, 0, 0, ...``.

    If ``bits[1] == 0`` the result is still computed but marked ``degenerate``,
    since then ``sum l*C_l`` falls short of ``n``.
    """
    if len(bits) < n:
        raise ValueError(f"need at least {n} bits, got {len(bits)}")
    ones = _one_positions(bits[:n]) + [n + 1]
    lengths = [b - a for a, b in zip(ones, ones[1:])]
    return CycleCounts.from_lengths(lengths, degenerate=not bits[0])


def window_spacing_counts(bits: Sequence[int]) -> CycleCounts:
    """Spacings lying entirely inside ``bits`` (no 1 appended)."""
    ones = _one_positions(bits)
    return CycleCounts.from_lengths(b - a for a, b in zip(ones, ones[1:]))


def truncated_infinite_spacings(m: int, theta: float, rng: np.random.Generator) -> CycleCounts:
    """Spacings of an infinite trial sequence that start and end within the first ``m`` trials."""
    if m < 2:
        raise DomainError(f"window m must be >= 2, got {m}")
    return window_spacing_counts(sample_bernoulli(m, theta, rng).bits)


def last_spacing(bits: Sequence[int], n: int) -> int:
    """``J_n = n + 1 - L_n`` with ``L_n`` the position of the last 1 in ``bits[1..n]``."""
    ones = _one_positions(bits[:n])
    if not ones:
        raise StructuralError("no 1 among the first n bits")
    return n + 1 - ones[-1]


def coupling_inequality_check(bits: Sequence[int], n: int) -> bool | None:
    """Check ``C_{n,l} <= C_{inf,l} + 1(J_n = l)`` for all ``l <= n``.

    ``C_{inf,l}`` is counted inside the supplied window.  Returns ``None``
    (undecided) when no 1 follows position ``n`` in the window, since then the
    spacing crossing ``n`` is not resolved.
    """
    if len(bits) <= n or not any(bits[n:]):
        return None
    finite = spacing_counts(bits, n)
    infinite = window_spacing_counts(bits)
    j = last_spacing(bits, n)
    return all(finite[ell] <= infinite[ell] + (j == ell) for ell in range(1, n + 1))


# -- vectorised samplers for Monte Carlo at scale ---------------------------


def sample_bernoulli_batch(size: int, n: int, theta: float, rng: np.random.Generator) -> np.ndarray:
    """``(size, n)`` boolean matrix of independent trial rows."""
    theta = check_theta(theta)
    bits = rng.random((size, n)) < success_probabilities(n, theta)
    bits[:, 0] = True
    return bits


def insertion_batch(bits: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise insertion sequences for a trial matrix.

    Returns ``(x, starts)``: 1-based ``X`` values and cycle-start flags, both ``(size, n)``.
    Same law as :func:`sample_insertion`, different stream consumption.
    """
    size, n = bits.shape
    rows = np.arange(size)
    starts = np.zeros((size, n), dtype=bool)
    starts[:, 0] = True
    if n > 1:
        # position i (1-based, i >= 2) reads B_{n+2-i}, i.e. column n+1-i
        starts[:, 1:] = bits[:, n - 1:0:-1]
    used = np.zeros((size, n), dtype=bool)
    used[:, 0] = True
    x = np.empty((size, n), dtype=np.int64)
    x[:, 0] = 1
    for i in range(1, n):
        remaining = n - i
        k = np.where(starts[:, i], 0, rng.integers(0, remaining, size))
        free_rank = np.cumsum(~used, axis=1)
        pos = np.argmax(free_rank > k[:, None], axis=1)
        used[rows, pos] = True
        x[:, i] = pos + 1
    return x, starts


def images_from_runs(x: np.ndarray, starts: np.ndarray) -> np.ndarray:
    """One-line images (1-based) of the permutations whose cycles are the runs of ``x``."""
    size, n = x.shape
    rows = np.arange(size)[:, None]
    cols = np.arange(n)
    run_start = np.maximum.accumulate(np.where(starts, cols, 0), axis=1)
    nxt = np.empty((size, n), dtype=np.int64)
    nxt[:, :-1] = np.where(starts[:, 1:], run_start[:, :-1], cols[1:])
    nxt[:, -1] = run_start[:, -1]
    image = np.empty((size, n), dtype=np.int64)
    image[rows, x - 1] = x[rows, nxt]
    return image


def sample_feller_batch(size: int, n: int, theta: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """``(bits, images)`` for ``size`` independent Feller-coupled samples."""
    bits = sample_bernoulli_batch(size, n, theta, rng)
    x, starts = insertion_batch(bits, rng)
    return bits, images_from_runs(x, starts)


def spacing_lengths_batch(bits: np.ndarray, max_len: int) -> np.ndarray:
    """Per-row counts of l-spacings (l = 1..max_len) inside the window, no 1 appended."""
    size, _ = bits.shape
    r, c = np.nonzero(bits)
    same_row = r[1:] == r[:-1]
    gaps = (c[1:] - c[:-1])[same_row]
    gap_rows = r[1:][same_row]
    keep = gaps <= max_len
    out = np.zeros((size, max_len), dtype=np.int64)
    np.add.at(out, (gap_rows[keep], gaps[keep] - 1), 1)
    return out
