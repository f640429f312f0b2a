"""Lower records of sequences under the measures P_theta, and the record permutation.

Under P_theta the first value is Beta(theta, 1); given running minimum ``r``
the next value is ``r * Beta(theta, 1)`` with probability ``r`` (a new lower
record) and uniform on ``(r, 1)`` otherwise.  P_1 is the i.i.d. uniform law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, RejectionError, SamplerOverflowError
from .ewens import check_theta
from .perm import CycleCounts, Permutation, relabel_by_rank


@dataclass(frozen=True)
class Stretch:
    """An inter-record stretch: its first value is its strict minimum."""

    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if not vals:
            raise ValueError("a stretch has at least one value")
        if any(v <= vals[0] for v in vals[1:]):
            raise ValueError(f"first value of a stretch must be its strict minimum: {vals}")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def initial(self) -> float:
        return self.values[0]


@dataclass(frozen=True)
class RecordTrace:
    u: tuple[float, ...]
    record_indices: tuple[int, ...]
    indicators: tuple[int, ...]
    running_min: tuple[float, ...]

    @classmethod
    def from_values(cls, u: Sequence[float]) -> "RecordTrace":
        u = tuple(float(v) for v in u)
        indices, indicators = lower_records(u)
        mins = []
        cur = math.inf
        for v in u:
            cur = min(cur, v)
            mins.append(cur)
        return cls(u, indices, indicators, tuple(mins))

    def __len__(self) -> int:
        return len(self.u)


def _check_distinct(u: Sequence[float]) -> None:
    if len(set(u)) != len(u):
        raise RejectionError("values are not pairwise distinct")


def lower_records(u: Sequence[float]) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """1-based lower record indices and the 0/1 indicator sequence."""
    _check_distinct(u)
    indices = []
    indicators = []
    cur = math.inf
    for i, v in enumerate(u, start=1):
        if v < cur:
            cur = v
            indices.append(i)
            indicators.append(1)
        else:
            indicators.append(0)
    return tuple(indices), tuple(indicators)


def _draw_next(r: float, inv_theta: float, rng: np.random.Generator) -> float:
    # branch uniform first, value uniform second
    if rng.random() < r:
        return r * rng.random() ** inv_theta
    return r + (1.0 - r) * rng.random()


def _draw(r: float | None, inv_theta: float, rng: np.random.Generator, seen: set) -> float:
    for _ in range(2):
        v = rng.random() ** inv_theta if r is None else _draw_next(r, inv_theta, rng)
        if 0.0 < v < 1.0 and v not in seen:
            return v
    raise RejectionError(
        f"floating-point tie persisted after resampling (running min {r!r}, last draw {v!r})"
    )


def sample_ptheta(n: int, theta: float, rng: np.random.Generator) -> RecordTrace:
    """First ``n`` values of a P_theta sequence, with record bookkeeping."""
    if n < 1:
        raise DomainError(f"n must be positive, got {n}")
    inv_theta = 1.0 / check_theta(theta)
    seen: set[float] = set()
    u = []
    r = None
    for _ in range(n):
        v = _draw(r, inv_theta, rng, seen)
        seen.add(v)
        u.append(v)
        r = v if r is None else min(r, v)
    return RecordTrace.from_values(u)


def sample_ptheta_until(level: float, theta: float, rng: np.random.Generator,
                        max_steps: int = 10**7) -> tuple[RecordTrace, float]:
    """Run P_theta until the first value below ``level``.

    Returns the trace of the values strictly before that time (possibly empty)
    together with the stopping value.
    """
    if not 0.0 < level < 1.0:
        raise DomainError(f"level must lie in (0, 1), got {level}")
    inv_theta = 1.0 / check_theta(theta)
    seen: set[float] = set()
    u: list[float] = []
    r = None
    for _ in range(max_steps):
        v = _draw(r, inv_theta, rng, seen)
        if v < level:
            return RecordTrace.from_values(u), v
        seen.add(v)
        u.append(v)
        r = v if r is None else min(r, v)
    raise SamplerOverflowError(f"no value below {level} within {max_steps} steps")


def stretches(trace: RecordTrace, n: int | None = None) -> tuple[list[Stretch], Stretch | None]:
    """Split ``u[1..n]`` at its lower records.

    Complete stretches are those followed by another record at or before ``n``;
    the trailing stretch runs from the last record up to ``n``.  ``trailing``
    is ``None`` only for an empty prefix.
    """
    n = len(trace.u) if n is None else n
    if n > len(trace.u):
        raise ValueError(f"trace has {len(trace.u)} values, need {n}")
    idx = [i for i in trace.record_indices if i <= n]
    if not idx:
        return [], None
    bounds = idx + [n + 1]
    segs = [Stretch(trace.u[a - 1:b - 1]) for a, b in zip(bounds, bounds[1:])]
    return segs[:-1], segs[-1]


def record_cycles(trace: RecordTrace, n: int | None = None) -> list[tuple[float, ...]]:
    complete, trailing = stretches(trace, n)
    return [s.values for s in complete] + ([trailing.values] if trailing else [])


def record_permutation(trace: RecordTrace, n: int | None = None) -> Permutation:
    """Permutation of [n] whose cycles are the stretches of ``u[1..n]``, relabelled by rank.

    Within a stretch each value maps to its successor and the last value maps
    back to the stretch's record value.
    """
    n = len(trace.u) if n is None else n
    mapping = {}
    for cyc in record_cycles(trace, n):
        for a, b in zip(cyc, cyc[1:] + cyc[:1]):
            mapping[a] = b
    return relabel_by_rank(trace.u[:n], mapping)


def spacing_counts_from_records(trace: RecordTrace, n: int | None = None) -> CycleCounts:
    return CycleCounts.from_lengths(len(c) for c in record_cycles(trace, n))


def density_ratio_log(u: Sequence[float], theta: float) -> float:
    """``log[theta^K * min(u)^(theta - 1)]``, K the number of lower records of ``u``."""
    theta = check_theta(theta)
    if not u:
        raise DomainError("empty sequence")
    if any(not 0.0 < v < 1.0 for v in u):
        raise DomainError("values must lie in (0, 1)")
    indices, _ = lower_records(u)
    return len(indices) * math.log(theta) + (theta - 1.0) * math.log(min(u))


# -- vectorised samplers -----------------------------------------------------


def _column(r: np.ndarray | None, size: int, inv_theta: float, rng: np.random.Generator) -> np.ndarray:
    if r is None:
        return rng.random(size) ** inv_theta
    branch = rng.random(size)
    w = rng.random(size)
    return np.where(branch < r, r * w ** inv_theta, r + (1.0 - r) * w)


def _fix_ties(v, r, prev, inv_theta, rng):
    """Redraw entries of ``v`` outside (0, 1) or equal to an earlier value of the same row."""
    for attempt in range(2):
        bad = (v <= 0.0) | (v >= 1.0)
        if prev is not None and prev.shape[1]:
            bad |= (prev == v[:, None]).any(axis=1)
        if not bad.any():
            return v
        if attempt == 1:
            break
        v = v.copy()
        v[bad] = _column(None if r is None else r[bad], int(bad.sum()), inv_theta, rng)
    raise RejectionError("floating-point tie persisted after resampling")


def sample_ptheta_batch(size: int, n: int, theta: float, rng: np.random.Generator) -> np.ndarray:
    """``(size, n)`` matrix whose rows are independent P_theta prefixes."""
    inv_theta = 1.0 / check_theta(theta)
    u = np.empty((size, n))
    r = None
    for j in range(n):
        v = _fix_ties(_column(r, size, inv_theta, rng), r, u[:, :j], inv_theta, rng)
        u[:, j] = v
        r = v if r is None else np.minimum(r, v)
    return u


def sample_ptheta_until_batch(size: int, level: float, theta: float, rng: np.random.Generator,
                              max_steps: int = 100_000) -> tuple[np.ndarray, np.ndarray]:
    """Rows of P_theta run until the first value below ``level``.

    Returns ``(u, lengths)``: ``u`` is NaN-padded with row ``k`` holding its
    ``lengths[k]`` values above the level; the stopping values are dropped.
    """
    if not 0.0 < level < 1.0:
        raise DomainError(f"level must lie in (0, 1), got {level}")
    inv_theta = 1.0 / check_theta(theta)
    lengths = np.zeros(size, dtype=np.int64)
    u = np.full((size, 16), np.nan)
    active = np.arange(size)
    r = None
    step = 0
    while active.size:
        if step >= max_steps:
            raise SamplerOverflowError(f"{active.size} rows still above {level} after {max_steps} steps")
        v = _fix_ties(_column(r, active.size, inv_theta, rng), r,
                      u[active, :step] if step else None, inv_theta, rng)
        go_on = v >= level
        active, v = active[go_on], v[go_on]
        r = v if r is None else np.minimum(r[go_on], v)
        if step == u.shape[1]:
            u = np.concatenate([u, np.full_like(u, np.nan)], axis=1)
        u[active, step] = v
        lengths[active] += 1
        step += 1
    return u[:, :int(lengths.max(initial=0))], lengths


def record_mask(u: np.ndarray) -> np.ndarray:
    """Lower-record indicators per row; NaN padding is never a record."""
    prev_min = np.fmin.accumulate(u, axis=1)
    out = np.zeros(u.shape, dtype=bool)
    if u.shape[1]:
        out[:, 0] = ~np.isnan(u[:, 0])
        out[:, 1:] = u[:, 1:] < prev_min[:, :-1]
    return out


def segment_lengths(marks: np.ndarray, lengths: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(rows, gaps)``: the gaps between consecutive marks of each row, closed at ``lengths[row]``.

    With record marks these are the stretch lengths, i.e. the cycle lengths of
    the record permutation of each row's prefix.
    """
    r, c = np.nonzero(marks)
    has = lengths > 0
    r = np.concatenate([r, np.nonzero(has)[0]])
    c = np.concatenate([c, lengths[has]])
    order = np.lexsort((c, r))
    r, c = r[order], c[order]
    same = r[1:] == r[:-1]
    return r[1:][same], (c[1:] - c[:-1])[same]


def segment_length_counts(marks: np.ndarray, lengths: np.ndarray, max_len: int) -> np.ndarray:
    """``(rows, max_len)`` histogram of :func:`segment_lengths`; longer gaps are dropped."""
    rows, gaps = segment_lengths(marks, lengths)
    keep = gaps <= max_len
    out = np.zeros((marks.shape[0], max_len), dtype=np.int64)
    np.add.at(out, (rows[keep], gaps[keep] - 1), 1)
    return out


def record_permutation_batch(u: np.ndarray) -> np.ndarray:
    """1-based one-line images of the record permutations of each full row of ``u``."""
    size, n = u.shape
    rows = np.arange(size)[:, None]
    cols = np.arange(n)
    rank = np.argsort(np.argsort(u, axis=1), axis=1) + 1
    rec = record_mask(u)
    run_start = np.maximum.accumulate(np.where(rec, cols, 0), axis=1)
    nxt = np.empty((size, n), dtype=np.int64)
    nxt[:, :-1] = np.where(rec[:, 1:], run_start[:, :-1], cols[1:])
    nxt[:, -1] = run_start[:, -1]
    image = np.empty((size, n), dtype=np.int64)
    image[rows, rank - 1] = rank[rows, nxt]
    return image


def log_density_ratio_batch(u: np.ndarray, theta: float) -> np.ndarray:
    """Row-wise ``log[theta^K * min^(theta - 1)]`` for full rows of ``u``."""
    k = record_mask(u).sum(axis=1)
    return k * math.log(theta) + (theta - 1.0) * np.log(u.min(axis=1))
