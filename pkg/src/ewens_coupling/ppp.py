"""Poisson point process of inter-record stretches above a level.

Above level ``s`` the stretches of a P_theta sequence form a Poisson process
with ``Poisson(-theta log s)`` points.  Each point has a log-series length
``P(l) = q^l / (l * -log(1 - q))`` with ``q = 1 - s``, and given its length
it is ``l`` i.i.d. uniforms on ``(s, 1)`` conditioned to have the first one
smallest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import DomainError, RefusalError, RejectionError, SamplerOverflowError
from .ewens import check_theta
from .perm import CycleCounts
from .records import Stretch

# Inversion gives up once the remaining log-series tail is below this mass;
# getting there means the running sum stalled on rounding, not a long draw.
_LOGSER_TAIL_EPS = 2.0**-60


@dataclass(frozen=True)
class LevelWindow:
    s: float
    theta: float

    def __post_init__(self):
        if not 0.0 < self.s < 1.0:
            raise DomainError(f"level s must lie in (0, 1), got {self.s}")
        check_theta(self.theta)

    @property
    def intensity(self) -> float:
        """Expected number of stretches above the level, ``-theta log s``."""
        return -self.theta * math.log(self.s)

    def expected_length_count(self, ell: int) -> float:
        return self.theta * (1.0 - self.s) ** ell / ell


@dataclass(frozen=True)
class ThetaPoint:
    theta_coord: float
    stretch: Stretch

    def __post_init__(self):
        if not self.theta_coord >= 0.0:
            raise ValueError(f"theta coordinate must be nonnegative, got {self.theta_coord}")


@dataclass(frozen=True)
class DynamicSample:
    """Points of the product process (Lebesgue x stretch law) in ``[0, theta_max] x (s, 1)^*``."""

    theta_max: float
    s: float
    points: tuple[ThetaPoint, ...]

    def __iter__(self) -> Iterator[ThetaPoint]:
        return iter(self.points)

    def __len__(self) -> int:
        return len(self.points)

    def restrict(self, theta: float) -> list[Stretch]:
        return restrict(self, theta)


def _check_q(q: float) -> None:
    if not 0.0 < q < 1.0:
        raise DomainError(f"log-series parameter must lie in (0, 1), got {q}")


def log_series_pmf(q: float, ell: int) -> float:
    _check_q(q)
    if ell < 1:
        return 0.0
    return math.exp(ell * math.log(q) - math.log(ell) - math.log(-math.log1p(-q)))


def _max_terms(q: float) -> int:
    # smallest k with q^k / (1 - q) < eps bounds the tail past k terms
    return int(math.ceil((math.log(_LOGSER_TAIL_EPS) + math.log1p(-q)) / math.log(q))) + 1


def log_series_length(q: float, rng: np.random.Generator) -> int:
    """Exact draw from the log-series law by CDF inversion with a running sum."""
    _check_q(q)
    u = rng.random()
    term = q / -math.log1p(-q)
    cdf = term
    k = 1
    cap = _max_terms(q)
    while u >= cdf:
        if k >= cap:
            raise SamplerOverflowError(f"log-series inversion did not terminate within {cap} terms (q={q})")
        term *= q * k / (k + 1)
        cdf += term
        k += 1
    return k


def log_series_cdf_table(q: float) -> np.ndarray:
    """Cumulative probabilities for lengths ``1..K``, K past the double-precision tail."""
    _check_q(q)
    k = np.arange(1, _max_terms(q) + 1)
    terms = np.exp(k * math.log(q) - np.log(k) - math.log(-math.log1p(-q)))
    return np.cumsum(terms)


def log_series_batch(q: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Vectorised inversion through a precomputed CDF table."""
    _check_q(q)
    if _max_terms(q) > 10**6:
        return np.array([log_series_length(q, rng) for _ in range(size)], dtype=np.int64)
    cdf = log_series_cdf_table(q)
    u = rng.random(size)
    out = np.searchsorted(cdf, u, side="right") + 1
    if size and out.max() > cdf.size:
        raise SamplerOverflowError(f"log-series inversion ran past its table (q={q})")
    return out


def sample_stretch_given_length(ell: int, s: float, rng: np.random.Generator) -> Stretch:
    """``ell`` uniforms on ``(s, 1)`` with the minimum moved to the front, others kept in order."""
    if ell < 1:
        raise DomainError(f"stretch length must be positive, got {ell}")
    if not 0.0 <= s < 1.0:
        raise DomainError(f"level must lie in [0, 1), got {s}")
    for _ in range(2):
        vals = s + (1.0 - s) * rng.random(ell)
        if len(set(vals.tolist())) == ell and vals.min() > s:
            break
    else:
        raise RejectionError("floating-point tie persisted after resampling a stretch")
    j = int(np.argmin(vals))
    return Stretch((vals[j],) + tuple(vals[:j]) + tuple(vals[j + 1:]))


def _sample_window_stretches(count: int, s: float, rng: np.random.Generator) -> list[Stretch]:
    q = 1.0 - s
    return [sample_stretch_given_length(log_series_length(q, rng), s, rng) for _ in range(count)]


def ppp_above_level(w: LevelWindow, rng: np.random.Generator) -> list[Stretch]:
    """One realisation of the stretches above ``w.s``, in sampling (not time) order."""
    count = int(rng.poisson(w.intensity))
    return _sample_window_stretches(count, w.s, rng)


def length_counts_batch(size: int, s: float, theta: float, rng: np.random.Generator,
                        max_len: int) -> np.ndarray:
    """``(size, max_len)`` per-length stretch counts of ``size`` independent windows.

    Only the lengths are drawn; stretch values do not affect the counts.
    """
    w = LevelWindow(s, theta)
    n = rng.poisson(w.intensity, size)
    lengths = log_series_batch(1.0 - s, int(n.sum()), rng)
    rows = np.repeat(np.arange(size), n)
    keep = lengths <= max_len
    out = np.zeros((size, max_len), dtype=np.int64)
    np.add.at(out, (rows[keep], lengths[keep] - 1), 1)
    return out


def reconstruct_prefix(stretches: Iterable[Stretch]) -> list[float]:
    """Concatenate stretches by decreasing initial value, i.e. in time order of their records."""
    items = list(stretches)
    initials = [st.initial for st in items]
    if len(set(initials)) != len(initials):
        raise RejectionError("stretches share an initial value")
    out: list[float] = []
    for st in sorted(items, key=lambda st: st.initial, reverse=True):
        out.extend(st.values)
    return out


def dynamic_sample(theta_max: float, s: float, rng: np.random.Generator) -> DynamicSample:
    """Stretches above ``s`` for all ``theta <= theta_max`` at once.

    Each point carries a uniform theta coordinate; keeping points with
    coordinate ``<= theta`` gives the window process at ``theta``.
    """
    w = LevelWindow(s, theta_max)
    count = int(rng.poisson(w.intensity))
    coords = rng.uniform(0.0, theta_max, count)
    stretches = _sample_window_stretches(count, s, rng)
    return DynamicSample(float(theta_max), float(s),
                         tuple(ThetaPoint(float(c), st) for c, st in zip(coords, stretches)))


def restrict(points: DynamicSample | Sequence[ThetaPoint], theta: float,
             theta_max: float | None = None) -> list[Stretch]:
    """Stretches whose theta coordinate is ``<= theta``, in the original order."""
    if isinstance(points, DynamicSample):
        theta_max = points.theta_max
    if theta < 0:
        raise DomainError(f"theta must be nonnegative, got {theta}")
    if theta_max is not None and theta > theta_max:
        raise RefusalError(f"theta={theta} exceeds the sampled range theta_max={theta_max}")
    return [pt.stretch for pt in points if pt.theta_coord <= theta]


def infinite_cycle_counts(stretches: Iterable[Stretch]) -> CycleCounts:
    """Histogram of stretch lengths: the cycle counts of the infinite permutation above the level."""
    return CycleCounts.from_lengths(len(st) for st in stretches)
