"""Permutations of [n] in one-line form, cycle structure and rank relabeling.

Everything external is 1-based: ``image[i - 1]`` is the image of ``i``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

from .errors import RefusalError, RejectionError

MAX_ENUMERATION_N = 10


@dataclass(frozen=True)
class Permutation:
    """A bijection of [n] stored as the tuple of images of 1..n."""

    image: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "image", tuple(int(v) for v in self.image))
        if sorted(self.image) != list(range(1, len(self.image) + 1)):
            raise ValueError(f"not a permutation of [{len(self.image)}]: {self.image}")

    @property
    def n(self) -> int:
        return len(self.image)

    def __call__(self, i: int) -> int:
        return self.image[i - 1]

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(1, n + 1)))

    @classmethod
    def from_cycles(cls, cycles: Sequence[Sequence[int]], n: int | None = None) -> "Permutation":
        """Build from cycle notation; elements of [n] not mentioned are fixed points."""
        if n is None:
            n = max((max(c) for c in cycles if c), default=0)
        image = list(range(1, n + 1))
        seen = set()
        for cyc in cycles:
            for a, b in zip(cyc, list(cyc[1:]) + [cyc[0]]):
                if a in seen:
                    raise ValueError(f"element {a} appears twice in cycles {cycles}")
                seen.add(a)
                image[a - 1] = b
        return cls(tuple(image))

    def cycles(self) -> list[list[int]]:
        return cycles_canonical(self)

    def cycle_counts(self) -> "CycleCounts":
        return cycle_counts(self)

    def num_cycles(self) -> int:
        return len(cycles_canonical(self))

    def one_line(self) -> str:
        return " ".join(map(str, self.image))

    def to_dict(self) -> dict:
        return {"n": self.n, "image": list(self.image)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str | Mapping) -> "Permutation":
        obj = json.loads(text) if isinstance(text, str) else text
        perm = cls(tuple(obj["image"]))
        if perm.n != obj["n"]:
            raise ValueError(f"declared n={obj['n']} but image has {perm.n} entries")
        return perm


@dataclass(frozen=True)
class CycleCounts:
    """Counts ``K_l`` of cycles (or spacings) of each length ``l >= 1``.

    ``counts[0]`` holds ``K_1``.  Trailing zeros are stripped so that vectors of
    different nominal length compare equal.  ``degenerate`` marks counts that
    were computed from a bit sequence without a leading 1, for which the
    conservation law ``sum l*K_l = n`` is not guaranteed.
    """

    counts: tuple[int, ...] = ()
    degenerate: bool = field(default=False, compare=False)

    def __post_init__(self):
        c = [int(v) for v in self.counts]
        if any(v < 0 for v in c):
            raise ValueError(f"negative count in {c}")
        while c and c[-1] == 0:
            c.pop()
        object.__setattr__(self, "counts", tuple(c))

    @classmethod
    def from_lengths(cls, lengths, degenerate: bool = False) -> "CycleCounts":
        lengths = list(lengths)
        vec = [0] * max(lengths, default=0)
        for ell in lengths:
            vec[ell - 1] += 1
        return cls(tuple(vec), degenerate)

    def __getitem__(self, ell: int) -> int:
        if ell < 1:
            raise IndexError("cycle lengths start at 1")
        return self.counts[ell - 1] if ell <= len(self.counts) else 0

    def total_size(self) -> int:
        """``sum_l l * K_l``."""
        return sum(ell * k for ell, k in enumerate(self.counts, start=1))

    def num_cycles(self) -> int:
        return sum(self.counts)

    def as_list(self, length: int | None = None) -> list[int]:
        """Counts ``[K_1, ..., K_length]``, zero padded (or truncated)."""
        if length is None:
            return list(self.counts)
        return [self[ell] for ell in range(1, length + 1)]

    def __add__(self, other: "CycleCounts") -> "CycleCounts":
        m = max(len(self.counts), len(other.counts))
        return CycleCounts(tuple(self[ell] + other[ell] for ell in range(1, m + 1)))


def cycles_canonical(p: Permutation) -> list[list[int]]:
    """Cycles of ``p``, each starting at its minimum, ordered by increasing minimum."""
    seen = [False] * (p.n + 1)
    out = []
    for start in range(1, p.n + 1):
        if seen[start]:
            continue
        cyc = []
        i = start
        while not seen[i]:
            seen[i] = True
            cyc.append(i)
            i = p.image[i - 1]
        out.append(cyc)
    return out


def cycle_counts(p: Permutation) -> CycleCounts:
    return CycleCounts.from_lengths(len(c) for c in cycles_canonical(p))


def relabel_by_rank(values: Sequence[float], p_on_values: Mapping[float, float]) -> Permutation:
    """Permutation of [n] induced by ``p_on_values`` after renaming each value by its rank.

    The smallest value becomes 1.  ``values`` lists the ground set; it must be
    tie free and ``p_on_values`` must be a bijection of it.
    """
    ordered = sorted(values)
    if any(a == b for a, b in zip(ordered, ordered[1:])):
        raise RejectionError("values are not pairwise distinct")
    rank = {v: r for r, v in enumerate(ordered, start=1)}
    if set(p_on_values) != set(rank) or set(p_on_values.values()) != set(rank):
        raise RejectionError("mapping is not a bijection of the value set")
    image = [0] * len(ordered)
    for v, w in p_on_values.items():
        image[rank[v] - 1] = rank[w]
    return Permutation(tuple(image))


def enumerate_permutations(n: int) -> Iterator[Permutation]:
    """All permutations of [n] in lexicographic order of their one-line form."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if n > MAX_ENUMERATION_N:
        raise RefusalError(f"refusing to enumerate {n}! permutations (limit n <= {MAX_ENUMERATION_N})")
    for image in itertools.permutations(range(1, n + 1)):
        yield Permutation(image)
