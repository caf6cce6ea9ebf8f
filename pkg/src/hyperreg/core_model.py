"""Instance parameters, the permutation model and permutation classification.

A permutation ``y`` of the multiset ``{1^d, 2^d, ..., n^d}`` is cut into
``m = nd/k`` consecutive blocks of length ``k``; each block is an edge of the
k-multigraph ``H(y)``.  Permutations are plain tuples of ints, edges are sorted
tuples and a multigraph is the sorted tuple of its edges.
"""

from __future__ import annotations

import enum
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np

PermSeq = Tuple[int, ...]
MultiEdge = Tuple[int, ...]
Multigraph = Tuple[MultiEdge, ...]


class ParamError(ValueError):
    """Invalid (n, d, k) or an input inconsistent with them."""


@dataclass(frozen=True)
class Params:
    n: int
    d: int
    k: int
    m: int = field(init=False)
    kappa: Fraction = field(init=False)
    strict: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        n, d, k = self.n, self.d, self.k
        if not all(isinstance(x, (int, np.integer)) for x in (n, d, k)):
            raise ParamError("n, d, k must be integers")
        if n <= 0 or d <= 0:
            raise ParamError(f"n and d must be positive (n={n}, d={d})")
        if k < 3:
            raise ParamError(f"k must be at least 3 (k={k})")
        if n < k and self.strict:
            raise ParamError(f"need n >= k (n={n}, k={k})")
        if (n * d) % k:
            raise ParamError(f"k={k} does not divide n*d={n * d}")
        object.__setattr__(self, "m", n * d // k)
        object.__setattr__(self, "kappa", Fraction(1) if k >= 4 else Fraction(1, 2))

    @property
    def nd(self) -> int:
        return self.n * self.d

    @property
    def outside_regime(self) -> bool:
        """True when d >= n**kappa, i.e. outside the range covered by the asymptotic formula."""
        # d >= n^kappa  <=>  d^q >= n^p for kappa = p/q
        return self.d ** self.kappa.denominator >= self.n ** self.kappa.numerator

    def as_dict(self) -> dict:
        return {"n": self.n, "d": self.d, "k": self.k}


def new_params(n: int, d: int, k: int, strict: bool = True) -> Params:
    """Validated parameters.  ``strict=False`` admits n < k, where every block is a loop
    (useful only for exercising the permutation model on toy inputs)."""
    return Params(int(n), int(d), int(k), strict)


@dataclass(frozen=True)
class SqrtND:
    """Loop cap L = floor(sqrt(nd))."""

    def cap(self, p: Params) -> int:
        return math.isqrt(p.nd)

    def __str__(self):
        return "sqrt"


@dataclass(frozen=True)
class KdOmega:
    """Loop cap L = k*d + omega."""

    omega: int

    def __post_init__(self):
        if self.omega < 1:
            raise ParamError("omega must be a positive integer")

    def cap(self, p: Params) -> int:
        return p.k * p.d + self.omega

    def __str__(self):
        return f"kd-omega:{self.omega}"


LPolicy = Union[SqrtND, KdOmega]


def parse_policy(text: str) -> LPolicy:
    """Parse ``sqrt`` or ``kd-omega:<omega>``."""
    if text == "sqrt":
        return SqrtND()
    if text.startswith("kd-omega:"):
        try:
            return KdOmega(int(text.split(":", 1)[1]))
        except ValueError:
            pass
    raise ParamError(f"unknown L policy {text!r}; use 'sqrt' or 'kd-omega:<int>'")


class EdgeKind(enum.Enum):
    PROPER = "proper"
    GOOD_LOOP = "good-loop"
    BAD_LOOP_MULT3 = "bad-loop:multiplicity>=3"
    BAD_LOOP_DOUBLE2 = "bad-loop:two-repeated"

    @property
    def is_loop(self) -> bool:
        return self is not EdgeKind.PROPER

    @property
    def is_bad(self) -> bool:
        return self in (EdgeKind.BAD_LOOP_MULT3, EdgeKind.BAD_LOOP_DOUBLE2)


@dataclass(frozen=True)
class Classification:
    lam: int
    has_multi_edge: bool
    has_bad_loop: bool
    L_used: int

    @property
    def level(self) -> Optional[int]:
        """l such that the permutation lies in E_l, or None if it is not in E."""
        if self.has_multi_edge or self.has_bad_loop or self.lam > self.L_used:
            return None
        return self.lam

    @property
    def in_E(self) -> bool:
        return self.level is not None

    def as_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "has_multi_edge": self.has_multi_edge,
            "has_bad_loop": self.has_bad_loop,
            "level": self.level,
            "L_used": self.L_used,
        }


def canonical_sequence(p: Params) -> PermSeq:
    """The sorted sequence 1^d 2^d ... n^d."""
    return tuple(v for v in range(1, p.n + 1) for _ in range(p.d))


def check_perm(y: Sequence[int], p: Params) -> PermSeq:
    """Validate that ``y`` is a permutation of the multiset for ``p``; return it as a tuple."""
    y = tuple(int(v) for v in y)
    if len(y) != p.nd:
        raise ParamError(f"permutation has length {len(y)}, expected n*d={p.nd}")
    counts = Counter(y)
    if set(counts) != set(range(1, p.n + 1)) or any(c != p.d for c in counts.values()):
        raise ParamError(f"every label 1..{p.n} must occur exactly d={p.d} times")
    return y


def sample_permutation(p: Params, rng: np.random.Generator) -> PermSeq:
    """Uniform element of P: an unbiased shuffle of the sorted multiset sequence."""
    base = np.repeat(np.arange(1, p.n + 1), p.d)
    return tuple(rng.permutation(base).tolist())


def blocks_of(y: Sequence[int], k: int) -> list:
    return [tuple(y[i:i + k]) for i in range(0, len(y), k)]


def canonical_blocks(y: Sequence[int], k: int) -> list:
    return [tuple(sorted(y[i:i + k])) for i in range(0, len(y), k)]


def build_multigraph(y: Sequence[int], p: Params) -> Multigraph:
    if len(y) != p.nd:
        raise ParamError(f"permutation has length {len(y)}, expected n*d={p.nd}")
    return tuple(sorted(canonical_blocks(y, p.k)))


def degrees(h: Iterable[MultiEdge]) -> Counter:
    deg = Counter()
    for e in h:
        deg.update(e)
    return deg


def is_simple(h: Multigraph) -> bool:
    return all(len(set(e)) == len(e) for e in h) and len(set(h)) == len(h)


def is_d_regular(h: Multigraph, p: Params) -> bool:
    deg = degrees(h)
    return len(h) == p.m and set(deg) == set(range(1, p.n + 1)) and all(
        c == p.d for c in deg.values()
    )


def classify_edge(e: Sequence[int]) -> EdgeKind:
    counts = Counter(e)
    distinct = len(counts)
    k = len(e)
    if distinct == k:
        return EdgeKind.PROPER
    if distinct == k - 1:
        return EdgeKind.GOOD_LOOP
    if max(counts.values()) >= 3:
        return EdgeKind.BAD_LOOP_MULT3
    return EdgeKind.BAD_LOOP_DOUBLE2


def classify_blocks(cblocks: Sequence[MultiEdge], k: int, L: int) -> Classification:
    """Classify from canonical (sorted) blocks."""
    lam = 0
    bad = False
    for b in cblocks:
        distinct = len(set(b))
        if distinct < k:
            lam += 1
            if distinct < k - 1:
                bad = True
    multi = len(set(cblocks)) < len(cblocks)
    return Classification(lam, multi, bad, L)


def classify_perm(y: Sequence[int], p: Params, pol: LPolicy = SqrtND()) -> Classification:
    return classify_blocks(canonical_blocks(y, p.k), p.k, pol.cap(p))


def hypergraph_record(h: Multigraph, p: Params) -> dict:
    return {"n": p.n, "d": p.d, "k": p.k, "edges": [list(e) for e in h]}


def dumps(obj) -> str:
    """Compact, deterministic JSON used for every machine-readable record."""
    return json.dumps(obj, separators=(",", ":"))


def hypergraph_line(h: Multigraph, p: Params) -> str:
    return dumps(hypergraph_record(h, p))


def perm_line(y: Sequence[int]) -> str:
    return dumps(list(y))
