"""Exact counting: brute-force hypergraph counts, permutation classes, the
asymptotic formula and the switching census used by the identity checks."""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Iterator, List, Optional, Tuple

import mpmath

from .core_model import (
    LPolicy,
    MultiEdge,
    Multigraph,
    Params,
    PermSeq,
    SqrtND,
    canonical_blocks,
    canonical_sequence,
    classify_blocks,
)
from .switching import backward_constant, count_backward, count_forward, forward_constant

DEFAULT_PERM_GUARD = 10 ** 7
DEFAULT_SUBSET_GUARD = 10 ** 4
DEFAULT_PRECISION = 50


class CostGuardExceeded(RuntimeError):
    """An exhaustive computation would exceed its configured cost limit."""


def perm_class_size(p: Params) -> int:
    """|P| = (nd)! / (d!)^n."""
    return math.factorial(p.nd) // math.factorial(p.d) ** p.n


def labelings_per_graph(p: Params) -> int:
    """Permutations representing one simple hypergraph: m! (k!)^m."""
    return math.factorial(p.m) * math.factorial(p.k) ** p.m


def _guard_perms(p: Params, guard: int) -> int:
    size = perm_class_size(p)
    if size > guard:
        raise CostGuardExceeded(f"|P| = {size} exceeds the cost guard {guard}")
    return size


def _guard_subsets(p: Params, guard: int) -> None:
    c = math.comb(p.n, p.k)
    if c > guard:
        raise CostGuardExceeded(f"C(n,k) = {c} exceeds the cost guard {guard}")


def iter_multiset_permutations(p: Params) -> Iterator[PermSeq]:
    """All of P in lexicographic order (successor algorithm)."""
    a = list(canonical_sequence(p))
    size = len(a)
    while True:
        yield tuple(a)
        i = size - 2
        while i >= 0 and a[i] >= a[i + 1]:
            i -= 1
        if i < 0:
            return
        j = size - 1
        while a[j] <= a[i]:
            j -= 1
        a[i], a[j] = a[j], a[i]
        a[i + 1:] = a[:i:-1]


def iter_multigraphs(p: Params) -> Iterator[Tuple[Multigraph, int]]:
    """Every d-regular k-multigraph on [n] with the number of permutations producing it.

    The weights sum to |P|, so a weighted pass over this iterator is an exact
    substitute for a pass over all permutations whenever the quantity of
    interest depends only on H(y).
    """
    n, d, k, m = p.n, p.d, p.k, p.m
    rem = [0] + [d] * n
    edges: List[MultiEdge] = []
    fk = math.factorial(k)
    fm = math.factorial(m)

    def weight() -> int:
        w = fm
        for c in Counter(edges).values():
            w //= math.factorial(c)
        for e in edges:
            r = fk
            for c in Counter(e).values():
                r //= math.factorial(c)
            w *= r
        return w

    def tails(start: int, size: int) -> Iterator[Tuple[int, ...]]:
        # non-decreasing tuples of vertices >= start, within remaining degrees
        if size == 0:
            yield ()
            return
        for u in range(start, n + 1):
            if rem[u] == 0:
                continue
            rem[u] -= 1
            for rest in tails(u, size - 1):
                yield (u,) + rest
            rem[u] += 1

    def rec(last: Optional[MultiEdge]) -> Iterator[Tuple[Multigraph, int]]:
        u = next((v for v in range(1, n + 1) if rem[v]), None)
        if u is None:
            yield tuple(edges), weight()
            return
        rem[u] -= 1
        for tail in list(tails(u, k - 1)):
            e = (u,) + tail
            if last is not None and last[0] == u and e < last:
                continue
            for v in tail:
                rem[v] -= 1
            edges.append(e)
            yield from rec(e)
            edges.pop()
            for v in tail:
                rem[v] += 1
        rem[u] += 1

    yield from rec(None)


def _choose_edges(rest: Tuple[int, ...], r: int, k: int) -> Iterator[List[int]]:
    """Usage vectors of r distinct (k-1)-subsets of range(len(rest)) fitting within rest."""
    subsets = list(itertools.combinations(range(len(rest)), k - 1))
    use = [0] * len(rest)

    def rec(start: int, left: int):
        if left == 0:
            yield use
            return
        for si in range(start, len(subsets) - left + 1):
            s = subsets[si]
            if all(use[j] < rest[j] for j in s):
                for j in s:
                    use[j] += 1
                yield from rec(si + 1, left - 1)
                for j in s:
                    use[j] -= 1

    yield from rec(0, r)


def count_by_degrees(degrees: Tuple[int, ...], k: int) -> int:
    """Number of simple k-graphs with the given degree sequence on labelled vertices."""
    memo: Dict[Tuple[int, ...], int] = {}

    def count(degs: Tuple[int, ...]) -> int:
        if not degs:
            return 1
        if degs in memo:
            return memo[degs]
        r, rest = degs[0], degs[1:]
        total = 0
        if sum(rest) >= r * (k - 1):
            for use in _choose_edges(rest, r, k):
                left = tuple(sorted((a - b for a, b in zip(rest, use) if a > b), reverse=True))
                total += count(left)
        memo[degs] = total
        return total

    return count(tuple(sorted((x for x in degrees if x > 0), reverse=True)))


def iter_simple_hypergraphs(p: Params) -> Iterator[Multigraph]:
    """Lexicographic backtracking over distinct k-subsets with remaining-degree pruning."""
    n, k = p.n, p.k
    rem = [0] + [p.d] * n
    subsets = list(itertools.combinations(range(1, n + 1), k))
    by_min: Dict[int, List[int]] = {}
    for i, s in enumerate(subsets):
        by_min.setdefault(s[0], []).append(i)
    chosen: List[int] = []

    def rec(after: int):
        u = next((v for v in range(1, n + 1) if rem[v]), None)
        if u is None:
            yield tuple(subsets[i] for i in chosen)
            return
        for i in by_min.get(u, ()):
            if i <= after:
                continue
            s = subsets[i]
            if all(rem[v] for v in s):
                for v in s:
                    rem[v] -= 1
                chosen.append(i)
                yield from rec(i)
                chosen.pop()
                for v in s:
                    rem[v] += 1

    yield from rec(-1)


def brute_force_count(
    p: Params,
    emit: Optional[Callable[[Multigraph], None]] = None,
    cost_guard: int = DEFAULT_SUBSET_GUARD,
) -> int:
    """|H^(k)(n,d)| exactly.

    Without ``emit`` the count is memoised on sorted remaining-degree vectors;
    with ``emit`` every hypergraph is listed by explicit backtracking.
    """
    _guard_subsets(p, cost_guard)
    if emit is None:
        return count_by_degrees((p.d,) * p.n, p.k)
    total = 0
    for h in iter_simple_hypergraphs(p):
        emit(h)
        total += 1
    return total


@dataclass
class CountReport:
    params: Params
    formula_leading: Fraction
    correction: mpmath.mpf
    estimate: mpmath.mpf
    error_scale: float
    precision: int
    exact_count: Optional[int] = None
    ratio: Optional[mpmath.mpf] = None
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        digits = self.precision
        out = {
            "exact_count": self.exact_count,
            "formula_leading": _frac_str(self.formula_leading),
            "correction": float(self.correction),
            "estimate": float(self.estimate),
            "estimate_digits": mpmath.nstr(self.estimate, digits),
            "ratio": None if self.ratio is None else float(self.ratio),
            "error_scale": self.error_scale,
        }
        out.update(self.extra)
        return out


def _frac_str(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def formula_leading(p: Params) -> Fraction:
    """(nd)! / ((nd/k)! (k!)^{nd/k} (d!)^n)."""
    return Fraction(
        math.factorial(p.nd),
        math.factorial(p.m) * math.factorial(p.k) ** p.m * math.factorial(p.d) ** p.n,
    )


def formula_estimate(p: Params, precision: int = DEFAULT_PRECISION) -> CountReport:
    lead = formula_leading(p)
    with mpmath.workdps(precision):
        corr = mpmath.exp(-mpmath.mpf((p.k - 1) * (p.d - 1)) / 2)
        est = mpmath.mpf(lead.numerator) / lead.denominator * corr
    scale = math.sqrt(p.d / p.n) + p.d ** 2 / p.n
    return CountReport(p, lead, corr, est, scale, precision)


@dataclass
class ClassSizes:
    P: int
    E: int
    levels: List[int]
    L: int

    def as_dict(self) -> dict:
        return {"P": self.P, "E": self.E, "E_l": self.levels, "L": self.L}


def exhaustive_class_sizes(
    p: Params,
    pol: LPolicy = SqrtND(),
    cost_guard: int = DEFAULT_PERM_GUARD,
    method: str = "permutations",
) -> ClassSizes:
    """Sizes of P, E and every E_l.

    ``method="permutations"`` classifies every permutation; ``"multigraphs"``
    classifies each multigraph once and weights it by its permutation count.
    """
    _guard_perms(p, cost_guard)
    L = pol.cap(p)
    levels = [0] * (L + 1)
    total = 0
    if method == "permutations":
        for y in iter_multiset_permutations(p):
            total += 1
            lvl = classify_blocks(canonical_blocks(y, p.k), p.k, L).level
            if lvl is not None:
                levels[lvl] += 1
    elif method == "multigraphs":
        for h, w in iter_multigraphs(p):
            total += w
            lvl = classify_blocks(h, p.k, L).level
            if lvl is not None:
                levels[lvl] += w
    else:
        raise ValueError(f"unknown method {method!r}")
    return ClassSizes(total, sum(levels), levels, L)


def compare(
    p: Params,
    pol: LPolicy = SqrtND(),
    precision: int = DEFAULT_PRECISION,
    subset_guard: int = DEFAULT_SUBSET_GUARD,
    perm_guard: int = DEFAULT_PERM_GUARD,
) -> CountReport:
    """Brute-force count against the formula, plus |P|/|E_0| and level ratios when affordable."""
    rep = formula_estimate(p, precision)
    count = brute_force_count(p, cost_guard=subset_guard)
    rep.exact_count = count
    half = Fraction((p.k - 1) * (p.d - 1), 2)
    size_p = perm_class_size(p)
    e0 = count * labelings_per_graph(p)
    with mpmath.workdps(precision):
        if count:
            rep.ratio = mpmath.mpf(count) / rep.estimate
        p_over = mpmath.mpf(size_p) / e0 if e0 else None
        rep.extra.update(
            {
                "P": size_p,
                "E_0": e0,
                "P_over_E0": None if p_over is None else float(p_over),
                "log_P_over_E0": None if p_over is None else float(mpmath.log(p_over)),
                "half_k1_d1": float(half),
            }
        )
    level_rows = None
    if perm_class_size(p) <= perm_guard:
        sizes = exhaustive_class_sizes(p, pol, perm_guard, method="multigraphs")
        level_rows = []
        for l in range(1, sizes.L + 1):
            prev, cur = sizes.levels[l - 1], sizes.levels[l]
            level_rows.append(
                {
                    "l": l,
                    "ratio": _frac_str(Fraction(cur, prev)) if prev else None,
                    "ratio_float": float(Fraction(cur, prev)) if prev else None,
                    "reference": float(Fraction((p.k - 1) * (p.d - 1), 2 * l)),
                }
            )
        rep.extra["class_sizes"] = sizes.as_dict()
    rep.extra["level_ratios"] = level_rows
    return rep


@dataclass
class LevelCensus:
    l: int
    size: int = 0
    sum_F: int = 0
    sum_B: int = 0
    min_F: Optional[int] = None
    max_F: Optional[int] = None
    min_B: Optional[int] = None
    max_B: Optional[int] = None

    def add(self, w: int, F: Optional[int], B: Optional[int]) -> None:
        self.size += w
        if F is not None:
            self.sum_F += w * F
            self.min_F = F if self.min_F is None else min(self.min_F, F)
            self.max_F = F if self.max_F is None else max(self.max_F, F)
        if B is not None:
            self.sum_B += w * B
            self.min_B = B if self.min_B is None else min(self.min_B, B)
            self.max_B = B if self.max_B is None else max(self.max_B, B)


@dataclass
class SwitchCensus:
    params: Params
    L: int
    P: int
    levels: List[LevelCensus]
    F_violations: int
    B_violations: int
    method: str

    def identity_rows(self) -> List[dict]:
        """Sum of F over E_l against sum of B over E_{l-1}, for 1 <= l <= L."""
        rows = []
        for l in range(1, self.L + 1):
            lhs = self.levels[l].sum_F
            rhs = self.levels[l - 1].sum_B
            rows.append({"l": l, "sum_F": lhs, "sum_B": rhs, "status": "exact-equal" if lhs == rhs else "MISMATCH"})
        return rows

    def as_dict(self) -> dict:
        return {
            "L": self.L,
            "P": self.P,
            "method": self.method,
            "F_violations": self.F_violations,
            "B_violations": self.B_violations,
            "levels": [vars(c) for c in self.levels],
            "identity": self.identity_rows(),
        }


def switch_census(
    p: Params,
    pol: LPolicy = SqrtND(),
    cost_guard: int = DEFAULT_PERM_GUARD,
    method: str = "multigraphs",
    spot_check_every: int = 0,
) -> SwitchCensus:
    """F(y) and B(y) over all of P, aggregated per level, with bound violations.

    With ``method="permutations"`` every permutation is visited; F and B are
    cached per multigraph since both depend only on H(y).  A non-zero
    ``spot_check_every`` recomputes them directly on every N-th permutation and
    fails loudly on disagreement.
    """
    _guard_perms(p, cost_guard)
    L = pol.cap(p)
    B_const = backward_constant(p)
    levels = [LevelCensus(l) for l in range(L + 1)]
    fviol = bviol = 0
    total = 0

    def measure(y, lvl):
        F = count_forward(y, p, pol) if lvl >= 1 else None
        B = count_backward(y, p, pol) if lvl + 1 <= L else None
        return F, B

    def record(w, lvl, F, B):
        nonlocal fviol, bviol
        levels[lvl].add(w, F, B)
        if F is not None and F > forward_constant(p, lvl):
            fviol += w
        if B is not None and B > B_const:
            bviol += w

    if method == "multigraphs":
        for h, w in iter_multigraphs(p):
            total += w
            lvl = classify_blocks(h, p.k, L).level
            if lvl is None:
                continue
            y = tuple(v for e in h for v in e)
            record(w, lvl, *measure(y, lvl))
    elif method == "permutations":
        cache: Dict[Multigraph, tuple] = {}
        for idx, y in enumerate(iter_multiset_permutations(p)):
            total += 1
            cb = canonical_blocks(y, p.k)
            key = tuple(sorted(cb))
            hit = cache.get(key)
            if hit is None:
                lvl = classify_blocks(cb, p.k, L).level
                hit = (lvl,) + (measure(y, lvl) if lvl is not None else (None, None))
                cache[key] = hit
            elif spot_check_every and idx % spot_check_every == 0 and hit[0] is not None:
                direct = measure(y, hit[0])
                if direct != hit[1:]:
                    raise AssertionError(f"F/B of {y} differ from its multigraph representative")
            if hit[0] is not None:
                record(1, *hit)
    else:
        raise ValueError(f"unknown method {method!r}")
    return SwitchCensus(p, L, total, levels, fviol, bviol, method)
