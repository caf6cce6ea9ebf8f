"""Exact moment formulas for the permutation model, Monte-Carlo estimators,
the chi-square uniformity test and the per-level ratio table."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
from scipy.special import gammaincc

from .core_model import (
    KdOmega,
    LPolicy,
    Multigraph,
    Params,
    SqrtND,
    canonical_blocks,
    classify_edge,
    EdgeKind,
)
from .enumeration import (
    DEFAULT_PERM_GUARD,
    _guard_perms,
    iter_multiset_permutations,
    switch_census,
)


def falling(x: int, a: int) -> int:
    """(x)_a = x (x-1) ... (x-a+1)."""
    out = 1
    for i in range(a):
        out *= x - i
    return out


def exact_loop_indicator(p: Params) -> Fraction:
    """P(a given block is a loop with exactly one repeated vertex)."""
    n, d, k = p.n, p.d, p.k
    return Fraction(math.comb(k, 2) * falling(n, k - 1) * falling(d, 2) * d ** (k - 2), falling(n * d, k))


def exact_lambda_mean(p: Params) -> Fraction:
    """Expected number of blocks that are loops with exactly one repeated vertex."""
    return p.m * exact_loop_indicator(p)


def _partitions(total: int, largest: int) -> Iterable[tuple]:
    if total == 0:
        yield ()
        return
    for part in range(min(total, largest), 0, -1):
        for rest in _partitions(total - part, part):
            yield (part,) + rest


def exact_pair_collision(p: Params) -> Fraction:
    """P(two given blocks are equal as multisets), summed over compositions of k.

    A composition is grouped by its multiset of nonzero parts; the number of
    ways to place those parts on labels is n! / ((n-s)! prod mult!).
    """
    n, d, k = p.n, p.d, p.k
    total = Fraction(0)
    denom = falling(n * d, 2 * k)
    for parts in _partitions(k, d // 2):
        s = len(parts)
        if s > n:
            continue
        placements = math.factorial(n) // math.factorial(n - s)
        for c in Counter(parts).values():
            placements //= math.factorial(c)
        multinom = math.factorial(k)
        for q in parts:
            multinom //= math.factorial(q)
        draws = 1
        for q in parts:
            draws *= falling(d, 2 * q)
        total += Fraction(placements * multinom ** 2 * draws, denom)
    return total


@dataclass
class ExactExpectations:
    e_loop_indicator: Fraction
    e_lambda: Fraction
    pair_collision: Fraction
    asymptote: Fraction

    def as_dict(self) -> dict:
        return {key: _num(val) for key, val in vars(self).items()}


def exact_expectations(p: Params) -> ExactExpectations:
    ind = exact_loop_indicator(p)
    return ExactExpectations(ind, p.m * ind, exact_pair_collision(p), Fraction((p.k - 1) * (p.d - 1), 2))


def _num(x):
    if isinstance(x, Fraction):
        return {"exact": str(x), "float": float(x)}
    return x


@dataclass
class McSummary:
    N: int
    fraction_in_E: float
    lambda_mean: float
    lambda_variance: float
    good_loop_mean: float
    good_loop_variance: float
    bad_loop_rate_mult3: float
    bad_loop_rate_double2: float
    multi_edge_rate: float
    multi_edge_pair_rate: float
    tail_exceed_rate: Dict[str, float]
    se: Dict[str, float] = field(default_factory=dict)
    exhaustive: bool = False

    def as_dict(self) -> dict:
        out = {}
        for key, val in vars(self).items():
            if isinstance(val, dict):
                out[key] = {kk: _num(vv) for kk, vv in val.items()}
            else:
                out[key] = _num(val)
        return out


def _policies(pol: LPolicy, extra: Optional[Sequence[LPolicy]]) -> List[LPolicy]:
    out = [pol]
    for q in extra or (SqrtND(), KdOmega(10)):
        if q not in out:
            out.append(q)
    return out


def classify_batch(arr: np.ndarray, p: Params) -> dict:
    """Vectorised classification of a (batch, n*d) array of permutations."""
    batch = arr.shape[0]
    blocks = np.sort(arr.reshape(batch, p.m, p.k), axis=2)
    eq = blocks[..., 1:] == blocks[..., :-1]
    neq = eq.sum(axis=2)
    triple = (eq[..., 1:] & eq[..., :-1]).any(axis=2) if p.k >= 3 else np.zeros_like(neq, bool)
    bad = neq >= 2
    lam = (neq >= 1).sum(axis=1)
    good = (neq == 1).sum(axis=1)
    if p.k * math.log2(p.n + 1) < 62:
        weights = (p.n + 1) ** np.arange(p.k, dtype=np.int64)
        codes = np.sort((blocks.astype(np.int64) * weights).sum(axis=2), axis=1)
        dup = codes[:, 1:] == codes[:, :-1]
        multi = dup.any(axis=1)
        pairs = np.zeros(batch, dtype=np.int64)
        for r in np.nonzero(multi)[0]:
            pairs[r] = sum(c * (c - 1) // 2 for c in Counter(codes[r].tolist()).values())
    else:
        multi = np.zeros(batch, bool)
        pairs = np.zeros(batch, dtype=np.int64)
        for r in range(batch):
            cnt = Counter(map(tuple, blocks[r].tolist()))
            pairs[r] = sum(c * (c - 1) // 2 for c in cnt.values())
            multi[r] = pairs[r] > 0
    return {
        "lam": lam,
        "good": good,
        "bad": bad.any(axis=1),
        "mult3": (bad & triple).any(axis=1),
        "double2": (bad & ~triple).any(axis=1),
        "multi": multi,
        "pairs": pairs,
    }


def mc_summary(
    p: Params,
    N: int,
    pol: LPolicy,
    rng: np.random.Generator,
    tail_policies: Optional[Sequence[LPolicy]] = None,
    batch: int = 5000,
) -> McSummary:
    """Monte-Carlo estimates from N uniform permutations, with standard errors."""
    if N < 1:
        raise ValueError("N must be positive")
    pols = _policies(pol, tail_policies)
    base = np.repeat(np.arange(1, p.n + 1, dtype=np.int32), p.d)
    parts = {key: [] for key in ("lam", "good", "bad", "mult3", "double2", "multi", "pairs")}
    done = 0
    while done < N:
        size = min(batch, N - done)
        arr = rng.permuted(np.tile(base, (size, 1)), axis=1)
        res = classify_batch(arr, p)
        for key in parts:
            parts[key].append(res[key])
        done += size
    cat = {key: np.concatenate(v) for key, v in parts.items()}
    lam = cat["lam"].astype(float)
    pair_norm = math.comb(p.m, 2) or 1
    in_E = ~cat["multi"] & ~cat["bad"] & (cat["lam"] <= pol.cap(p))
    tails = {str(q): float(np.mean(cat["lam"] > q.cap(p))) for q in pols}

    def prop_se(x):
        return math.sqrt(max(x * (1 - x), 0.0) / N)

    good = cat["good"].astype(float)
    lam_var = float(lam.var(ddof=1)) if N > 1 else 0.0
    good_var = float(good.var(ddof=1)) if N > 1 else 0.0
    pair_rate = cat["pairs"] / pair_norm
    summary = McSummary(
        N=N,
        fraction_in_E=float(in_E.mean()),
        lambda_mean=float(lam.mean()),
        lambda_variance=lam_var,
        good_loop_mean=float(good.mean()),
        good_loop_variance=good_var,
        bad_loop_rate_mult3=float(cat["mult3"].mean()),
        bad_loop_rate_double2=float(cat["double2"].mean()),
        multi_edge_rate=float(cat["multi"].mean()),
        multi_edge_pair_rate=float(pair_rate.mean()),
        tail_exceed_rate=tails,
    )
    summary.se = {
        "fraction_in_E": prop_se(summary.fraction_in_E),
        "lambda_mean": math.sqrt(lam_var / N),
        "good_loop_mean": math.sqrt(good_var / N),
        "bad_loop_rate_mult3": prop_se(summary.bad_loop_rate_mult3),
        "bad_loop_rate_double2": prop_se(summary.bad_loop_rate_double2),
        "multi_edge_rate": prop_se(summary.multi_edge_rate),
        "multi_edge_pair_rate": float(pair_rate.std(ddof=1) / math.sqrt(N)) if N > 1 else 0.0,
        **{f"tail:{key}": prop_se(val) for key, val in tails.items()},
    }
    return summary


def mc_exhaustive(
    p: Params,
    pol: LPolicy = SqrtND(),
    tail_policies: Optional[Sequence[LPolicy]] = None,
    cost_guard: int = DEFAULT_PERM_GUARD,
) -> McSummary:
    """The same summary computed exactly over all of P (exact rationals, zero standard error)."""
    size = _guard_perms(p, cost_guard)
    pols = _policies(pol, tail_policies)
    caps = [q.cap(p) for q in pols]
    L = pol.cap(p)
    in_E = lam_sum = lam_sq = good_sum = good_sq = mult3 = double2 = multi = pairs = 0
    tails = [0] * len(pols)
    kind_cache: Dict[tuple, EdgeKind] = {}
    for y in iter_multiset_permutations(p):
        cb = canonical_blocks(y, p.k)
        lam = good = 0
        m3 = d2 = False
        for b in cb:
            kind = kind_cache.get(b)
            if kind is None:
                kind = kind_cache[b] = classify_edge(b)
            if kind.is_loop:
                lam += 1
                good += kind is EdgeKind.GOOD_LOOP
                m3 |= kind is EdgeKind.BAD_LOOP_MULT3
                d2 |= kind is EdgeKind.BAD_LOOP_DOUBLE2
        cnt = Counter(cb)
        pr = sum(c * (c - 1) // 2 for c in cnt.values())
        lam_sum += lam
        lam_sq += lam * lam
        good_sum += good
        good_sq += good * good
        mult3 += m3
        double2 += d2
        multi += pr > 0
        pairs += pr
        in_E += pr == 0 and not (m3 or d2) and lam <= L
        for i, cap in enumerate(caps):
            tails[i] += lam > cap
    mean = Fraction(lam_sum, size)
    gmean = Fraction(good_sum, size)
    return McSummary(
        N=size,
        fraction_in_E=Fraction(in_E, size),
        lambda_mean=mean,
        lambda_variance=Fraction(lam_sq, size) - mean * mean,
        good_loop_mean=gmean,
        good_loop_variance=Fraction(good_sq, size) - gmean * gmean,
        bad_loop_rate_mult3=Fraction(mult3, size),
        bad_loop_rate_double2=Fraction(double2, size),
        multi_edge_rate=Fraction(multi, size),
        multi_edge_pair_rate=Fraction(pairs, size * (math.comb(p.m, 2) or 1)),
        tail_exceed_rate={str(q): Fraction(t, size) for q, t in zip(pols, tails)},
        exhaustive=True,
    )


def first_block_loop_fraction(p: Params, cost_guard: int = DEFAULT_PERM_GUARD) -> Fraction:
    """Fraction of P whose first block is a loop with exactly one repeated vertex."""
    size = _guard_perms(p, cost_guard)
    hits = sum(
        1 for y in iter_multiset_permutations(p) if classify_edge(y[: p.k]) is EdgeKind.GOOD_LOOP
    )
    return Fraction(hits, size)


def first_pair_collision_fraction(p: Params, cost_guard: int = DEFAULT_PERM_GUARD) -> Fraction:
    """Fraction of P whose first two blocks are equal as multisets."""
    size = _guard_perms(p, cost_guard)
    k = p.k
    hits = sum(1 for y in iter_multiset_permutations(p) if sorted(y[:k]) == sorted(y[k:2 * k]))
    return Fraction(hits, size)


@dataclass
class ChiSquareResult:
    classes: int
    observed: List[int]
    statistic: float
    dof: int
    p_value: float

    def as_dict(self) -> dict:
        return dict(vars(self))


def chi_square_uniformity(samples: Iterable[Multigraph], classes: Sequence[Multigraph]) -> ChiSquareResult:
    """Pearson goodness of fit of ``samples`` to the uniform law on ``classes``."""
    index = {h: i for i, h in enumerate(classes)}
    if len(index) != len(classes):
        raise ValueError("class list contains duplicates")
    observed = [0] * len(classes)
    for h in samples:
        try:
            observed[index[h]] += 1
        except KeyError:
            raise ValueError(f"sample {h} is not among the {len(classes)} classes") from None
    return chi_square_counts(observed)


def chi_square_counts(observed: Sequence[int], expected_weights: Optional[Sequence[float]] = None) -> ChiSquareResult:
    """Pearson statistic against proportions ``expected_weights`` (uniform if omitted)."""
    total = sum(observed)
    c = len(observed)
    if expected_weights is None:
        expected_weights = [1.0] * c
    wsum = float(sum(expected_weights))
    stat = 0.0
    for o, w in zip(observed, expected_weights):
        e = total * w / wsum
        stat += (o - e) ** 2 / e
    dof = c - 1
    pval = float(gammaincc(dof / 2, stat / 2)) if dof > 0 else 1.0
    return ChiSquareResult(c, list(observed), stat, dof, pval)


def ratio_table(p: Params, pol: LPolicy = SqrtND(), cost_guard: int = DEFAULT_PERM_GUARD) -> List[dict]:
    """Per level: |E_l|/|E_{l-1}| next to (k-1)(d-1)/(2l) and the min/max F, B sandwich."""
    if p.d == 1:
        return []
    census = switch_census(p, pol, cost_guard)
    rows = []
    for l in range(1, census.L + 1):
        cur, prev = census.levels[l], census.levels[l - 1]
        row = {
            "l": l,
            "E_l": cur.size,
            "E_l_minus_1": prev.size,
            "ratio": Fraction(cur.size, prev.size) if prev.size else None,
            "reference": Fraction((p.k - 1) * (p.d - 1), 2 * l),
            "avg_F": Fraction(cur.sum_F, cur.size) if cur.size else None,
            "avg_B": Fraction(prev.sum_B, prev.size) if prev.size else None,
            "identity": cur.sum_F == prev.sum_B,
            "lower": None,
            "upper": None,
        }
        if prev.size and cur.size and cur.max_F:
            row["lower"] = Fraction(prev.min_B, cur.max_F)
            if cur.min_F:
                row["upper"] = Fraction(prev.max_B, cur.min_F)
        rows.append(row)
    return rows


def ratio_rows_json(rows: List[dict]) -> List[dict]:
    return [{key: _num(val) for key, val in row.items()} for row in rows]
