"""Forward and backward switchings on permutations.

A forward switching takes a good loop ``f = v v x_1..x_{k-2}`` and two proper
edges ``e1, e2`` that avoid every vertex of ``f`` and share at most ``k-2``
vertices, and swaps ``y* in e1 \\ e2`` and ``z* in e2 \\ e1`` with the two
copies of ``v``: the copy of ``v`` further to the left goes to ``y*``'s slot,
the other one to ``z*``'s slot.  A backward switching is the exact inverse.

All operations work on block indices and vertex labels of a concrete
permutation, so applying an op and then its inverse restores the permutation
bit for bit.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

from .core_model import (
    LPolicy,
    ParamError,
    Params,
    PermSeq,
    SqrtND,
    blocks_of,
    classify_blocks,
)


class SwitchingError(ValueError):
    """An op is invalid for the permutation it is applied to."""


@dataclass(frozen=True, order=True)
class ForwardOp:
    loop_block: int
    e1_block: int
    e2_block: int
    y_star: int
    z_star: int

    def as_dict(self) -> dict:
        return {"kind": "forward", **asdict(self)}


@dataclass(frozen=True, order=True)
class BackwardOp:
    """Backward switching; ``a`` sits left of ``b`` inside block ``e3_block``.

    ``a`` moves into ``e1_block`` and ``b`` into ``e2_block``, taking the
    places of the two copies of ``v``.
    """

    v: int
    e1_block: int
    e2_block: int
    e3_block: int
    a: int
    b: int

    def as_dict(self) -> dict:
        return {"kind": "backward", **asdict(self)}


RawForward = Tuple[int, int, int, int, int]


def forward_constant(p: Params, l: int) -> int:
    """F_l = d^2 n^2 l (= k^2 m^2 l)."""
    if l < 1:
        raise ParamError(f"loop count l must be >= 1 (got {l})")
    return p.d * p.d * p.n * p.n * l


def backward_constant(p: Params) -> Fraction:
    """B = (k-1)/2 n^2 d^2 (d-1)."""
    return Fraction((p.k - 1) * p.n ** 2 * p.d ** 2 * (p.d - 1), 2)


def delta1(p: Params, L: int) -> Fraction:
    """Explicit bound on 1 - B(z)/B, with the loop count replaced by its cap L."""
    B = backward_constant(p)
    if B == 0:
        return Fraction(0)
    n, d, k, m = p.n, p.d, p.k, p.m
    slack = math.comb(k, 2) * (2 * k * L * d * m + L * n * d * (d - 1) + 2 * k * k * n * d ** 4)
    return slack / B


@dataclass(frozen=True)
class SwitchConstants:
    F_l: int
    B_const: Fraction
    delta1: Fraction

    @property
    def valid_regime(self) -> bool:
        return self.delta1 < 1


def switch_constants(p: Params, l: int, L: int) -> SwitchConstants:
    return SwitchConstants(forward_constant(p, l), backward_constant(p), delta1(p, L))


class _State:
    """Per-permutation lookup tables shared by the enumerators."""

    def __init__(self, y: Sequence[int], p: Params, pol: LPolicy):
        self.y = tuple(y)
        self.p = p
        k = p.k
        self.raw = blocks_of(self.y, k)
        self.cb = [tuple(sorted(b)) for b in self.raw]
        self.sets = [frozenset(b) for b in self.raw]
        self.cls = classify_blocks(self.cb, k, pol.cap(p))
        self.blockcount = Counter(self.cb)
        self.proper = [i for i, s in enumerate(self.sets) if len(s) == k]
        self.loops = [i for i, s in enumerate(self.sets) if len(s) < k]
        self.vblocks = defaultdict(list)
        for i in self.proper:
            for u in self.raw[i]:
                self.vblocks[u].append(i)

    def collides(self, new: Sequence[Tuple[int, ...]], removed: Sequence[int]) -> bool:
        """True if the new canonical blocks clash with each other or with unchanged blocks."""
        if len(set(new)) < len(new):
            return True
        removed_c = Counter(self.cb[i] for i in removed)
        return any(self.blockcount[b] - removed_c[b] > 0 for b in new)


def _doubled(block: Sequence[int]) -> int:
    seen = set()
    for u in block:
        if u in seen:
            return u
        seen.add(u)
    raise SwitchingError("block is not a loop")


def _forward_result(st: _State, op: ForwardOp):
    """New canonical blocks (e1', e2', e3') if ``op`` is valid for ``st``, else None."""
    k = st.p.k
    f, b1, b2 = op.loop_block, op.e1_block, op.e2_block
    m = len(st.raw)
    if not (0 <= f < m and 0 <= b1 < m and 0 <= b2 < m):
        return None
    if len(st.sets[f]) != k - 1 or b1 == b2 or b1 == f or b2 == f:
        return None
    s1, s2, sf = st.sets[b1], st.sets[b2], st.sets[f]
    if len(s1) != k or len(s2) != k or s1 & sf or s2 & sf:
        return None
    if len(s1 & s2) > k - 2:
        return None
    if op.y_star not in s1 or op.y_star in s2 or op.z_star not in s2 or op.z_star in s1:
        return None
    v = _doubled(st.raw[f])
    e1n = tuple(sorted((s1 - {op.y_star}) | {v}))
    e2n = tuple(sorted((s2 - {op.z_star}) | {v}))
    e3n = tuple(sorted((sf - {v}) | {op.y_star, op.z_star}))
    new = (e1n, e2n, e3n)
    if st.collides(new, (f, b1, b2)):
        return None
    return new


def _require_level(st: _State, lo: int) -> int:
    level = st.cls.level
    if level is None or level < lo:
        raise SwitchingError(
            f"permutation must lie in E_l with l >= {lo} (lambda={st.cls.lam}, level={level})"
        )
    return level


def decode_raw_forward(
    y: Sequence[int], p: Params, raw: RawForward, pol: LPolicy = SqrtND(), _state: Optional[_State] = None
) -> Optional[ForwardOp]:
    """Map a raw tuple (loop index, block1, block2, pos1, pos2) to a valid ForwardOp or None.

    The raw space has exactly F_l = l m^2 k^2 elements, and valid raws are in
    bijection with the valid forward ops of ``y``.
    """
    st = _state or _State(y, p, pol)
    li, b1, b2, p1, p2 = raw
    if not 0 <= li < len(st.loops):
        return None
    k = p.k
    if not (0 <= b1 < len(st.raw) and 0 <= b2 < len(st.raw) and 0 <= p1 < k and 0 <= p2 < k):
        return None
    op = ForwardOp(st.loops[li], b1, b2, st.raw[b1][p1], st.raw[b2][p2])
    return op if _forward_result(st, op) is not None else None


def raw_of(y: Sequence[int], p: Params, op: ForwardOp) -> RawForward:
    k = p.k
    loops = [i for i, b in enumerate(blocks_of(y, k)) if len(set(b)) < k]
    e1 = y[op.e1_block * k:(op.e1_block + 1) * k]
    e2 = y[op.e2_block * k:(op.e2_block + 1) * k]
    return (loops.index(op.loop_block), op.e1_block, op.e2_block, e1.index(op.y_star), e2.index(op.z_star))


def enumerate_forward(y: Sequence[int], p: Params, pol: LPolicy = SqrtND()) -> List[ForwardOp]:
    """All valid forward switchings of y, ordered by raw-tuple encoding. F(y) is the length."""
    st = _State(y, p, pol)
    _require_level(st, 1)
    k = p.k
    ops = []
    for f in st.loops:
        sf = st.sets[f]
        cands = [i for i in st.proper if not (st.sets[i] & sf)]
        for b1 in cands:
            for b2 in cands:
                if b1 == b2 or len(st.sets[b1] & st.sets[b2]) > k - 2:
                    continue
                for ys in st.raw[b1]:
                    if ys in st.sets[b2]:
                        continue
                    for zs in st.raw[b2]:
                        if zs in st.sets[b1]:
                            continue
                        op = ForwardOp(f, b1, b2, ys, zs)
                        if _forward_result(st, op) is not None:
                            ops.append(op)
    # loops are scanned in block order and positions in slot order: already raw-sorted
    return ops


def count_forward(y: Sequence[int], p: Params, pol: LPolicy = SqrtND()) -> int:
    return len(enumerate_forward(y, p, pol))


def apply_forward(y: Sequence[int], p: Params, op: ForwardOp, pol: LPolicy = SqrtND(), check: bool = True) -> PermSeq:
    k = p.k
    if check:
        st = _State(y, p, pol)
        _require_level(st, 1)
        if _forward_result(st, op) is None:
            raise SwitchingError(f"invalid forward op {op}")
    z = list(y)
    fbase = op.loop_block * k
    fblock = z[fbase:fbase + k]
    v = _doubled(fblock)
    left = fbase + fblock.index(v)
    right = fbase + fblock.index(v, left - fbase + 1)
    py = op.e1_block * k + z[op.e1_block * k:(op.e1_block + 1) * k].index(op.y_star)
    pz = op.e2_block * k + z[op.e2_block * k:(op.e2_block + 1) * k].index(op.z_star)
    z[left], z[py] = z[py], z[left]
    z[right], z[pz] = z[pz], z[right]
    return tuple(z)


def _backward_result(st: _State, op: BackwardOp):
    k = st.p.k
    m = len(st.raw)
    b1, b2, b3 = op.e1_block, op.e2_block, op.e3_block
    if not (0 <= b1 < m and 0 <= b2 < m and 0 <= b3 < m) or len({b1, b2, b3}) < 3:
        return None
    s1, s2, s3 = st.sets[b1], st.sets[b2], st.sets[b3]
    if len(s1) != k or len(s2) != k or len(s3) != k:
        return None
    if op.v not in s1 or op.v not in s2:
        return None
    # e3 must avoid e1' and e2' entirely, else the inverse forward op is not a valid switching
    if s3 & (s1 | s2):
        return None
    r3 = st.raw[b3]
    if op.a not in s3 or op.b not in s3 or r3.index(op.a) >= r3.index(op.b):
        return None
    fn = tuple(sorted([op.v, op.v, *(s3 - {op.a, op.b})]))
    e1n = tuple(sorted((s1 - {op.v}) | {op.a}))
    e2n = tuple(sorted((s2 - {op.v}) | {op.b}))
    new = (fn, e1n, e2n)
    if st.collides(new, (b1, b2, b3)):
        return None
    return new


def enumerate_backward(y: Sequence[int], p: Params, pol: LPolicy = SqrtND()) -> List[BackwardOp]:
    """All valid backward switchings of y (each yields a member of E_{l+1}). B(y) is the length."""
    st = _State(y, p, pol)
    level = _require_level(st, 0)
    if level + 1 > st.cls.L_used:
        raise SwitchingError(f"level {level} + 1 exceeds the loop cap L={st.cls.L_used}")
    k = p.k
    ops = []
    for v in range(1, p.n + 1):
        vb = st.vblocks.get(v, [])
        for b1 in vb:
            for b2 in vb:
                if b1 == b2:
                    continue
                near = st.sets[b1] | st.sets[b2]
                for b3 in st.proper:
                    if st.sets[b3] & near:
                        continue
                    r3 = st.raw[b3]
                    for i, j in itertools.combinations(range(k), 2):
                        op = BackwardOp(v, b1, b2, b3, r3[i], r3[j])
                        if _backward_result(st, op) is not None:
                            ops.append(op)
    return ops


def count_backward(y: Sequence[int], p: Params, pol: LPolicy = SqrtND()) -> int:
    """B(y) without materialising the ops.

    Every proper block disjoint from e1' and e2' admits all C(k,2) pairs unless
    a new block would duplicate an existing one; only blocks that can cause such
    a clash are inspected pair by pair.
    """
    st = _State(y, p, pol)
    level = _require_level(st, 0)
    if level + 1 > st.cls.L_used:
        raise SwitchingError(f"level {level} + 1 exceeds the loop cap L={st.cls.L_used}")
    k = p.k
    pairs = math.comb(k, 2)
    n_proper = len(st.proper)
    loop_rest = defaultdict(set)  # v -> {sorted rest of a good loop with v doubled}
    for i in st.loops:
        v = _doubled(st.raw[i])
        rest = list(st.cb[i])
        rest.remove(v)
        rest.remove(v)
        loop_rest[v].add(tuple(rest))
    total = 0
    for v in range(1, p.n + 1):
        vb = st.vblocks.get(v, [])
        if len(vb) < 2:
            continue
        rests = loop_rest.get(v, ())
        for b1 in vb:
            r1 = st.sets[b1] - {v}
            a_bad = _completions(st, r1)
            for b2 in vb:
                if b1 == b2:
                    continue
                r2 = st.sets[b2] - {v}
                b_bad = _completions(st, r2)
                near = st.sets[b1] | st.sets[b2]
                touching = set()
                for u in near:
                    touching.update(st.vblocks.get(u, ()))
                special = set()
                for u in a_bad | b_bad:
                    special.update(st.vblocks.get(u, ()))
                for rest in rests:
                    for i in st.vblocks.get(rest[0], ()):
                        if st.sets[i].issuperset(rest):
                            special.add(i)
                special -= touching
                total += (n_proper - len(touching) - len(special)) * pairs
                for b3 in special:
                    r3 = st.raw[b3]
                    s3 = st.sets[b3]
                    for i, j in itertools.combinations(range(k), 2):
                        a, b = r3[i], r3[j]
                        if a in a_bad or b in b_bad:
                            continue
                        if tuple(sorted(s3 - {a, b})) in rests:
                            continue
                        total += 1
    return total


def _completions(st: _State, rest: frozenset) -> set:
    """Vertices a such that rest + {a} is an existing proper block."""
    out = set()
    anchor = next(iter(rest))
    for i in st.vblocks.get(anchor, ()):
        extra = st.sets[i] - rest
        if len(extra) == 1:
            out.update(extra)
    return out


def apply_backward(y: Sequence[int], p: Params, op: BackwardOp, pol: LPolicy = SqrtND(), check: bool = True) -> PermSeq:
    k = p.k
    if check:
        st = _State(y, p, pol)
        level = _require_level(st, 0)
        if level + 1 > st.cls.L_used or _backward_result(st, op) is None:
            raise SwitchingError(f"invalid backward op {op}")
    z = list(y)
    p1 = op.e1_block * k + z[op.e1_block * k:(op.e1_block + 1) * k].index(op.v)
    p2 = op.e2_block * k + z[op.e2_block * k:(op.e2_block + 1) * k].index(op.v)
    b3 = z[op.e3_block * k:(op.e3_block + 1) * k]
    pa = op.e3_block * k + b3.index(op.a)
    pb = op.e3_block * k + b3.index(op.b)
    z[p1], z[pa] = z[pa], z[p1]
    z[p2], z[pb] = z[pb], z[p2]
    return tuple(z)


def forward_inverse(y: Sequence[int], p: Params, op: ForwardOp) -> BackwardOp:
    """The backward op that undoes ``op`` on apply_forward(y, op)."""
    k = p.k
    v = _doubled(y[op.loop_block * k:(op.loop_block + 1) * k])
    return BackwardOp(v, op.e1_block, op.e2_block, op.loop_block, op.y_star, op.z_star)


def backward_inverse(op: BackwardOp) -> ForwardOp:
    """The forward op that undoes ``op`` on apply_backward(y, op)."""
    return ForwardOp(op.e3_block, op.e1_block, op.e2_block, op.a, op.b)
