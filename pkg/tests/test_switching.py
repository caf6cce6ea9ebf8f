import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hyperreg.core_model import blocks_of, classify_perm, new_params, sample_permutation
from hyperreg.enumeration import iter_multiset_permutations
from hyperreg.switching import (
    ForwardOp,
    SwitchingError,
    apply_backward,
    apply_forward,
    backward_constant,
    backward_inverse,
    count_backward,
    count_forward,
    decode_raw_forward,
    delta1,
    enumerate_backward,
    enumerate_forward,
    forward_constant,
    forward_inverse,
    raw_of,
    switch_constants,
)

P923 = new_params(9, 2, 3)


def test_constants():
    assert forward_constant(new_params(4, 3, 3), 1) == 144
    assert forward_constant(new_params(99, 4, 3), 2) == 16 * 99 * 99 * 2
    assert forward_constant(new_params(100, 4, 4), 2) == 320000
    assert backward_constant(new_params(4, 3, 3)) == 288
    assert backward_constant(new_params(500, 3, 3)) == 4500000
    with pytest.raises(ValueError):
        forward_constant(P923, 0)


def test_delta1_examples():
    assert delta1(new_params(500, 3, 3), 38) == Fraction(3555000, 4500000) == Fraction(79, 100)
    c = switch_constants(new_params(6, 2, 3), 1, 3)
    assert c.delta1 == Fraction(5724, 144)
    assert not c.valid_regime
    assert delta1(new_params(6, 1, 3), 2) == 0


def test_worked_example_invalid_and_valid(worked_example):
    p, y = worked_example
    assert classify_perm(y, p).level == 1
    bad = ForwardOp(0, 1, 2, 3, 6)  # e3' = {2,3,6} duplicates block 3
    good = ForwardOp(0, 1, 2, 4, 6)
    ops = enumerate_forward(y, p)
    assert bad not in ops and good in ops
    with pytest.raises(SwitchingError):
        apply_forward(y, p, bad)
    z = apply_forward(y, p, good)
    assert blocks_of(z, 3) == [(4, 6, 2), (3, 1, 5), (1, 7, 8), (2, 3, 6), (4, 7, 9), (5, 8, 9)]
    assert classify_perm(z, p).level == 0
    back = forward_inverse(y, p, good)
    assert back in enumerate_backward(z, p)
    assert apply_backward(z, p, back) == y
    assert backward_inverse(back) == good


def test_ordered_variants_differ(worked_example):
    p, y = worked_example
    a = apply_forward(y, p, ForwardOp(0, 1, 2, 4, 6))
    b = apply_forward(y, p, ForwardOp(0, 2, 1, 6, 4))
    assert a != b


def test_forward_count_matches_raw_space(worked_example):
    p, y = worked_example
    ops = enumerate_forward(y, p)
    valid = []
    for raw in itertools.product(range(1), range(p.m), range(p.m), range(p.k), range(p.k)):
        op = decode_raw_forward(y, p, raw)
        if op is not None:
            valid.append(op)
            assert raw_of(y, p, op) == raw
    assert valid == ops
    assert len(ops) <= forward_constant(p, 1)


def test_decode_rejects_loop_block_and_shared_vertex(worked_example):
    p, y = worked_example
    assert decode_raw_forward(y, p, (0, 0, 1, 0, 0)) is None
    # blocks 1 = (3,4,5) and 4 = (4,7,9) share vertex 4, at pos 1 of block 1
    assert decode_raw_forward(y, p, (0, 1, 4, 1, 1)) is None
    assert decode_raw_forward(y, p, (0, 1, 4, 0, 1)) is not None
    assert decode_raw_forward(y, p, (1, 1, 2, 0, 0)) is None


def test_backward_enumeration_agrees_with_counter(worked_example):
    p, y = worked_example
    z = apply_forward(y, p, ForwardOp(0, 1, 2, 4, 6))
    ops = enumerate_backward(z, p)
    assert len(ops) == count_backward(z, p) == 68
    assert len(ops) <= backward_constant(p)
    for op in ops:
        x = apply_backward(z, p, op)
        assert classify_perm(x, p).level == 1
        assert apply_forward(x, p, backward_inverse(op)) == z


def test_levels_required():
    p = new_params(3, 2, 3)
    y = (1, 2, 3, 1, 2, 3)
    with pytest.raises(SwitchingError):
        enumerate_forward(y, p)
    y = (1, 1, 2, 2, 3, 3)  # E_2 = E_L
    with pytest.raises(SwitchingError):
        enumerate_backward(y, p)


def test_small_instance_has_no_switchings():
    p = new_params(3, 2, 3)
    for y in iter_multiset_permutations(p):
        if classify_perm(y, p).level == 1:
            assert count_forward(y, p) == 0


def test_d1_has_no_backward_switchings():
    p = new_params(9, 1, 3)
    rng = np.random.default_rng(3)
    for _ in range(20):
        y = sample_permutation(p, rng)
        assert count_backward(y, p) == 0


def _random_in_level(p, level, rng):
    while True:
        y = sample_permutation(p, rng)
        if classify_perm(y, p).level == level:
            return y


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_round_trip_and_injectivity_property(seed):
    rng = np.random.default_rng(seed)
    y = _random_in_level(P923, 1, rng)
    ops = enumerate_forward(y, P923)
    outs = [apply_forward(y, P923, op) for op in ops]
    assert len(set(outs)) == len(outs)
    for op, z in zip(ops, outs):
        assert sorted(z) == sorted(y)
        assert apply_backward(z, P923, forward_inverse(y, P923, op)) == y


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_backward_count_property(seed):
    rng = np.random.default_rng(seed)
    y = _random_in_level(P923, 0, rng)
    ops = enumerate_backward(y, P923)
    assert len(ops) == count_backward(y, P923)
    for op in ops[:: max(1, len(ops) // 10)]:
        x = apply_backward(y, P923, op)
        assert classify_perm(x, P923).lam == 1
        assert apply_forward(x, P923, backward_inverse(op)) == y


def test_k4_round_trip():
    p = new_params(12, 2, 4)
    rng = np.random.default_rng(11)
    y = _random_in_level(p, 1, rng)
    for op in enumerate_forward(y, p)[:50]:
        z = apply_forward(y, p, op)
        assert classify_perm(z, p).level == 0
        assert apply_backward(z, p, forward_inverse(y, p, op)) == y
    z = _random_in_level(p, 0, rng)
    assert len(enumerate_backward(z, p)) == count_backward(z, p)
