import warnings
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from hyperreg.core_model import SqrtND, is_d_regular, is_simple, new_params, sample_permutation
from hyperreg.enumeration import iter_simple_hypergraphs
from hyperreg.generator import (
    BudgetExhausted,
    Delta1Error,
    GenConfig,
    GenTrace,
    bernoulli,
    delta1_exhaustive,
    generate,
    generate_approx,
    generate_many,
    replica_rng,
    resolve_delta1,
    switch_step,
)
from hyperreg.stats import chi_square_counts, chi_square_uniformity
from hyperreg.switching import _State, count_backward

# Number of simple 2-regular 3-graphs on 9 vertices with each value of B(z)
# (from a full pass over all 122220 of them; B = 0 for the remaining 5040).
B_HISTOGRAM_923 = {36: 30240, 68: 45360, 72: 22680, 96: 7560, 120: 11340}


def test_d1_outputs_are_matchings():
    p = new_params(6, 1, 3)
    cfg = GenConfig()
    seen = set()
    for i in range(200):
        h, trace = generate(p, cfg, replica_rng(5, i))
        assert len(h) == 2 and set(h[0]).isdisjoint(h[1])
        assert trace.switch_steps == 0
        seen.add(h)
    assert len(seen) == 10


def test_budget_exhausted_when_no_simple_graph():
    p = new_params(3, 2, 3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        with pytest.raises(BudgetExhausted):
            generate(p, GenConfig(max_attempts=2000, delta1_source="exhaustive"), replica_rng(0, 0))
    with pytest.raises(BudgetExhausted):
        generate_approx(p, GenConfig(max_attempts=2000, max_redraws=20), replica_rng(0, 0))


def test_formula_delta1_too_large_is_an_error():
    with pytest.raises(Delta1Error):
        generate(new_params(9, 2, 3), GenConfig(), replica_rng(0, 0))


def test_delta1_sources():
    p = new_params(500, 3, 3)
    assert resolve_delta1(p, GenConfig()) == (Fraction(79, 100), "formula")
    assert resolve_delta1(p, GenConfig(delta1_source=Fraction(1, 2))) == (Fraction(1, 2), "override")
    assert delta1_exhaustive(new_params(6, 2, 3)) == 1
    with pytest.warns(RuntimeWarning):
        assert delta1_exhaustive(new_params(3, 2, 3)) == 0


def test_too_small_delta1_is_detected():
    p = new_params(9, 2, 3)
    cfg = GenConfig(delta1_source=Fraction(0), max_attempts=10 ** 5)
    with pytest.raises(Delta1Error):
        for i in range(50):
            generate(p, cfg, replica_rng(1, i))


def test_determinism_and_replica_streams():
    p = new_params(9, 2, 3)
    cfg = GenConfig(delta1_source=Fraction(1))
    a = generate_many(p, cfg, 42, 4)
    b = generate_many(p, cfg, 42, 4)
    assert [h for h, _ in a] == [h for h, _ in b]
    assert [t.as_dict() for _, t in a] == [t.as_dict() for _, t in b]
    tail = generate_many(p, cfg, 42, 2, start=2)
    assert [h for h, _ in tail] == [h for h, _ in a[2:]]


def test_outputs_simple_regular_and_steps_match_lambda():
    p = new_params(9, 2, 3)
    for h, trace in generate_many(p, GenConfig(delta1_source=Fraction(1)), 9, 20):
        assert is_simple(h) and is_d_regular(h, p)
        assert trace.switch_steps == trace.initial_lambda[-1]


def test_exact_mode_in_valid_regime():
    p = new_params(500, 3, 3)
    cfg = GenConfig()
    h, trace = generate(p, cfg, replica_rng(3, 0))
    assert is_simple(h) and is_d_regular(h, p)
    assert trace.switch_steps == trace.initial_lambda[-1] <= SqrtND().cap(p)


def test_approx_mode_large():
    p = new_params(500, 3, 3)
    for i in range(3):
        h, trace = generate_approx(p, GenConfig(mode="approx"), replica_rng(4, i))
        assert is_simple(h) and is_d_regular(h, p)
        assert trace.switch_steps <= SqrtND().cap(p)
        assert trace.attempts < 50


def test_bernoulli_exact_rational():
    rng = np.random.default_rng(8)
    assert not bernoulli(Fraction(0), rng) and bernoulli(Fraction(1), rng)
    hits = sum(bernoulli(Fraction(1, 3), rng) for _ in range(30000))
    assert abs(hits / 30000 - 1 / 3) < 4 * (2 / 9 / 30000) ** 0.5


def test_exact_uniformity_small():
    p = new_params(6, 2, 3)
    classes = list(iter_simple_hypergraphs(p))
    cfg = GenConfig(delta1_source="exhaustive")
    delta, _ = resolve_delta1(p, cfg)
    samples = [h for h, _ in generate_many(p, cfg, 17, 50 * len(classes), delta)]
    assert chi_square_uniformity(samples, classes).p_value > 0.001


def test_b_rejection_flattens_the_backward_count():
    """One switching step from a uniform E_1 element, kept with probability 36/B(z).

    Forward switchings reach z in proportion to B(z), so after b-rejection every
    z with B(z) > 0 must be equally likely; grouped by B-value this is the
    histogram above.
    """
    p = new_params(9, 2, 3)
    pol = SqrtND()
    rng = np.random.default_rng(2718)
    keep = Fraction(36)
    observed = Counter()
    trace = GenTrace()
    while sum(observed.values()) < 2500:
        y = sample_permutation(p, rng)
        st = _State(y, p, pol)
        if st.cls.level != 1:
            continue
        z = switch_step(y, p, st, keep, rng, pol, trace)
        if z is not None:
            observed[count_backward(z, p, pol)] += 1
    assert set(observed) <= set(B_HISTOGRAM_923)
    keys = sorted(B_HISTOGRAM_923)
    res = chi_square_counts([observed[b] for b in keys], [B_HISTOGRAM_923[b] for b in keys])
    assert res.p_value > 0.001
