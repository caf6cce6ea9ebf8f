"""Uniform random d-regular k-graphs by switching with restarts.

Each attempt draws a uniform permutation, restarts unless it lies in E, then
removes loops one at a time.  A forward switching is drawn from the raw space
of size F_l (invalid raws restart the attempt), and the result ``z`` is kept
with probability (1 - delta1) B / B(z).  Together the two rejections make every
element of E_{l-1} equally likely, so the final hypergraph is exactly uniform.
"""

from __future__ import annotations

import warnings
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Tuple, Union

import numpy as np

from .core_model import (
    LPolicy,
    Multigraph,
    ParamError,
    Params,
    SqrtND,
    build_multigraph,
    is_d_regular,
    is_simple,
    sample_permutation,
)
from .enumeration import DEFAULT_PERM_GUARD, switch_census
from .switching import (
    _State,
    apply_forward,
    backward_constant,
    count_backward,
    decode_raw_forward,
    delta1,
)

RNG_NAME = "numpy.PCG64 (default_rng([seed, replica]))"


class BudgetExhausted(RuntimeError):
    """No simple hypergraph was produced within the attempt budget."""


class Delta1Error(ValueError):
    """delta1 is unusable: above 1 in exact mode, or contradicted by an observed B(z)."""


@dataclass
class GenConfig:
    l_policy: LPolicy = field(default_factory=SqrtND)
    delta1_source: Union[str, Fraction] = "formula"  # "formula" | "exhaustive" | Fraction override
    mode: str = "exact"  # "exact" | "approx"
    max_attempts: int = 10 ** 6
    cost_guard: int = DEFAULT_PERM_GUARD
    max_redraws: int = 10 ** 4  # approx mode only


@dataclass
class GenTrace:
    attempts: int = 0
    initial_lambda: List[Optional[int]] = field(default_factory=list)
    switch_steps: int = 0
    causes: Counter = field(default_factory=Counter)

    def as_dict(self) -> dict:
        return {
            "attempts": self.attempts,
            "initial_lambda": self.initial_lambda,
            "switch_steps": self.switch_steps,
            "rejections": dict(sorted(self.causes.items())),
        }


def delta1_exhaustive(p: Params, pol: LPolicy = SqrtND(), cost_guard: int = DEFAULT_PERM_GUARD) -> Fraction:
    """1 - min B(z)/B over all z in E_0 .. E_{L-1}, by exhaustive scan."""
    B = backward_constant(p)
    census = switch_census(p, pol, cost_guard)
    mins = [c.min_B for c in census.levels[: census.L] if c.size and c.min_B is not None]
    if B == 0 or not mins:
        warnings.warn(f"no state in E_0..E_(L-1) for {p}; delta1 defined as 0", RuntimeWarning)
        return Fraction(0)
    return 1 - Fraction(min(mins)) / B


def resolve_delta1(p: Params, cfg: GenConfig) -> Tuple[Fraction, str]:
    src = cfg.delta1_source
    if isinstance(src, (Fraction, int)):
        return Fraction(src), "override"
    if src == "formula":
        return delta1(p, cfg.l_policy.cap(p)), "formula"
    if src == "exhaustive":
        return delta1_exhaustive(p, cfg.l_policy, cfg.cost_guard), "exhaustive"
    raise ParamError(f"unknown delta1 source {src!r}")


def bernoulli(prob: Fraction, rng: np.random.Generator) -> bool:
    """Exact Bernoulli(prob) by comparing a lazily drawn uniform against prob's binary expansion."""
    if prob <= 0:
        return False
    if prob >= 1:
        return True
    num, den = prob.numerator, prob.denominator
    while True:
        word = int(rng.bit_generator.random_raw())
        for shift in range(63, -1, -1):
            num <<= 1
            pbit = 1 if num >= den else 0
            if pbit:
                num -= den
            ubit = (word >> shift) & 1
            if ubit != pbit:
                return ubit < pbit


def _draw_raw(rng: np.random.Generator, l: int, m: int, k: int):
    return (
        int(rng.integers(l)),
        int(rng.integers(m)),
        int(rng.integers(m)),
        int(rng.integers(k)),
        int(rng.integers(k)),
    )


def switch_step(y, p: Params, st: _State, keep: Fraction, rng: np.random.Generator, pol: LPolicy, trace: GenTrace):
    """One loop-removing step from y in E_l; the new permutation, or None on restart.

    Acceptance is (F(y)/F_l) * keep/B(z), with keep = (1 - delta1) B.
    """
    op = decode_raw_forward(y, p, _draw_raw(rng, st.cls.level, p.m, p.k), pol, _state=st)
    if op is None:
        trace.causes["f-rejection"] += 1
        return None
    z = apply_forward(y, p, op, check=False)
    bz = count_backward(z, p, pol)
    if bz < keep:
        raise Delta1Error(f"B(z) = {bz} < (1 - delta1) B = {float(keep):.6g}; delta1 is too small")
    if not bernoulli(keep / bz, rng):
        trace.causes["b-rejection"] += 1
        return None
    return z


def generate(
    p: Params,
    cfg: GenConfig,
    rng: np.random.Generator,
    delta: Optional[Fraction] = None,
) -> Tuple[Multigraph, GenTrace]:
    """One hypergraph; exactly uniform in exact mode.

    ``delta`` skips resolving cfg.delta1_source (useful when drawing many
    samples with an exhaustively computed value).
    """
    if cfg.mode == "approx":
        return generate_approx(p, cfg, rng)
    if cfg.mode != "exact":
        raise ParamError(f"unknown mode {cfg.mode!r}")
    if delta is None:
        delta, _ = resolve_delta1(p, cfg)
    if delta > 1:
        raise Delta1Error(f"delta1 = {float(delta):.4g} > 1: exact generation is not available")
    pol = cfg.l_policy
    keep = (1 - delta) * backward_constant(p)
    trace = GenTrace()
    for _ in range(cfg.max_attempts):
        trace.attempts += 1
        y = sample_permutation(p, rng)
        st = _State(y, p, pol)
        lvl = st.cls.level
        trace.initial_lambda.append(st.cls.lam)
        if lvl is None:
            trace.causes["not-in-E"] += 1
            continue
        steps = 0
        while lvl > 0:
            z = switch_step(y, p, st, keep, rng, pol, trace)
            if z is None:
                break
            y, st, lvl = z, _State(z, p, pol), lvl - 1
            steps += 1
        if lvl == 0:
            trace.switch_steps = steps
            return _finish(y, p), trace
    raise BudgetExhausted(f"no simple hypergraph after {cfg.max_attempts} attempts")


def generate_approx(p: Params, cfg: GenConfig, rng: np.random.Generator) -> Tuple[Multigraph, GenTrace]:
    """Same walk without f-/b-rejection: close to, but not exactly, uniform."""
    pol = cfg.l_policy
    trace = GenTrace()
    for _ in range(cfg.max_attempts):
        trace.attempts += 1
        y = sample_permutation(p, rng)
        st = _State(y, p, pol)
        lvl = st.cls.level
        trace.initial_lambda.append(st.cls.lam)
        if lvl is None:
            trace.causes["not-in-E"] += 1
            continue
        steps = 0
        while lvl > 0:
            for _ in range(cfg.max_redraws):
                op = decode_raw_forward(y, p, _draw_raw(rng, lvl, p.m, p.k), pol, _state=st)
                if op is not None:
                    break
            else:
                trace.causes["no-forward-switching"] += 1
                break
            y = apply_forward(y, p, op, check=False)
            st, lvl = _State(y, p, pol), lvl - 1
            steps += 1
        if lvl == 0:
            trace.switch_steps = steps
            return _finish(y, p), trace
    raise BudgetExhausted(f"no simple hypergraph after {cfg.max_attempts} attempts")


def _finish(y, p: Params) -> Multigraph:
    h = build_multigraph(y, p)
    if not (is_simple(h) and is_d_regular(h, p)):
        raise AssertionError(f"generator produced a non-simple or irregular hypergraph: {h}")
    return h


def replica_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def generate_many(
    p: Params,
    cfg: GenConfig,
    seed: int,
    count: int,
    delta: Optional[Fraction] = None,
    start: int = 0,
) -> List[Tuple[Multigraph, GenTrace]]:
    """``count`` independent samples; sample i uses its own stream derived from (seed, i)."""
    if cfg.mode == "exact" and delta is None:
        delta, _ = resolve_delta1(p, cfg)
    return [generate(p, cfg, replica_rng(seed, i), delta) for i in range(start, start + count)]
