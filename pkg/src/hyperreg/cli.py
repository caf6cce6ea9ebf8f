"""Command-line interface.

Exit status: 0 on success, 1 on a domain error (bad parameters, unusable
delta1, invalid op), 2 when an attempt budget or cost guard runs out.
"""

from __future__ import annotations

import argparse
import json
import secrets
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from typing import List, Optional


from . import __version__
from .core_model import (
    ParamError,
    build_multigraph,
    check_perm,
    classify_perm,
    dumps,
    hypergraph_record,
    new_params,
    parse_policy,
    perm_line,
    sample_permutation,
)
from .enumeration import (
    DEFAULT_PERM_GUARD,
    DEFAULT_PRECISION,
    DEFAULT_SUBSET_GUARD,
    CostGuardExceeded,
    brute_force_count,
    compare,
    formula_estimate,
    iter_simple_hypergraphs,
    switch_census,
)
from .generator import (
    RNG_NAME,
    BudgetExhausted,
    Delta1Error,
    GenConfig,
    generate_many,
    replica_rng,
    resolve_delta1,
)
from .stats import (
    chi_square_uniformity,
    exact_expectations,
    mc_exhaustive,
    mc_summary,
    ratio_rows_json,
    ratio_table,
)
from .switching import (
    SwitchingError,
    backward_constant,
    count_backward,
    delta1,
    enumerate_backward,
    enumerate_forward,
    forward_constant,
)


def _num(x):
    if isinstance(x, Fraction):
        return {"exact": str(x), "float": float(x)}
    return x


def _params(args):
    return new_params(args.n, args.d, args.k)


def _seed(args) -> int:
    if args.seed is None:
        args.seed = secrets.randbits(63)
        print(f"seed: {args.seed}", file=sys.stderr)
    return args.seed


def _meta(args, p, **extra) -> dict:
    meta = {
        "tool": "hyperreg",
        "version": __version__,
        "command": args.command,
        "params": p.as_dict(),
        "m": p.m,
        "l_policy": args.l_policy,
        "L": parse_policy(args.l_policy).cap(p),
        "outside_regime": p.outside_regime,
    }
    if getattr(args, "seed", None) is not None:
        meta["seed"] = args.seed
        meta["rng"] = RNG_NAME
    meta.update(extra)
    return meta


def _emit_json(args, obj: dict, text_lines: Optional[List[str]] = None) -> None:
    if args.format == "text" and text_lines is not None:
        for line in text_lines:
            print(line)
    else:
        print(dumps(obj))


def _delta_source(text: str):
    if text in ("formula", "exhaustive"):
        return text
    try:
        return Fraction(text)
    except ValueError:
        raise ParamError(f"--delta1 must be 'formula', 'exhaustive' or a rational, got {text!r}") from None


def _gen_config(args) -> GenConfig:
    return GenConfig(
        l_policy=parse_policy(args.l_policy),
        delta1_source=_delta_source(args.delta1),
        mode=args.mode,
        max_attempts=args.budget,
        cost_guard=args.cost_guard,
    )


def _sample_chunk(payload):
    p, cfg, seed, start, count, delta = payload
    return generate_many(p, cfg, seed, count, delta, start)


def _run_samples(p, cfg, seed, count, delta, jobs):
    if jobs <= 1 or count <= 1:
        return generate_many(p, cfg, seed, count, delta)
    step = -(-count // jobs)
    chunks = [(p, cfg, seed, s, min(step, count - s), delta) for s in range(0, count, step)]
    out = []
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for part in pool.map(_sample_chunk, chunks):
            out.extend(part)
    return out


def cmd_sample(args) -> int:
    p = _params(args)
    seed = _seed(args)
    if args.count is None:
        args.count = 1
    if args.permutation:
        print(dumps({"meta": _meta(args, p, object="permutation")}))
        for i in range(args.count):
            print(perm_line(sample_permutation(p, replica_rng(seed, i))))
        return 0
    cfg = _gen_config(args)
    delta, source = (None, None)
    if cfg.mode == "exact":
        delta, source = resolve_delta1(p, cfg)
        if delta > 1:
            raise Delta1Error(f"delta1 = {float(delta):.4g} > 1 ({source}): exact mode unavailable")
    meta = _meta(
        args,
        p,
        mode=cfg.mode,
        approximate=cfg.mode != "exact",
        delta1=None if delta is None else str(delta),
        delta1_source=source,
    )
    results = _run_samples(p, cfg, seed, args.count, delta, args.jobs)
    if args.format == "text":
        for h, _ in results:
            print(" | ".join(" ".join(map(str, e)) for e in h))
    else:
        print(dumps({"meta": meta}))
        for h, _ in results:
            print(dumps(hypergraph_record(h, p)))
    if args.trace:
        with open(args.trace, "w") as fh:
            fh.write(dumps({"meta": meta, "traces": [t.as_dict() for _, t in results]}) + "\n")
    return 0


def cmd_enumerate(args) -> int:
    p = _params(args)
    if args.emit:
        with open(args.emit, "w") as fh:
            count = brute_force_count(p, emit=lambda h: fh.write(dumps(hypergraph_record(h, p)) + "\n"),
                                      cost_guard=args.subset_guard)
    else:
        count = brute_force_count(p, cost_guard=args.subset_guard)
    rep = formula_estimate(p, args.precision)
    rep.exact_count = count
    rep.ratio = None if not count else count / rep.estimate
    obj = {"meta": _meta(args, p), **rep.as_dict()}
    _emit_json(args, obj, [f"exact_count = {count}", f"estimate = {float(rep.estimate):.6g}"])
    return 0


def cmd_formula(args) -> int:
    p = _params(args)
    rep = formula_estimate(p, args.precision)
    try:
        rep.exact_count = brute_force_count(p, cost_guard=args.subset_guard)
        rep.ratio = rep.exact_count / rep.estimate if rep.exact_count else None
    except CostGuardExceeded:
        pass
    obj = {"meta": _meta(args, p), **rep.as_dict()}
    _emit_json(args, obj, [f"leading = {rep.formula_leading}", f"estimate = {float(rep.estimate):.6g}",
                           f"ratio = {obj['ratio']}"])
    return 0


def cmd_compare(args) -> int:
    p = _params(args)
    rep = compare(p, parse_policy(args.l_policy), args.precision, args.subset_guard, args.cost_guard)
    _emit_json(args, {"meta": _meta(args, p), **rep.as_dict()})
    return 0


def cmd_verify(args) -> int:
    p = _params(args)
    pol = parse_policy(args.l_policy)
    ok = True
    if args.what in ("identity", "bounds"):
        census = switch_census(p, pol, args.cost_guard, method=args.method)
        if args.what == "identity":
            rows = census.identity_rows()
            ok = all(r["status"] == "exact-equal" for r in rows)
            obj = {"meta": _meta(args, p, method=args.method), "identity": rows, "all_equal": ok}
            lines = [f"l={r['l']}: sum F = {r['sum_F']}, sum B = {r['sum_B']} -> {r['status']}" for r in rows]
        else:
            ok = census.F_violations == 0 and census.B_violations == 0
            obj = {
                "meta": _meta(args, p, method=args.method),
                "F_violations": census.F_violations,
                "B_violations": census.B_violations,
                "B_const": str(backward_constant(p)),
                "levels": [vars(c) for c in census.levels],
            }
            lines = [f"F violations: {census.F_violations}", f"B violations: {census.B_violations}"]
        _emit_json(args, obj, lines)
    elif args.what == "ratio":
        rows = ratio_table(p, pol, args.cost_guard)
        ok = all(r["identity"] for r in rows)
        _emit_json(args, {"meta": _meta(args, p), "rows": ratio_rows_json(rows)})
    elif args.what == "uniformity":
        seed = _seed(args)
        classes = list(iter_simple_hypergraphs(p))
        if not classes:
            raise ParamError(f"no simple hypergraph exists for {p.as_dict()}")
        count = args.count or max(1000, 50 * len(classes))
        cfg = _gen_config(args)
        delta, source = resolve_delta1(p, cfg) if cfg.mode == "exact" else (None, None)
        results = _run_samples(p, cfg, seed, count, delta, args.jobs)
        res = chi_square_uniformity([h for h, _ in results], classes)
        ok = res.p_value > 0.001
        obj = {
            "meta": _meta(args, p, mode=cfg.mode, delta1=None if delta is None else str(delta),
                          delta1_source=source),
            "N": count,
            "classes": res.classes,
            "statistic": res.statistic,
            "dof": res.dof,
            "p_value": res.p_value,
            "pass": ok,
        }
        _emit_json(args, obj, [f"C = {res.classes}, N = {count}, chi2 = {res.statistic:.3f}, p = {res.p_value:.4g}"])
    return 0 if ok else 1


def cmd_stats(args) -> int:
    p = _params(args)
    pol = parse_policy(args.l_policy)
    tails = [parse_policy("sqrt"), parse_policy(f"kd-omega:{args.omega}")]
    if args.exhaustive:
        summ = mc_exhaustive(p, pol, tails, args.cost_guard)
    else:
        seed = _seed(args)
        summ = mc_summary(p, args.samples, pol, replica_rng(seed, 0), tails)
    exact = exact_expectations(p)
    full = summ.as_dict()
    pick = {
        "lambda": ["good_loop_mean", "good_loop_variance", "lambda_mean", "lambda_variance"],
        "prob-e": ["fraction_in_E", "bad_loop_rate_mult3", "bad_loop_rate_double2", "multi_edge_rate"],
        "collision": ["multi_edge_pair_rate", "multi_edge_rate"],
        "tail": ["tail_exceed_rate", "good_loop_variance", "lambda_variance"],
    }[args.what]
    obj = {"meta": _meta(args, p, exhaustive=args.exhaustive), "N": full["N"]}
    obj.update({key: full[key] for key in pick})
    obj["se"] = {key: val for key, val in full["se"].items() if key in pick or key.startswith("tail:") and args.what == "tail"}
    if args.what == "lambda":
        obj["exact_loop_indicator"] = _num(exact.e_loop_indicator)
        obj["exact_good_loop_mean"] = _num(exact.e_lambda)
        obj["asymptote"] = _num(exact.asymptote)
    elif args.what == "collision":
        obj["exact_pair_collision"] = _num(exact.pair_collision)
    elif args.what == "prob-e":
        obj["error_scale"] = (p.d / p.n) ** 0.5 + p.d ** 2 / p.n ** (p.k - 2)
    _emit_json(args, obj)
    return 0


def cmd_switch_count(args) -> int:
    p = _params(args)
    pol = parse_policy(args.l_policy)
    if args.perm is not None:
        y = check_perm(json.loads(args.perm), p)
    else:
        y = sample_permutation(p, replica_rng(_seed(args), 0))
    cls = classify_perm(y, p, pol)
    lvl = cls.level
    obj = {"meta": _meta(args, p), "perm": list(y), "multigraph": [list(e) for e in build_multigraph(y, p)],
           **cls.as_dict()}
    fwd = enumerate_forward(y, p, pol) if lvl is not None and lvl >= 1 else None
    bwd = enumerate_backward(y, p, pol) if lvl is not None and lvl + 1 <= cls.L_used else None
    obj["F"] = None if fwd is None else len(fwd)
    obj["F_l"] = forward_constant(p, lvl) if lvl else None
    obj["B"] = None if bwd is None else len(bwd)
    if bwd is not None:
        assert obj["B"] == count_backward(y, p, pol)
    obj["B_const"] = str(backward_constant(p))
    obj["delta1_formula"] = str(delta1(p, cls.L_used))
    if args.explain:
        obj["forward_ops"] = [op.as_dict() for op in fwd or []]
        obj["backward_ops"] = [op.as_dict() for op in bwd or []]
    _emit_json(args, obj, [f"level = {lvl}, F = {obj['F']}, B = {obj['B']}"])
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-n", type=int, required=True, help="number of vertices")
    common.add_argument("-d", type=int, required=True, help="degree")
    common.add_argument("-k", type=int, required=True, help="edge size (>= 3)")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--format", choices=("jsonl", "text"), default="jsonl")
    common.add_argument("--l-policy", default="sqrt", help="sqrt | kd-omega:<omega>")
    common.add_argument("--precision", type=int, default=DEFAULT_PRECISION, help="decimal digits for exp()")
    common.add_argument("--cost-guard", type=int, default=DEFAULT_PERM_GUARD, help="max |P| for exhaustive scans")
    common.add_argument("--subset-guard", type=int, default=DEFAULT_SUBSET_GUARD, help="max C(n,k) for brute force")

    gen = argparse.ArgumentParser(add_help=False)
    gen.add_argument("--mode", choices=("exact", "approx"), default="exact")
    gen.add_argument("--count", type=int, default=None, help="number of samples (default 1; verify uniformity: max(1000, 50 C))")
    gen.add_argument("--budget", type=int, default=10 ** 6, help="max restarts per sample")
    gen.add_argument("--delta1", default="formula", help="formula | exhaustive | <rational>")
    gen.add_argument("--jobs", type=int, default=1)

    parser = argparse.ArgumentParser(prog="hyperreg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("sample", parents=[common, gen], help="generate random d-regular k-graphs")
    sp.add_argument("--trace", help="write per-sample traces to this JSON file")
    sp.add_argument("--permutation", action="store_true", help="emit raw permutations from P instead")
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("enumerate", parents=[common], help="exact count by backtracking")
    sp.add_argument("--emit", help="stream every hypergraph to this JSON-lines file")
    sp.set_defaults(func=cmd_enumerate)

    sp = sub.add_parser("formula", parents=[common], help="evaluate the asymptotic formula")
    sp.set_defaults(func=cmd_formula)

    sp = sub.add_parser("compare", parents=[common], help="formula against exact counts and class sizes")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("verify", parents=[common, gen], help="exhaustive identity, bound, ratio and uniformity checks")
    sp.add_argument("what", choices=("identity", "ratio", "uniformity", "bounds"))
    sp.add_argument("--method", choices=("multigraphs", "permutations"), default="multigraphs")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("stats", parents=[common], help="moment formulas and Monte-Carlo estimates")
    sp.add_argument("what", choices=("lambda", "prob-e", "collision", "tail"))
    sp.add_argument("--samples", type=int, default=10 ** 5)
    sp.add_argument("--omega", type=int, default=10)
    sp.add_argument("--exhaustive", action="store_true")
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("switch-count", parents=[common], help="F(y), B(y) for one permutation")
    sp.add_argument("--perm", help="JSON array of n*d labels (default: a random permutation)")
    sp.add_argument("--explain", action="store_true", help="list every switching op")
    sp.set_defaults(func=cmd_switch_count)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParamError, Delta1Error, SwitchingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (BudgetExhausted, CostGuardExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
