"""Command-line entry point.

Every command prints a short summary and, with ``--out PATH``, writes one
JSON report (``-`` writes it to standard output). Reports are deterministic
given the instance, ``--seed`` and ``--arith``.

Exit codes: 0 success, 1 failed checks, 2 parse or validation error,
3 enumeration cap exceeded, 4 internal failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from typing import Any, Sequence

from . import config
from .model import InstanceFormatError, ProfileCapError, instance_hash, instance_to_dict, load_instance, parse_instance

EXIT_OK = 0
EXIT_CHECKS = 1
EXIT_PARSE = 2
EXIT_CAP = 3
EXIT_INTERNAL = 4

CHAIN_PRICE_FACTOR = 28
CHAIN_LP_FACTOR = 4


def enc(x: Any) -> Any:
    """JSON number for floats and ints, ``"p/q"`` string for non-integral Fractions."""
    if isinstance(x, Fraction):
        return x.numerator if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    if isinstance(x, float) and x == float("inf"):
        return "inf"
    return x


def as_float(x: Any) -> float:
    return float(x)


def header(command: str, inst, args: argparse.Namespace) -> dict[str, Any]:
    return {
        "command": command,
        "version": config.VERSION,
        "instance_hash": instance_hash(inst),
        "seed": getattr(args, "seed", 0),
        "arith": getattr(args, "arith", "float"),
    }


def emit(report: dict[str, Any], out: str | None) -> None:
    if not out:
        return
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# pipeline pieces
# ---------------------------------------------------------------------------


def run_solve(inst, mode: str, samples: int, seed: int, arith: str) -> dict[str, Any]:
    """``optimize_rpp -> grid -> polytopes -> LP -> Q -> TPT`` as a report dictionary."""
    from .mechanisms import TptSpec, mechanism_report, optimize_rpp
    from .relaxation import build_dual_grid, compute_item_prices, grid_prev, polytopes_for, solution_report, solve_relaxation

    rpp, prev = optimize_rpp(inst)
    grid = build_dual_grid(inst, grid_prev(prev))
    kind = {"exact-poly": "exact", "sampled-poly": "sampled", "approx-poly": "approx"}[mode]
    polys = polytopes_for(inst, kind, samples=samples, seed=seed)
    sol = solve_relaxation(inst, grid, polys, mode=arith)
    prices = compute_item_prices(sol)
    Q = prices.Q
    exact_Q = tuple(q if isinstance(q, Fraction) else Fraction(q).limit_denominator(10**9) for q in Q)
    identity_gap = abs(2 * sum(Q) - sol.objective)
    res = sol.result
    return {
        "prev": as_float(prev),
        "prev_exact": enc(prev),
        "opt_lp": as_float(sol.objective),
        "Q": [as_float(q) for q in Q],
        "objective_equals_2_sum_Q": bool(identity_gap == 0 if arith == "rational" else identity_gap <= 1e-9),
        "grid": {"prev_used": enc(grid.prev), "deltas": [enc(d) for d in grid.deltas]},
        "polytopes": [p.describe() for p in polys],
        "lp": {
            "rows": sol.relax.lp.num_rows,
            "vars": sol.relax.lp.num_vars,
            "iterations": res.iterations if res else None,
            "max_violation": as_float(res.max_violation) if res else None,
            "fallback": res.fallback if res else None,
        },
        "rpp": mechanism_report(rpp),
        "tpt": mechanism_report(TptSpec(exact_Q)),
        "solution": solution_report(sol, prices),
        "_internal": (rpp, prev, sol, TptSpec(exact_Q)),
    }


def strip_internal(d: dict[str, Any]) -> dict[str, Any]:
    return {k: v for k, v in d.items() if not k.startswith("_")}


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_solve(args: argparse.Namespace) -> int:
    inst = load_instance(args.instance)
    body = run_solve(inst, args.mode, args.poly_samples, args.seed, args.arith)
    report = header("solve", inst, args)
    report.update({"mode": args.mode, "poly_samples": args.poly_samples, "instance": instance_to_dict(inst)})
    report.update(strip_internal(body))
    print(f"PRev~ = {body['prev']:.6g}   OPT_LP = {body['opt_lp']:.6g}")
    print("Q = [" + ", ".join(f"{q:.6g}" for q in body["Q"]) + "]")
    print(f"objective == 2*sum(Q): {body['objective_equals_2_sum_Q']}")
    emit(report, args.out)
    return EXIT_OK


def cmd_opt(args: argparse.Namespace) -> int:
    from .exact_oracle import optimal_bic_revenue, witness_report

    inst = load_instance(args.instance)
    res = optimal_bic_revenue(inst, mode=args.arith, cap=args.cap)
    report = header("opt", inst, args)
    report.update({"opt": as_float(res.opt), "opt_exact": enc(res.opt) if isinstance(res.opt, Fraction) else None})
    report["max_violation"] = as_float(res.max_violation)
    report["witness"] = witness_report(res.witness)
    print(f"OPT = {as_float(res.opt):.6g}")
    emit(report, args.out)
    return EXIT_OK


def compare_row(inst, args: argparse.Namespace) -> dict[str, Any]:
    from .exact_oracle import optimal_bic_revenue
    from .mechanisms import expected_revenue

    body = run_solve(inst, args.mode, args.poly_samples, args.seed, args.arith)
    rpp, prev, sol, tpt = body["_internal"]
    opt = optimal_bic_revenue(inst, mode=args.arith, cap=args.cap).opt
    rev_rpp = expected_revenue(rpp, inst, cap=args.cap).value
    rev_tpt = expected_revenue(tpt, inst, cap=args.cap).value
    best = max(rev_rpp, rev_tpt)
    ratio = 1.0 if opt == 0 else as_float(best) / as_float(opt)
    bound = CHAIN_PRICE_FACTOR * as_float(prev) + CHAIN_LP_FACTOR * as_float(sol.objective)
    return {
        "opt": as_float(opt),
        "prev": as_float(prev),
        "opt_lp": as_float(sol.objective),
        "rev_rpp": as_float(rev_rpp),
        "rev_tpt": as_float(rev_tpt),
        "Q": body["Q"],
        "ratio": ratio,
        "chain_bound": bound,
        "chain_pass": as_float(opt) <= bound + 1e-6,
    }


def cmd_compare(args: argparse.Namespace) -> int:
    inst = load_instance(args.instance)
    row = compare_row(inst, args)
    report = header("compare", inst, args)
    report.update({"mode": args.mode, "poly_samples": args.poly_samples})
    report.update(row)
    print(f"{'OPT':>10} {'PRev':>10} {'OPT_LP':>10} {'Rev(TPT)':>10} {'Rev(RPP)':>10} {'max/OPT':>8}  chain")
    print(
        f"{row['opt']:10.5g} {row['prev']:10.5g} {row['opt_lp']:10.5g} {row['rev_tpt']:10.5g} "
        f"{row['rev_rpp']:10.5g} {row['ratio']:8.4f}  {'PASS' if row['chain_pass'] else 'FAIL'}"
    )
    emit(report, args.out)
    return EXIT_OK if row["chain_pass"] else EXIT_CHECKS


def cmd_sample(args: argparse.Namespace) -> int:
    from .sampling import draw_indices, dkw_sample_count, instance_from_draws, rescale_to_unit, sample_pipeline, value_range

    inst = load_instance(args.instance)
    try:
        N = dkw_sample_count(inst.n, inst.m, args.eps, args.delta)
    except ValueError as exc:
        raise InstanceFormatError(str(exc)) from exc
    # keep stdout clean for a JSON report sent there
    status = sys.stderr if args.out == "-" else sys.stdout
    print(f"N = {N}", file=status)
    lo, hi = value_range(inst)
    scaled, factor = rescale_to_unit(inst)
    if factor != 1:
        print(f"warning: values exceed 1 (max {enc(hi)}); rescaled by 1/{enc(factor)}", file=sys.stderr)
    report = header("sample", inst, args)
    report.update({"N": N, "eps": args.eps, "delta": args.delta, "rescale": enc(factor)})
    log = draw_indices(scaled, N, args.seed)
    if args.log:
        with open(args.log, "w", encoding="utf-8", newline="") as fh:
            log.write_csv(fh, scaled)
    report["empirical_instance"] = instance_to_dict(instance_from_draws(scaled, log))
    if args.pipeline:
        rep = sample_pipeline(scaled, args.eps, args.delta, args.seed)
        report["pipeline"] = rep
        print(
            f"OPT(true) = {rep['opt_true']:.6g}  Rev_RPP = {rep['rev_rpp_true']:.6g}  "
            f"Rev_TPT = {rep['rev_tpt_true']:.6g}  max d_K = {rep['max_kolmogorov']:.4g}",
            file=status,
        )
    emit(report, args.out)
    return EXIT_OK


def load_instance_or_report(path: str):
    """An instance file, or a ``solve`` report carrying its instance and settings."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"JSON error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if isinstance(obj, dict) and obj.get("command") == "solve":
        if "instance" not in obj:
            raise InstanceFormatError("solve report has no embedded instance")
        settings = {k: obj.get(k) for k in ("mode", "poly_samples", "seed", "arith")}
        return parse_instance(obj["instance"]), settings
    return parse_instance(obj), {}


def cmd_diagnose(args: argparse.Namespace) -> int:
    from .diagnostics import diagnostics_report, run_diagnostics

    inst, settings = load_instance_or_report(args.input)
    mode = settings.get("mode") or args.mode
    samples = settings.get("poly_samples") or args.poly_samples
    seed = settings.get("seed") if settings.get("seed") is not None else args.seed
    arith = settings.get("arith") or args.arith
    body = run_solve(inst, mode, samples, seed, arith)
    _, prev, sol, _ = body["_internal"]
    from .relaxation import compute_item_prices

    rep = run_diagnostics(inst, sol, compute_item_prices(sol).Q, prev)
    out = diagnostics_report(rep)
    report = header("diagnose", inst, argparse.Namespace(seed=seed, arith=arith))
    report.update(out)
    print(f"{'item':>4} {'Q':>10} {'Qhat':>10}  Qhat<=Q")
    for j, (q, qh) in enumerate(zip(rep.Q, rep.Qhat)):
        print(f"{j:4d} {float(q):10.5g} {float(qh):10.5g}  {float(qh) <= float(q) + 1e-9}")
    for i, t in enumerate(rep.tau):
        print(f"tau[{i}] = {float(t.value):.6g}{'  (jump)' if t.jump else ''}")
    for s in rep.suites:
        print(f"{s.name:>8}: {'PASS' if s.ok else 'FAIL'} ({s.checks} set pairs, {s.violations} violations)")
    print(f"sum(Q - Qhat) = {float(rep.gap):.6g} <= 236.5*PRev = {float(rep.gap_bound):.6g}: {out['gap_within_bound']}")
    emit(report, args.out)
    ok = rep.qhat_ok and all(s.ok for s in rep.suites)
    return EXIT_OK if ok else EXIT_CHECKS


def _run_criterion(k: int):
    from .acceptance import CRITERIA

    return CRITERIA[k - 1]()


def cmd_selftest(args: argparse.Namespace) -> int:
    from .acceptance import CRITERIA

    ks = args.only or list(range(1, len(CRITERIA) + 1))
    status = sys.stderr if args.out == "-" else sys.stdout
    if args.workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_run_criterion, ks))
        for r in results:
            print(r.line(), file=status)
    else:
        results = []
        for k in ks:
            r = _run_criterion(k)
            print(r.line(), file=status, flush=True)
            results.append(r)
    report = {
        "command": "selftest",
        "version": config.VERSION,
        "criteria": [{"number": r.number, "title": r.title, "pass": r.ok, "detail": r.detail} for r in results],
    }
    emit(report, args.out)
    return EXIT_OK if all(r.ok for r in results) else EXIT_CHECKS


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simplemech", description="Simple mechanisms for item-independent auctions.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {config.VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, instance: bool = True) -> None:
        if instance:
            p.add_argument("instance", help="instance JSON file")
        p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
        p.add_argument("--arith", choices=["float", "rational"], default="float", help="LP arithmetic")
        p.add_argument("--out", help="write the JSON report here ('-' for stdout)")
        p.add_argument("--cap", type=int, default=config.PROFILE_CAP, help="enumeration cap")

    def poly(p: argparse.ArgumentParser) -> None:
        p.add_argument("--mode", choices=["exact-poly", "sampled-poly", "approx-poly"], default="exact-poly")
        p.add_argument("--poly-samples", type=int, default=config.DEFAULT_POLY_SAMPLES)

    p = sub.add_parser("solve", help="solve the relaxation and build the mechanisms")
    common(p)
    poly(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("opt", help="optimal BIC revenue by brute-force LP")
    common(p)
    p.set_defaults(func=cmd_opt)

    p = sub.add_parser("compare", help="OPT, PRev, OPT_LP and mechanism revenues")
    common(p)
    poly(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sample", help="DKW sample size and empirical instance")
    common(p)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--log", help="CSV file for the drawn values")
    p.add_argument("--pipeline", action="store_true", help="fit mechanisms on the sample and evaluate them")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("diagnose", help="tau, Qhat and the mu / eta property suites")
    p.add_argument("input", help="instance JSON file or a solve report")
    common(p, instance=False)
    poly(p)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("selftest", help="run the acceptance checks on the shipped battery")
    p.add_argument("--only", type=int, nargs="*", help="criterion numbers to run")
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    p.add_argument("--out", help="write the JSON report here ('-' for stdout)")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InstanceFormatError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ProfileCapError as exc:
        print(f"error: enumeration too large: {exc}", file=sys.stderr)
        return EXIT_CAP
    except Exception as exc:  # noqa: BLE001 - reported as an internal failure
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
