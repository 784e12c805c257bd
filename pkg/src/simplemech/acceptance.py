"""The ten acceptance checks, shared by ``simplemech selftest`` and the test suite.

Each ``criterion_k`` returns a :class:`CriterionResult`; heavy per-instance
work (OPT, PRev, relaxation) is cached per process.
"""

from __future__ import annotations

import functools
import itertools
import math
import random
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable

import numpy as np

from . import config
from .battery import load_battery, load_xos_battery, random_ca_instance
from .diagnostics import run_diagnostics
from .exact_oracle import (
    BicResult,
    construct_duals,
    interim_allocation,
    lp_solution_from_mechanism,
    optimal_bic_revenue,
)
from .mechanisms import RppSpec, TptSpec, expected_revenue, iter_exact_runs, optimize_rpp, simulate, step_is_rational
from .model import (
    XOS,
    Additive,
    CardinalityCap,
    ConstrainedAdditive,
    ExplicitFamily,
    Instance,
    UnitDemand,
    all_bundles,
    bundle_key,
)
from .oracles import (
    adjustable_demand_oracle,
    common_denominator,
    counterexample_family,
    demand_oracle,
    mask_to_bundle,
    xos_demand_batch,
    xos_oracle,
)
from .polytopes import build_approx_polytope, build_exact_polytope, find_point_in_box, membership, sample_point
from .relaxation import (
    RelaxationSolution,
    build_dual_grid,
    compute_item_prices,
    grid_prev,
    polytopes_for,
    solve_relaxation,
)
from .sampling import concentration_trials

TOL = 1e-6


@dataclass(frozen=True)
class CriterionResult:
    number: int
    title: str
    ok: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.ok else 'FAIL'} criterion {self.number}: {self.title} ({self.detail}; {self.seconds:.1f}s)"


def _timed(number: int, title: str) -> Callable:
    def wrap(fn: Callable[[], tuple[bool, str]]) -> Callable[[], CriterionResult]:
        @functools.wraps(fn)
        def run() -> CriterionResult:
            t0 = time.perf_counter()
            try:
                ok, detail = fn()
            except Exception as exc:  # a crash is a failed criterion, not a test-runner error
                ok, detail = False, f"{type(exc).__name__}: {exc}"
            return CriterionResult(number, title, ok, detail, time.perf_counter() - t0)

        return run

    return wrap


# ---------------------------------------------------------------------------
# cached battery solves
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SolvedInstance:
    inst: Instance
    bic: BicResult
    rpp: RppSpec
    prev: Fraction
    sol: RelaxationSolution

    @property
    def Q(self) -> tuple[Any, ...]:
        return compute_item_prices(self.sol).Q


@functools.lru_cache(maxsize=None)
def battery() -> tuple[Instance, ...]:
    return tuple(load_battery())


@functools.lru_cache(maxsize=None)
def solved(k: int) -> SolvedInstance:
    inst = battery()[k]
    bic = optimal_bic_revenue(inst)
    rpp, prev = optimize_rpp(inst)
    grid = build_dual_grid(inst, grid_prev(prev))
    sol = solve_relaxation(inst, grid, polytopes_for(inst, "exact"))
    return SolvedInstance(inst, bic, rpp, prev, sol)


def solve_extra(inst: Instance, mode: str = "float") -> tuple[Fraction, RelaxationSolution]:
    _, prev = optimize_rpp(inst)
    grid = build_dual_grid(inst, grid_prev(prev))
    return prev, solve_relaxation(inst, grid, polytopes_for(inst, "exact"), mode=mode)


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------


@_timed(1, "OPT <= 28 PRev + 4 OPT_LP on the shipped battery")
def criterion_1() -> tuple[bool, str]:
    fails = []
    worst = -math.inf
    for k in range(len(battery())):
        s = solved(k)
        slack = float(s.bic.opt) - (28 * float(s.prev) + 4 * float(s.sol.objective))
        worst = max(worst, slack)
        if slack > TOL:
            fails.append(k)
    return not fails and len(battery()) >= 30, f"{len(battery())} instances, max OPT - bound = {worst:.4g}, failures {fails}"


@_timed(2, "2 sum Q equals the LP objective")
def criterion_2() -> tuple[bool, str]:
    worst = 0.0
    for k in range(len(battery())):
        s = solved(k)
        worst = max(worst, abs(2 * sum(s.Q) - s.sol.objective))
    exact_bad = 0
    # rational re-solves on the small shapes (m = 1 and n = 1, m = 2)
    picks = [k for k in range(len(battery())) if battery()[k].n * battery()[k].m <= 2][:8]
    for k in picks:
        _, sol = solve_extra(battery()[k], "rational")
        if 2 * sum(compute_item_prices(sol).Q) != sol.objective:
            exact_bad += 1
    ok = worst <= 1e-9 and exact_bad == 0
    return ok, f"float max gap {worst:.3g} over {len(battery())}; rational exact on {len(picks)} with {exact_bad} mismatches"


@_timed(3, "constructed LP point is feasible with objective >= Core")
def criterion_3() -> tuple[bool, str]:
    bad = []
    worst = Fraction(0)
    for k in range(len(battery())):
        s = solved(k)
        sigma = interim_allocation(s.inst, s.bic.witness)
        duals = construct_duals(s.inst, sigma)
        cons = lp_solution_from_mechanism(s.inst, s.sol.grid, sigma, duals)
        worst = max(worst, cons.max_violation)
        if cons.max_violation != 0 or cons.solution.objective < cons.core - Fraction(1, 10**9):
            bad.append(k)
    return not bad, f"{len(battery())} witnesses, max residual {worst}, failures {bad}"


def _sandwich(instances: list[Instance], mode: str, factor: Fraction, points: int, seed: int) -> tuple[int, int]:
    rng = np.random.default_rng(seed)
    pairs = [(inst, i) for inst in instances for i in range(inst.n)]
    bad = total = 0
    for p in range(points):
        inst, i = pairs[p % len(pairs)]
        W = build_exact_polytope(inst, i)
        Wh = build_approx_polytope(inst, i, mode=mode, samples=500, seed=0)
        x = sample_point(W.scaled(factor), rng)
        if membership(Wh, list(x), tol=1e-8).distance > 1e-8:
            bad += 1
        y = sample_point(Wh, rng)
        if membership(W, list(y), tol=1e-8).distance > 1e-8:
            bad += 1
        total += 2
    return bad, total


@_timed(4, "polytope sandwich (1/6 exact, 1/12 sampled)")
def criterion_4() -> tuple[bool, str]:
    insts = list(battery())
    b1, t1 = _sandwich(insts, "exact", Fraction(1, 6), 100, 1)
    b2, t2 = _sandwich(insts, "sampled", Fraction(1, 12), 100, 2)
    return b1 + b2 == 0, f"exact {b1}/{t1} outside, sampled N=500 {b2}/{t2} outside"


@_timed(5, "XOS coordinate ratios and OPT_LP(P) <= 64 OPT_LP(P')")
def criterion_5() -> tuple[bool, str]:
    rng = np.random.default_rng(5)
    insts = load_xos_battery()
    ratio_bad = chain_bad = 0
    worst = 0.0
    for inst in insts:
        for i in range(inst.n):
            W = build_exact_polytope(inst, i)
            Wh = build_approx_polytope(inst, i, mode="sampled", samples=500, seed=0)
            D = W.dim // 2
            for _ in range(50):
                p = sample_point(Wh, rng)
                lo = [x / 4 for x in p]
                hi = [x * 1.5 for x in p[:D]] + [x * 1.25 for x in p[D:]]
                if find_point_in_box(W, lo, hi) is None:
                    ratio_bad += 1
        _, prev = optimize_rpp(inst)
        grid = build_dual_grid(inst, grid_prev(prev))
        lp_p = solve_relaxation(inst, grid, polytopes_for(inst, "exact")).objective
        lp_pp = solve_relaxation(inst, grid, polytopes_for(inst, "approx")).objective
        worst = max(worst, lp_p / lp_pp if lp_pp else 0.0)
        if lp_p > 64 * lp_pp + TOL:
            chain_bad += 1
    ok = ratio_bad == 0 and chain_bad == 0 and len(insts) >= 10
    return ok, f"{len(insts)} instances x 50 points, ratio failures {ratio_bad}, chain failures {chain_bad}, max OPT_LP/OPT_LP' {worst:.3g}"


def _random_valuation(rng: random.Random, m: int) -> tuple[Any, tuple]:
    kind = rng.choice(["additive", "unit", "cap", "family", "xos"])
    if kind == "xos":
        K = rng.randint(1, 8)
        alpha = tuple((tuple(Fraction(rng.randint(0, 12), rng.randint(1, 4)) for _ in range(K)),) for _ in range(m))
        return XOS(alpha), (0,) * m
    if kind == "family":
        sets = {frozenset()}
        for S in all_bundles(m):
            if rng.random() < 0.15:
                for r in range(len(S) + 1):
                    sets.update(frozenset(c) for c in itertools.combinations(sorted(S), r))
        feas = ExplicitFamily(tuple(sorted(sets, key=bundle_key)))
    else:
        feas = {"additive": Additive(), "unit": UnitDemand(), "cap": CardinalityCap(rng.randint(1, m))}[kind]
    return ConstrainedAdditive(feas), tuple(Fraction(rng.randint(0, 12), rng.randint(1, 4)) for _ in range(m))


def _brute_demand(val: Any, t: tuple, p: list[Fraction], m: int) -> tuple[frozenset[int], Fraction]:
    """Exhaustive demand with integer arithmetic over all ``2^m`` bundles."""
    if isinstance(val, XOS):
        funcs = [[val.alpha[j][0][k] for j in range(m)] for k in range(val.K)]
    else:
        funcs = [list(t)]
    D = common_denominator([x for f in funcs for x in f] + list(p))
    F = [[int(x * D) for x in f] for f in funcs]
    P = [int(x * D) for x in p]
    best, bestS = 0, frozenset()
    for S in all_bundles(m):
        if isinstance(val, ConstrainedAdditive) and not val.feasibility.is_feasible(S):
            continue
        u = max(sum(f[j] for j in S) for f in F) - sum(P[j] for j in S)
        if u > best:
            best, bestS = u, S
    return bestS, Fraction(best, D)


def _brute_adjustable(val: XOS, b: list[Fraction], p: list[Fraction], m: int) -> Fraction:
    D = common_denominator([b[j] * val.alpha[j][0][k] for j in range(m) for k in range(val.K)] + list(p))
    best = 0
    for k in range(val.K):
        marg = [int((b[j] * val.alpha[j][0][k] - p[j]) * D) for j in range(m)]
        for S in all_bundles(m):
            best = max(best, sum(marg[j] for j in S))
    return Fraction(best, D)


@_timed(6, "demand and adjustable demand match exhaustive enumeration")
def criterion_6() -> tuple[bool, str]:
    rng = random.Random(6)
    dem_bad = adj_bad = 0
    for _ in range(1000):
        m = rng.randint(1, 8)
        val, t = _random_valuation(rng, m)
        p = [Fraction(rng.randint(0, 12), rng.randint(1, 4)) for _ in range(m)]
        ans = demand_oracle(val, t, p)
        S, u = _brute_demand(val, t, p, m)
        if ans.utility != u or ans.bundle != S:
            dem_bad += 1
    for _ in range(1000):
        m = rng.randint(1, 8)
        K = rng.randint(1, 8)
        val = XOS(tuple((tuple(Fraction(rng.randint(0, 12), rng.randint(1, 4)) for _ in range(K)),) for _ in range(m)))
        b = [Fraction(rng.randint(0, 6), rng.randint(1, 3)) for _ in range(m)]
        p = [Fraction(rng.randint(0, 12), rng.randint(1, 4)) for _ in range(m)]
        ans = adjustable_demand_oracle(val, (0,) * m, b, p)
        recomputed = sum((b[j] * val.alpha[j][0][ans.k] - p[j] for j in ans.bundle), Fraction(0))
        if ans.objective != _brute_adjustable(val, b, p, m) or recomputed != ans.objective:
            adj_bad += 1
    return dem_bad + adj_bad == 0, f"1000 demand queries ({dem_bad} mismatches), 1000 adjustable queries ({adj_bad} mismatches)"


def counterexample_check(ell: int = 4, eps: Fraction = Fraction(1, 10), eps_prime: Fraction = Fraction(1, 100)) -> dict[str, int]:
    """Exhaustive structural checks on the counterexample family.

    Returns violation counts for the winning-function lemma and for demand
    indistinguishability on the price grid, plus a scalar cross-check of the
    vectorized demand on a seeded subset of grid points.
    """
    fam = counterexample_family(ell, eps, eps_prime)
    m = fam.m
    special = 2 * ell
    lemma_bad = 0
    for r, v in enumerate(fam.family):
        for S in all_bundles(m):
            if not S:
                continue
            wins = xos_oracle(v, fam.type, S) == special
            if wins != (S == fam.S1 | fam.C[r]):
                lemma_bad += 1
    grid = [Fraction(0), Fraction(2, ell) * eps_prime, Fraction(2, ell) * eps, Fraction(1), None]
    finite = [g for g in grid if g is not None]
    coefs = [c for v in fam.family for item in v.alpha for row in item for c in row]
    D = common_denominator(finite + coefs)
    big = int(D * (sum(coefs) + 1))
    levels = np.array([int(g * D) if g is not None else big for g in grid], dtype=np.int64)
    idx = np.array(list(itertools.product(range(len(grid)), repeat=m)), dtype=np.int64)
    prices = levels[idx]

    def funcs(v: XOS) -> np.ndarray:
        return np.array([[int(v.alpha[j][0][k] * D) for j in range(m)] for k in range(v.K)], dtype=np.int64)

    hat_mask, hat_u = xos_demand_batch(funcs(fam.v_hat), prices)
    low = prices[:, ell:] <= levels[1]
    grid_bad = 0
    checked = 0
    for r, v in enumerate(fam.family):
        cmask = np.array([j in fam.C[r] for j in range(ell, m)])
        relevant = ~np.all(low == cmask[None, :], axis=1)
        mask, u = xos_demand_batch(funcs(v), prices)
        diff = relevant & ((mask != hat_mask) | (u != hat_u))
        grid_bad += int(diff.sum())
        checked += int(relevant.sum())
    # scalar cross-check of the vectorized demand
    rng = np.random.default_rng(7)
    cross_bad = 0
    for row in rng.choice(len(idx), size=300, replace=False):
        p = [grid[g] if grid[g] is not None else config.INF_PRICE for g in idx[row]]
        ans = demand_oracle(fam.v_hat, fam.type, p)
        if ans.bundle != mask_to_bundle(int(hat_mask[row])) or ans.utility * D != int(hat_u[row]):
            cross_bad += 1
    return {"lemma_violations": lemma_bad, "grid_violations": grid_bad, "grid_checked": checked, "cross_check_mismatches": cross_bad}


@_timed(7, "counterexample family structure at ell = 4")
def criterion_7() -> tuple[bool, str]:
    c = counterexample_check()
    ok = c["lemma_violations"] == 0 and c["grid_violations"] == 0 and c["cross_check_mismatches"] == 0
    return ok, (
        f"winner lemma violations {c['lemma_violations']} over 6 x 255 sets; demand differences "
        f"{c['grid_violations']} over {c['grid_checked']} grid cases; cross-check mismatches {c['cross_check_mismatches']}"
    )


@functools.lru_cache(maxsize=None)
def diagnostic_instances() -> tuple[tuple[Instance, Fraction, RelaxationSolution], ...]:
    """Six battery instances plus four seeded instances with three or four items."""
    out = []
    for k in range(6):
        s = solved(k)
        out.append((s.inst, s.prev, s.sol))
    rng = random.Random(8)
    for n, m in [(1, 3), (1, 4), (2, 3), (1, 4)]:
        inst = random_ca_instance(rng, n, m, max_support=2)
        prev, sol = solve_extra(inst)
        out.append((inst, prev, sol))
    return tuple(out)


@_timed(8, "mu / eta suites and Qhat <= Q")
def criterion_8() -> tuple[bool, str]:
    violations = 0
    qbad = 0
    suites = 0
    for inst, prev, sol in diagnostic_instances():
        rep = run_diagnostics(inst, sol, compute_item_prices(sol).Q, prev)
        violations += sum(s.violations for s in rep.suites)
        suites += len(rep.suites)
        qbad += 0 if rep.qhat_ok else 1
    n = len(diagnostic_instances())
    return violations == 0 and qbad == 0, f"{n} instances, {suites} suites, {violations} violations, {qbad} instances with Qhat > Q"


def tpt_from_solution(sol: RelaxationSolution) -> TptSpec:
    return TptSpec(tuple(Fraction(q).limit_denominator(10**9) for q in compute_item_prices(sol).Q))


@_timed(9, "mechanism rationality and Monte Carlo agreement")
def criterion_9() -> tuple[bool, str]:
    irrational = steps = 0
    mc_bad = []
    for k in range(len(battery())):
        s = solved(k)
        for spec in (s.rpp, tpt_from_solution(s.sol)):
            exact = 0
            for p, prof, ent in iter_exact_runs(spec, s.inst):
                out = simulate(spec, s.inst, prof, ent)
                exact += p * out.revenue
                for st in out.steps:
                    steps += 1
                    if not step_is_rational(s.inst, st):
                        irrational += 1
            if k % 4 == 3:
                est = expected_revenue(spec, s.inst, "mc", samples=100_000, seed=k)
                if abs(est.value - float(exact)) > 3 * est.stderr + 1e-12:
                    mc_bad.append((k, type(spec).__name__))
    return irrational == 0 and not mc_bad, f"{steps} steps, {irrational} irrational; MC outside 3 stderr: {mc_bad}"


@_timed(10, "DKW concentration over 200 trials")
def criterion_10() -> tuple[bool, str]:
    from .model import DiscreteMarginal

    wide = Instance(1, 1, ((DiscreteMarginal.uniform(range(1, 21)),),), (ConstrainedAdditive(Additive()),))
    details = []
    ok = True
    for inst in (wide, battery()[3]):
        r = concentration_trials(inst, 0.1, 0.1, trials=200, seed=10)
        ok &= r.ok
        details.append(f"n={inst.n} m={inst.m} N={r.N}: {r.exceed} > eps (allowed {r.allowed:.1f})")
    return ok, "; ".join(details)


CRITERIA = (
    criterion_1,
    criterion_2,
    criterion_3,
    criterion_4,
    criterion_5,
    criterion_6,
    criterion_7,
    criterion_8,
    criterion_9,
    criterion_10,
)


def run_all(only: list[int] | None = None, echo: Callable[[str], None] | None = None) -> list[CriterionResult]:
    out = []
    for k, fn in enumerate(CRITERIA, start=1):
        if only and k not in only:
            continue
        res = fn()
        if echo:
            echo(res.line())
        out.append(res)
    return out


__all__ = ["CRITERIA", "CriterionResult", "counterexample_check", "run_all", "solved"]
