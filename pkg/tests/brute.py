"""Independent brute-force oracles used only by the tests.

Nothing here calls into the package's solver or oracle code paths; the
functions re-derive each quantity from its definition by enumeration.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from simplemech.model import XOS, ConstrainedAdditive, Instance

ZERO = Fraction(0)


def subsets(items: Sequence[int]):
    items = sorted(items)
    for r in range(len(items) + 1):
        for c in itertools.combinations(items, r):
            yield frozenset(c)


def set_order(S: frozenset[int]) -> tuple[int, tuple[int, ...]]:
    """Fewest items first, then the lexicographically smallest sorted tuple."""
    return len(S), tuple(sorted(S))


def feasible(val: Any, S: frozenset[int]) -> bool:
    feas = val.feasibility
    kind = type(feas).__name__
    if kind == "Additive":
        return True
    if kind == "UnitDemand":
        return len(S) <= 1
    if kind == "CardinalityCap":
        return len(S) <= feas.k
    return S in set(feas.sets)


def value(val: Any, tvec: Sequence[Any], S: frozenset[int]) -> Any:
    if isinstance(val, XOS):
        K = val.K
        return max((sum((val.alpha[j][tvec[j]][k] for j in S), ZERO) for k in range(K)), default=ZERO)
    return max(sum((tvec[j] for j in R), ZERO) for R in subsets(S) if feasible(val, R))


def demand(val: Any, tvec: Sequence[Any], prices: Sequence[Any]) -> tuple[frozenset[int], Any]:
    m = len(prices)
    best, bestS = None, None
    for S in sorted(subsets(range(m)), key=set_order):
        if isinstance(val, ConstrainedAdditive) and not feasible(val, S):
            continue
        if any(prices[j] == float("inf") for j in S):
            continue
        u = value(val, tvec, S) - sum((prices[j] for j in S), ZERO)
        if best is None or u > best:
            best, bestS = u, S
    return bestS, best


def adjustable(val: XOS, tvec: Sequence[int], b: Sequence[Any], p: Sequence[Any]) -> Any:
    m = len(p)
    best = ZERO
    for k in range(val.K):
        for S in subsets(range(m)):
            best = max(best, sum((b[j] * val.alpha[j][tvec[j]][k] - p[j] for j in S), ZERO))
    return best


def profiles(inst: Instance):
    """All ``(profile, probability)`` pairs by direct product."""
    per_bidder = []
    for i in range(inst.n):
        opts = []
        for combo in itertools.product(*[range(d.size) for d in inst.marginals[i]]):
            p = Fraction(1)
            for j, v in enumerate(combo):
                p *= inst.marginals[i][j].probs[v]
            opts.append((combo, p))
        per_bidder.append(opts)
    for combo in itertools.product(*per_bidder):
        prob = Fraction(1)
        for _, p in combo:
            prob *= p
        yield tuple(t for t, _ in combo), prob


def singleton(inst: Instance, i: int, j: int, v: int) -> Fraction:
    val = inst.valuations[i]
    if isinstance(val, XOS):
        return max(val.alpha[j][v])
    if not feasible(val, frozenset([j])):
        return ZERO
    return inst.marginals[i][j].support[v]


def rpp_revenue(inst: Instance, prices: Sequence[Sequence[Any]]) -> Fraction:
    """Rationed posted prices, bidders in index order, buy at nonnegative surplus, lowest item on ties."""
    total = ZERO
    for prof, prob in profiles(inst):
        avail = set(range(inst.m))
        rev = ZERO
        for i in range(inst.n):
            options = [
                (singleton(inst, i, j, prof[i][j]) - prices[i][j], -j, j)
                for j in sorted(avail)
                if prices[i][j] != float("inf")
            ]
            options = [o for o in options if o[0] >= 0]
            if options:
                _, _, j = max(options)
                rev += prices[i][j]
                avail.discard(j)
        total += prob * rev
    return total


def monopoly_revenue(support: Sequence[Fraction], probs: Sequence[Fraction]) -> Fraction:
    """``max_p p Pr[v >= p]`` over support prices (single bidder, single item)."""
    return max(p * sum((q for v, q in zip(support, probs) if v >= p), ZERO) for p in support)


def lp_vertices_max(A: np.ndarray, b: np.ndarray, c: np.ndarray) -> float | None:
    """``max c.x`` over ``A x <= b, x >= 0`` by enumerating all basic points (bounded case)."""
    m, n = A.shape
    G = np.vstack([A, -np.eye(n)])
    h = np.concatenate([b, np.zeros(n)])
    best = None
    for rows in itertools.combinations(range(len(G)), n):
        M = G[list(rows)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        x = np.linalg.solve(M, h[list(rows)])
        if np.all(G @ x <= h + 1e-9):
            v = float(c @ x)
            best = v if best is None or v > best else best
    return best


def scipy_optimum(lp: Any) -> tuple[str, float | None]:
    """Solve a package ``LinearProgram`` with scipy's HiGHS (maximization)."""
    from scipy.optimize import linprog

    n = lp.num_vars
    c = np.zeros(n)
    for k, a in lp.obj.items() if hasattr(lp.obj, "items") else enumerate(lp.obj):
        c[k] = float(a)
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for row in lp.rows:
        vec = np.zeros(n)
        for k, a in row.coeffs:
            vec[k] += float(a)
        if row.rel == "<=":
            A_ub.append(vec)
            b_ub.append(float(row.rhs))
        elif row.rel == ">=":
            A_ub.append(-vec)
            b_ub.append(-float(row.rhs))
        else:
            A_eq.append(vec)
            b_eq.append(float(row.rhs))
    bounds = [(None if lp.lb[k] == -float("inf") else float(lp.lb[k]), None if lp.ub[k] == float("inf") else float(lp.ub[k])) for k in range(n)]
    res = linprog(
        -c,
        A_ub=np.array(A_ub) if A_ub else None,
        b_ub=np.array(b_ub) if b_ub else None,
        A_eq=np.array(A_eq) if A_eq else None,
        b_eq=np.array(b_eq) if b_eq else None,
        bounds=bounds,
        method="highs",
    )
    status = {0: "optimal", 2: "infeasible", 3: "unbounded"}.get(res.status, "other")
    return status, (-res.fun if res.status == 0 else None)


def _tvec(inst: Instance, i: int, t: Sequence[int]) -> tuple:
    if isinstance(inst.valuations[i], XOS):
        return tuple(t)
    return tuple(inst.marginals[i][j].support[t[j]] for j in range(inst.m))


def tpt_revenue(inst: Instance, Q: Sequence[Any]) -> Fraction:
    """Two-part tariff: the fee is a fresh sample's best surplus; ties enter."""
    inf = float("inf")
    runs = list(profiles(inst))
    total = ZERO
    for prof, p in runs:
        for ent, q in runs:
            avail = set(range(inst.m))
            rev = ZERO
            for i in range(inst.n):
                prices = [Q[j] if j in avail else inf for j in range(inst.m)]
                val = inst.valuations[i]
                _, fee = demand(val, _tvec(inst, i, ent[i]), prices)
                S, u = demand(val, _tvec(inst, i, prof[i]), prices)
                if u >= fee:
                    rev += fee + sum((Q[j] for j in S), ZERO)
                    avail -= S
            total += p * q * rev
    return total
