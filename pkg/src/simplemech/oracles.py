"""Value, demand, XOS and adjustable-demand oracles.

Oracle inputs follow :func:`simplemech.model.type_vector`: item values for
constrained-additive valuations, support indices for XOS valuations.

Demand tie-break: among utility-maximizing bundles return the one that is
smallest under :func:`simplemech.model.bundle_key` (fewest items, then
lexicographically smallest sorted tuple). Zero-margin items are therefore
never included.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from .model import (
    XOS,
    Additive,
    CardinalityCap,
    ConstrainedAdditive,
    ExplicitFamily,
    UnitDemand,
    Valuation,
    all_bundles,
    bundle_key,
    to_fraction,
)

ZERO = Fraction(0)


@dataclass(frozen=True)
class DemandAnswer:
    bundle: frozenset[int]
    utility: Any


@dataclass(frozen=True)
class AdjustableDemandAnswer:
    bundle: frozenset[int]
    k: int
    objective: Any


def additive_functions(valuation: XOS, t_i: Sequence[int]) -> list[tuple[Fraction, ...]]:
    """The ``K`` coefficient vectors of an XOS valuation at type ``t_i``."""
    m = len(valuation.alpha)
    return [tuple(valuation.alpha[j][t_i[j]][k] for j in range(m)) for k in range(valuation.K)]


def value_oracle(valuation: Valuation, t_i: Sequence[Any], S: Sequence[int] | frozenset[int]) -> Any:
    """``v_i(t_i, S)``."""
    S = frozenset(S)
    if isinstance(valuation, XOS):
        if not S:
            return ZERO
        return max(sum((f[j] for j in S), ZERO) for f in additive_functions(valuation, t_i))
    feas = valuation.feasibility
    vals = [t_i[j] for j in S]
    if isinstance(feas, Additive):
        return sum(vals, ZERO)
    if isinstance(feas, UnitDemand):
        return max(vals, default=ZERO)
    if isinstance(feas, CardinalityCap):
        return sum(sorted(vals, reverse=True)[: feas.k], ZERO)
    if isinstance(feas, ExplicitFamily):
        return max((sum((t_i[j] for j in R), ZERO) for R in feas.sets if R <= S), default=ZERO)
    raise TypeError(f"unknown feasibility {feas!r}")


def _margins(values: Sequence[Any], prices: Sequence[Any]) -> list[Any]:
    return [v - p for v, p in zip(values, prices)]


def demand_oracle(valuation: Valuation, t_i: Sequence[Any], prices: Sequence[Any]) -> DemandAnswer:
    """Utility-maximizing bundle at ``prices`` (``math.inf`` allowed)."""
    m = len(prices)
    if isinstance(valuation, XOS):
        best_u, best_S = ZERO, frozenset()
        for f in additive_functions(valuation, t_i):
            marg = _margins(f, prices)
            S = frozenset(j for j in range(m) if marg[j] > 0)
            u = sum((marg[j] for j in S), ZERO)
            if u > best_u or (u == best_u and u > 0 and bundle_key(S) < bundle_key(best_S)):
                best_u, best_S = u, S
        return DemandAnswer(best_S, best_u)
    feas = valuation.feasibility
    marg = _margins(t_i, prices)
    if isinstance(feas, Additive):
        S = frozenset(j for j in range(m) if marg[j] > 0)
    elif isinstance(feas, UnitDemand):
        j_best = max(range(m), key=lambda j: (marg[j], -j), default=None)
        S = frozenset([j_best]) if j_best is not None and marg[j_best] > 0 else frozenset()
    elif isinstance(feas, CardinalityCap):
        pos = sorted((j for j in range(m) if marg[j] > 0), key=lambda j: (-marg[j], j))
        S = frozenset(pos[: feas.k])
    elif isinstance(feas, ExplicitFamily):
        S, best = frozenset(), ZERO
        for R in feas.sets:  # already in bundle_key order
            u = sum((marg[j] for j in R), ZERO)
            if u > best:
                S, best = R, u
    else:
        raise TypeError(f"unknown feasibility {feas!r}")
    return DemandAnswer(S, sum((marg[j] for j in S), ZERO))


def adjustable_demand_oracle(
    valuation: Valuation, t_i: Sequence[int], b: Sequence[Any], p: Sequence[Any]
) -> AdjustableDemandAnswer:
    """``argmax_{S,k} sum_{j in S} (b_j alpha_j^k - p_j)`` in ``O(mK)``.

    For each ``k`` item ``j`` is included iff its adjusted margin is strictly
    positive; the best ``k`` wins with the smallest index on ties.
    """
    if not isinstance(valuation, XOS):
        raise TypeError("adjustable demand oracle needs an XOS valuation")
    m = len(p)
    best = None
    for k, f in enumerate(additive_functions(valuation, t_i)):
        marg = [b[j] * f[j] - p[j] for j in range(m)]
        S = frozenset(j for j in range(m) if marg[j] > 0)
        obj = sum((marg[j] for j in S), ZERO)
        if best is None or obj > best.objective:
            best = AdjustableDemandAnswer(S, k, obj)
    return best


def xos_oracle(valuation: Valuation, t_i: Sequence[int], S: Sequence[int] | frozenset[int]) -> int:
    """Index of the additive function attaining ``v(t_i, S)`` (smallest on ties)."""
    if not isinstance(valuation, XOS):
        raise TypeError("XOS oracle needs an XOS valuation")
    S = frozenset(S)
    if not S:
        raise ValueError("XOS oracle needs a nonempty bundle")
    sums = [sum((f[j] for j in S), ZERO) for f in additive_functions(valuation, t_i)]
    return max(range(len(sums)), key=lambda k: (sums[k], -k))


# ---------------------------------------------------------------------------
# counterexample family
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CounterexampleFamily:
    """Benchmark valuation ``v_hat`` and its perturbations ``v_r``.

    Items ``0..ell-1`` form ``S1`` and ``ell..2ell-1`` form ``S2``. Every item
    has a single support point, so the type is ``(0,) * m``.
    """

    ell: int
    eps: Fraction
    eps_prime: Fraction
    v_hat: XOS
    family: tuple[XOS, ...]
    C: tuple[frozenset[int], ...]

    @property
    def m(self) -> int:
        return 2 * self.ell

    @property
    def L(self) -> int:
        return len(self.family)

    @property
    def S1(self) -> frozenset[int]:
        return frozenset(range(self.ell))

    @property
    def S2(self) -> frozenset[int]:
        return frozenset(range(self.ell, 2 * self.ell))

    @property
    def type(self) -> tuple[int, ...]:
        return (0,) * self.m


def _as_xos(functions: Sequence[Sequence[Fraction]]) -> XOS:
    m = len(functions[0])
    return XOS(tuple(((tuple(f[j] for f in functions),)) for j in range(m)))


def counterexample_family(ell: int, eps: Any, eps_prime: Any) -> CounterexampleFamily:
    """Valuations that a demand oracle cannot tell apart from ``v_hat``.

    Requires even ``ell >= 4`` and ``0 < (ell+1) eps' < eps < 1/2``.
    """
    eps, eps_prime = to_fraction(eps), to_fraction(eps_prime)
    if ell < 4 or ell % 2:
        raise ValueError(f"ell must be an even integer >= 4, got {ell}")
    if not (0 < (ell + 1) * eps_prime < eps < Fraction(1, 2)):
        raise ValueError("need 0 < (ell+1)*eps' < eps < 1/2")
    m = 2 * ell
    funcs: list[list[Fraction]] = []
    for k in range(1, ell + 1):
        funcs.append([Fraction(j) + eps + (1 - Fraction(1, ell)) * eps_prime if j == k else ZERO for j in range(1, m + 1)])
    for k in range(ell + 1, 2 * ell + 1):
        row = []
        for j in range(1, m + 1):
            if j == k - ell:
                row.append(Fraction(j))
            elif j <= ell:
                row.append(ZERO)
            else:
                row.append(Fraction(2, ell) * eps)
        funcs.append(row)
    subsets = tuple(frozenset(c) for c in itertools.combinations(range(ell, m), ell // 2))
    family = []
    for Cr in subsets:
        extra = []
        for j in range(m):
            if j < ell - 1:
                extra.append(Fraction(1))
            elif j == ell - 1:
                extra.append(1 + eps)
            elif j in Cr:
                extra.append(Fraction(2, ell) * eps_prime)
            else:
                extra.append(ZERO)
        family.append(_as_xos(funcs + [extra]))
    return CounterexampleFamily(ell, eps, eps_prime, _as_xos(funcs), tuple(family), subsets)


# ---------------------------------------------------------------------------
# vectorized XOS demand (exhaustive price grids)
# ---------------------------------------------------------------------------


def bundle_rank_table(m: int) -> np.ndarray:
    """``rank[mask]`` = position of the bundle with bitmask ``mask`` in :func:`bundle_key` order."""
    rank = np.zeros(1 << m, dtype=np.int64)
    for pos, S in enumerate(all_bundles(m)):
        rank[sum(1 << j for j in S)] = pos
    return rank


def xos_demand_batch(functions: np.ndarray, prices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Demand of an XOS valuation for many price vectors at once.

    Implements the same rule and tie-break as :func:`demand_oracle` on
    integer data (scale rationals to a common denominator first; use a large
    integer for infinite prices).

    Parameters
    ----------
    functions:
        ``K x m`` integer coefficient matrix.
    prices:
        ``N x m`` integer price matrix.

    Returns
    -------
    masks, utilities:
        Bundle bitmasks and utilities, both of length ``N``.
    """
    functions = np.asarray(functions, dtype=np.int64)
    prices = np.asarray(prices, dtype=np.int64)
    m = functions.shape[1]
    rank = bundle_rank_table(m)
    bits = (1 << np.arange(m)).astype(np.int64)
    N = prices.shape[0]
    best_u = np.zeros(N, dtype=np.int64)
    best_mask = np.zeros(N, dtype=np.int64)
    best_rank = np.zeros(N, dtype=np.int64)
    for f in functions:
        marg = f[None, :] - prices
        pos = marg > 0
        u = np.where(pos, marg, 0).sum(axis=1)
        mask = (pos * bits).sum(axis=1)
        r = rank[mask]
        better = (u > best_u) | ((u == best_u) & (u > 0) & (r < best_rank))
        best_u = np.where(better, u, best_u)
        best_mask = np.where(better, mask, best_mask)
        best_rank = np.where(better, r, best_rank)
    return best_mask, best_u


def mask_to_bundle(mask: int) -> frozenset[int]:
    return frozenset(j for j in range(int(mask).bit_length()) if mask >> j & 1)


def common_denominator(values: Sequence[Fraction]) -> int:
    d = 1
    for v in values:
        d = math.lcm(d, Fraction(v).denominator)
    return d
