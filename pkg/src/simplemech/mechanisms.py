"""Rationed posted prices, two-part tariffs and sequential posted prices with entry fees.

Bidders arrive in a fixed order (lexicographic by default). Every simulated
decision is recorded as a :class:`Step` so the caller can audit that the
prescribed action maximizes the bidder's realized utility.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from . import config
from .model import (
    BidderType,
    Instance,
    ProfileCapError,
    TypeProfile,
    bidder_types,
    count_type_profiles,
    enumerate_type_profiles,
    singleton_values,
    type_vector,
)
from .oracles import demand_oracle, value_oracle

ZERO = Fraction(0)
INF = config.INF_PRICE


# ---------------------------------------------------------------------------
# specs and outcomes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RppSpec:
    """Per-(bidder, item) prices; ``math.inf`` withholds an item from a bidder."""

    prices: tuple[tuple[Any, ...], ...]
    order: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        for row in self.prices:
            for p in row:
                if p < 0:
                    raise ValueError("posted prices must be nonnegative")


@dataclass(frozen=True)
class TptSpec:
    """Uniform item prices ``Q`` with entry fees from a freshly sampled type."""

    Q: tuple[Any, ...]
    order: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if any(q < 0 for q in self.Q):
            raise ValueError("item prices must be nonnegative")


@dataclass(frozen=True)
class SpemSpec:
    """Per-(bidder, item) prices plus an entry-fee rule.

    ``fees[i]`` maps an available set (frozenset) to a fee. With
    ``sampled_fees`` set, fees come from the sampled-type rule instead and
    ``run_spem`` needs entry samples.
    """

    prices: tuple[tuple[Any, ...], ...]
    fees: tuple[Mapping[frozenset[int], Any], ...] | None = None
    sampled_fees: bool = False
    order: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.fees is None and not self.sampled_fees:
            raise ValueError("SPEM needs a fee table or the sampled-fee rule")
        if self.fees is not None:
            for table in self.fees:
                if any(f < 0 for f in table.values()):
                    raise ValueError("entry fees must be nonnegative")

    @classmethod
    def from_tpt(cls, spec: TptSpec, n: int) -> "SpemSpec":
        return cls(tuple(tuple(spec.Q) for _ in range(n)), None, True, spec.order)


@dataclass(frozen=True)
class Step:
    """One bidder's decision.

    ``prices`` are the bidder's per-item prices, ``fee`` the entry fee
    (``None`` for RPP), ``unit`` marks the single-item RPP action space.
    """

    bidder: int
    t_i: BidderType
    available: frozenset[int]
    prices: tuple[Any, ...]
    fee: Any
    unit: bool
    bundle: frozenset[int]
    payment: Any
    utility: Any


@dataclass(frozen=True)
class Outcome:
    bundles: tuple[frozenset[int], ...]
    payments: tuple[Any, ...]
    steps: tuple[Step, ...] = field(default=(), compare=False)

    @property
    def revenue(self) -> Any:
        return sum(self.payments, ZERO)

    @property
    def sold(self) -> frozenset[int]:
        return frozenset().union(*self.bundles) if self.bundles else frozenset()


def _order(order: Sequence[int] | None, n: int) -> Sequence[int]:
    return range(n) if order is None else order


def _restricted_prices(prices: Sequence[Any], available: frozenset[int]) -> list[Any]:
    return [p if j in available else INF for j, p in enumerate(prices)]


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------


def run_rpp(spec: RppSpec, inst: Instance, profile: TypeProfile) -> Outcome:
    """Each arriving bidder buys the available item with the largest ``v({j}) - p_ij``.

    A purchase happens when that surplus is nonnegative (a bidder indifferent
    between buying and leaving buys); ties between items go to the lowest index.
    """
    available = frozenset(range(inst.m))
    bundles = [frozenset()] * inst.n
    payments: list[Any] = [ZERO] * inst.n
    steps = []
    for i in _order(spec.order, inst.n):
        tv = type_vector(inst, i, profile[i])
        val = inst.valuations[i]
        best_j, best_u = None, ZERO
        for j in sorted(available):
            p = spec.prices[i][j]
            if p == INF:
                continue
            u = value_oracle(val, tv, (j,)) - p
            if u >= 0 and (best_j is None or u > best_u):
                best_j, best_u = j, u
        if best_j is not None:
            bundles[i] = frozenset([best_j])
            payments[i] = spec.prices[i][best_j]
        steps.append(Step(i, tuple(profile[i]), available, tuple(spec.prices[i]), None, True, bundles[i], payments[i], best_u))
        available = available - bundles[i]
    return Outcome(tuple(bundles), tuple(payments), tuple(steps))


def sampled_fee(inst: Instance, i: int, sample: BidderType, prices: Sequence[Any], available: frozenset[int]) -> Any:
    """``max_{S' within available} v(t', S') - sum p``: the demand utility of the sampled type."""
    tv = type_vector(inst, i, sample)
    return demand_oracle(inst.valuations[i], tv, _restricted_prices(prices, available)).utility


def run_spem(
    spec: SpemSpec,
    inst: Instance,
    profile: TypeProfile,
    entry_samples: Sequence[BidderType] | None = None,
) -> Outcome:
    """Sequential posted prices with entry fees.

    A bidder enters iff her best surplus over the available items is at least
    the fee (ties enter), then takes her demand bundle and pays fee plus
    item prices.
    """
    if spec.sampled_fees and (entry_samples is None or len(entry_samples) < inst.n):
        raise ValueError("sampled-fee rule needs one entry sample per bidder")
    available = frozenset(range(inst.m))
    bundles = [frozenset()] * inst.n
    payments: list[Any] = [ZERO] * inst.n
    steps = []
    for i in _order(spec.order, inst.n):
        prices = spec.prices[i]
        if spec.sampled_fees:
            fee = sampled_fee(inst, i, entry_samples[i], prices, available)
        else:
            table = spec.fees[i]
            if available not in table:
                raise KeyError(f"fee table of bidder {i} misses available set {sorted(available)}")
            fee = table[available]
        tv = type_vector(inst, i, profile[i])
        ans = demand_oracle(inst.valuations[i], tv, _restricted_prices(prices, available))
        utility = ZERO
        if ans.utility >= fee:
            bundles[i] = ans.bundle
            payments[i] = fee + sum((prices[j] for j in ans.bundle), ZERO)
            utility = ans.utility - fee
        steps.append(Step(i, tuple(profile[i]), available, tuple(prices), fee, False, bundles[i], payments[i], utility))
        available = available - bundles[i]
    return Outcome(tuple(bundles), tuple(payments), tuple(steps))


def run_tpt(spec: TptSpec, inst: Instance, profile: TypeProfile, entry_samples: Sequence[BidderType]) -> Outcome:
    """Two-part tariff: uniform prices ``Q`` and sampled-type entry fees."""
    if entry_samples is None or len(entry_samples) < inst.n:
        raise ValueError("two-part tariff needs one entry sample per bidder")
    return run_spem(SpemSpec.from_tpt(spec, inst.n), inst, profile, entry_samples)


# ---------------------------------------------------------------------------
# rationality audit
# ---------------------------------------------------------------------------


def best_available_utility(inst: Instance, step: Step) -> Any:
    """Best realized utility over every action open to the bidder at ``step``.

    RPP: nothing, or buy any single available item. Entry-fee mechanisms:
    stay out, or pay the fee and take any subset of the available items.
    """
    tv = type_vector(inst, step.bidder, step.t_i)
    val = inst.valuations[step.bidder]
    best = ZERO
    if step.unit:
        for j in step.available:
            if step.prices[j] != INF:
                best = max(best, value_oracle(val, tv, (j,)) - step.prices[j])
        return best
    items = sorted(step.available)
    for r in range(len(items) + 1):
        for S in itertools.combinations(items, r):
            if any(step.prices[j] == INF for j in S):
                continue
            u = value_oracle(val, tv, S) - sum((step.prices[j] for j in S), ZERO) - step.fee
            best = max(best, u)
    return best


def step_is_rational(inst: Instance, step: Step, tol: Any = 0) -> bool:
    best = best_available_utility(inst, step)
    # keep the comparison exact when no tolerance is requested
    return step.utility >= (best - tol if tol else best)


# ---------------------------------------------------------------------------
# expected revenue
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RevenueEstimate:
    value: Any
    stderr: float | None = None
    samples: int | None = None


Mechanism = RppSpec | TptSpec | SpemSpec


def _needs_samples(spec: Mechanism) -> bool:
    return isinstance(spec, TptSpec) or (isinstance(spec, SpemSpec) and spec.sampled_fees)


def simulate(spec: Mechanism, inst: Instance, profile: TypeProfile, entry: Sequence[BidderType] | None = None) -> Outcome:
    if isinstance(spec, RppSpec):
        return run_rpp(spec, inst, profile)
    if isinstance(spec, TptSpec):
        return run_tpt(spec, inst, profile, entry)
    return run_spem(spec, inst, profile, entry)


def iter_exact_runs(spec: Mechanism, inst: Instance, cap: int = config.PROFILE_CAP):
    """Yield ``(probability, profile, entry_samples)`` for the exact expectation."""
    profiles = enumerate_type_profiles(inst, cap)
    if not _needs_samples(spec):
        for prof, p in profiles:
            yield p, prof, None
        return
    size = count_type_profiles(inst) ** 2
    if size > cap:
        raise ProfileCapError(size, cap, "profiles x entry samples")
    for prof, p in profiles:
        for ent, q in profiles:
            yield p * q, prof, ent


def expected_revenue(
    spec: Mechanism,
    inst: Instance,
    method: str = "exact",
    samples: int = 100_000,
    seed: int = 0,
    cap: int = config.PROFILE_CAP,
) -> RevenueEstimate:
    """Exact expectation by enumeration, or a seeded Monte Carlo mean with standard error."""
    if method == "exact":
        total = ZERO
        for p, prof, ent in iter_exact_runs(spec, inst, cap):
            total += p * simulate(spec, inst, prof, ent).revenue
        return RevenueEstimate(total)
    if method != "mc":
        raise ValueError(f"unknown method {method!r}")
    if samples < 2:
        raise ValueError("Monte Carlo needs at least 2 samples")
    rng = np.random.default_rng(seed)
    prof_idx = draw_profiles(inst, samples, rng)
    ent_idx = draw_profiles(inst, samples, rng) if _needs_samples(spec) else None
    memo: dict[tuple, float] = {}
    vals = np.empty(samples)
    for s in range(samples):
        prof = prof_idx[s]
        ent = ent_idx[s] if ent_idx is not None else None
        key = (prof, ent)
        r = memo.get(key)
        if r is None:
            r = float(simulate(spec, inst, prof, ent).revenue)
            memo[key] = r
        vals[s] = r
    mean = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(samples))
    return RevenueEstimate(mean, stderr, samples)


def draw_profiles(inst: Instance, N: int, rng: np.random.Generator) -> list[TypeProfile]:
    """``N`` independent type profiles (support indices), drawn item by item."""
    cols = []
    for i in range(inst.n):
        for j in range(inst.m):
            d = inst.marginals[i][j]
            p = np.array([float(x) for x in d.probs])
            cols.append(rng.choice(d.size, size=N, p=p / p.sum()))
    arr = np.stack(cols, axis=1) if cols else np.zeros((N, 0), dtype=int)
    out = []
    m = inst.m
    for row in arr.tolist():
        out.append(tuple(tuple(row[i * m : (i + 1) * m]) for i in range(inst.n)))
    return out


# ---------------------------------------------------------------------------
# RPP search
# ---------------------------------------------------------------------------


def price_candidates(inst: Instance, i: int, j: int) -> tuple[Any, ...]:
    """Distinct singleton values of ``(i, j)`` plus the withholding price."""
    return tuple(sorted(set(singleton_values(inst, i, j)))) + (INF,)


def _rpp_revenue_fn(inst: Instance, order: Sequence[int] | None, cap: int) -> Callable[[tuple], Fraction]:
    profiles = enumerate_type_profiles(inst, cap)
    n, m = inst.n, inst.m

    def revenue(flat: tuple) -> Fraction:
        prices = tuple(tuple(flat[i * m : (i + 1) * m]) for i in range(n))
        spec = RppSpec(prices, tuple(order) if order is not None else None)
        return sum((p * run_rpp(spec, inst, prof).revenue for prof, p in profiles), ZERO)

    return revenue


def optimize_rpp(
    inst: Instance,
    order: Sequence[int] | None = None,
    search_cap: int = config.RPP_SEARCH_CAP,
    cap: int = config.PROFILE_CAP,
) -> tuple[RppSpec, Fraction]:
    """Best rationed posted prices and their exact revenue.

    Exhaustive over the candidate grid when its size is within
    ``search_cap``; otherwise coordinate ascent from per-item monopoly prices.
    Ties keep the first grid point in lexicographic order.
    """
    n, m = inst.n, inst.m
    cands = [price_candidates(inst, i, j) for i in range(n) for j in range(m)]
    revenue = _rpp_revenue_fn(inst, order, cap)
    size = math.prod(len(c) for c in cands)
    best, best_rev = None, None
    if size <= search_cap:
        for flat in itertools.product(*cands):
            r = revenue(flat)
            if best_rev is None or r > best_rev:
                best, best_rev = flat, r
    else:
        flat = []
        for i in range(n):
            for j in range(m):
                d = inst.marginals[i][j]
                vals = singleton_values(inst, i, j)
                mono = max(
                    sorted(set(vals)),
                    key=lambda x: x * sum((p for v, p in zip(vals, d.probs) if v >= x), ZERO),
                )
                flat.append(mono)
        best, best_rev = tuple(flat), revenue(tuple(flat))
        improved = True
        while improved:
            improved = False
            for k in range(len(flat)):
                for c in cands[k]:
                    trial = list(best)
                    trial[k] = c
                    r = revenue(tuple(trial))
                    if r > best_rev:
                        best, best_rev, improved = tuple(trial), r, True
    prices = tuple(tuple(best[i * m : (i + 1) * m]) for i in range(n))
    return RppSpec(prices, tuple(order) if order is not None else None), best_rev


def mechanism_report(spec: Mechanism) -> dict[str, Any]:
    """JSON-ready description of a mechanism spec."""

    def enc(x: Any) -> Any:
        if x == INF:
            return "inf"
        return str(x) if isinstance(x, Fraction) else x

    if isinstance(spec, RppSpec):
        return {"rpp": {"prices": [[enc(p) for p in row] for row in spec.prices]}, "order": spec.order}
    if isinstance(spec, TptSpec):
        return {"tpt": {"Q": [enc(q) for q in spec.Q]}, "order": spec.order}
    return {"spem": {"prices": [[enc(p) for p in row] for row in spec.prices], "sampled_fees": spec.sampled_fees}}


__all__ = [
    "Outcome",
    "RevenueEstimate",
    "RppSpec",
    "SpemSpec",
    "Step",
    "TptSpec",
    "best_available_utility",
    "draw_profiles",
    "expected_revenue",
    "iter_exact_runs",
    "mechanism_report",
    "optimize_rpp",
    "price_candidates",
    "run_rpp",
    "run_spem",
    "run_tpt",
    "sampled_fee",
    "simulate",
    "step_is_rational",
]
