"""Brute-force ground truth on tiny instances.

* :func:`optimal_bic_revenue` solves the revenue-maximization LP over all
  BIC and interim-IR mechanisms.
* :func:`compute_core`, :func:`construct_duals` and
  :func:`lp_solution_from_mechanism` turn a mechanism's interim allocation
  into an explicit feasible point of the relaxation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Mapping, Sequence

from . import config
from .lp_solver import LinearProgram, solve_lp
from .model import (
    XOS,
    BidderType,
    ConstrainedAdditive,
    Instance,
    ProfileCapError,
    TypeProfile,
    bidder_types,
    count_type_profiles,
    enumerate_type_profiles,
    singleton_value,
    type_vector,
)
from .oracles import value_oracle, xos_oracle
from .polytopes import build_exact_polytope
from .relaxation import Beta, DualGrid, RelaxationSolution, build_lp

ZERO = Fraction(0)
ONE = Fraction(1)


# ---------------------------------------------------------------------------
# optimal BIC revenue
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BicWitness:
    """Optimal mechanism: assignment distribution per profile and interim payments.

    ``assignments[a][j]`` is the bidder receiving item ``j`` (``-1`` if
    unsold). ``y[p]`` lists ``(assignment index, probability)`` for profile
    ``profiles[p]``. ``payments[i][t_i]`` is the interim payment; the ex-post
    payment rule ``p_i(t) = payments[i][t_i]`` realizes it.
    """

    profiles: tuple[TypeProfile, ...]
    profile_probs: tuple[Fraction, ...]
    assignments: tuple[tuple[int, ...], ...]
    y: tuple[tuple[tuple[int, Fraction], ...], ...]
    payments: tuple[Mapping[BidderType, Any], ...]

    def bundle(self, a: int, i: int) -> frozenset[int]:
        return frozenset(j for j, owner in enumerate(self.assignments[a]) if owner == i)


@dataclass(frozen=True)
class BicResult:
    opt: Any
    witness: BicWitness
    mode: str
    max_violation: Any


def _feasible_for(inst: Instance, i: int, S: frozenset[int]) -> bool:
    val = inst.valuations[i]
    return isinstance(val, XOS) or val.feasibility.is_feasible(S)


def feasible_assignments(inst: Instance) -> list[tuple[int, ...]]:
    """Item-to-bidder maps (``-1`` = unsold) giving every bidder a feasible bundle."""
    out = []
    for A in itertools.product(range(-1, inst.n), repeat=inst.m):
        if all(_feasible_for(inst, i, frozenset(j for j in range(inst.m) if A[j] == i)) for i in range(inst.n)):
            out.append(A)
    return out


def _sanitize(dist: Sequence[tuple[int, Any]]) -> tuple[tuple[int, Fraction], ...]:
    clipped = [(a, Fraction(x) if Fraction(x) > 0 else ZERO) for a, x in dist]
    total = sum((x for _, x in clipped), ZERO)
    if total == 0:
        raise ValueError("assignment distribution has no mass")
    return tuple((a, x / total) for a, x in clipped if x > 0)


def optimal_bic_revenue(inst: Instance, mode: str = "float", cap: int = config.PROFILE_CAP) -> BicResult:
    """Optimal revenue over BIC and interim-IR mechanisms.

    Variables are assignment probabilities ``y_A(t)`` per profile and free
    interim payments; only assignments that give every bidder a feasible
    bundle are used (with free disposal this loses no revenue).

    Raises
    ------
    ProfileCapError
        If ``(n+1)^m * #profiles`` exceeds ``cap``.
    """
    size = (inst.n + 1) ** inst.m * count_type_profiles(inst)
    if size > cap:
        raise ProfileCapError(size, cap, "assignments x profiles")
    profiles = enumerate_type_profiles(inst, cap)
    assigns = feasible_assignments(inst)
    types = [bidder_types(inst, i) for i in range(inst.n)]
    ftype = [dict(ts) for ts in types]
    lp = LinearProgram("bic")
    yvar = {}
    for p, _ in enumerate(profiles):
        for a in range(len(assigns)):
            yvar[(p, a)] = lp.add_variable(("y", p, a))
    pay = {}
    obj = {}
    for i in range(inst.n):
        for t, f in types[i]:
            pay[(i, t)] = lp.add_variable(("P", i, t), lb=-config.INF_PRICE)
            obj[pay[(i, t)]] = f
    lp.set_objective(obj)
    for p, _ in enumerate(profiles):
        lp.add_row({yvar[(p, a)]: 1 for a in range(len(assigns))}, "=", 1, ("sum", p))
    bundles = [[frozenset(j for j in range(inst.m) if A[j] == i) for A in assigns] for i in range(inst.n)]
    index = {prof: p for p, (prof, _) in enumerate(profiles)}
    # profiles sharing t_i, weighted by Pr[t_-i]
    by_type: dict[tuple[int, BidderType], list[tuple[int, Fraction]]] = {}
    for p, (prof, f) in enumerate(profiles):
        for i in range(inst.n):
            by_type.setdefault((i, prof[i]), []).append((p, f / ftype[i][prof[i]]))
    del index
    for i in range(inst.n):
        val = inst.valuations[i]
        for t, _ in types[i]:
            tv = type_vector(inst, i, t)
            vals = [value_oracle(val, tv, S) for S in bundles[i]]

            def utility_row(report: BidderType) -> dict[int, Any]:
                row: dict[int, Any] = {}
                for p, w in by_type[(i, report)]:
                    for a, v in enumerate(vals):
                        if v:
                            row[yvar[(p, a)]] = row.get(yvar[(p, a)], 0) + w * v
                row[pay[(i, report)]] = -1
                return row

            truthful = utility_row(t)
            lp.add_row(truthful, ">=", 0, ("IR", i, t))
            for t2, _ in types[i]:
                if t2 == t:
                    continue
                row = dict(truthful)
                for k, c in utility_row(t2).items():
                    row[k] = row.get(k, 0) - c
                lp.add_row(row, ">=", 0, ("BIC", i, t, t2))
    res = solve_lp(lp, mode)
    if not res.optimal:
        raise RuntimeError(f"BIC LP ended with status {res.status}")
    y = tuple(_sanitize([(a, res.x[yvar[(p, a)]]) for a in range(len(assigns))]) for p in range(len(profiles)))
    payments = tuple({t: res.x[pay[(i, t)]] for t, _ in types[i]} for i in range(inst.n))
    witness = BicWitness(
        tuple(prof for prof, _ in profiles), tuple(f for _, f in profiles), tuple(assigns), y, payments
    )
    return BicResult(res.objective, witness, mode, res.max_violation)


def witness_report(w: BicWitness) -> dict[str, Any]:
    """JSON-ready witness: per-profile assignment distribution and payments."""
    return {
        "profiles": [
            {
                "types": [list(t) for t in prof],
                "prob": str(f),
                "assignments": [{"owner": list(w.assignments[a]), "prob": str(x)} for a, x in w.y[p]],
                "payments": [float(w.payments[i][prof[i]]) for i in range(len(prof))],
            }
            for p, (prof, f) in enumerate(zip(w.profiles, w.profile_probs))
        ]
    }


# ---------------------------------------------------------------------------
# interim allocations and Core
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InterimAllocation:
    """``sigma[i][t_i][S]``: interim probability that bidder ``i`` of type ``t_i`` gets exactly ``S`` (nonempty ``S`` only)."""

    sigma: tuple[Mapping[BidderType, Mapping[frozenset[int], Fraction]], ...]

    def item_prob(self, inst: Instance, i: int, j: int) -> Fraction:
        """``q_ij``: ex-ante probability that bidder ``i`` receives item ``j``."""
        total = ZERO
        for t, f in bidder_types(inst, i):
            total += f * sum((x for S, x in self.sigma[i].get(t, {}).items() if j in S), ZERO)
        return total

    def is_valid(self) -> bool:
        for per_type in self.sigma:
            for dist in per_type.values():
                if any(x < 0 for x in dist.values()) or sum(dist.values(), ZERO) > 1:
                    return False
        return True


def interim_allocation(inst: Instance, witness: BicWitness) -> InterimAllocation:
    sig: list[dict[BidderType, dict[frozenset[int], Fraction]]] = [dict() for _ in range(inst.n)]
    ftype = [dict(bidder_types(inst, i)) for i in range(inst.n)]
    for p, prof in enumerate(witness.profiles):
        f = witness.profile_probs[p]
        for a, x in witness.y[p]:
            for i in range(inst.n):
                S = witness.bundle(a, i)
                if S:
                    d = sig[i].setdefault(prof[i], {})
                    d[S] = d.get(S, ZERO) + f / ftype[i][prof[i]] * x
    return InterimAllocation(tuple(sig))


@dataclass(frozen=True)
class DualParameters:
    """``beta[i][j]`` (a singleton value), ``c[i] >= 0`` and ``r[i][j]`` in ``[0, 1]``."""

    beta: tuple[tuple[Fraction, ...], ...]
    c: tuple[Fraction, ...]
    r: tuple[tuple[Fraction, ...], ...]


def _gamma(inst: Instance, i: int, t: BidderType, S: frozenset[int], j: int) -> Fraction:
    val = inst.valuations[i]
    if isinstance(val, XOS):
        k = xos_oracle(val, t, S)
        return val.alpha[j][t[j]][k]
    return inst.marginals[i][j].support[t[j]]


def compute_core(inst: Instance, sigma: InterimAllocation, duals: DualParameters) -> Fraction:
    """Welfare of ``sigma`` truncated at ``beta + c`` with tie weight ``r``."""
    total = ZERO
    for i in range(inst.n):
        for t, f in bidder_types(inst, i):
            for S, x in sigma.sigma[i].get(t, {}).items():
                for j in S:
                    V = singleton_value(inst, i, j, t[j])
                    thr = duals.beta[i][j] + duals.c[i]
                    if V < thr:
                        weight = ONE
                    elif V == thr:
                        weight = duals.r[i][j]
                    else:
                        continue
                    total += f * x * _gamma(inst, i, t, S, j) * weight
    return total


def expected_welfare(inst: Instance, sigma: InterimAllocation) -> Fraction:
    """``sum_i E[v_i(t_i, S)]`` under ``sigma``."""
    total = ZERO
    for i in range(inst.n):
        val = inst.valuations[i]
        for t, f in bidder_types(inst, i):
            tv = type_vector(inst, i, t)
            for S, x in sigma.sigma[i].get(t, {}).items():
                total += f * x * value_oracle(val, tv, S)
    return total


def _value_distribution(inst: Instance, i: int, j: int) -> list[tuple[Fraction, Fraction]]:
    d = inst.marginals[i][j]
    acc: dict[Fraction, Fraction] = {}
    for v, p in enumerate(d.probs):
        V = singleton_value(inst, i, j, v)
        acc[V] = acc.get(V, ZERO) + p
    return sorted(acc.items())


def construct_duals(inst: Instance, sigma: InterimAllocation) -> DualParameters:
    """Quantile duals with ``c = 0``.

    ``beta_ij`` is the smallest singleton value with ``Pr[V > beta] <= q/2``
    and ``r_ij`` solves ``Pr[V > beta] + r Pr[V = beta] = q/2``, where ``q``
    is the probability that bidder ``i`` receives item ``j``.

    Raises
    ------
    ValueError
        If the per-item supply condition or the per-(i, j) tail condition fails.
    """
    betas, rs = [], []
    for i in range(inst.n):
        brow, rrow = [], []
        for j in range(inst.m):
            q = sigma.item_prob(inst, i, j)
            if not 0 <= q <= 1:
                raise ValueError(f"allocation probability {q} of ({i},{j}) outside [0,1]")
            half = q / 2
            dist = _value_distribution(inst, i, j)
            chosen = None
            for x, px in dist:
                tail = sum((p for v, p in dist if v > x), ZERO)
                if tail <= half:
                    chosen = (x, tail, px)
                    break
            x, tail, px = chosen
            r = (half - tail) / px if px else ZERO
            brow.append(x)
            rrow.append(r)
        betas.append(tuple(brow))
        rs.append(tuple(rrow))
    duals = DualParameters(tuple(betas), tuple(ZERO for _ in range(inst.n)), tuple(rs))
    ok, msg = check_dual_properties(inst, sigma, duals)
    if not ok:
        raise ValueError(msg)
    return duals


def check_dual_properties(inst: Instance, sigma: InterimAllocation, duals: DualParameters) -> tuple[bool, str]:
    """Supply check (per item, mass at or above the thresholds <= 1/2) and tail check (per pair)."""
    for j in range(inst.m):
        total = ZERO
        for i in range(inst.n):
            dist = _value_distribution(inst, i, j)
            b, r = duals.beta[i][j], duals.r[i][j]
            total += sum((p for v, p in dist if v > b), ZERO) + r * sum((p for v, p in dist if v == b), ZERO)
        if total > Fraction(1, 2):
            return False, f"supply check fails on item {j}: {total} > 1/2"
    for i in range(inst.n):
        for j in range(inst.m):
            if not 0 <= duals.r[i][j] <= 1:
                return False, f"r[{i}][{j}] = {duals.r[i][j]} outside [0,1]"
            dist = _value_distribution(inst, i, j)
            b, r = duals.beta[i][j], duals.r[i][j]
            rhs = sum((p for v, p in dist if v > b), ZERO) + r * sum((p for v, p in dist if v == b), ZERO)
            lhs = sigma.item_prob(inst, i, j) / 2
            if lhs > rhs:
                return False, f"tail check fails on ({i},{j}): {lhs} > {rhs}"
    return True, ""


# ---------------------------------------------------------------------------
# feasible LP point from a mechanism
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstructedSolution:
    solution: RelaxationSolution
    c_hat: tuple[Fraction, ...]
    core: Fraction
    max_violation: Fraction
    family_violations: Mapping[str, float]


def round_up_to_grid(c: Fraction, grid: DualGrid) -> Fraction:
    for delta in grid.deltas:
        if delta >= c:
            return delta
    raise ValueError(f"c = {c} exceeds the top of the delta grid {grid.deltas[-1]}")


def lp_solution_from_mechanism(
    inst: Instance, grid: DualGrid, sigma: InterimAllocation, duals: DualParameters
) -> ConstructedSolution:
    """Explicit relaxation point with ``lam`` split ``r : 1-r`` between ``beta`` and ``beta+``.

    Built against the exact-polytope LP in rational arithmetic; the returned
    residual is exact.
    """
    ok, msg = check_dual_properties(inst, sigma, duals)
    if not ok:
        raise ValueError(msg)
    polys = tuple(build_exact_polytope(inst, i) for i in range(inst.n))
    relax = build_lp(inst, grid, polys)
    lp = relax.lp
    x: list[Fraction] = [ZERO] * lp.num_vars
    c_hat = tuple(round_up_to_grid(c, grid) for c in duals.c)
    for i in range(inst.n):
        xos = inst.is_xos(i)
        poly = polys[i]
        comps = poly.pieces[0].components
        for c_idx, (f_t, tp) in enumerate(comps):
            t = tp.owner[1]
            for S, prob in sigma.sigma[i].get(t, {}).items():
                if xos:
                    k = xos_oracle(inst.valuations[i], t, S)
                    g_idx = _generator_index(tp, S, k)
                else:
                    g_idx = tp.labels.index(S)
                name = (("poly", i), "theta", 0, c_idx, g_idx)
                x[lp.var(name)] += prob
            for j in range(inst.m):
                for S, prob in sigma.sigma[i].get(t, {}).items():
                    if j not in S:
                        continue
                    v = t[j]
                    x[lp.var(("w", i, j, v))] += f_t * prob * _w_ratio(inst, i, t, S, j)
                    if xos:
                        x[lp.var(("pi", i, j, v))] += f_t * prob
        x[lp.var(("d", i))] = c_hat[i]
        d_idx = grid.delta_index(c_hat[i])
        for j in range(inst.m):
            b = grid.beta_index(i, j, Beta(duals.beta[i][j]))
            bp = grid.beta_index(i, j, Beta(duals.beta[i][j], True))
            r = duals.r[i][j]
            x[lp.var(("lamhat", i, j, b, d_idx))] = r
            x[lp.var(("lamhat", i, j, bp, d_idx))] = 1 - r
            for v, f in enumerate(grid.probs[i][j]):
                w = x[lp.var(("w", i, j, v))]
                ratio = w / f if f else ZERO
                x[lp.var(("lam", i, j, v, b, d_idx))] = r * ratio
                x[lp.var(("lam", i, j, v, bp, d_idx))] = (1 - r) * ratio
    sol = RelaxationSolution(relax, x, lp.objective_value(x), "rational")
    rep = sol.residuals()
    core = compute_core(inst, sigma, DualParameters(duals.beta, c_hat, duals.r))
    return ConstructedSolution(sol, c_hat, core, rep.max_violation, sol.family_violations())


def _w_ratio(inst: Instance, i: int, t: BidderType, S: frozenset[int], j: int) -> Fraction:
    val = inst.valuations[i]
    if isinstance(val, ConstrainedAdditive):
        return ONE
    V = singleton_value(inst, i, j, t[j])
    return _gamma(inst, i, t, S, j) / V if V else ZERO


def _generator_index(tp, S: frozenset[int], k: int) -> int:
    D = tp.dim // 2
    g = [ZERO] * tp.dim
    for j in S:
        g[tp.coord_pi[j]] = ONE
        g[tp.coord_w[j]] = tp.valuation.alpha[j][tp.tvec[j]][k] / tp.V[j] if tp.V[j] else ZERO
    del D
    return tp.generators.index(tuple(g))


__all__ = [
    "BicResult",
    "BicWitness",
    "ConstructedSolution",
    "DualParameters",
    "InterimAllocation",
    "check_dual_properties",
    "compute_core",
    "construct_duals",
    "expected_welfare",
    "feasible_assignments",
    "interim_allocation",
    "lp_solution_from_mechanism",
    "optimal_bic_revenue",
    "round_up_to_grid",
    "witness_report",
]
