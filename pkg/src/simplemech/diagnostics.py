"""Analysis quantities read off a relaxation solution.

* ``tau_i``: the smallest shift with ``sum_j Pr[V_ij >= max(beta_ij, Q_j + x)] <= 1/2``;
* ``Qhat_j``: item prices with the allocation indicator tightened to ``Q_j + tau_i``;
* ``mu_i`` and ``eta_i``: the set functions whose Lipschitz and subadditivity
  properties drive the revenue analysis.

Dual distributions are taken from ``lamhat`` (clipped at 0 and renormalized,
so float solutions with tiny negative noise are usable).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterable, Sequence

import numpy as np

from . import config
from .model import BidderType, Instance, ProfileCapError, bidder_types, singleton_value, type_vector
from .oracles import value_oracle
from .relaxation import Beta, RelaxationSolution, indicator_le

ZERO = Fraction(0)
HALF = Fraction(1, 2)
#: Constant in the analysis bound on ``sum_j (Q_j - Qhat_j)``.
QHAT_GAP_FACTOR = Fraction(473, 2)


@dataclass(frozen=True)
class DualDistribution:
    """``joint[i][j]``: ``((beta, delta), mass)`` pairs; ``marginal[i][j]``: ``(beta, mass)`` pairs."""

    joint: tuple[tuple[tuple[tuple[tuple[Beta, Fraction], Any], ...], ...], ...]
    marginal: tuple[tuple[tuple[tuple[Beta, Any], ...], ...], ...]


def dual_distribution(sol: RelaxationSolution, tol: float = 1e-12) -> DualDistribution:
    g = sol.grid
    inst = sol.inst
    lamhat = sol.lamhat
    joint, marg = [], []
    for i in range(inst.n):
        jr, mr = [], []
        for j in range(inst.m):
            pairs = []
            for b, beta in enumerate(g.betas[i][j]):
                for d, delta in enumerate(g.deltas):
                    x = lamhat[(i, j, b, d)]
                    if x > tol:
                        pairs.append(((beta, delta), x))
            total = sum(x for _, x in pairs)
            pairs = [(k, x / total) for k, x in pairs]
            mdict: dict[Beta, Any] = {}
            for (beta, _), x in pairs:
                mdict[beta] = mdict.get(beta, 0) + x
            jr.append(tuple(pairs))
            mr.append(tuple(sorted(mdict.items())))
        joint.append(tuple(jr))
        marg.append(tuple(mr))
    return DualDistribution(tuple(joint), tuple(marg))


def _exceeds(V: Any, beta: Beta) -> bool:
    """``V >= beta`` with the strict reading for ``beta+``."""
    return V > beta.value if beta.plus else V >= beta.value


# ---------------------------------------------------------------------------
# tau and shifted prices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Tau:
    value: Any
    jump: bool


def tail_sum(inst: Instance, i: int, dual: DualDistribution, Q: Sequence[Any], x: Any, strict: bool = False) -> Any:
    """``sum_j Pr[V_ij >= max(beta_ij, Q_j + x)]``; ``strict`` evaluates just above ``x``."""
    total = 0
    for j in range(inst.m):
        d = inst.marginals[i][j]
        thr = Q[j] + x
        for v, f in enumerate(d.probs):
            V = singleton_value(inst, i, j, v)
            if (V > thr) if strict else (V >= thr):
                mass = sum((w for beta, w in dual.marginal[i][j] if _exceeds(V, beta)), 0)
                total += f * mass
    return total


def compute_tau(inst: Instance, sol: RelaxationSolution, Q: Sequence[Any], dual: DualDistribution | None = None) -> tuple[Tau, ...]:
    """``tau_i`` by scanning ``{V - Q_j} ∪ {0}``.

    Returns the smallest candidate at which the tail sum is at most 1/2. When
    the sum only drops to 1/2 just above a candidate (a discrete jump), that
    candidate is returned with ``jump`` set.
    """
    dual = dual or dual_distribution(sol)
    out = []
    for i in range(inst.n):
        cands = {0}
        for j in range(inst.m):
            for v in range(inst.marginals[i][j].size):
                c = singleton_value(inst, i, j, v) - Q[j]
                if c >= 0:
                    cands.add(c)
        tau = None
        for c in sorted(cands):
            if tail_sum(inst, i, dual, Q, c) <= HALF + _tol(sol):
                tau = Tau(c, False)
                break
            if tail_sum(inst, i, dual, Q, c, strict=True) <= HALF + _tol(sol):
                tau = Tau(c, True)
                break
        out.append(tau)
    return tuple(out)


def _tol(sol: RelaxationSolution) -> Any:
    return 0 if sol.mode == "rational" else config.FEAS_TOL


def compute_shifted_prices(inst: Instance, sol: RelaxationSolution, Q: Sequence[Any], tau: Sequence[Tau]) -> tuple[Any, ...]:
    """``Qhat_j``: ``Q_j`` with the indicator ``1[V <= min(beta + delta, Q_j + tau_i)]``."""
    g = sol.grid
    out = [0] * inst.m
    for (i, j, v, b, d), x in sol.lam.items():
        V = g.values[i][j][v]
        if indicator_le(V, g.betas[i][j][b], g.deltas[d]) and V <= Q[j] + tau[i].value:
            fv = g.probs[i][j][v] * V
            out[j] += (fv if sol.mode == "rational" else float(fv)) * x
    return tuple(q / 2 for q in out)


# ---------------------------------------------------------------------------
# mu and eta
# ---------------------------------------------------------------------------


def _subsets(S: Iterable[int]) -> Iterable[tuple[int, ...]]:
    items = sorted(S)
    for r in range(len(items) + 1):
        yield from itertools.combinations(items, r)


def mu(inst: Instance, i: int, t_i: BidderType, S: Iterable[int], Q: Sequence[Any], tau_i: Any, cap: int = 20) -> Any:
    """``max_{S' ⊆ S} v(t_i, S' ∩ C) - sum_{S'} Q`` with ``C = {j : V_ij <= Q_j + tau_i}``."""
    S = frozenset(S)
    if len(S) > cap:
        raise ProfileCapError(2 ** len(S), 2**cap, "subsets")
    C = frozenset(j for j in range(inst.m) if singleton_value(inst, i, j, t_i[j]) <= Q[j] + tau_i)
    tv = type_vector(inst, i, t_i)
    val = inst.valuations[i]
    best = 0
    for Sp in _subsets(S):
        u = value_oracle(val, tv, frozenset(Sp) & C) - sum((Q[j] for j in Sp), 0)
        if u > best:
            best = u
    return best


def eta(
    inst: Instance,
    i: int,
    t_i: BidderType,
    S: Iterable[int],
    dual: DualDistribution,
    cap: int = config.ETA_CAP,
    samples: int = 100_000,
    seed: int = 0,
) -> Any:
    """``E_{(beta, delta) ~ C_i}[max_{j in S} (V_ij - beta_ij)^+ 1[V_ij <= beta_ij + delta_ij]]``.

    Exact over the product of the per-item supports when its size is within
    ``cap``; otherwise a seeded Monte Carlo mean (returned as ``(mean, stderr)``).
    """
    S = sorted(S)
    if not S:
        return 0
    terms = []
    for j in S:
        V = singleton_value(inst, i, j, t_i[j])
        row = []
        for (beta, delta), w in dual.joint[i][j]:
            val = V - beta.value if (V > beta.value and V <= beta.value + delta) else ZERO
            row.append((val, w))
        terms.append(row)
    size = math.prod(len(r) for r in terms)
    if size <= cap:
        total = 0
        for combo in itertools.product(*terms):
            p = 1
            for _, w in combo:
                p *= w
            total += p * max(v for v, _ in combo)
        return total
    rng = np.random.default_rng(seed)
    draws = np.zeros(samples)
    for row in terms:
        vals = np.array([float(v) for v, _ in row])
        ws = np.array([float(w) for _, w in row])
        draws = np.maximum(draws, vals[rng.choice(len(row), size=samples, p=ws / ws.sum())])
    return float(draws.mean()), float(draws.std(ddof=1) / math.sqrt(samples))


# ---------------------------------------------------------------------------
# property suites
# ---------------------------------------------------------------------------


def lipschitz_distance(t: BidderType, t2: BidderType, X: frozenset[int], Y: frozenset[int]) -> int:
    """``|X Δ Y| + |{j in X ∩ Y : t_j != t'_j}|``."""
    return len(X ^ Y) + sum(1 for j in X & Y if t[j] != t2[j])


@dataclass(frozen=True)
class SuiteResult:
    """Violation counts of one set-function property suite."""

    name: str
    checks: int
    monotone: int
    subadditive: int
    externality: int
    lipschitz: int
    constant: Any

    @property
    def violations(self) -> int:
        return self.monotone + self.subadditive + self.externality + self.lipschitz

    @property
    def ok(self) -> bool:
        return self.violations == 0


def check_set_function(
    name: str,
    inst: Instance,
    i: int,
    func,
    constant: Any,
    tol: float = 0.0,
) -> SuiteResult:
    """Exhaustive monotonicity, subadditivity, no-externality and ``constant``-Lipschitz checks.

    ``func(t_i, S)`` is evaluated on every type of bidder ``i`` and every
    subset of items.
    """
    m = inst.m
    types = [t for t, _ in bidder_types(inst, i)]
    sets = [frozenset(s) for s in _subsets(range(m))]
    table = {(t, S): func(t, S) for t in types for S in sets}
    checks = mono = sub = ext = lip = 0
    for t in types:
        for A in sets:
            for B in sets:
                checks += 1
                if A <= B and table[(t, A)] > table[(t, B)] + tol:
                    mono += 1
                if table[(t, A | B)] > table[(t, A)] + table[(t, B)] + tol:
                    sub += 1
    for t in types:
        for t2 in types:
            for A in sets:
                if all(t[j] == t2[j] for j in A) and abs(table[(t, A)] - table[(t2, A)]) > tol:
                    ext += 1
                for B in sets:
                    if abs(table[(t, A)] - table[(t2, B)]) > constant * lipschitz_distance(t, t2, A, B) + tol:
                        lip += 1
    return SuiteResult(name, checks, mono, sub, ext, lip, constant)


@dataclass(frozen=True)
class DiagnosticsReport:
    Q: tuple[Any, ...]
    Qhat: tuple[Any, ...]
    tau: tuple[Tau, ...]
    suites: tuple[SuiteResult, ...]
    gap: Any
    gap_bound: Any

    @property
    def qhat_ok(self) -> bool:
        return all(qh <= q + 1e-9 for q, qh in zip(self.Q, self.Qhat))


def run_diagnostics(inst: Instance, sol: RelaxationSolution, Q: Sequence[Any], prev: Any, tol: float = 1e-9) -> DiagnosticsReport:
    """``tau``, ``Qhat`` and the ``mu`` / ``eta`` property suites for every bidder."""
    dual = dual_distribution(sol)
    tau = compute_tau(inst, sol, Q, dual)
    Qhat = compute_shifted_prices(inst, sol, Q, tau)
    suites = []
    d = sol.d
    for i in range(inst.n):
        ti = tau[i].value
        suites.append(
            check_set_function(f"mu[{i}]", inst, i, lambda t, S, i=i, ti=ti: mu(inst, i, t, S, Q, ti), ti, tol)
        )
        suites.append(check_set_function(f"eta[{i}]", inst, i, lambda t, S, i=i: eta(inst, i, t, S, dual), d[(i,)], tol))
    gap = sum(Q) - sum(Qhat)
    return DiagnosticsReport(tuple(Q), tuple(Qhat), tau, tuple(suites), gap, QHAT_GAP_FACTOR * Fraction(prev))


def diagnostics_report(rep: DiagnosticsReport) -> dict[str, Any]:
    def enc(x: Any) -> Any:
        return str(x) if isinstance(x, Fraction) else float(x)

    return {
        "Q": [enc(q) for q in rep.Q],
        "Qhat": [enc(q) for q in rep.Qhat],
        "qhat_le_q": rep.qhat_ok,
        "tau": [{"value": enc(t.value), "jump": t.jump} for t in rep.tau],
        "suites": [
            {
                "name": s.name,
                "checks": s.checks,
                "monotone": s.monotone,
                "subadditive": s.subadditive,
                "externality": s.externality,
                "lipschitz": s.lipschitz,
                "constant": enc(s.constant),
                "pass": s.ok,
            }
            for s in rep.suites
        ],
        "gap": enc(rep.gap),
        "gap_bound": enc(rep.gap_bound),
        "gap_within_bound": float(rep.gap) <= float(rep.gap_bound),
    }


__all__ = [
    "DiagnosticsReport",
    "DualDistribution",
    "SuiteResult",
    "Tau",
    "check_set_function",
    "compute_shifted_prices",
    "compute_tau",
    "diagnostics_report",
    "dual_distribution",
    "eta",
    "lipschitz_distance",
    "mu",
    "run_diagnostics",
    "tail_sum",
]
