"""Sample-access pipeline: Kolmogorov distance, DKW sizing and empirical instances."""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Sequence, TextIO

import numpy as np

from .model import XOS, DiscreteMarginal, Instance, singleton_value


def kolmogorov_distance(a: DiscreteMarginal, b: DiscreteMarginal) -> Fraction:
    """``sup_z |Pr_a[t <= z] - Pr_b[t <= z]|``, attained at a point of the merged support."""
    points = sorted(set(a.support) | set(b.support))
    return max((abs(a.cdf(z) - b.cdf(z)) for z in points), default=Fraction(0))


def dkw_sample_count(n: int, m: int, eps: Any, delta: Any) -> int:
    """``ceil(ln(2nm/delta) / (2 eps^2))``: DKW with a union bound over the ``nm`` marginals.

    Raises
    ------
    ValueError
        If ``eps`` or ``delta`` lies outside ``(0, 1]`` or ``n * m < 1``.
    """
    eps, delta = float(eps), float(delta)
    if not (0 < eps <= 1) or not (0 < delta <= 1):
        raise ValueError("eps and delta must lie in (0, 1]")
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    raw = math.log(2 * n * m / delta) / (2 * eps * eps)
    # guard against float noise just above an integer
    return max(1, math.ceil(raw - 1e-12))


@dataclass(frozen=True)
class SampleLog:
    """Drawn support indices, ``draws[i][j]`` of length ``N``."""

    N: int
    seed: int
    draws: tuple[tuple[tuple[int, ...], ...], ...]

    def write_csv(self, fh: TextIO, inst: Instance, trial: int = 0) -> None:
        w = csv.writer(fh)
        w.writerow(["trial", "i", "j", "draw", "value"])
        for i, row in enumerate(self.draws):
            for j, idx in enumerate(row):
                sup = inst.marginals[i][j].support
                for k, v in enumerate(idx):
                    w.writerow([trial, i, j, k, str(sup[v])])


def draw_indices(inst: Instance, N: int, seed: int) -> SampleLog:
    """``N`` i.i.d. support indices per marginal, seeded by ``(seed, i, j)``."""
    if N < 1:
        raise ValueError("N must be at least 1")
    draws = []
    for i in range(inst.n):
        row = []
        for j in range(inst.m):
            d = inst.marginals[i][j]
            rng = np.random.default_rng([seed, i, j])
            p = np.array([float(x) for x in d.probs])
            row.append(tuple(int(v) for v in rng.choice(d.size, size=N, p=p / p.sum())))
        draws.append(tuple(row))
    return SampleLog(N, seed, tuple(draws))


def instance_from_draws(inst: Instance, log: SampleLog) -> Instance:
    """Uniform distribution over the drawn multiset, collapsed to distinct values.

    XOS coefficient rows are restricted to the drawn support indices so each
    retained value keeps its additive functions.
    """
    marginals = []
    vals = []
    for i in range(inst.n):
        row = []
        alpha = []
        for j in range(inst.m):
            d = inst.marginals[i][j]
            counts = Counter(log.draws[i][j])
            keep = sorted(counts)
            row.append(DiscreteMarginal(tuple(d.support[v] for v in keep), tuple(Fraction(counts[v], log.N) for v in keep)))
            if isinstance(inst.valuations[i], XOS):
                alpha.append(tuple(inst.valuations[i].alpha[j][v] for v in keep))
        marginals.append(tuple(row))
        vals.append(XOS(tuple(alpha)) if isinstance(inst.valuations[i], XOS) else inst.valuations[i])
    return Instance(inst.n, inst.m, tuple(marginals), tuple(vals))


def empirical_instance(inst: Instance, N: int, seed: int) -> Instance:
    """Empirical instance from ``N`` seeded draws per marginal; valuations are copied."""
    return instance_from_draws(inst, draw_indices(inst, N, seed))


def max_kolmogorov(a: Instance, b: Instance) -> Fraction:
    """Largest per-marginal Kolmogorov distance between two instances of the same shape."""
    return max(kolmogorov_distance(x, y) for ra, rb in zip(a.marginals, b.marginals) for x, y in zip(ra, rb))


@dataclass(frozen=True)
class ConcentrationResult:
    trials: int
    N: int
    eps: float
    delta: float
    exceed: int
    allowed: float

    @property
    def ok(self) -> bool:
        return self.exceed <= self.allowed


def concentration_trials(inst: Instance, eps: Any, delta: Any, trials: int = 200, seed: int = 0) -> ConcentrationResult:
    """Count trials whose empirical max Kolmogorov distance exceeds ``eps``.

    Trial ``k`` draws with seed ``(seed, k)`` folded to an integer. The
    allowance is ``delta * trials`` plus three binomial standard deviations.
    """
    N = dkw_sample_count(inst.n, inst.m, eps, delta)
    exceed = 0
    for k in range(trials):
        sub = int(np.random.SeedSequence([seed, k]).generate_state(1)[0])
        if max_kolmogorov(inst, empirical_instance(inst, N, sub)) > Fraction(eps).limit_denominator(10**9):
            exceed += 1
    d = float(delta)
    allowed = d * trials + 3 * math.sqrt(d * (1 - d) * trials)
    return ConcentrationResult(trials, N, float(eps), d, exceed, allowed)


def value_range(inst: Instance) -> tuple[Fraction, Fraction]:
    """Smallest and largest singleton value ``V_ij`` over all supports."""
    vals = [
        singleton_value(inst, i, j, v)
        for i in range(inst.n)
        for j in range(inst.m)
        for v in range(inst.marginals[i][j].size)
    ]
    return min(vals), max(vals)


def rescale_to_unit(inst: Instance) -> tuple[Instance, Fraction]:
    """Divide every value by the largest singleton value.

    Constrained-additive supports and XOS coefficients are scaled alike.
    Returns the rescaled instance and the factor, which is 1 when values
    already lie in ``[0, 1]``.
    """
    _, hi = value_range(inst)
    if hi <= 1:
        return inst, Fraction(1)
    marg = []
    vals = []
    for i in range(inst.n):
        val = inst.valuations[i]
        if isinstance(val, XOS):
            marg.append(inst.marginals[i])
            vals.append(XOS(tuple(tuple(tuple(c / hi for c in row) for row in item) for item in val.alpha)))
        else:
            marg.append(tuple(DiscreteMarginal(tuple(v / hi for v in d.support), d.probs) for d in inst.marginals[i]))
            vals.append(val)
    return Instance(inst.n, inst.m, tuple(marg), tuple(vals)), hi


def sample_pipeline(inst: Instance, eps: Any, delta: Any, seed: int = 0) -> dict[str, Any]:
    """Mechanisms fitted on an empirical instance and evaluated on the true one.

    Reports ``OPT`` on the true instance next to both mechanisms' true
    revenue; the additive degradation is reported, not asserted.
    """
    from .exact_oracle import optimal_bic_revenue
    from .mechanisms import TptSpec, expected_revenue, optimize_rpp
    from .relaxation import build_dual_grid, compute_item_prices, grid_prev, polytopes_for, solve_relaxation

    N = dkw_sample_count(inst.n, inst.m, eps, delta)
    emp = empirical_instance(inst, N, seed)
    rpp, prev_emp = optimize_rpp(emp)
    sol = solve_relaxation(emp, build_dual_grid(emp, grid_prev(prev_emp)), polytopes_for(emp, "exact"))
    Q = tuple(Fraction(q).limit_denominator(10**12) for q in compute_item_prices(sol).Q)
    tpt = TptSpec(Q)
    rev_rpp = expected_revenue(rpp, inst).value
    rev_tpt = expected_revenue(tpt, inst).value
    opt = optimal_bic_revenue(inst).opt
    return {
        "N": N,
        "eps": float(eps),
        "delta": float(delta),
        "max_kolmogorov": float(max_kolmogorov(inst, emp)),
        "prev_empirical": float(prev_emp),
        "rev_rpp_true": float(rev_rpp),
        "rev_tpt_true": float(rev_tpt),
        "opt_true": float(opt),
        "gap": float(opt) - max(float(rev_rpp), float(rev_tpt)),
        "nm2eps": inst.n * inst.m**2 * float(eps),
    }


__all__ = [
    "ConcentrationResult",
    "SampleLog",
    "concentration_trials",
    "dkw_sample_count",
    "draw_indices",
    "empirical_instance",
    "instance_from_draws",
    "kolmogorov_distance",
    "max_kolmogorov",
    "rescale_to_unit",
    "sample_pipeline",
    "value_range",
]
