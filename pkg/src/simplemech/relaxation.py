"""Master LP relaxation over marginal reduced forms and the item prices it induces.

Variables per bidder ``i`` and item ``j``:

* ``w[i,j,v]`` (and ``pi[i,j,v]`` for XOS bidders): the marginal reduced form;
* ``lam[i,j,v,b,d]``: allocation mass of value index ``v`` under dual point
  ``(beta_b, delta_d)``;
* ``lamhat[i,j,b,d]``: the dual distribution over ``(beta, delta)``;
* ``d[i]``: an upper bound on the expected ``delta``.

``beta`` grid points carry a strict flag instead of a numeric offset, so
``1[V <= beta+ + delta]`` reads ``V <= beta + delta`` and
``Pr[V >= beta+]`` reads ``Pr[V > beta]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

from . import config
from .lp_solver import LinearProgram, LpResult, check_point, solve_lp
from .model import Instance, singleton_values
from .polytopes import ApproxPolytope, add_polytope_constraints, build_approx_polytope, build_exact_polytope

ZERO = Fraction(0)
CONSTRAINT9_FACTOR = 111
DELTA_RANGE_FACTOR = 55


class RelaxationError(RuntimeError):
    """The relaxation could not be solved (it is always feasible, so this is internal)."""

    def __init__(self, message: str, lp_text: str | None = None) -> None:
        super().__init__(message)
        self.lp_text = lp_text


@dataclass(frozen=True, order=True)
class Beta:
    """Grid value ``beta`` or, with ``plus`` set, the infinitesimally larger ``beta+``."""

    value: Fraction
    plus: bool = False

    def __str__(self) -> str:
        return f"{self.value}{'+' if self.plus else ''}"


def indicator_le(V: Any, beta: Beta, delta: Any) -> bool:
    """``1[V <= beta + delta]`` (identical for ``beta`` and ``beta+`` on grid values)."""
    return V <= beta.value + delta


def prob_at_least(values: Sequence[Any], probs: Sequence[Any], beta: Beta) -> Any:
    """``Pr[V >= beta]``, or ``Pr[V > beta]`` for a strict-flag ``beta``."""
    if beta.plus:
        return sum((p for v, p in zip(values, probs) if v > beta.value), ZERO)
    return sum((p for v, p in zip(values, probs) if v >= beta.value), ZERO)


@dataclass(frozen=True)
class DualGrid:
    """Discretized dual parameters.

    ``values[i][j][v]`` is ``V_ij`` at support index ``v``; ``V0[i][j]`` the
    distinct values; ``betas[i][j]`` lists ``V0`` followed by its strict
    copies; ``deltas`` is the geometric grid.
    """

    n: int
    prev: Fraction
    deltas: tuple[Fraction, ...]
    values: tuple[tuple[tuple[Fraction, ...], ...], ...]
    probs: tuple[tuple[tuple[Fraction, ...], ...], ...]
    V0: tuple[tuple[tuple[Fraction, ...], ...], ...]
    betas: tuple[tuple[tuple[Beta, ...], ...], ...]

    def beta_index(self, i: int, j: int, beta: Beta) -> int:
        return self.betas[i][j].index(beta)

    def delta_index(self, delta: Fraction) -> int:
        return self.deltas.index(delta)


def delta_exponent_max(n: int) -> int:
    """``ceil(log2(55 n))`` computed exactly."""
    x = 0
    while 2**x < DELTA_RANGE_FACTOR * n:
        x += 1
    return x


def build_dual_grid(inst: Instance, prev_estimate: Any) -> DualGrid:
    """``V0``, ``V+`` and ``Delta = {2^x / n * prev : x = 0..ceil(log2(55 n))}``."""
    prev = Fraction(prev_estimate)
    if prev <= 0:
        raise ValueError(f"revenue estimate must be positive, got {prev}")
    n = inst.n
    deltas = tuple(Fraction(2**x, n) * prev for x in range(delta_exponent_max(n) + 1))
    values, probs, V0, betas = [], [], [], []
    for i in range(n):
        vr, pr, v0r, br = [], [], [], []
        for j in range(inst.m):
            vals = singleton_values(inst, i, j)
            base = tuple(sorted(set(vals)))
            vr.append(vals)
            pr.append(inst.marginals[i][j].probs)
            v0r.append(base)
            br.append(tuple(Beta(b) for b in base) + tuple(Beta(b, True) for b in base))
        values.append(tuple(vr))
        probs.append(tuple(pr))
        V0.append(tuple(v0r))
        betas.append(tuple(br))
    return DualGrid(n, prev, deltas, tuple(values), tuple(probs), tuple(V0), tuple(betas))


def grid_prev(prev: Any) -> Fraction:
    """Revenue estimate used for the grid; a zero estimate falls back to 1."""
    prev = Fraction(prev)
    return prev if prev > 0 else Fraction(1)


# ---------------------------------------------------------------------------
# LP construction
# ---------------------------------------------------------------------------


@dataclass
class RelaxationLP:
    """A built relaxation LP with its variable layout."""

    lp: LinearProgram
    inst: Instance
    grid: DualGrid
    polytopes: tuple[ApproxPolytope, ...]
    xos_form: tuple[str, ...]
    include_constraint2: bool
    families: dict[str, list[int]] = field(default_factory=dict)

    def family_of(self, row: int) -> str:
        if not hasattr(self, "_row_family"):
            self._row_family = {r: f for f, rows in self.families.items() for r in rows}
        return self._row_family.get(row, "?")


def _choose_form(poly: ApproxPolytope, xos: bool, requested: str | None) -> str:
    if not xos:
        return "CA"
    if requested is not None:
        return requested
    return "P" if poly.mode == "W" else "P'"


def build_lp(
    inst: Instance,
    grid: DualGrid,
    polytopes: Sequence[ApproxPolytope],
    include_constraint2: bool = True,
    xos_form: str | None = None,
) -> RelaxationLP:
    """Build the master LP.

    Parameters
    ----------
    polytopes:
        One polytope per bidder, imposed on ``w`` (row family ``c1``). For XOS
        bidders an exact polytope defaults to program ``P`` with
        ``(pi, w)`` in it, an approximate one to ``P'`` with
        ``(pihat, what)`` in it, ``pi >= 3/2 pihat`` and ``w <= what / 4``.
    include_constraint2:
        Whether to add the per-item supply rows (family ``c2``).
    """
    if len(polytopes) != inst.n or grid.n != inst.n:
        raise ValueError("grid/polytopes do not match the instance")
    for i in range(inst.n):
        for j in range(inst.m):
            if len(grid.values[i][j]) != inst.marginals[i][j].size:
                raise ValueError(f"grid does not match marginal ({i},{j})")
    lp = LinearProgram("relaxation")
    fam: dict[str, list[int]] = {f"c{k}": [] for k in range(1, 10)}
    forms = []
    D = len(grid.deltas)

    def add(family: str, coeffs: dict[int, Any], rel: str, rhs: Any, name: Any) -> None:
        fam[family].append(lp.add_row(coeffs, rel, rhs, name))

    objective: dict[int, Any] = {}
    for i in range(inst.n):
        xos = inst.is_xos(i)
        for j in range(inst.m):
            for v in range(inst.marginals[i][j].size):
                lp.add_variable(("w", i, j, v))
                if xos:
                    lp.add_variable(("pi", i, j, v))
        lp.add_variable(("d", i))
        for j in range(inst.m):
            betas = grid.betas[i][j]
            for b in range(len(betas)):
                for d in range(D):
                    lp.add_variable(("lamhat", i, j, b, d))
            for v, V in enumerate(grid.values[i][j]):
                f = grid.probs[i][j][v]
                for b, beta in enumerate(betas):
                    for d, delta in enumerate(grid.deltas):
                        var = lp.add_variable(("lam", i, j, v, b, d))
                        if f * V != 0 and indicator_le(V, beta, delta):
                            objective[var] = f * V
    lp.set_objective(objective)

    for i in range(inst.n):
        xos = inst.is_xos(i)
        poly = polytopes[i]
        form = _choose_form(poly, xos, xos_form)
        forms.append(form)
        coords = [(j, v) for j in range(inst.m) for v in range(inst.marginals[i][j].size)]
        before = lp.num_rows
        if form == "CA":
            exprs = [{lp.var(("w", i, j, v)): 1} for j, v in coords]
            add_polytope_constraints(lp, poly, exprs, [0] * len(exprs), ("poly", i))
        elif form == "P":
            exprs = [{lp.var(("pi", i, j, v)): 1} for j, v in coords] + [{lp.var(("w", i, j, v)): 1} for j, v in coords]
            add_polytope_constraints(lp, poly, exprs, [0] * len(exprs), ("poly", i))
        else:
            hat_pi = [lp.add_variable(("pihat", i, j, v)) for j, v in coords]
            hat_w = [lp.add_variable(("what", i, j, v)) for j, v in coords]
            exprs = [{x: 1} for x in hat_pi] + [{x: 1} for x in hat_w]
            add_polytope_constraints(lp, poly, exprs, [0] * len(exprs), ("poly", i))
            for (j, v), hp, hw in zip(coords, hat_pi, hat_w):
                lp.add_row({lp.var(("pi", i, j, v)): 1, hp: Fraction(-3, 2)}, ">=", 0, ("c1p_pi", i, j, v))
                lp.add_row({lp.var(("w", i, j, v)): 1, hw: Fraction(-1, 4)}, "<=", 0, ("c1p_w", i, j, v))
        fam["c1"].extend(range(before, lp.num_rows))

    # c2: supply
    if include_constraint2:
        for j in range(inst.m):
            row = {}
            for i in range(inst.n):
                key = "pi" if inst.is_xos(i) else "w"
                for v in range(inst.marginals[i][j].size):
                    row[lp.var((key, i, j, v))] = 1
            add("c2", row, "<=", 1, ("c2", j))

    for i in range(inst.n):
        for j in range(inst.m):
            betas = grid.betas[i][j]
            vals, probs = grid.values[i][j], grid.probs[i][j]
            # c3: f * sum lam = w
            for v in range(len(vals)):
                row = {lp.var(("lam", i, j, v, b, d)): probs[v] for b in range(len(betas)) for d in range(D)}
                row[lp.var(("w", i, j, v))] = -1
                add("c3", row, "=", 0, ("c3", i, j, v))
            # c4: lam <= lamhat
            for v in range(len(vals)):
                for b in range(len(betas)):
                    for d in range(D):
                        add(
                            "c4",
                            {lp.var(("lam", i, j, v, b, d)): 1, lp.var(("lamhat", i, j, b, d)): -1},
                            "<=",
                            0,
                            ("c4", i, j, v, b, d),
                        )
            # c5: lamhat is a distribution
            add(
                "c5",
                {lp.var(("lamhat", i, j, b, d)): 1 for b in range(len(betas)) for d in range(D)},
                "=",
                1,
                ("c5", i, j),
            )
            # c7: for base beta and its strict copy
            nb = len(grid.V0[i][j])
            for b in range(nb):
                bp = b + nb
                for d in range(D):
                    row: dict[int, Any] = {}
                    for v in range(len(vals)):
                        half_f = probs[v] / 2
                        row[lp.var(("lam", i, j, v, b, d))] = half_f
                        row[lp.var(("lam", i, j, v, bp, d))] = half_f
                    pa = prob_at_least(vals, probs, betas[b])
                    pb = prob_at_least(vals, probs, betas[bp])
                    if pa:
                        row[lp.var(("lamhat", i, j, b, d))] = -pa
                    if pb:
                        row[lp.var(("lamhat", i, j, bp, d))] = -pb
                    add("c7", row, "<=", 0, ("c7", i, j, b, d))
            # c8: expected delta
            row = {lp.var(("lamhat", i, j, b, d)): delta for b in range(len(betas)) for d, delta in enumerate(grid.deltas)}
            row[lp.var(("d", i))] = -1
            add("c8", row, "<=", 0, ("c8", i, j))
    # c6: per item
    for j in range(inst.m):
        row = {}
        for i in range(inst.n):
            vals, probs = grid.values[i][j], grid.probs[i][j]
            for b, beta in enumerate(grid.betas[i][j]):
                pa = prob_at_least(vals, probs, beta)
                if pa:
                    for d in range(D):
                        row[lp.var(("lamhat", i, j, b, d))] = pa
        add("c6", row, "<=", Fraction(1, 2), ("c6", j))
    # c9: total expected delta
    add("c9", {lp.var(("d", i)): 1 for i in range(inst.n)}, "<=", CONSTRAINT9_FACTOR * grid.prev, ("c9",))
    return RelaxationLP(lp, inst, grid, tuple(polytopes), tuple(forms), include_constraint2, fam)


# ---------------------------------------------------------------------------
# solutions
# ---------------------------------------------------------------------------


@dataclass
class RelaxationSolution:
    """Values of the relaxation variables plus bookkeeping.

    ``w``, ``pi``, ``lam``, ``lamhat`` and ``d`` are dictionaries keyed like
    the LP variable names without the leading tag.
    """

    relax: RelaxationLP
    x: list[Any]
    objective: Any
    mode: str
    result: LpResult | None = None

    @property
    def inst(self) -> Instance:
        return self.relax.inst

    @property
    def grid(self) -> DualGrid:
        return self.relax.grid

    def value(self, name: Any) -> Any:
        return self.x[self.relax.lp.var(name)]

    def _collect(self, tag: str) -> dict[tuple, Any]:
        return {name[1:]: self.x[k] for k, name in enumerate(self.relax.lp.names) if isinstance(name, tuple) and name[0] == tag}

    @property
    def w(self) -> dict[tuple, Any]:
        return self._collect("w")

    @property
    def pi(self) -> dict[tuple, Any]:
        return self._collect("pi")

    @property
    def lam(self) -> dict[tuple, Any]:
        return self._collect("lam")

    @property
    def lamhat(self) -> dict[tuple, Any]:
        return self._collect("lamhat")

    @property
    def d(self) -> dict[tuple, Any]:
        return self._collect("d")

    def objective_from_lambda(self) -> Any:
        """Objective recomputed from ``lam`` through the indicator definition."""
        g = self.grid
        total = ZERO if self.mode == "rational" else 0.0
        for (i, j, v, b, d), x in self.lam.items():
            V = g.values[i][j][v]
            if indicator_le(V, g.betas[i][j][b], g.deltas[d]):
                total += _num(g.probs[i][j][v] * V, self.mode) * x
        return total

    def residuals(self):
        return check_point(self.relax.lp, self.x)

    def family_violations(self) -> dict[str, float]:
        """Largest violation per constraint family (and bounds)."""
        rep = self.residuals()
        out = {f: 0.0 for f in self.relax.families}
        for r, viol in enumerate(rep.row_violations):
            if viol:
                fam = self.relax.family_of(r)
                out[fam] = max(out.get(fam, 0.0), float(viol))
        out["bounds"] = max((float(v) for v in rep.bound_violations), default=0.0)
        return out


def _num(x: Fraction, mode: str) -> Any:
    return x if mode == "rational" else float(x)


def solve_relaxation(
    inst: Instance,
    grid: DualGrid,
    polytopes: Sequence[ApproxPolytope],
    mode: str = "float",
    include_constraint2: bool = True,
    xos_form: str | None = None,
) -> RelaxationSolution:
    """Build and solve the relaxation.

    Raises
    ------
    RelaxationError
        If the LP is not solved to optimality (it is always feasible).
    """
    relax = build_lp(inst, grid, polytopes, include_constraint2, xos_form)
    res = solve_lp(relax.lp, mode)
    if not res.optimal:
        raise RelaxationError(f"relaxation LP ended with status {res.status}", relax.lp.to_lp_text())
    return RelaxationSolution(relax, list(res.x), res.objective, mode, res)


def polytopes_for(
    inst: Instance,
    kind: str = "exact",
    samples: int = config.DEFAULT_POLY_SAMPLES,
    seed: int = 0,
    scale: Any = 1,
) -> tuple[ApproxPolytope, ...]:
    """Per-bidder polytopes: ``exact`` (``W_i``), ``approx`` (exact-distribution proxy) or ``sampled``."""
    out = []
    for i in range(inst.n):
        if kind == "exact":
            P = build_exact_polytope(inst, i)
        elif kind == "approx":
            P = build_approx_polytope(inst, i, mode="exact")
        elif kind == "sampled":
            P = build_approx_polytope(inst, i, mode="sampled", samples=samples, seed=seed)
        else:
            raise ValueError(f"unknown polytope kind {kind!r}")
        out.append(P.scaled(scale) if scale != 1 else P)
    return tuple(out)


# ---------------------------------------------------------------------------
# item prices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ItemPrices:
    Q: tuple[Any, ...]

    def total(self) -> Any:
        return sum(self.Q)


def compute_item_prices(sol: RelaxationSolution) -> ItemPrices:
    """``Q_j = 1/2 sum_i sum_t f V sum lam 1[V <= beta + delta]``; ``2 sum Q`` is the objective."""
    g = sol.grid
    zero = ZERO if sol.mode == "rational" else 0.0
    Q = [zero] * sol.inst.m
    for (i, j, v, b, d), x in sol.lam.items():
        V = g.values[i][j][v]
        if indicator_le(V, g.betas[i][j][b], g.deltas[d]):
            Q[j] += _num(g.probs[i][j][v] * V, sol.mode) * x
    half = Fraction(1, 2) if sol.mode == "rational" else 0.5
    return ItemPrices(tuple(max(q * half, zero) for q in Q))


def solution_report(sol: RelaxationSolution, prices: ItemPrices, tol: float = 1e-12) -> dict[str, Any]:
    """Sparse export: ``w``, ``lambda`` triplets, ``Q`` and the objective."""

    def enc(x: Any) -> Any:
        return str(x) if isinstance(x, Fraction) else float(x)

    lam = [[list(k), enc(v)] for k, v in sorted(sol.lam.items()) if abs(v) > tol]
    w = [[list(k), enc(v)] for k, v in sorted(sol.w.items()) if abs(v) > tol]
    return {
        "objective": enc(sol.objective),
        "Q": [enc(q) for q in prices.Q],
        "w": w,
        "lambda": lam,
        "lamhat": [[list(k), enc(v)] for k, v in sorted(sol.lamhat.items()) if abs(v) > tol],
        "d": [enc(sol.d[(i,)]) for i in range(sol.inst.n)],
        "grid": {"prev": str(sol.grid.prev), "deltas": [str(x) for x in sol.grid.deltas]},
    }


__all__ = [
    "Beta",
    "DualGrid",
    "ItemPrices",
    "RelaxationError",
    "RelaxationLP",
    "RelaxationSolution",
    "build_dual_grid",
    "build_lp",
    "compute_item_prices",
    "grid_prev",
    "indicator_le",
    "polytopes_for",
    "prob_at_least",
    "solve_relaxation",
]

