"""Self-contained LP solver: two-phase revised simplex with Bland's rule.

Two numeric engines share one driver:

* ``float`` keeps a dense explicit basis inverse in numpy and refactorizes it
  periodically.
* ``rational`` keeps a sparse explicit basis inverse over
  :class:`fractions.Fraction` and is exact.

Rational mode warm-starts from the basis found in float mode. The float basis
is re-factorized exactly, checked for primal feasibility, and exact Bland
iterations then continue from it. Optimality is always certified exactly, so
the warm start affects speed only. When the float basis is unusable the
exact engine runs both phases from scratch.

Every problem is a maximization. Variables carry lower and upper bounds
(possibly infinite). Rows are ``coeffs . x (<=|=|>=) rhs``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable, Mapping, Sequence

import numpy as np

from . import config

INF = math.inf
RELATIONS = ("<=", "=", ">=")


class LpError(RuntimeError):
    """Raised for malformed programs."""


@dataclass(frozen=True)
class Row:
    """One constraint row ``sum(coeffs) rel rhs``."""

    coeffs: tuple[tuple[int, object], ...]
    rel: str
    rhs: object
    name: Hashable


class LinearProgram:
    """A maximization LP assembled incrementally.

    Variables are addressed by integer index; each also has a hashable name so
    callers can look it up again with :meth:`var`.
    """

    def __init__(self, name: str = "lp") -> None:
        self.name = name
        self.names: list[Hashable] = []
        self.lb: list[object] = []
        self.ub: list[object] = []
        self.obj: dict[int, object] = {}
        self.rows: list[Row] = []
        self._index: dict[Hashable, int] = {}

    # -- construction ------------------------------------------------------
    def add_variable(self, name: Hashable, lb: object = 0, ub: object = INF, obj: object = 0) -> int:
        if name in self._index:
            raise LpError(f"duplicate variable {name!r}")
        if lb > ub:
            raise LpError(f"variable {name!r} has lb > ub")
        idx = len(self.names)
        self.names.append(name)
        self.lb.append(lb)
        self.ub.append(ub)
        self._index[name] = idx
        if obj:
            self.obj[idx] = obj
        return idx

    def var(self, name: Hashable) -> int:
        return self._index[name]

    def has_var(self, name: Hashable) -> bool:
        return name in self._index

    def add_row(self, coeffs: Mapping[int, object], rel: str, rhs: object, name: Hashable = None) -> int:
        if rel not in RELATIONS:
            raise LpError(f"unknown relation {rel!r}")
        merged: dict[int, object] = {}
        for k, a in coeffs.items():
            if not 0 <= k < len(self.names):
                raise LpError(f"row {name!r} references unknown variable {k}")
            if isinstance(a, float) and not math.isfinite(a):
                raise LpError(f"row {name!r} has a non-finite coefficient")
            merged[k] = merged.get(k, 0) + a
        items = tuple(sorted((k, a) for k, a in merged.items() if a != 0))
        idx = len(self.rows)
        self.rows.append(Row(items, rel, rhs, name if name is not None else f"r{idx}"))
        return idx

    def set_objective(self, coeffs: Mapping[int, object]) -> None:
        self.obj = {k: a for k, a in coeffs.items() if a != 0}

    @property
    def num_vars(self) -> int:
        return len(self.names)

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    def objective_value(self, x: Sequence[object]) -> object:
        return sum((a * x[k] for k, a in self.obj.items()), 0)

    def to_lp_text(self) -> str:
        """Dump in CPLEX LP text layout (debugging aid only)."""

        def term(k: int, a: object) -> str:
            return f"{'+' if a >= 0 else '-'} {abs(float(a))!r} x{k}"

        lines = ["\\ " + str(self.name), "Maximize", " obj: " + " ".join(term(k, a) for k, a in sorted(self.obj.items()))]
        lines.append("Subject To")
        op = {"<=": "<=", "=": "=", ">=": ">="}
        for i, row in enumerate(self.rows):
            body = " ".join(term(k, a) for k, a in row.coeffs) or "0 x0"
            lines.append(f" c{i}: {body} {op[row.rel]} {float(row.rhs)!r}")
        lines.append("Bounds")
        for k in range(self.num_vars):
            lo, hi = self.lb[k], self.ub[k]
            lo_s = "-inf" if lo == -INF else repr(float(lo))
            hi_s = "+inf" if hi == INF else repr(float(hi))
            lines.append(f" {lo_s} <= x{k} <= {hi_s}")
        lines.append("End")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ResidualReport:
    """Constraint violations of a point.

    ``max_violation`` is 0 iff the point is feasible. ``worst`` names the
    most violated row (or ``("bound", var_name)``).
    """

    max_violation: object
    worst: Hashable | None
    row_violations: tuple
    bound_violations: tuple


@dataclass(frozen=True)
class LpResult:
    """Solver output. ``x`` and ``objective`` are ``None`` unless optimal."""

    status: str
    x: tuple | None
    objective: object | None
    residuals: tuple
    max_violation: object
    mode: str
    fallback: bool = False
    iterations: int = 0
    duals: tuple | None = None

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def check_point(lp: LinearProgram, x: Sequence[object]) -> ResidualReport:
    """Largest violation of ``x`` over rows and variable bounds."""
    if len(x) != lp.num_vars:
        raise LpError(f"point has {len(x)} entries, program has {lp.num_vars} variables")
    rows = []
    worst, worst_name = 0, None
    for row in lp.rows:
        lhs = sum((a * x[k] for k, a in row.coeffs), 0)
        if row.rel == "<=":
            v = lhs - row.rhs
        elif row.rel == ">=":
            v = row.rhs - lhs
        else:
            v = abs(lhs - row.rhs)
        v = v if v > 0 else 0
        rows.append(v)
        if v > worst:
            worst, worst_name = v, row.name
    bounds = []
    for k in range(lp.num_vars):
        v = 0
        if x[k] < lp.lb[k]:
            v = lp.lb[k] - x[k]
        elif x[k] > lp.ub[k]:
            v = x[k] - lp.ub[k]
        bounds.append(v)
        if v > worst:
            worst, worst_name = v, ("bound", lp.names[k])
    return ResidualReport(worst, worst_name, tuple(rows), tuple(bounds))


# ---------------------------------------------------------------------------
# standard form
# ---------------------------------------------------------------------------


class _StandardForm:
    """``max c.x  s.t.  A x = b, x >= 0`` with ``b >= 0``.

    Column layout: structural columns, then slacks, then artificials. The
    layout depends only on the program and signs of right-hand sides, so the
    float and exact forms of the same program share column indices.
    """

    def __init__(self, lp: LinearProgram, exact: bool) -> None:
        conv = (lambda v: Fraction(v)) if exact else float
        self.exact = exact
        self.var_map: list[tuple[object, list[tuple[int, int]]]] = []
        ncol = 0
        bound_rows: list[tuple[int, object]] = []
        for k in range(lp.num_vars):
            lo, hi = lp.lb[k], lp.ub[k]
            if lo != -INF:
                self.var_map.append((conv(lo), [(ncol, 1)]))
                if hi != INF:
                    bound_rows.append((ncol, conv(hi) - conv(lo)))
                ncol += 1
            elif hi != INF:
                self.var_map.append((conv(hi), [(ncol, -1)]))
                ncol += 1
            else:
                self.var_map.append((conv(0), [(ncol, 1), (ncol + 1, -1)]))
                ncol += 2
        rows: list[tuple[dict[int, object], str, object]] = []
        for row in lp.rows:
            d: dict[int, object] = {}
            rhs = conv(row.rhs)
            for k, a in row.coeffs:
                a = conv(a)
                off, cols = self.var_map[k]
                rhs -= a * off
                for col, s in cols:
                    d[col] = d.get(col, 0) + s * a
            rows.append((d, row.rel, rhs))
        for col, u in bound_rows:
            rows.append(({col: conv(1)}, "<=", u))
        self.n_orig_rows = lp.num_rows
        self.m = len(rows)
        self.flip = [1] * self.m
        basis_slack: list[int | None] = [None] * self.m
        for r, (d, rel, rhs) in enumerate(rows):
            slack_sign = 0
            if rel == "<=":
                slack_sign = 1
            elif rel == ">=":
                slack_sign = -1
            if slack_sign:
                d[ncol] = conv(slack_sign)
            # rows with rhs 0 and a surplus slack are negated so the slack can start basic
            if rhs < 0 or (rhs == 0 and slack_sign == -1):
                for key in d:
                    d[key] = -d[key]
                rows[r] = (d, rel, -rhs)
                self.flip[r] = -1
                slack_sign = -slack_sign
            if slack_sign == 1:
                basis_slack[r] = ncol
            if rel != "=":
                ncol += 1
        self.n_struct = ncol
        self.initial_basis: list[int] = []
        self.artificial: set[int] = set()
        for r in range(self.m):
            if basis_slack[r] is not None:
                self.initial_basis.append(basis_slack[r])
            else:
                rows[r][0][ncol] = conv(1)
                self.initial_basis.append(ncol)
                self.artificial.add(ncol)
                ncol += 1
        self.n = ncol
        self.rows = [d for d, _, _ in rows]
        self.b = [rhs for _, _, rhs in rows]
        c = [conv(0)] * self.n
        self.obj_offset = conv(0)
        for k, a in lp.obj.items():
            a = conv(a)
            off, cols = self.var_map[k]
            self.obj_offset += a * off
            for col, s in cols:
                c[col] += s * a
        self.c = c
        self.cols: list[dict[int, object]] = [dict() for _ in range(self.n)]
        for r, d in enumerate(self.rows):
            for col, a in d.items():
                if a != 0:
                    self.cols[col][r] = a

    def recover(self, xs: Sequence[object]) -> list[object]:
        out = []
        for off, cols in self.var_map:
            out.append(off + sum(s * xs[col] for col, s in cols))
        return out


class _Stalled(Exception):
    pass


class _Singular(Exception):
    pass


# ---------------------------------------------------------------------------
# engines
# ---------------------------------------------------------------------------


class _FloatEngine:
    """Dense revised simplex on numpy arrays."""

    REFACTOR = 64

    def __init__(self, sf: _StandardForm, basis: Sequence[int]) -> None:
        self.sf = sf
        self.A = np.zeros((sf.m, sf.n))
        for r, d in enumerate(sf.rows):
            for col, a in d.items():
                self.A[r, col] = a
        self.b = np.array(sf.b, dtype=float)
        self.is_art = np.zeros(sf.n, dtype=bool)
        self.is_art[list(sf.artificial)] = True
        self.basis = list(basis)
        self.iterations = 0
        self.refactor()

    def refactor(self) -> None:
        B = self.A[:, self.basis]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise _Singular() from exc
        if not np.all(np.isfinite(self.Binv)):
            raise _Singular()
        self.xB = self.Binv @ self.b
        self.xB[np.abs(self.xB) < 1e-12] = 0.0

    def primal_ok(self) -> bool:
        if np.any(self.xB < -config.FEAS_TOL):
            return False
        return all(abs(self.xB[r]) <= config.FEAS_TOL for r, col in enumerate(self.basis) if col in self.sf.artificial)

    def _pivot(self, r: int, q: int, col: np.ndarray) -> None:
        piv = col[r]
        self.Binv[r] /= piv
        theta = self.xB[r] / piv
        col_other = col.copy()
        col_other[r] = 0.0
        nz = np.flatnonzero(col_other)
        if nz.size:
            self.Binv[nz] -= np.outer(col_other[nz], self.Binv[r])
        self.xB -= theta * col_other
        self.xB[r] = theta
        self.basis[r] = q
        self.iterations += 1
        if self.iterations % self.REFACTOR == 0 and self._drift() > 1e-11:
            self.refactor()

    def _drift(self) -> float:
        """Residual of the current basic solution; the inverse is refreshed when it grows."""
        r = self.A[:, self.basis] @ self.xB - self.b
        return float(np.abs(r).max()) if r.size else 0.0

    def run(self, c: Sequence[object], allowed: np.ndarray, max_iter: int) -> str:
        c = np.asarray(c, dtype=float)
        start = self.iterations
        while True:
            if self.iterations - start > max_iter:
                raise _Stalled()
            y = c[self.basis] @ self.Binv
            in_basis = np.zeros(self.sf.n, dtype=bool)
            in_basis[self.basis] = True
            q = self._bland_entering(c, y, allowed & ~in_basis)
            if q is None:
                return "optimal"
            col = self.Binv @ self.A[:, q]
            # a basic artificial sits at zero and must leave before it moves
            basic_art = self.is_art[self.basis]
            stuck = np.flatnonzero(basic_art & (np.abs(col) > config.PIVOT_TOL)).tolist()
            if stuck and not allowed[self.is_art].any():
                self._pivot(min(stuck, key=lambda rr: self.basis[rr]), q, col)
                continue
            pos = col > config.PIVOT_TOL
            if not pos.any():
                return "unbounded"
            rows = np.flatnonzero(pos)
            ratios = np.maximum(self.xB[rows], 0.0) / col[rows]
            best = ratios.min()
            tie = rows[ratios <= best + 1e-12 * (1.0 + abs(best))]
            r = int(min(tie, key=lambda rr: self.basis[rr]))
            self._pivot(r, q, col)

    PRICE_CHUNK = 256

    def _bland_entering(self, c: np.ndarray, y: np.ndarray, eligible: np.ndarray) -> int | None:
        """Lowest-index eligible column with positive reduced cost, priced chunk by chunk."""
        n = self.sf.n
        for lo in range(0, n, self.PRICE_CHUNK):
            hi = min(n, lo + self.PRICE_CHUNK)
            mask = eligible[lo:hi]
            if not mask.any():
                continue
            d = c[lo:hi] - y @ self.A[:, lo:hi]
            cand = np.flatnonzero((d > config.OPT_TOL) & mask)
            if cand.size:
                return lo + int(cand[0])
        return None

    def drive_out_artificials(self) -> None:
        art = self.sf.artificial
        for r in range(self.sf.m):
            if self.basis[r] not in art:
                continue
            rowvals = self.Binv[r] @ self.A
            for j in range(self.sf.n):
                if j in art or j in self.basis:
                    continue
                if abs(rowvals[j]) > 1e-7:
                    col = self.Binv @ self.A[:, j]
                    self._pivot(r, j, col)
                    break

    def solution(self) -> list[float]:
        xs = [0.0] * self.sf.n
        for r, col in enumerate(self.basis):
            xs[col] = float(self.xB[r])
        return xs

    def duals(self, c: Sequence[object]) -> list[float]:
        c = np.asarray(c, dtype=float)
        return list(map(float, c[self.basis] @ self.Binv))


class _ExactEngine:
    """Sparse revised simplex over Fractions with an explicit basis inverse."""

    def __init__(self, sf: _StandardForm, basis: Sequence[int]) -> None:
        self.sf = sf
        self.basis = list(basis)
        self.iterations = 0
        self.Binv = self._invert()
        self.xB = [self._row_dot_b(r) for r in range(sf.m)]

    def _row_dot_b(self, r: int) -> Fraction:
        b = self.sf.b
        return sum((v * b[k] for k, v in self.Binv[r].items()), Fraction(0))

    def _invert(self) -> list[dict[int, Fraction]]:
        sf = self.sf
        m = sf.m
        # rows of B: B[i][p] = A[i, basis[p]]
        M: list[dict[int, Fraction]] = [dict() for _ in range(m)]
        for p, col in enumerate(self.basis):
            for i, a in sf.cols[col].items():
                M[i][p] = Fraction(a)
        aug: list[dict[int, Fraction]] = [{i: Fraction(1)} for i in range(m)]
        pivot_row_of = [0] * m
        free = set(range(m))
        # column -> rows holding a nonzero, maintained lazily
        for p in range(m):
            best = None
            for i in free:
                if M[i].get(p):
                    if best is None or len(M[i]) < len(M[best]):
                        best = i
            if best is None:
                raise _Singular()
            free.discard(best)
            pivot_row_of[p] = best
            piv = M[best][p]
            if piv != 1:
                M[best] = {k: v / piv for k, v in M[best].items()}
                aug[best] = {k: v / piv for k, v in aug[best].items()}
            prow, paug = M[best], aug[best]
            for i in range(m):
                if i == best:
                    continue
                f = M[i].get(p)
                if not f:
                    continue
                row = M[i]
                for k, v in prow.items():
                    nv = row.get(k, 0) - f * v
                    if nv:
                        row[k] = nv
                    else:
                        row.pop(k, None)
                arow = aug[i]
                for k, v in paug.items():
                    nv = arow.get(k, 0) - f * v
                    if nv:
                        arow[k] = nv
                    else:
                        arow.pop(k, None)
        return [aug[pivot_row_of[p]] for p in range(m)]

    def primal_ok(self) -> bool:
        if any(v < 0 for v in self.xB):
            return False
        return all(self.xB[r] == 0 for r, col in enumerate(self.basis) if col in self.sf.artificial)

    def _column(self, q: int) -> list[Fraction]:
        aq = self.sf.cols[q]
        out = []
        for r in range(self.sf.m):
            row = self.Binv[r]
            s = Fraction(0)
            for k, a in aq.items():
                v = row.get(k)
                if v:
                    s += v * a
            out.append(s)
        return out

    def _pivot(self, r: int, q: int, col: list[Fraction]) -> None:
        piv = col[r]
        prow = {k: v / piv for k, v in self.Binv[r].items()}
        theta = self.xB[r] / piv
        for i in range(self.sf.m):
            if i == r:
                continue
            f = col[i]
            if not f:
                continue
            row = self.Binv[i]
            for k, v in prow.items():
                nv = row.get(k, 0) - f * v
                if nv:
                    row[k] = nv
                else:
                    row.pop(k, None)
            self.xB[i] -= theta * f
        self.Binv[r] = prow
        self.xB[r] = theta
        self.basis[r] = q
        self.iterations += 1

    def _y(self, c: Sequence[Fraction]) -> dict[int, Fraction]:
        y: dict[int, Fraction] = {}
        for r, col in enumerate(self.basis):
            cb = c[col]
            if not cb:
                continue
            for k, v in self.Binv[r].items():
                y[k] = y.get(k, 0) + cb * v
        return y

    def run(self, c: Sequence[Fraction], allowed: Sequence[bool], max_iter: int) -> str:
        start = self.iterations
        cols = self.sf.cols
        while True:
            if self.iterations - start > max_iter:
                raise _Stalled()
            y = self._y(c)
            basic = set(self.basis)
            q = -1
            for j in range(self.sf.n):
                if not allowed[j] or j in basic:
                    continue
                d = c[j]
                for r, a in cols[j].items():
                    v = y.get(r)
                    if v:
                        d -= v * a
                if d > 0:
                    q = j
                    break
            if q < 0:
                return "optimal"
            col = self._column(q)
            stuck = [r for r, j in enumerate(self.basis) if j in self.sf.artificial and col[r]]
            if stuck and not any(allowed[j] for j in self.sf.artificial):
                self._pivot(min(stuck, key=lambda rr: self.basis[rr]), q, col)
                continue
            best_r, best_ratio = -1, None
            for r in range(self.sf.m):
                if col[r] > 0:
                    ratio = self.xB[r] / col[r]
                    if (
                        best_ratio is None
                        or ratio < best_ratio
                        or (ratio == best_ratio and self.basis[r] < self.basis[best_r])
                    ):
                        best_r, best_ratio = r, ratio
            if best_r < 0:
                return "unbounded"
            self._pivot(best_r, q, col)

    PRICE_CHUNK = 256

    def _bland_entering(self, c: np.ndarray, y: np.ndarray, eligible: np.ndarray) -> int | None:
        """Lowest-index eligible column with positive reduced cost, priced chunk by chunk."""
        n = self.sf.n
        for lo in range(0, n, self.PRICE_CHUNK):
            hi = min(n, lo + self.PRICE_CHUNK)
            mask = eligible[lo:hi]
            if not mask.any():
                continue
            d = c[lo:hi] - y @ self.A[:, lo:hi]
            cand = np.flatnonzero((d > config.OPT_TOL) & mask)
            if cand.size:
                return lo + int(cand[0])
        return None

    def drive_out_artificials(self) -> None:
        art = self.sf.artificial
        for r in range(self.sf.m):
            if self.basis[r] not in art:
                continue
            row = self.Binv[r]
            basic = set(self.basis)
            for j in range(self.sf.n):
                if j in art or j in basic:
                    continue
                s = sum((row.get(k, 0) * a for k, a in self.sf.cols[j].items()), Fraction(0))
                if s:
                    self._pivot(r, j, self._column(j))
                    break

    def solution(self) -> list[Fraction]:
        xs = [Fraction(0)] * self.sf.n
        for r, col in enumerate(self.basis):
            xs[col] = self.xB[r]
        return xs

    def duals(self, c: Sequence[Fraction]) -> list[Fraction]:
        y = self._y(c)
        return [y.get(r, Fraction(0)) for r in range(self.sf.m)]


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


def _phase_costs(sf: _StandardForm, exact: bool):
    zero, one = (Fraction(0), Fraction(1)) if exact else (0.0, 1.0)
    c1 = [(-one if j in sf.artificial else zero) for j in range(sf.n)]
    return c1


def _allowed(sf: _StandardForm, artificial_ok: bool, exact: bool):
    mask = [artificial_ok or (j not in sf.artificial) for j in range(sf.n)]
    return mask if exact else np.array(mask, dtype=bool)


def _run_two_phase(sf: _StandardForm, engine_cls, warm_basis: Sequence[int] | None, max_iter: int):
    """Returns ``(status, engine)``."""
    exact = sf.exact
    eng = None
    if warm_basis is not None:
        try:
            cand = engine_cls(sf, warm_basis)
            if cand.primal_ok():
                eng = cand
        except _Singular:
            eng = None
    if eng is None:
        eng = engine_cls(sf, sf.initial_basis)
        if sf.artificial:
            c1 = _phase_costs(sf, exact)
            eng.run(c1, _allowed(sf, True, exact), max_iter)
            xs = eng.solution()
            infeas = sum(xs[j] for j in sf.artificial)
            tol = 0 if exact else 1e-7 * max(1.0, max((abs(v) for v in sf.b), default=1.0))
            if infeas > tol:
                return "infeasible", eng
            eng.drive_out_artificials()
    status = eng.run(sf.c, _allowed(sf, False, exact), max_iter)
    return status, eng


def _finish(lp: LinearProgram, sf: _StandardForm, status: str, eng, mode: str, fallback: bool) -> LpResult:
    if status != "optimal":
        return LpResult(status, None, None, (), 0, mode, fallback, eng.iterations if eng else 0)
    xs = eng.solution()
    x = sf.recover(xs)
    if not sf.exact:
        x = [float(v) for v in x]
    rep = check_point(lp, x)
    y = eng.duals(sf.c)
    duals = tuple(y[r] * sf.flip[r] for r in range(sf.n_orig_rows))
    return LpResult(
        "optimal",
        tuple(x),
        lp.objective_value(x),
        rep.row_violations,
        rep.max_violation,
        mode,
        fallback,
        eng.iterations,
        duals,
    )


def _default_max_iter(sf: _StandardForm) -> int:
    return 50 * (sf.m + sf.n) + 1000


def _solve_float(lp: LinearProgram, max_iter: int | None):
    sf = _StandardForm(lp, exact=False)
    try:
        status, eng = _run_two_phase(sf, _FloatEngine, None, max_iter or _default_max_iter(sf))
    except (_Stalled, _Singular):
        return None, None, sf
    return status, eng, sf


def _solve_exact(lp: LinearProgram, warm_basis, max_iter: int | None, fallback: bool) -> LpResult:
    sf = _StandardForm(lp, exact=True)
    status, eng = _run_two_phase(sf, _ExactEngine, warm_basis, max_iter or 10**9)
    return _finish(lp, sf, status, eng, "rational", fallback)


def solve_lp(lp: LinearProgram, mode: str = "float", max_iter: int | None = None) -> LpResult:
    """Solve ``lp`` to optimality.

    Parameters
    ----------
    lp:
        The program (maximization).
    mode:
        ``"float"`` or ``"rational"``. Float results that stall or fail the
        residual check are re-solved exactly, and ``fallback`` is set.
    max_iter:
        Optional per-phase iteration cap for the float engine.

    Returns
    -------
    LpResult
        Status ``optimal``, ``infeasible`` or ``unbounded``.
    """
    if mode not in ("float", "rational"):
        raise ValueError(f"unknown mode {mode!r}")
    status, eng, sf = _solve_float(lp, max_iter)
    if mode == "float":
        if status is None:
            return _solve_exact(lp, None, None, fallback=True)
        res = _finish(lp, sf, status, eng, "float", False)
        if res.optimal and res.max_violation > 1e3 * config.FEAS_TOL:
            return _solve_exact(lp, list(eng.basis), None, fallback=True)
        return res
    warm = list(eng.basis) if status == "optimal" else None
    return _solve_exact(lp, warm, None, fallback=False)


def solve_dual(lp: LinearProgram) -> LinearProgram:
    """Build the explicit dual of ``lp``.

    Only programs whose variables have finite lower bound 0 and infinite
    upper bound are supported (the case used by the duality spot checks).
    The dual is returned as a maximization of the negated dual objective,
    so its optimum equals ``-OPT(lp)``.
    """
    for k in range(lp.num_vars):
        if lp.lb[k] != 0 or lp.ub[k] != INF:
            raise LpError("solve_dual supports x >= 0 variables only")
    dual = LinearProgram(lp.name + "_dual")
    ys = []
    for i, row in enumerate(lp.rows):
        if row.rel == "<=":
            lo, hi = 0, INF
        elif row.rel == ">=":
            lo, hi = -INF, 0
        else:
            lo, hi = -INF, INF
        ys.append(dual.add_variable(("y", i), lo, hi, obj=-row.rhs))
    cols: dict[int, dict[int, object]] = {k: {} for k in range(lp.num_vars)}
    for i, row in enumerate(lp.rows):
        for k, a in row.coeffs:
            cols[k][ys[i]] = a
    for k in range(lp.num_vars):
        dual.add_row(cols[k], ">=", lp.obj.get(k, 0), name=("dual", k))
    return dual
