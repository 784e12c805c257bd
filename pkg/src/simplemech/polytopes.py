"""Single-bidder marginal-reduced-form polytopes and their approximations.

Coordinates of bidder ``i``:

* constrained-additive: one coordinate ``(j, v)`` per item ``j`` and support
  index ``v``;
* XOS: a ``pi`` block followed by a ``w`` block, each indexed by ``(j, v)``.

Every polytope here is a Minkowski sum of scaled *pieces*. A mixture piece is
``sum_t weight_t * W_t`` over type polytopes ``W_t``; a box piece is a
coordinate box. Pieces keep explicit generator lists (extended formulation),
so linear optimization runs piece by piece and membership is a small LP.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Any, Hashable, Sequence

import numpy as np

from . import config
from .lp_solver import LinearProgram, solve_lp
from .model import (
    XOS,
    BidderType,
    ConstrainedAdditive,
    Instance,
    ProfileCapError,
    bidder_types,
    feasible_sets,
    all_bundles,
    singleton_value,
)
from .oracles import adjustable_demand_oracle, demand_oracle

ZERO = Fraction(0)
ONE = Fraction(1)


# ---------------------------------------------------------------------------
# coordinates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoordinateSystem:
    """Coordinate labels of one bidder's polytope."""

    bidder: int
    xos: bool
    labels: tuple[tuple, ...]

    @property
    def dim(self) -> int:
        return len(self.labels)

    def index(self, label: tuple) -> int:
        return self.labels.index(label)


def coordinates(inst: Instance, i: int) -> CoordinateSystem:
    base = [(j, v) for j in range(inst.m) for v in range(inst.marginals[i][j].size)]
    if inst.is_xos(i):
        labels = tuple(("pi", j, v) for j, v in base) + tuple(("w", j, v) for j, v in base)
        return CoordinateSystem(i, True, labels)
    return CoordinateSystem(i, False, tuple(base))


def _base_index(inst: Instance, i: int) -> dict[tuple[int, int], int]:
    out, k = {}, 0
    for j in range(inst.m):
        for v in range(inst.marginals[i][j].size):
            out[(j, v)] = k
            k += 1
    return out


def widths(inst: Instance, i: int) -> tuple[Fraction, ...]:
    """Per-coordinate width ``l_(j,v) = f_ij(v)`` (repeated for the XOS ``w`` block).

    A constrained-additive item that no feasible set contains has width 0.
    """
    if inst.is_xos(i):
        base = tuple(p for j in range(inst.m) for p in inst.marginals[i][j].probs)
        return base + base
    feas = inst.valuations[i].feasibility
    return tuple(
        p if feas.is_feasible(frozenset([j])) else ZERO for j in range(inst.m) for p in inst.marginals[i][j].probs
    )


# ---------------------------------------------------------------------------
# type polytopes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TypePolytope:
    """Sub-convex hull of ``generators`` (the first generator is the origin).

    For XOS polytopes ``w`` coordinates may additionally be lowered toward 0.
    ``keep[j]`` is False for items zeroed by truncation.
    """

    owner: tuple[int, BidderType]
    xos: bool
    dim: int
    generators: tuple[tuple[Fraction, ...], ...]
    labels: tuple[Any, ...]
    valuation: Any
    tvec: tuple
    coord_pi: tuple[int, ...]
    coord_w: tuple[int, ...]
    V: tuple[Fraction, ...]
    keep: tuple[bool, ...]


def _ratio(a: Fraction, V: Fraction) -> Fraction:
    return ZERO if V == 0 else Fraction(a) / V


def build_type_polytope(
    inst: Instance,
    i: int,
    t_i: BidderType,
    keep: Sequence[bool] | None = None,
    cap: int = config.GENERATOR_CAP,
) -> TypePolytope:
    """``W_{t_i}``: one generator per feasible set (or per ``(S, k)`` for XOS) plus the origin.

    ``keep`` applies truncation: coordinates of items with ``keep[j]`` False
    are zeroed and duplicate generators are dropped.
    """
    m = inst.m
    keep = tuple(keep) if keep is not None else (True,) * m
    base = _base_index(inst, i)
    D = len(base)
    val = inst.valuations[i]
    coord_pi = tuple(base[(j, t_i[j])] for j in range(m))
    V = tuple(singleton_value(inst, i, j, t_i[j]) for j in range(m))
    gens: list[tuple[Fraction, ...]] = [tuple([ZERO] * (2 * D if isinstance(val, XOS) else D))]
    labels: list[Any] = [None]
    seen = {gens[0]}
    if isinstance(val, XOS):
        K = val.K
        if (2**m) * K > cap:
            raise ProfileCapError((2**m) * K, cap, "XOS generators")
        coord_w = tuple(D + c for c in coord_pi)
        for S in all_bundles(m)[1:]:
            for k in range(K):
                g = [ZERO] * (2 * D)
                for j in S:
                    if keep[j]:
                        g[coord_pi[j]] = ONE
                        g[coord_w[j]] = _ratio(val.alpha[j][t_i[j]][k], V[j])
                g = tuple(g)
                if g not in seen:
                    seen.add(g)
                    gens.append(g)
                    labels.append((S, k))
        tvec = tuple(t_i)
        xos = True
    else:
        fam = feasible_sets(val.feasibility, m)
        if len(fam) > cap:
            raise ProfileCapError(len(fam), cap, "feasible sets")
        coord_w = ()
        for S in fam[1:]:
            g = [ZERO] * D
            for j in S:
                if keep[j]:
                    g[coord_pi[j]] = ONE
            g = tuple(g)
            if g not in seen:
                seen.add(g)
                gens.append(g)
                labels.append(S)
        tvec = tuple(inst.marginals[i][j].support[t_i[j]] for j in range(m))
        xos = False
    return TypePolytope(
        (i, tuple(t_i)), xos, len(gens[0]), tuple(gens), tuple(labels), val, tvec, coord_pi, coord_w, V, keep
    )


def _optimize_type(tp: TypePolytope, obj: Sequence[Any]) -> tuple[tuple, Any]:
    """Oracle-based linear optimization over one type polytope."""
    m = len(tp.coord_pi)
    point = [ZERO] * tp.dim
    if not tp.xos:
        a = [obj[tp.coord_pi[j]] if tp.keep[j] else 0 for j in range(m)]
        # demand at values a+ and zero prices: same argmax as prices t - a+,
        # without requiring nonnegative prices
        weights = [x if x > 0 else ZERO for x in a]
        ans = demand_oracle(ConstrainedAdditive(tp.valuation.feasibility), weights, [ZERO] * m)
        value = ZERO
        for j in ans.bundle:
            point[tp.coord_pi[j]] = ONE
            value += a[j]
        return tuple(point), value
    x = [obj[tp.coord_pi[j]] if tp.keep[j] else 0 for j in range(m)]
    y = [obj[tp.coord_w[j]] if tp.keep[j] else 0 for j in range(m)]
    b = [_ratio(yy, V) if yy > 0 else ZERO for yy, V in zip(y, tp.V)]
    p = [(-xx if xx < 0 else ZERO) if tp.keep[j] else float("inf") for j, xx in enumerate(x)]
    ans = adjustable_demand_oracle(tp.valuation, tp.tvec, b, p)
    S = set(ans.bundle) | {j for j in range(m) if tp.keep[j] and x[j] > 0}
    value = ZERO
    for j in sorted(S):
        if not tp.keep[j]:
            continue
        ratio = _ratio(tp.valuation.alpha[j][tp.tvec[j]][ans.k], tp.V[j])
        point[tp.coord_pi[j]] = ONE
        value += x[j]
        if y[j] > 0:
            point[tp.coord_w[j]] = ratio
            value += y[j] * ratio
    if value <= 0:
        return tuple([ZERO] * tp.dim), ZERO
    return tuple(point), value


def optimize_type_brute(tp: TypePolytope, obj: Sequence[Any]) -> tuple[tuple, Any]:
    """Reference optimizer: scan every generator."""
    best_val, best = None, None
    for g in tp.generators:
        val = ZERO
        pt = list(g)
        for k, gk in enumerate(g):
            if tp.xos and k >= tp.dim // 2:
                if obj[k] > 0:
                    val += obj[k] * gk
                else:
                    pt[k] = ZERO
            else:
                val += obj[k] * gk
        if best_val is None or val > best_val:
            best_val, best = val, tuple(pt)
    return best, best_val


# ---------------------------------------------------------------------------
# pieces and approximate polytopes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MixturePiece:
    coef: Fraction
    components: tuple[tuple[Fraction, TypePolytope], ...]


@dataclass(frozen=True)
class BoxPiece:
    """``0 <= x <= upper``; for XOS additionally ``w <= pi`` coordinatewise."""

    coef: Fraction
    upper: tuple[Fraction, ...]


@dataclass(frozen=True)
class ApproxPolytope:
    """Minkowski sum ``sum coef * piece``."""

    bidder: int
    xos: bool
    dim: int
    pieces: tuple[MixturePiece | BoxPiece, ...]
    widths: tuple[Fraction, ...]
    mode: str
    eps: Fraction | None = None
    c: Fraction | None = None
    samples: int | None = None
    seed: int | None = None

    def scaled(self, factor: Any) -> "ApproxPolytope":
        """``factor * self`` (every piece coefficient multiplied)."""
        factor = Fraction(factor)
        pieces = tuple(
            MixturePiece(pc.coef * factor, pc.components) if isinstance(pc, MixturePiece) else BoxPiece(pc.coef * factor, pc.upper)
            for pc in self.pieces
        )
        return replace(self, pieces=pieces)

    def describe(self) -> dict[str, Any]:
        """Debug serialization: piece coefficients, generator counts, widths."""
        pieces = []
        for pc in self.pieces:
            if isinstance(pc, MixturePiece):
                pieces.append(
                    {
                        "kind": "mixture",
                        "coef": str(pc.coef),
                        "components": len(pc.components),
                        "generators": sum(len(tp.generators) for _, tp in pc.components),
                    }
                )
            else:
                pieces.append({"kind": "box", "coef": str(pc.coef), "upper": [str(u) for u in pc.upper]})
        return {"bidder": self.bidder, "mode": self.mode, "pieces": pieces, "widths": [str(w) for w in self.widths]}


def default_eps(inst: Instance) -> Fraction:
    return Fraction(1, 2 * inst.T)


def build_exact_polytope(inst: Instance, i: int) -> ApproxPolytope:
    """``W_i`` itself: the mixture of all type polytopes under the true type distribution."""
    comps = tuple((p, build_type_polytope(inst, i, t)) for t, p in bidder_types(inst, i))
    piece = MixturePiece(ONE, comps)
    return ApproxPolytope(i, inst.is_xos(i), comps[0][1].dim, (piece,), widths(inst, i), "W")


def _sample_type_weights(inst: Instance, i: int, N: int, seed: int) -> list[tuple[BidderType, Fraction]]:
    rng = np.random.default_rng([seed, i])
    draws = []
    for j in range(inst.m):
        d = inst.marginals[i][j]
        probs = np.array([float(p) for p in d.probs])
        draws.append(rng.choice(d.size, size=N, p=probs / probs.sum()))
    counts: dict[BidderType, int] = {}
    for s in range(N):
        t = tuple(int(draws[j][s]) for j in range(inst.m))
        counts[t] = counts.get(t, 0) + 1
    return [(t, Fraction(c, N)) for t, c in sorted(counts.items())]


def build_approx_polytope(
    inst: Instance,
    i: int,
    eps: Any = None,
    c: Any = Fraction(1, 2),
    mode: str = "exact",
    samples: int = 200,
    seed: int = 0,
) -> ApproxPolytope:
    """``W_hat_i`` from truncated type polytopes plus an ``eps``-box.

    Constrained-additive: ``(c/3) (W_hat^tr + box)``. XOS:
    ``(1/2) W_hat^tr + (1/4) box``. In ``exact`` mode the mixture weights are
    the true type probabilities; in ``sampled`` mode they are empirical
    frequencies of ``samples`` seeded draws.
    """
    eps = default_eps(inst) if eps is None else Fraction(eps)
    c = Fraction(c)
    if not 0 < eps < Fraction(1, inst.T):
        raise ValueError(f"eps must lie in (0, 1/T) = (0, 1/{inst.T}), got {eps}")
    if mode == "exact":
        weights = bidder_types(inst, i)
    elif mode == "sampled":
        if samples < 1:
            raise ValueError("samples must be positive")
        weights = _sample_type_weights(inst, i, samples, seed)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    xos = inst.is_xos(i)
    comps = []
    for t, p in weights:
        keep = tuple(inst.marginals[i][j].probs[t[j]] >= eps for j in range(inst.m))
        comps.append((p, build_type_polytope(inst, i, t, keep)))
    wid = widths(inst, i)
    upper = [min(eps, w) for w in wid]
    if xos:
        D = len(wid) // 2
        base = _base_index(inst, i)
        for (j, v), k in base.items():
            if singleton_value(inst, i, j, v) == 0:
                upper[D + k] = ZERO
        pieces = (MixturePiece(Fraction(1, 2), tuple(comps)), BoxPiece(Fraction(1, 4), tuple(upper)))
    else:
        pieces = (MixturePiece(c / 3, tuple(comps)), BoxPiece(c / 3, tuple(upper)))
    return ApproxPolytope(
        i,
        xos,
        len(wid),
        pieces,
        wid,
        mode,
        eps,
        c,
        samples if mode == "sampled" else None,
        seed if mode == "sampled" else None,
    )


def _box_optimum(box: BoxPiece, obj: Sequence[Any], xos: bool) -> tuple[list, Any]:
    pt = [ZERO] * len(box.upper)
    value = ZERO
    if not xos:
        for k, u in enumerate(box.upper):
            if obj[k] > 0:
                pt[k] = u
                value += u * obj[k]
        return pt, value
    D = len(box.upper) // 2
    for k in range(D):
        u, uw = box.upper[k], box.upper[D + k]
        a, b = obj[k], obj[D + k]
        # corners (0,0), (u,0), (u,min(u,uw))
        w_top = min(u, uw)
        cands = [(ZERO, ZERO, ZERO), (u * a, u, ZERO), (u * a + w_top * b, u, w_top)]
        best = max(cands, key=lambda c: c[0])
        if best[0] > 0:
            value += best[0]
            pt[k], pt[D + k] = best[1], best[2]
    return pt, value


def optimize_linear(poly: ApproxPolytope | TypePolytope, objective: Sequence[Any]) -> tuple[tuple, Any]:
    """Maximize ``objective . x`` over ``poly``.

    Returns ``(point, value)``. Each piece is optimized independently
    (Minkowski decomposition): type polytopes through the demand or
    adjustable-demand oracle, boxes coordinatewise.
    """
    if len(objective) != poly.dim:
        raise ValueError(f"objective has dimension {len(objective)}, polytope {poly.dim}")
    if isinstance(poly, TypePolytope):
        return _optimize_type(poly, objective)
    total = [ZERO] * poly.dim
    value = ZERO
    for pc in poly.pieces:
        if isinstance(pc, MixturePiece):
            for w, tp in pc.components:
                pt, val = _optimize_type(tp, objective)
                value += pc.coef * w * val
                for k, x in enumerate(pt):
                    if x:
                        total[k] += pc.coef * w * x
        else:
            pt, val = _box_optimum(pc, objective, poly.xos)
            value += pc.coef * val
            for k, x in enumerate(pt):
                if x:
                    total[k] += pc.coef * x
    return tuple(total), value


# ---------------------------------------------------------------------------
# extended formulation
# ---------------------------------------------------------------------------


def add_polytope_constraints(
    lp: LinearProgram,
    poly: ApproxPolytope,
    exprs: Sequence[dict[int, Any]],
    rhs: Sequence[Any],
    prefix: Hashable,
) -> None:
    """Add rows ``exprs[k] - x_k (= or <=) rhs[k]`` with ``x`` ranging over ``poly``.

    ``x`` is described by fresh piece-weight variables. Rows are equalities,
    except XOS ``w`` coordinates which use ``<=`` (they may be lowered).
    """
    D = poly.dim
    contrib: list[dict[int, Any]] = [dict() for _ in range(D)]
    for p_idx, pc in enumerate(poly.pieces):
        if isinstance(pc, MixturePiece):
            for c_idx, (w, tp) in enumerate(pc.components):
                row: dict[int, Any] = {}
                for g_idx, g in enumerate(tp.generators):
                    if g_idx == 0:
                        continue  # origin
                    var = lp.add_variable((prefix, "theta", p_idx, c_idx, g_idx))
                    row[var] = 1
                    for k, gk in enumerate(g):
                        if gk:
                            contrib[k][var] = contrib[k].get(var, 0) + pc.coef * w * gk
                if row:
                    lp.add_row(row, "<=", 1, name=(prefix, "subconvex", p_idx, c_idx))
        else:
            box_vars = []
            for k, u in enumerate(pc.upper):
                var = lp.add_variable((prefix, "box", p_idx, k), 0, u)
                box_vars.append(var)
                contrib[k][var] = contrib[k].get(var, 0) + pc.coef
            if poly.xos:
                half = D // 2
                for k in range(half):
                    lp.add_row({box_vars[half + k]: 1, box_vars[k]: -1}, "<=", 0, name=(prefix, "box_w_le_pi", p_idx, k))
    for k in range(D):
        row = dict(exprs[k])
        for var, a in contrib[k].items():
            row[var] = row.get(var, 0) - a
        rel = "<=" if poly.xos and k >= D // 2 else "="
        lp.add_row(row, rel, rhs[k], name=(prefix, "coord", k))


@dataclass(frozen=True)
class MembershipResult:
    inside: bool
    distance: Any
    certificate: tuple | None = None


def membership(poly: ApproxPolytope, point: Sequence[Any], tol: float = 1e-9, mode: str = "float") -> MembershipResult:
    """Decide ``point in poly`` with an L1-distance LP.

    An outside answer carries a direction ``a`` with
    ``a . point > max_{x in poly} a . x`` confirmed by :func:`optimize_linear`.
    """
    if len(point) != poly.dim:
        raise ValueError("point dimension mismatch")
    for k, x in enumerate(point):
        if x < 0:
            cert = tuple(-1 if kk == k else 0 for kk in range(poly.dim))
            return MembershipResult(False, -x, cert)
    lp = LinearProgram("membership")
    exprs = []
    for k in range(poly.dim):
        sp = lp.add_variable(("s+", k), obj=-1)
        sm = lp.add_variable(("s-", k), obj=-1)
        exprs.append({sp: -1, sm: 1})
    n_coord_rows_before = lp.num_rows
    add_polytope_constraints(lp, poly, exprs, [-x for x in point], "m")
    res = solve_lp(lp, mode)
    if not res.optimal:
        raise RuntimeError(f"membership LP not optimal: {res.status}")
    dist = -res.objective
    thresh = 0 if mode == "rational" else tol
    if dist <= thresh:
        return MembershipResult(True, dist)
    coord_rows = [r for r, row in enumerate(lp.rows) if isinstance(row.name, tuple) and row.name[1] == "coord"]
    y = [res.duals[r] for r in coord_rows]
    # rows read  -s+ + s- - contrib = -point, so a = y separates
    for sign in (1, -1):
        a = tuple(sign * v for v in y)
        _, h = optimize_linear(poly, a)
        lhs = sum(ak * xk for ak, xk in zip(a, point))
        if lhs > h + thresh:
            return MembershipResult(False, dist, a)
    del n_coord_rows_before
    return MembershipResult(False, dist, None)


def find_point_in_box(
    poly: ApproxPolytope, lo: Sequence[Any], hi: Sequence[Any], mode: str = "float"
) -> tuple | None:
    """A point ``x`` of ``poly`` with ``lo <= x <= hi``, or ``None``."""
    lp = LinearProgram("box-witness")
    xs = [lp.add_variable(("x", k), lo[k], hi[k]) for k in range(poly.dim)]
    add_polytope_constraints(lp, poly, [{x: 1} for x in xs], [0] * poly.dim, "b")
    res = solve_lp(lp, mode)
    if not res.optimal:
        return None
    return tuple(res.x[x] for x in xs)


# ---------------------------------------------------------------------------
# random points
# ---------------------------------------------------------------------------


def _sample_type(tp: TypePolytope, rng: np.random.Generator) -> np.ndarray:
    G = np.array([[float(x) for x in g] for g in tp.generators])
    lam = rng.dirichlet(np.ones(len(G)))
    pt = lam @ G
    if tp.xos:
        half = tp.dim // 2
        pt[half:] *= rng.uniform(0, 1, size=half)
    return pt


def sample_point(poly: ApproxPolytope, rng: np.random.Generator) -> np.ndarray:
    """A random point of ``poly`` (random sub-convex weights, random box point)."""
    total = np.zeros(poly.dim)
    for pc in poly.pieces:
        if isinstance(pc, MixturePiece):
            for w, tp in pc.components:
                total += float(pc.coef * w) * _sample_type(tp, rng)
        else:
            up = np.array([float(u) for u in pc.upper])
            if poly.xos:
                half = poly.dim // 2
                pi = up[:half] * rng.uniform(0, 1, size=half)
                wv = np.minimum(pi, up[half:]) * rng.uniform(0, 1, size=half)
                total += float(pc.coef) * np.concatenate([pi, wv])
            else:
                total += float(pc.coef) * up * rng.uniform(0, 1, size=poly.dim)
    return total


def box_corner(poly_widths: Sequence[Fraction], eps: Fraction, scale: Fraction, rng: np.random.Generator) -> tuple:
    """A random corner of ``scale * box(eps)`` (constrained-additive layout)."""
    return tuple(scale * min(eps, w) if rng.random() < 0.5 else ZERO for w in poly_widths)


def types_of(inst: Instance, i: int) -> list[BidderType]:
    return [t for t, _ in bidder_types(inst, i)]


def generator_count(poly: ApproxPolytope) -> int:
    return sum(len(tp.generators) for pc in poly.pieces if isinstance(pc, MixturePiece) for _, tp in pc.components)


__all__ = [
    "ApproxPolytope",
    "BoxPiece",
    "CoordinateSystem",
    "MembershipResult",
    "MixturePiece",
    "TypePolytope",
    "add_polytope_constraints",
    "build_approx_polytope",
    "build_exact_polytope",
    "build_type_polytope",
    "coordinates",
    "find_point_in_box",
    "membership",
    "optimize_linear",
    "optimize_type_brute",
    "sample_point",
    "widths",
]

