from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from simplemech.model import XOS, Additive, ConstrainedAdditive, DiscreteMarginal, Instance, UnitDemand, bidder_types, make_instance
from simplemech.polytopes import (
    ApproxPolytope,
    BoxPiece,
    build_approx_polytope,
    build_exact_polytope,
    build_type_polytope,
    membership,
    optimize_linear,
    sample_point,
    widths,
)
from strategies import ca_instances

F = Fraction


def point_instance(m: int, val) -> Instance:
    return make_instance([[DiscreteMarginal.point(1)] * m], val)


def brute_optimum(tp, obj) -> Fraction:
    """Scan generators; XOS ``w`` coordinates may be lowered, so only positive weights count."""
    best = F(0)
    for g in tp.generators:
        v = F(0)
        for k, x in enumerate(g):
            if tp.xos and k >= tp.dim // 2:
                v += max(obj[k], 0) * x
            else:
                v += obj[k] * x
        best = max(best, v)
    return best


def test_generator_counts():
    assert len(build_type_polytope(point_instance(2, ConstrainedAdditive(UnitDemand())), 0, (0, 0)).generators) == 3
    assert len(build_type_polytope(point_instance(2, ConstrainedAdditive(Additive())), 0, (0, 0)).generators) == 4
    xinst = Instance(1, 1, ((DiscreteMarginal.point(1),),), (XOS((((1, 2),),)),))
    tp = build_type_polytope(xinst, 0, (0,))
    assert len(tp.generators) == 3 and tp.generators[0] == (0, 0)
    assert set(tp.generators[1:]) == {(1, F(1, 2)), (1, 1)}


def test_widths_examples():
    assert widths(make_instance([[DiscreteMarginal.uniform([1, 2])]]), 0) == (F(1, 2), F(1, 2))
    assert widths(make_instance([[DiscreteMarginal.point(4)]]), 0) == (1,)
    d = DiscreteMarginal((1, 2), ("3/10", "7/10"))
    assert widths(make_instance([[d, DiscreteMarginal.point(1)]]), 0) == (F(3, 10), F(7, 10), 1)


def test_truncation_examples():
    inst = make_instance([[DiscreteMarginal.uniform([1, 2]), DiscreteMarginal.uniform([1, 2])]])
    P = build_approx_polytope(inst, 0, mode="exact")
    assert all(all(tp.keep) for _, tp in P.pieces[0].components)
    tp = build_type_polytope(inst, 0, (0, 0), keep=(False, False))
    assert tp.generators == ((0, 0, 0, 0),)


def test_sampled_weights_sum_to_one():
    inst = make_instance([[DiscreteMarginal.uniform([1, 2, 3]), DiscreteMarginal.uniform([1, 2])]])
    P = build_approx_polytope(inst, 0, mode="sampled", samples=200, seed=3)
    assert sum(w for w, _ in P.pieces[0].components) == 1
    assert P == build_approx_polytope(inst, 0, mode="sampled", samples=200, seed=3)


def test_eps_range_checked():
    inst = make_instance([[DiscreteMarginal.uniform([1, 2])]])
    with pytest.raises(ValueError):
        build_approx_polytope(inst, 0, eps=F(1, 2))


def test_optimize_examples():
    tp = build_type_polytope(point_instance(2, ConstrainedAdditive(UnitDemand())), 0, (0, 0))
    pt, v = optimize_linear(tp, (F(3, 10), F(1, 2)))
    assert v == F(1, 2) and pt == (0, 1)
    pt, v = optimize_linear(tp, (-1, -2))
    assert v == 0 and pt == (0, 0)
    box = ApproxPolytope(0, False, 2, (BoxPiece(F(1), (F(1, 10), F(1, 20))),), (F(1, 2), F(1, 20)), "box")
    assert optimize_linear(box, (1, 1))[1] == F(3, 20)


def test_membership_examples():
    inst = make_instance([[DiscreteMarginal.uniform([1, 2]), DiscreteMarginal.point(1)]], ConstrainedAdditive(UnitDemand()))
    W = build_exact_polytope(inst, 0)
    assert membership(W, [0, 0, 0], mode="rational").inside
    tp = W.pieces[0].components[0][1]
    scaled = [W.pieces[0].components[0][0] * x for x in tp.generators[1]]
    assert membership(W, scaled, mode="rational").inside
    res = membership(W, [F(3, 4), 0, 0])
    assert not res.inside and res.certificate is not None
    a = res.certificate
    assert sum(x * y for x, y in zip(a, [F(3, 4), 0, 0])) > optimize_linear(W, a)[1]


@given(ca_instances(max_m=3, max_support=2), st.data())
def test_optimize_matches_generator_scan(inst, data):
    for i in range(inst.n):
        for t, _ in bidder_types(inst, i):
            keep = data.draw(st.lists(st.booleans(), min_size=inst.m, max_size=inst.m))
            tp = build_type_polytope(inst, i, t, keep)
            obj = [F(data.draw(st.integers(-3, 3))) for _ in range(tp.dim)]
            assert optimize_linear(tp, obj)[1] == brute_optimum(tp, obj)


def test_xos_optimize_matches_generator_scan():
    rng = np.random.default_rng(0)
    inst = Instance(
        1,
        3,
        ((DiscreteMarginal.uniform([1, 2]), DiscreteMarginal.uniform([1, 2]), DiscreteMarginal.point(1)),),
        (XOS((((1, 2), (0, 3)), ((2, 1), (1, 1)), ((1, 1),))),),
    )
    for t, _ in bidder_types(inst, 0):
        for keep in itertools.product([True, False], repeat=3):
            tp = build_type_polytope(inst, 0, t, keep)
            for _ in range(30):
                obj = [F(int(x)) for x in rng.integers(-3, 4, size=tp.dim)]
                pt, v = optimize_linear(tp, obj)
                assert v == brute_optimum(tp, obj)
                assert sum(a * b for a, b in zip(obj, pt)) == v


@given(ca_instances(max_m=3, max_support=2), st.integers(0, 2**31))
def test_down_monotone_and_box_containment(inst, seed):
    rng = np.random.default_rng(seed)
    for i in range(inst.n):
        W = build_exact_polytope(inst, i)
        x = sample_point(W, rng)
        assert membership(W, list(x * rng.uniform(0, 1, size=len(x)))).inside
        eps = F(1, 2 * inst.T)
        corner = [(1 - eps * inst.T) * min(eps, w) * int(rng.integers(0, 2)) for w in W.widths]
        assert membership(W, corner, mode="rational").inside


@given(ca_instances(max_m=2, max_support=2), st.integers(0, 2**31))
def test_sandwich_exact_mode(inst, seed):
    rng = np.random.default_rng(seed)
    for i in range(inst.n):
        W = build_exact_polytope(inst, i)
        Wh = build_approx_polytope(inst, i, mode="exact")
        assert membership(Wh, list(sample_point(W.scaled(F(1, 6)), rng)), tol=1e-8).inside
        assert membership(W, list(sample_point(Wh, rng)), tol=1e-8).inside


def test_unreachable_item_has_zero_width():
    fam_val = ConstrainedAdditive(__import__("simplemech.model", fromlist=["ExplicitFamily"]).ExplicitFamily((frozenset(), frozenset({1}))))
    inst = make_instance([[DiscreteMarginal.uniform([1, 2]), DiscreteMarginal.point(3)]], fam_val)
    assert widths(inst, 0) == (0, 0, 1)
