from __future__ import annotations

import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simplemech.model import ConstrainedAdditive, DiscreteMarginal, UnitDemand, make_instance
from simplemech.mechanisms import (
    RppSpec,
    SpemSpec,
    TptSpec,
    expected_revenue,
    iter_exact_runs,
    optimize_rpp,
    run_rpp,
    run_spem,
    run_tpt,
    simulate,
    step_is_rational,
)
from brute import monopoly_revenue, rpp_revenue, tpt_revenue
from strategies import ca_instances

F = Fraction
INF = math.inf


def points(*vals):
    return [DiscreteMarginal.point(v) for v in vals]


def test_rpp_picks_largest_surplus():
    inst = make_instance([points(1, 1)])
    out = run_rpp(RppSpec(((F(3, 5), F(3, 10)),)), inst, ((0, 0),))
    assert out.bundles == (frozenset({1}),) and out.revenue == F(3, 10)


def test_rpp_prices_too_high():
    inst = make_instance([points(1, 1)])
    assert run_rpp(RppSpec(((2, INF),)), inst, ((0, 0),)).revenue == 0


def test_rpp_buys_at_zero_surplus_and_rations():
    inst = make_instance([points(1, 1), points(1, 1)])
    out = run_rpp(RppSpec(((1, 1), (1, 1))), inst, ((0, 0), (0, 0)))
    assert out.bundles == (frozenset({0}), frozenset({1})) and out.revenue == 2


def test_rpp_negative_price_rejected():
    with pytest.raises(ValueError):
        RppSpec(((-1,),))


def test_tpt_point_mass():
    inst = make_instance([points(1)])
    out = run_tpt(TptSpec((F(1, 2),)), inst, ((0,),), ((0,),))
    assert out.payments == (1,)
    assert expected_revenue(TptSpec((F(1, 2),)), inst).value == 1


def test_tpt_rejects_high_fee():
    inst = make_instance([[DiscreteMarginal.uniform([1, 2])]])
    out = run_tpt(TptSpec((F(1, 2),)), inst, ((0,),), ((1,),))
    assert out.revenue == 0 and out.bundles == (frozenset(),)
    assert step_is_rational(inst, out.steps[0])


def test_tpt_zero_fee():
    inst = make_instance([points(1)])
    out = run_tpt(TptSpec((F(2),)), inst, ((0,),), ((0,),))
    assert out.steps[0].fee == 0 and out.revenue == 0


def test_tpt_needs_samples():
    inst = make_instance([points(1)])
    with pytest.raises(ValueError):
        run_tpt(TptSpec((1,)), inst, ((0,),), ())


def test_spem_fee_table_and_infinite_fee():
    inst = make_instance([points(2)])
    full = frozenset({0})
    out = run_spem(SpemSpec(((1,),), ({full: F(1, 2)},)), inst, ((0,),))
    assert out.revenue == F(3, 2)
    out = run_spem(SpemSpec(((0,),), ({full: INF},)), inst, ((0,),))
    assert out.revenue == 0


def test_spem_embeds_tpt():
    inst = make_instance([[DiscreteMarginal.uniform([1, 3])]] * 2, ConstrainedAdditive(UnitDemand()))
    spec = TptSpec((F(1),))
    for _, prof, ent in iter_exact_runs(spec, inst):
        assert simulate(spec, inst, prof, ent) == run_spem(SpemSpec.from_tpt(spec, 2), inst, prof, ent)


def test_expected_revenue_examples():
    inst = make_instance([[DiscreteMarginal.uniform([1, 2])]])
    assert expected_revenue(RppSpec(((2,),)), inst).value == 1
    assert expected_revenue(RppSpec(((1,),)), inst).value == 1
    mc = expected_revenue(RppSpec(((2,),)), inst, method="mc", samples=20000, seed=1)
    assert abs(mc.value - 1) < 4 * mc.stderr + 1e-12


def test_optimize_rpp_examples():
    assert optimize_rpp(make_instance([points(1)]))[1] == 1
    inst = make_instance([[DiscreteMarginal((F(1), F(4)), (F(2, 3), F(1, 3)))]])
    assert optimize_rpp(inst)[1] == F(4, 3)
    v = F(7, 3)
    assert optimize_rpp(make_instance([points(v)]))[1] == v


@settings(max_examples=30)
@given(ca_instances(max_m=2, max_support=2), st.data())
def test_rpp_revenue_matches_brute(inst, data):
    prices = tuple(
        tuple(data.draw(st.sampled_from([F(0), F(1), F(3, 2), F(3), INF])) for _ in range(inst.m)) for _ in range(inst.n)
    )
    assert expected_revenue(RppSpec(prices), inst).value == rpp_revenue(inst, prices)


@settings(max_examples=20)
@given(ca_instances(max_m=2, max_support=2), st.lists(st.sampled_from([F(0), F(1), F(5, 2)]), min_size=2, max_size=2))
def test_tpt_revenue_matches_brute(inst, Q):
    Q = tuple(Q[: inst.m])
    assert expected_revenue(TptSpec(Q), inst).value == tpt_revenue(inst, Q)


@settings(max_examples=20)
@given(ca_instances(max_m=2, max_support=2))
def test_optimize_rpp_is_grid_optimum(inst):
    spec, rev = optimize_rpp(inst)
    assert rev == rpp_revenue(inst, spec.prices)
    cands = [sorted(set(d.support)) + [INF] for row in inst.marginals for d in row]
    for flat in itertools.product(*cands):
        prices = tuple(tuple(flat[i * inst.m : (i + 1) * inst.m]) for i in range(inst.n))
        assert rpp_revenue(inst, prices) <= rev


@settings(max_examples=20)
@given(ca_instances(max_m=2, max_support=2), st.sampled_from([F(0), F(1), F(2)]))
def test_bundles_disjoint_and_steps_rational(inst, q):
    for spec in (TptSpec((q,) * inst.m), RppSpec(((q,) * inst.m,) * inst.n)):
        for _, prof, ent in iter_exact_runs(spec, inst):
            out = simulate(spec, inst, prof, ent)
            assert sum(len(S) for S in out.bundles) == len(out.sold)
            assert all(step_is_rational(inst, s) for s in out.steps)


def test_single_item_rpp_is_monopoly():
    d = DiscreteMarginal((F(1), F(2), F(5)), (F(1, 2), F(1, 4), F(1, 4)))
    assert optimize_rpp(make_instance([[d]]))[1] == monopoly_revenue(d.support, d.probs)
