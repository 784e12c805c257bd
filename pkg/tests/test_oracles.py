from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

import brute
from simplemech.model import XOS, Additive, ConstrainedAdditive, UnitDemand
from simplemech.oracles import (
    adjustable_demand_oracle,
    counterexample_family,
    demand_oracle,
    value_oracle,
    xos_oracle,
)
from strategies import ca_valuations, small_fracs, xos_single_type

F = Fraction
UNIT = ConstrainedAdditive(UnitDemand())
ADD = ConstrainedAdditive(Additive())


def xos(*functions):
    """Single-type XOS valuation from additive functions given as coefficient rows."""
    m = len(functions[0])
    return XOS(tuple((tuple(f[j] for f in functions),) for j in range(m)))


def test_value_oracle_examples():
    assert value_oracle(UNIT, (3, 1), {0, 1}) == 3
    assert value_oracle(ADD, (3, 1), {0, 1}) == 4
    assert value_oracle(xos((2, 0), (0, 3)), (0, 0), {0, 1}) == 3


def test_demand_oracle_examples():
    a = demand_oracle(UNIT, (F(3), F(1)), (F(1), F(1, 2)))
    assert a.bundle == frozenset({0}) and a.utility == 2
    a = demand_oracle(ADD, (F(3), F(1)), (F(2), F(2)))
    assert a.bundle == frozenset({0}) and a.utility == 1
    a = demand_oracle(ADD, (F(3), F(1)), (F(9), F(9)))
    assert a.bundle == frozenset() and a.utility == 0


def test_adjustable_oracle_examples():
    a = adjustable_demand_oracle(xos((2, 2)), (0, 0), (F(1), F(1, 2)), (F(1), F(3, 2)))
    assert a.bundle == frozenset({0}) and a.k == 0
    v = xos((2, 0, 1), (0, 3, 1))
    a = adjustable_demand_oracle(v, (0, 0, 0), (1, 1, 1), (0, 0, 0))
    assert a.bundle == frozenset({1, 2}) and a.k == 1 and a.objective == 4
    a = adjustable_demand_oracle(xos((2, 0), (0, 3)), (0, 0), (F(1), F(1, 10)), (0, 0))
    assert a.bundle == frozenset({0}) and a.k == 0


def test_adjustable_oracle_rejects_constrained_additive():
    with pytest.raises(TypeError):
        adjustable_demand_oracle(ADD, (1,), (1,), (0,))


def test_xos_oracle_needs_nonempty_bundle():
    with pytest.raises(ValueError):
        xos_oracle(xos((1,)), (0,), set())


def test_counterexample_examples():
    fam = counterexample_family(4, F(1, 10), F(1, 100))
    assert fam.m == 8 and fam.L == 6
    for v in fam.family:
        assert v.K == 9 and v.alpha[3][0][8] == 1 + F(1, 10)
    assert fam.v_hat.K == 8
    with pytest.raises(ValueError):
        counterexample_family(5, F(1, 10), F(1, 100))
    with pytest.raises(ValueError):
        counterexample_family(4, F(1, 10), F(1, 10))


def test_counterexample_winner_lemma():
    fam = counterexample_family(4, F(1, 10), F(1, 100))
    for r, v in enumerate(fam.family):
        assert xos_oracle(v, fam.type, fam.S1 | fam.C[r]) == 8


@given(st.integers(1, 5).flatmap(lambda m: st.tuples(st.just(m), ca_valuations(m))), st.data())
def test_demand_matches_brute_force_ca(mv, data):
    m, val = mv
    t = tuple(data.draw(small_fracs) for _ in range(m))
    p = tuple(data.draw(small_fracs) for _ in range(m))
    ans = demand_oracle(val, t, p)
    S, u = brute.demand(val, t, p)
    assert (ans.bundle, ans.utility) == (S, u)
    assert value_oracle(val, t, ans.bundle) - sum((p[j] for j in ans.bundle), F(0)) == ans.utility


@given(st.integers(1, 5).flatmap(lambda m: st.tuples(st.just(m), xos_single_type(m))), st.data())
def test_demand_matches_brute_force_xos(mv, data):
    m, val = mv
    p = tuple(data.draw(small_fracs) for _ in range(m))
    ans = demand_oracle(val, (0,) * m, p)
    assert (ans.bundle, ans.utility) == brute.demand(val, (0,) * m, p)


@given(st.integers(1, 5).flatmap(lambda m: st.tuples(st.just(m), xos_single_type(m))), st.data())
def test_adjustable_matches_brute_force(mv, data):
    m, val = mv
    b = tuple(data.draw(small_fracs) for _ in range(m))
    p = tuple(data.draw(small_fracs) for _ in range(m))
    ans = adjustable_demand_oracle(val, (0,) * m, b, p)
    assert ans.objective == brute.adjustable(val, (0,) * m, b, p)
    assert ans.objective == sum((b[j] * val.alpha[j][0][ans.k] - p[j] for j in ans.bundle), F(0))


@given(st.integers(1, 5).flatmap(lambda m: st.tuples(st.just(m), xos_single_type(m))), st.data())
def test_adjustable_with_unit_coefficients_is_demand(mv, data):
    m, val = mv
    p = tuple(data.draw(small_fracs) for _ in range(m))
    adj = adjustable_demand_oracle(val, (0,) * m, (1,) * m, p)
    assert adj.objective == demand_oracle(val, (0,) * m, p).utility


@given(st.integers(1, 5).flatmap(lambda m: st.tuples(st.just(m), ca_valuations(m))), st.data())
def test_value_oracle_matches_brute_force(mv, data):
    m, val = mv
    t = tuple(data.draw(small_fracs) for _ in range(m))
    S = data.draw(st.frozensets(st.integers(0, m - 1)))
    assert value_oracle(val, t, S) == brute.value(val, t, S)
