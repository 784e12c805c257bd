from __future__ import annotations

from fractions import Fraction
from types import SimpleNamespace

from hypothesis import given, settings

from simplemech.battery import load_battery
from simplemech.diagnostics import (
    DualDistribution,
    Tau,
    check_set_function,
    compute_tau,
    eta,
    lipschitz_distance,
    mu,
    run_diagnostics,
)
from simplemech.mechanisms import optimize_rpp
from simplemech.model import DiscreteMarginal, make_instance
from simplemech.relaxation import Beta, build_dual_grid, compute_item_prices, grid_prev, polytopes_for, solve_relaxation
from strategies import ca_instances

F = Fraction
EXACT = SimpleNamespace(mode="rational")
ONE_ITEM = make_instance([[DiscreteMarginal.point(1)]])


def point_dual(beta: Beta, delta=F(2)) -> DualDistribution:
    return DualDistribution((((((beta, delta), F(1)),),),), ((((beta, F(1)),),),))


def test_tau_jump_examples():
    dual = point_dual(Beta(F(0)))
    assert compute_tau(ONE_ITEM, EXACT, (F(1, 2),), dual) == (Tau(F(1, 2), True),)
    assert compute_tau(ONE_ITEM, EXACT, (F(0),), dual) == (Tau(F(1), True),)


def test_tau_zero_when_tail_empty():
    assert compute_tau(ONE_ITEM, EXACT, (F(0),), point_dual(Beta(F(1), True))) == (Tau(F(0), False),)


def test_tau_tail_at_most_half():
    inst = make_instance([[DiscreteMarginal.uniform([1, 2, 3, 4])]])
    dual = point_dual(Beta(F(1)))
    (tau,) = compute_tau(inst, EXACT, (F(0),), dual)
    # Pr[V > 2] = 1/2 first meets the bound just above 2
    assert tau == Tau(F(2), True)


def test_mu_examples():
    assert mu(ONE_ITEM, 0, (0,), {0}, (F(1, 2),), F(1)) == F(1, 2)
    assert mu(ONE_ITEM, 0, (0,), {0}, (F(1, 2),), F(0)) == 0
    assert mu(ONE_ITEM, 0, (0,), set(), (F(1, 2),), F(1)) == 0


def test_eta_examples():
    assert eta(ONE_ITEM, 0, (0,), {0}, point_dual(Beta(F(0)))) == 1
    assert eta(ONE_ITEM, 0, (0,), {0}, point_dual(Beta(F(0)), F(1, 2))) == 0
    assert eta(ONE_ITEM, 0, (0,), {0}, point_dual(Beta(F(1)))) == 0
    joint = (((Beta(F(0)), F(2)), F(1, 2)), ((Beta(F(1, 2)), F(2)), F(1, 2)))
    marginal = ((Beta(F(0)), F(1, 2)), (Beta(F(1, 2)), F(1, 2)))
    two = DualDistribution(((joint,),), ((marginal,),))
    assert eta(ONE_ITEM, 0, (0,), {0}, two) == F(3, 4)


def test_eta_monte_carlo_fallback():
    dual = point_dual(Beta(F(0)))
    mean, stderr = eta(ONE_ITEM, 0, (0,), {0}, dual, cap=0, samples=100)
    assert mean == 1.0 and stderr == 0.0


def test_lipschitz_distance():
    assert lipschitz_distance((0, 1), (0, 0), frozenset({0, 1}), frozenset({1})) == 2


def test_suite_detects_violations():
    inst = make_instance([[DiscreteMarginal.point(1), DiscreteMarginal.point(1)]])
    res = check_set_function("neg", inst, 0, lambda t, S: -len(S), 1)
    assert res.monotone > 0 and not res.ok
    good = check_set_function("size", inst, 0, lambda t, S: len(S), 1)
    assert good.ok and good.checks == 16


def _solve(inst):
    _, prev = optimize_rpp(inst)
    sol = solve_relaxation(inst, build_dual_grid(inst, grid_prev(prev)), polytopes_for(inst, "exact"), mode="rational")
    return sol, compute_item_prices(sol).Q, grid_prev(prev)


def test_battery_suites_pass():
    for inst in load_battery()[:4]:
        sol, Q, prev = _solve(inst)
        rep = run_diagnostics(inst, sol, Q, prev)
        assert rep.qhat_ok
        assert all(s.ok for s in rep.suites), [s for s in rep.suites if not s.ok]
        assert rep.gap <= rep.gap_bound


@settings(max_examples=10)
@given(ca_instances(max_m=2, max_support=2))
def test_random_suites_pass(inst):
    sol, Q, prev = _solve(inst)
    rep = run_diagnostics(inst, sol, Q, prev)
    assert rep.qhat_ok and all(s.ok for s in rep.suites)
