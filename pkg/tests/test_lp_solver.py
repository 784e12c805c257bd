from __future__ import annotations

from fractions import Fraction

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

import brute
from simplemech.lp_solver import LinearProgram, check_point, solve_dual, solve_lp


def box_lp() -> LinearProgram:
    lp = LinearProgram()
    x1 = lp.add_variable("x1", obj=1)
    x2 = lp.add_variable("x2", obj=1)
    lp.add_row({x1: 1}, "<=", 1, "c1")
    lp.add_row({x2: 1}, "<=", 2, "c2")
    return lp


def test_examples_float_and_rational():
    for mode in ("float", "rational"):
        res = solve_lp(box_lp(), mode)
        assert res.optimal and res.objective == 3 and list(res.x) == [1, 2]
        lp = LinearProgram()
        x = lp.add_variable("x", obj=1)
        lp.add_row({x: 1}, "<=", -1)
        assert solve_lp(lp, mode).status == "infeasible"
        lp = LinearProgram()
        lp.add_variable("x", obj=1)
        assert solve_lp(lp, mode).status == "unbounded"


def test_check_point_examples():
    lp = box_lp()
    assert check_point(lp, [1, 2]).max_violation == 0
    rep = check_point(lp, [Fraction(3, 2), 0])
    assert rep.max_violation == Fraction(1, 2) and rep.worst == "c1"
    assert check_point(LinearProgram(), []).max_violation == 0


def test_equality_and_free_variables():
    lp = LinearProgram()
    x = lp.add_variable("x", lb=-float("inf"), obj=-1)
    y = lp.add_variable("y", obj=-1)
    lp.add_row({x: 1, y: 1}, "=", 3)
    lp.add_row({x: 1, y: -1}, ">=", -5)
    for mode in ("float", "rational"):
        res = solve_lp(lp, mode)
        assert res.optimal and res.objective == -3


def test_degenerate_program_terminates():
    # a classic cycling example for largest-coefficient pivoting
    lp = LinearProgram()
    xs = [lp.add_variable(f"x{k}") for k in range(4)]
    lp.set_objective({xs[0]: Fraction(3, 4), xs[1]: -150, xs[2]: Fraction(1, 50), xs[3]: -6})
    lp.add_row({xs[0]: Fraction(1, 4), xs[1]: -60, xs[2]: Fraction(-1, 25), xs[3]: 9}, "<=", 0)
    lp.add_row({xs[0]: Fraction(1, 2), xs[1]: -90, xs[2]: Fraction(-1, 50), xs[3]: 3}, "<=", 0)
    lp.add_row({xs[2]: 1}, "<=", 1)
    for mode in ("float", "rational"):
        res = solve_lp(lp, mode)
        assert res.optimal and abs(float(res.objective) - 0.05) < 1e-9


@st.composite
def random_lp(draw):
    n = draw(st.integers(1, 4))
    m = draw(st.integers(1, 8))
    A = [[draw(st.integers(-3, 5)) for _ in range(n)] for _ in range(m)]
    b = [draw(st.integers(0, 8)) for _ in range(m)]
    c = [draw(st.integers(-3, 5)) for _ in range(n)]
    # a box row keeps the program bounded
    A.append([1] * n)
    b.append(draw(st.integers(1, 10)))
    return np.array(A), np.array(b), np.array(c)


def to_lp(A, b, c) -> LinearProgram:
    lp = LinearProgram()
    xs = [lp.add_variable(k, obj=int(c[k])) for k in range(len(c))]
    for r in range(len(b)):
        lp.add_row({xs[k]: int(A[r][k]) for k in range(len(c))}, "<=", int(b[r]))
    return lp


@given(random_lp())
def test_matches_vertex_enumeration(data):
    A, b, c = data
    expected = brute.lp_vertices_max(A.astype(float), b.astype(float), c.astype(float))
    lp = to_lp(A, b, c)
    fl = solve_lp(lp, "float")
    ra = solve_lp(lp, "rational")
    assert abs(float(fl.objective) - expected) <= 1e-7
    assert abs(float(ra.objective) - expected) <= 1e-9
    assert check_point(lp, ra.x).max_violation == 0
    assert check_point(lp, fl.x).max_violation <= 1e-9


@given(random_lp())
def test_duality_gap(data):
    A, b, c = data
    lp = to_lp(A, b, c)
    primal = solve_lp(lp, "rational")
    dual = solve_lp(solve_dual(lp), "rational")
    assert dual.optimal and -dual.objective == primal.objective
    fdual = solve_lp(solve_dual(lp), "float")
    assert abs(-float(fdual.objective) - float(primal.objective)) <= 1e-7


@given(random_lp())
def test_matches_scipy(data):
    A, b, c = data
    lp = to_lp(A, b, c)
    status, value = brute.scipy_optimum(lp)
    assert status == "optimal"
    assert abs(float(solve_lp(lp, "float").objective) - value) <= 1e-7


def test_lp_text_dump_mentions_every_row():
    text = box_lp().to_lp_text()
    assert " c0: + 1.0 x0 <= 1.0" in text and " c1: + 1.0 x1 <= 2.0" in text
    assert text.startswith("\\ lp\nMaximize") and text.rstrip().endswith("End")
