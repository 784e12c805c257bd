from __future__ import annotations

import io
import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from simplemech.model import XOS, DiscreteMarginal, Instance, make_instance
from simplemech.sampling import (
    concentration_trials,
    draw_indices,
    dkw_sample_count,
    empirical_instance,
    kolmogorov_distance,
    max_kolmogorov,
    rescale_to_unit,
    sample_pipeline,
)
from strategies import marginals

F = Fraction


def test_kolmogorov_examples():
    a = DiscreteMarginal.uniform([1, 2])
    assert kolmogorov_distance(a, a) == 0
    assert kolmogorov_distance(DiscreteMarginal.point(1), DiscreteMarginal.point(2)) == 1
    assert kolmogorov_distance(a, DiscreteMarginal.point(2)) == F(1, 2)


@given(marginals(), marginals())
def test_kolmogorov_is_symmetric_and_bounded(a, b):
    d = kolmogorov_distance(a, b)
    assert d == kolmogorov_distance(b, a) and 0 <= d <= 1


def test_dkw_examples():
    assert dkw_sample_count(1, 1, 1, 2 / math.e**2) == 1
    assert dkw_sample_count(1, 1, 0.1, 0.1) == 150
    with pytest.raises(ValueError):
        dkw_sample_count(1, 1, 0, 0.1)
    with pytest.raises(ValueError):
        dkw_sample_count(1, 1, 0.1, 1.5)


@given(st.integers(1, 4), st.integers(1, 4), st.floats(0.01, 1), st.floats(0.01, 1))
def test_dkw_monotone(n, m, eps, delta):
    N = dkw_sample_count(n, m, eps, delta)
    assert dkw_sample_count(n, m, eps / 2, delta) >= N
    assert dkw_sample_count(n + 1, m, eps, delta) >= N
    assert dkw_sample_count(n, m, eps, delta / 2) >= N


def test_single_draw_gives_point_masses():
    inst = make_instance([[DiscreteMarginal.uniform([1, 2, 3]), DiscreteMarginal.uniform([4, 5])]])
    emp = empirical_instance(inst, 1, seed=7)
    assert all(d.size == 1 and d.probs == (1,) for d in emp.marginals[0])


def test_point_mass_reproduced():
    inst = make_instance([[DiscreteMarginal.point(2)]] * 2)
    assert empirical_instance(inst, 5, seed=0) == inst
    assert max_kolmogorov(inst, empirical_instance(inst, 5, seed=0)) == 0


def test_draws_are_deterministic():
    inst = make_instance([[DiscreteMarginal.uniform([1, 2, 3])]])
    assert draw_indices(inst, 50, 3) == draw_indices(inst, 50, 3)
    assert draw_indices(inst, 50, 3) != draw_indices(inst, 50, 4)


def test_sample_log_csv():
    inst = make_instance([[DiscreteMarginal.uniform([1, 2])]])
    buf = io.StringIO()
    draw_indices(inst, 3, 0).write_csv(buf, inst)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "trial,i,j,draw,value" and len(lines) == 4


def test_xos_alpha_rows_follow_draws():
    inst = Instance(1, 1, ((DiscreteMarginal.uniform([0, 1]),),), (XOS((((1, 2), (3, 4)),)),))
    emp = empirical_instance(inst, 1, seed=0)
    (v,) = draw_indices(inst, 1, 0).draws[0][0]
    assert emp.valuations[0].alpha[0] == (inst.valuations[0].alpha[0][v],)


def test_concentration_within_allowance():
    inst = make_instance([[DiscreteMarginal.uniform([1, 2, 3])]])
    res = concentration_trials(inst, 0.2, 0.2, trials=60, seed=1)
    assert res.ok and res.N == dkw_sample_count(1, 1, 0.2, 0.2)


def test_rescale_to_unit():
    inst = make_instance([[DiscreteMarginal.uniform([2, 4])]])
    scaled, factor = rescale_to_unit(inst)
    assert factor == 4 and scaled.marginals[0][0].support == (F(1, 2), F(1))
    same, one = rescale_to_unit(make_instance([[DiscreteMarginal.point(F(1, 2))]]))
    assert one == 1 and same.marginals[0][0].support == (F(1, 2),)


def test_pipeline_reports_true_revenues():
    inst = make_instance([[DiscreteMarginal.uniform([F(1, 2), 1])]])
    rep = sample_pipeline(inst, 0.25, 0.25, seed=0)
    assert rep["N"] == dkw_sample_count(1, 1, 0.25, 0.25)
    assert rep["opt_true"] >= max(rep["rev_rpp_true"], rep["rev_tpt_true"]) - 1e-12
    assert rep["gap"] >= -1e-12
