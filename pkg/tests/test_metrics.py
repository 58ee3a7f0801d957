import math

import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from swarmsplit.metrics import Undefined, aggregate_runs, figure_of_merit, jain_fairness, mean_ci


def test_jain_examples():
    assert jain_fairness([1, 1, 1]) == 1.0
    assert jain_fairness([1, 0, 0, 0]) == 0.25
    assert jain_fairness([2, 4]) == 0.9
    with pytest.raises(Undefined):
        jain_fairness([0, 0])


def test_fom_examples():
    assert figure_of_merit(10, 0.95, 1.0, 0.5) == pytest.approx(19.0)
    assert figure_of_merit(10, 0.0, 1.0, 0.5) == 0.0
    assert figure_of_merit(10, 0.95, 2.0, 0.5) == pytest.approx(figure_of_merit(10, 0.95, 1.0, 0.5) / 2)
    with pytest.raises(Undefined):
        figure_of_merit(0, math.nan, math.nan, math.nan)


def test_aggregate_identical_runs():
    s = aggregate_runs([{"x": 3.0}] * 5, ["x"])["x"]
    assert s.mean == 3.0 and s.ci95 == 0.0


def test_aggregate_mean():
    assert aggregate_runs([{"x": 10.0}, {"x": 20.0}], ["x"])["x"].mean == 15.0


def test_ci_uses_n_minus_one_dof():
    values = [float(i % 7) for i in range(50)]
    s = mean_ci(values)
    sd = stats.tstd(values)
    assert s.ci95 == pytest.approx(stats.t.ppf(0.975, 49) * sd / math.sqrt(50))
    assert stats.t.ppf(0.975, 49) != pytest.approx(stats.norm.ppf(0.975), abs=1e-3)


def test_nan_excluded():
    s = mean_ci([1.0, math.nan, 3.0])
    assert s.mean == 2.0 and s.n == 2


nonneg = st.lists(st.floats(0, 1e6), min_size=1, max_size=30).filter(lambda xs: sum(xs) > 1e-6)


@given(nonneg)
def test_jain_bounds(xs):
    j = jain_fairness(xs)
    assert 1 / len(xs) - 1e-12 <= j <= 1 + 1e-12


@given(nonneg, st.floats(1e-3, 1e3))
def test_jain_scale_invariance(xs, c):
    assert jain_fairness([c * x for x in xs]) == pytest.approx(jain_fairness(xs), rel=1e-9)


pos = st.floats(0.01, 1e3)


@given(pos, st.floats(0.01, 1), pos, pos, st.floats(1.01, 3))
def test_fom_monotonicity(tps, acc, ae, al, k):
    base = figure_of_merit(tps, acc, ae, al)
    assert figure_of_merit(tps * k, acc, ae, al) > base
    assert figure_of_merit(tps, acc * k, ae, al) > base
    assert figure_of_merit(tps, acc, ae * k, al) < base
    assert figure_of_merit(tps, acc, ae, al * k) < base
