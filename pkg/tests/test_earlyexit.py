import pytest
from hypothesis import given
from hypothesis import strategies as st

from swarmsplit.core import ExitLabel, ModelProfile
from swarmsplit.earlyexit import effective_depth, exit_label, load_derivative, smooth


@pytest.mark.parametrize("now, prev, expected", [(120, 100, 100.0), (100, 100, 0.0), (80, 100, -100.0)])
def test_load_derivative(now, prev, expected):
    assert load_derivative(now, prev, 0.2) == pytest.approx(expected)


def test_load_derivative_needs_positive_dt():
    with pytest.raises(ValueError):
        load_derivative(1, 0, 0.0)


def test_smooth():
    assert smooth(0.0, 100.0, 0.3) == pytest.approx(30.0)
    assert smooth(12.5, -7.25, 1.0) == -7.25
    assert smooth(4.0, 4.0, 0.3) == 4.0


@pytest.mark.parametrize(
    "d, label",
    [(1.0, ExitLabel.FULL), (1.5, ExitLabel.FULL), (2.0, ExitLabel.L1), (2.5, ExitLabel.L1), (3.0, ExitLabel.L2)],
)
def test_exit_label(d, label):
    assert exit_label(d, 1.5, 2.5) is label


def test_effective_depth():
    p = ModelProfile()
    assert effective_depth(ExitLabel.FULL, p) == (60, 0)
    assert sum(effective_depth(ExitLabel.L1, p)) == 33 and p.accuracy(ExitLabel.L1) == 0.9
    assert sum(effective_depth(ExitLabel.L2, p)) == 18 and p.accuracy(ExitLabel.L2) == 0.6
    assert p.accuracy(ExitLabel.FULL) == 0.95


_ORDER = {ExitLabel.FULL: 0, ExitLabel.L1: 1, ExitLabel.L2: 2}


@given(st.floats(-1e6, 1e6), st.floats(0, 1e3))
def test_label_monotone(d, step):
    assert _ORDER[exit_label(d + step, 1.5, 2.5)] >= _ORDER[exit_label(d, 1.5, 2.5)]


def test_exactly_two_switch_points():
    ds = [i / 100 for i in range(0, 500)]
    labels = [exit_label(d, 1.5, 2.5) for d in ds]
    switches = [ds[i] for i in range(1, len(ds)) if labels[i] != labels[i - 1]]
    assert switches == [1.51, 2.51]


@given(st.floats(-100, 100), st.lists(st.floats(-50, 50), min_size=1, max_size=40), st.floats(0.01, 1.0))
def test_ewma_bounded(d0, deltas, alpha):
    lo, hi = min(d0, min(deltas)), max(d0, max(deltas))
    d = d0
    for x in deltas:
        d = smooth(d, x, alpha)
        assert lo - 1e-9 <= d <= hi + 1e-9
