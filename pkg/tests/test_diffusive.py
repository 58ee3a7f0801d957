import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from swarmsplit.diffusive import PhiView, iterate_fixed_point, phi_init, phi_update

positive = st.floats(1.0, 1000.0)
delays = st.floats(0.0, 1.0)


def pair_fixed_point(fa, fb, d):
    # oracle: reciprocals satisfy a = (1/fa + d + b)/2, b = (1/fb + d + a)/2
    A = np.array([[1.0, -0.5], [-0.5, 1.0]])
    rhs = np.array([(1 / fa + d) / 2, (1 / fb + d) / 2])
    a, b = np.linalg.solve(A, rhs)
    return 1 / a, 1 / b


def test_init():
    assert phi_init(400) == 400
    assert phi_init(250) == 250
    with pytest.raises(ValueError):
        phi_init(0)


def test_isolated_node_keeps_capability():
    assert phi_update(400, []) == 400


@pytest.mark.parametrize(
    "fa, fb, d, expected",
    [
        (400, 400, 0.0, (400, 400)),
        (400, 400, 0.001, (285.714285714, 285.714285714)),
        (400, 200, 0.0, (300, 240)),
    ],
)
def test_pair_fixed_points(fa, fb, d, expected):
    oracle = pair_fixed_point(fa, fb, d)
    assert oracle == pytest.approx(expected, abs=1e-6)
    phi = iterate_fixed_point([fa, fb], [[1], [0]], {(0, 1): d, (1, 0): d}, iterations=200)
    assert phi == pytest.approx(oracle, abs=1e-6)


@given(positive, st.lists(st.tuples(positive, delays), min_size=1, max_size=6), st.integers(0, 5), st.floats(0.001, 1))
def test_delay_monotonicity(f, nbrs, which, bump):
    which %= len(nbrs)
    slower = list(nbrs)
    slower[which] = (nbrs[which][0], nbrs[which][1] + bump)
    assert phi_update(f, slower) <= phi_update(f, nbrs)


@given(positive, st.lists(st.tuples(positive, delays), max_size=6), st.floats(0.01, 100))
def test_capability_monotonicity(f, nbrs, bump):
    assert phi_update(f + bump, nbrs) > phi_update(f, nbrs)


@given(positive, st.lists(st.tuples(positive, delays), max_size=6))
def test_positive(f, nbrs):
    assert phi_update(f, nbrs) > 0


def test_phi_view_requires_positive():
    PhiView(1, 10.0, 0.0)
    with pytest.raises(ValueError):
        PhiView(1, 0.0, 0.0)
