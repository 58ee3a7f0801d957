import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from swarmsplit.core import STREAM_PLACEMENT, SimConfig, substream
from swarmsplit.mobility import (
    CircularTrajectory,
    GeoPosition,
    PlacementError,
    cell_centers,
    place_nodes,
    position_at,
)

TRAJ = CircularTrajectory(GeoPosition(5000, 5000), 1000, 75 / 1000, 0.0)


def test_grid_cells():
    centers = cell_centers(20_000, 15)
    assert len(centers) == 225
    assert centers[1][0] - centers[0][0] == pytest.approx(20_000 / 15)


def test_too_many_workers():
    cfg = SimConfig(worker_count=226)
    with pytest.raises(PlacementError):
        place_nodes(cfg, substream(0, STREAM_PLACEMENT))


def test_placement_is_deterministic_and_distinct():
    cfg = SimConfig(worker_count=50)
    a = place_nodes(cfg, substream(3, STREAM_PLACEMENT))
    b = place_nodes(cfg, substream(3, STREAM_PLACEMENT))
    assert a == b
    assert len({(t.center.x, t.center.y) for t in a}) == 50


def test_circles_stay_in_bounds():
    cfg = SimConfig(worker_count=225)
    for traj in place_nodes(cfg, substream(1, STREAM_PLACEMENT)):
        assert traj.radius_m <= traj.center.x <= cfg.area_side_m - traj.radius_m
        assert traj.radius_m <= traj.center.y <= cfg.area_side_m - traj.radius_m


def test_position_examples():
    assert position_at(TRAJ, 0.0) == GeoPosition(6000, 5000)
    full = position_at(TRAJ, 2 * math.pi / TRAJ.angular_speed_rad_s)
    assert (full.x, full.y) == pytest.approx((6000, 5000), abs=1e-6)
    half = position_at(TRAJ, math.pi / TRAJ.angular_speed_rad_s)
    assert (half.x, half.y) == pytest.approx((4000, 5000), abs=1e-6)
    assert TRAJ.period_s == pytest.approx(83.78, abs=0.01)


@given(st.floats(0, 1e4))
def test_distance_from_center_is_radius(t):
    p = position_at(TRAJ, t)
    assert math.hypot(p.x - 5000, p.y - 5000) == pytest.approx(1000, rel=1e-9)


@given(st.floats(0, 1e3))
def test_speed_by_finite_difference(t):
    eps = 1e-4
    a, b = position_at(TRAJ, t), position_at(TRAJ, t + eps)
    assert math.hypot(b.x - a.x, b.y - a.y) / eps == pytest.approx(75, rel=1e-3)
