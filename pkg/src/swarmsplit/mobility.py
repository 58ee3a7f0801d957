"""Trajectory-center placement on a granularity grid and circular motion."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import SimConfig


class PlacementError(ValueError):
    pass


@dataclass(frozen=True)
class GeoPosition:
    x: float
    y: float


@dataclass(frozen=True)
class CircularTrajectory:
    center: GeoPosition
    radius_m: float
    angular_speed_rad_s: float
    phase_rad: float

    def __post_init__(self):
        if self.radius_m <= 0:
            raise ValueError("radius must be positive")

    @property
    def period_s(self) -> float:
        return 2 * math.pi / self.angular_speed_rad_s


def position_at(traj: CircularTrajectory, t: float) -> GeoPosition:
    angle = traj.angular_speed_rad_s * t + traj.phase_rad
    return GeoPosition(
        traj.center.x + traj.radius_m * math.cos(angle),
        traj.center.y + traj.radius_m * math.sin(angle),
    )


def cell_centers(area_side_m: float, granularity: int) -> np.ndarray:
    """Centers of the ``granularity x granularity`` cells, row-major, shape (g*g, 2)."""
    side = area_side_m / granularity
    coords = (np.arange(granularity) + 0.5) * side
    xs, ys = np.meshgrid(coords, coords, indexing="xy")
    return np.column_stack([xs.ravel(), ys.ravel()])


def place_nodes(config: SimConfig, rng: np.random.Generator) -> list[CircularTrajectory]:
    g = config.placement_granularity
    if config.worker_count > g * g:
        raise PlacementError(f"{config.worker_count} workers need more than {g}x{g} cells")
    candidates = cell_centers(config.area_side_m, g)
    picked = rng.choice(len(candidates), size=config.worker_count, replace=False)
    phases = rng.uniform(0.0, 2 * math.pi, size=config.worker_count)
    r = config.movement_radius_m
    lo, hi = r, config.area_side_m - r
    omega = config.speed_mps / r
    trajectories = []
    for idx, phase in zip(picked, phases):
        cx, cy = candidates[idx]
        center = GeoPosition(min(max(cx, lo), hi), min(max(cy, lo), hi))
        trajectories.append(CircularTrajectory(center, r, omega, float(phase)))
    return trajectories


class Swarm:
    """Vectorized position lookup for a fixed set of trajectories."""

    def __init__(self, trajectories: list[CircularTrajectory]):
        self.trajectories = trajectories
        self._cx = np.array([t.center.x for t in trajectories])
        self._cy = np.array([t.center.y for t in trajectories])
        self._r = np.array([t.radius_m for t in trajectories])
        self._w = np.array([t.angular_speed_rad_s for t in trajectories])
        self._ph = np.array([t.phase_rad for t in trajectories])

    def positions(self, t: float) -> np.ndarray:
        angle = self._w * t + self._ph
        return np.column_stack([self._cx + self._r * np.cos(angle), self._cy + self._r * np.sin(angle)])

    def pair_distances(self, i: int, j: int, times: np.ndarray) -> np.ndarray:
        ai = self._w[i] * times + self._ph[i]
        aj = self._w[j] * times + self._ph[j]
        dx = self._cx[i] + self._r[i] * np.cos(ai) - self._cx[j] - self._r[j] * np.cos(aj)
        dy = self._cy[i] + self._r[i] * np.sin(ai) - self._cy[j] - self._r[j] * np.sin(aj)
        return np.hypot(dx, dy)
