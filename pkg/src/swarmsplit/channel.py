"""Link budget between UAV pairs: two-ray path gain, SNR, Shannon capacity."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import SimConfig

SPEED_OF_LIGHT = 299_792_458.0
# 20*log10(4*pi/c), the free-space constant usually rounded to 147.55 dB
FREE_SPACE_DB = -20 * math.log10(4 * math.pi / SPEED_OF_LIGHT)


class DisconnectedLink(RuntimeError):
    """The link SNR is below the connection threshold."""


@dataclass(frozen=True)
class ChannelParams:
    tx_power_dbm: float = 30.0
    noise_dbm: float = -85.0
    bandwidth_hz: float = 1e7
    min_snr_db: float = 3.0
    carrier_hz: float = 2.4e9
    altitude_m: float = 100.0

    def __post_init__(self):
        if self.bandwidth_hz <= 0 or self.carrier_hz <= 0 or self.altitude_m <= 0:
            raise ValueError("bandwidth, carrier frequency and altitude must be positive")

    @classmethod
    def from_config(cls, config: SimConfig) -> "ChannelParams":
        return cls(
            tx_power_dbm=config.tx_power_dbm,
            noise_dbm=config.noise_dbm,
            bandwidth_hz=config.bandwidth_hz,
            min_snr_db=config.min_snr_db,
            carrier_hz=config.carrier_hz,
            altitude_m=config.altitude_m,
        )

    @property
    def crossover_m(self) -> float:
        return 4 * math.pi * self.altitude_m * self.altitude_m * self.carrier_hz / SPEED_OF_LIGHT

    @property
    def tx_power_w(self) -> float:
        return dbm_to_watts(self.tx_power_dbm)


@dataclass(frozen=True)
class LinkBudget:
    snr_db: float
    capacity_bps: float
    connected: bool


def dbm_to_watts(dbm: float) -> float:
    return 10 ** ((dbm - 30.0) / 10.0)


def path_gain_db(distance_m: float, params: ChannelParams) -> float:
    """Two-ray ground gain in dB (always <= 0 at realistic ranges).

    Free space below the crossover distance ``4*pi*h_t*h_r*f/c``, the
    fourth-power law above it. Unity antenna gains, equal antenna heights.
    """
    if distance_m <= 0:
        raise ValueError("distance must be positive")
    if distance_m <= params.crossover_m:
        return -(20 * math.log10(distance_m) + 20 * math.log10(params.carrier_hz) - FREE_SPACE_DB)
    h = params.altitude_m
    return -(40 * math.log10(distance_m) - 20 * math.log10(h * h))


def snr_db(tx_power_dbm: float, gain_db: float, noise_dbm: float) -> float:
    return tx_power_dbm + gain_db - noise_dbm


def capacity_bps(bandwidth_hz: float, snr: float) -> float:
    """Shannon capacity for an SNR given in dB."""
    if bandwidth_hz <= 0:
        raise ValueError("bandwidth must be positive")
    return bandwidth_hz * math.log2(1 + 10 ** (snr / 10))


def link_budget(distance_m: float, params: ChannelParams) -> LinkBudget:
    snr = snr_db(params.tx_power_dbm, path_gain_db(distance_m, params), params.noise_dbm)
    return LinkBudget(snr, capacity_bps(params.bandwidth_hz, snr), snr >= params.min_snr_db)


def max_range_m(params: ChannelParams) -> float:
    """Largest distance at which the SNR still meets ``min_snr_db``."""
    max_loss = params.tx_power_dbm - params.noise_dbm - params.min_snr_db
    d_fs = 10 ** ((max_loss - 20 * math.log10(params.carrier_hz) + FREE_SPACE_DB) / 20)
    if d_fs <= params.crossover_m:
        return d_fs
    h = params.altitude_m
    return 10 ** ((max_loss + 20 * math.log10(h * h)) / 40)


def snr_matrix(positions: np.ndarray, params: ChannelParams) -> np.ndarray:
    """Pairwise SNR (dB) for an ``(n, 2)`` array; the diagonal is ``-inf``."""
    pts = np.asarray(positions, dtype=float)
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=-1))
    n = len(pts)
    off = ~np.eye(n, dtype=bool)
    if np.any(dist[off] <= 0):
        raise ValueError("positions must be distinct")
    snr = snr_from_distance(np.where(off, dist, 1.0), params)
    snr[~off] = -np.inf
    return snr


def snr_from_distance(distance_m: np.ndarray, params: ChannelParams) -> np.ndarray:
    """Vectorized ``snr_db(P, path_gain_db(d), N0)``."""
    d = np.asarray(distance_m, dtype=float)
    free = 20 * np.log10(d) + 20 * math.log10(params.carrier_hz) - FREE_SPACE_DB
    tworay = 40 * np.log10(d) - 20 * math.log10(params.altitude_m**2)
    loss = np.where(d <= params.crossover_m, free, tworay)
    return params.tx_power_dbm - loss - params.noise_dbm


def neighbor_sets(positions: Sequence, params: ChannelParams) -> list[list[int]]:
    """Neighbor ids of every node, ascending; j is a neighbor of i iff SNR >= min."""
    pts = np.asarray([(p[0], p[1]) for p in positions], dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        return []
    connected = snr_matrix(pts, params) >= params.min_snr_db
    return [list(np.flatnonzero(row)) for row in connected]


def tx_delay(payload_bits: float, link: "LinkBudget | float") -> float:
    """Seconds to send ``payload_bits``; accepts a LinkBudget or a raw rate."""
    if isinstance(link, LinkBudget):
        if not link.connected:
            raise DisconnectedLink(f"SNR {link.snr_db:.2f} dB below threshold")
        rate = link.capacity_bps
    else:
        rate = float(link)
    if rate <= 0:
        raise DisconnectedLink("non-positive capacity")
    return payload_bits / rate
