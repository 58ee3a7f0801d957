"""Domain types, configuration validation and the per-run random-number contract."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields, replace
from typing import Optional

import numpy as np


class ConfigError(ValueError):
    """Raised when a configuration value violates a constraint."""

    def __init__(self, field_name: str, reason: str):
        super().__init__(f"{field_name}: {reason}")
        self.field = field_name
        self.reason = reason


class ExitLabel(enum.Enum):
    FULL = "Full"
    L1 = "L1"
    L2 = "L2"


class Strategy(enum.Enum):
    RANDOM = "random"
    RANDOM_ACYCLIC = "random_acyclic"
    GREEDY = "greedy"
    LOCAL_ONLY = "local_only"
    DISTRIBUTED = "distributed"

    @classmethod
    def parse(cls, value: "str | Strategy") -> "Strategy":
        if isinstance(value, Strategy):
            return value
        try:
            return cls(value.strip().lower())
        except ValueError:
            names = ", ".join(s.value for s in cls)
            raise ConfigError("strategy", f"unknown strategy {value!r} (expected one of {names})")


@dataclass(frozen=True)
class SimConfig:
    # swarm geometry
    worker_count: int = 30
    area_side_m: float = 20_000.0
    placement_granularity: int = 15
    movement_radius_m: float = 1000.0
    speed_mps: float = 75.0
    altitude_m: float = 100.0

    # compute / energy
    capability_mean_gflops: float = 400.0
    capability_std_gflops: float = 100.0
    energy_per_gflop_j: float = 0.02

    # workload; arrival_process is "poisson" or "periodic"
    task_arrival_mean_s: float = 0.060
    arrival_process: str = "poisson"

    # timing
    decision_period_s: float = 0.200
    sim_step_s: float = 0.001
    max_sim_time_s: float = 100.0
    runs: int = 50

    # radio
    tx_power_dbm: float = 30.0
    noise_dbm: float = -85.0
    min_snr_db: float = 3.0
    bandwidth_hz: float = 1e7
    carrier_hz: float = 2.4e9

    # allocation
    gamma_threshold: float = 0.02
    random_probability: float = 0.2
    random_acyclic_probability: float = 0.1
    greedy_probability: float = 0.05

    # early exit
    alpha_smoothing: float = 0.3
    tau_med: float = 1.5
    tau_high: float = 2.5

    seed: int = 0

    @property
    def strategy_probabilities(self) -> dict[str, float]:
        return {
            "random": self.random_probability,
            "random_acyclic": self.random_acyclic_probability,
            "greedy": self.greedy_probability,
        }

    def with_overrides(self, **overrides) -> "SimConfig":
        return replace(self, **overrides)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


_POSITIVE = (
    "area_side_m",
    "movement_radius_m",
    "speed_mps",
    "altitude_m",
    "capability_mean_gflops",
    "energy_per_gflop_j",
    "task_arrival_mean_s",
    "decision_period_s",
    "sim_step_s",
    "max_sim_time_s",
    "bandwidth_hz",
    "carrier_hz",
)

_PROBABILITIES = ("random_probability", "random_acyclic_probability", "greedy_probability")


def validate_config(raw: SimConfig) -> SimConfig:
    """Check every invariant of ``raw`` and return it unchanged.

    The first violated constraint raises :class:`ConfigError`.
    """
    if not isinstance(raw.worker_count, (int, np.integer)) or raw.worker_count <= 0:
        raise ConfigError("worker_count", "must be a positive integer")
    if not isinstance(raw.placement_granularity, (int, np.integer)) or raw.placement_granularity <= 0:
        raise ConfigError("placement_granularity", "must be a positive integer")
    if not isinstance(raw.runs, (int, np.integer)) or raw.runs <= 0:
        raise ConfigError("runs", "must be a positive integer")
    for name in _POSITIVE:
        value = getattr(raw, name)
        if not (value > 0) or math.isnan(value):
            raise ConfigError(name, "must be strictly positive")
    if not math.isfinite(raw.tx_power_dbm) or not math.isfinite(raw.noise_dbm):
        raise ConfigError("tx_power_dbm", "radio powers must be finite")
    if raw.capability_std_gflops < 0:
        raise ConfigError("capability_std_gflops", "must be non-negative")
    if raw.arrival_process not in ("poisson", "periodic"):
        raise ConfigError("arrival_process", "must be 'poisson' or 'periodic'")
    if not (raw.tau_med < raw.tau_high):
        raise ConfigError("tau_med", "tau ordering: tau_med must be < tau_high")
    if not (raw.gamma_threshold >= 0):
        raise ConfigError("gamma_threshold", "must be >= 0")
    if not (0 < raw.alpha_smoothing <= 1):
        raise ConfigError("alpha_smoothing", "must lie in (0, 1]")
    for name in _PROBABILITIES:
        p = getattr(raw, name)
        if not (0 <= p <= 1):
            raise ConfigError(name, "must lie in [0, 1]")
    if raw.placement_granularity ** 2 < raw.worker_count:
        raise ConfigError("placement_granularity", "granularity^2 must be >= worker_count")
    if 2 * raw.movement_radius_m > raw.area_side_m:
        raise ConfigError("movement_radius_m", "trajectory circle does not fit in the area")
    if raw.decision_period_s < raw.sim_step_s:
        raise ConfigError("decision_period_s", "must be at least one simulation step")
    steps = raw.decision_period_s / raw.sim_step_s
    if abs(steps - round(steps)) > 1e-9 * steps:
        raise ConfigError("decision_period_s", "must be an integer multiple of sim_step_s")
    return raw


@dataclass(frozen=True)
class ModelProfile:
    """The layered inference task: per-layer cost, output sizes and exits."""

    layer_count: int = 60
    layer_gflops: tuple[float, ...] = ()
    layer_output_bits: tuple[float, ...] = ()
    exit_points: tuple[int, int, int] = (60, 30, 15)
    exit_branch_layers: int = 3
    exit_accuracies: tuple[float, float, float] = (0.95, 0.9, 0.6)
    branch_layer_gflops: Optional[float] = None

    def __post_init__(self):
        if not self.layer_gflops:
            object.__setattr__(self, "layer_gflops", (0.4,) * self.layer_count)
        if not self.layer_output_bits:
            object.__setattr__(self, "layer_output_bits", (4e6,) * self.layer_count)
        object.__setattr__(self, "layer_gflops", tuple(float(g) for g in self.layer_gflops))
        object.__setattr__(self, "layer_output_bits", tuple(float(s) for s in self.layer_output_bits))
        self._validate()
        if self.branch_layer_gflops is None:
            object.__setattr__(self, "branch_layer_gflops", self.mean_layer_gflops)
        # remaining main-path work from layer l to the end, _suffix[L] == 0
        suffix = [0.0] * (self.layer_count + 1)
        for i in range(self.layer_count - 1, -1, -1):
            suffix[i] = suffix[i + 1] + self.layer_gflops[i]
        object.__setattr__(self, "_suffix", tuple(suffix))
        # main-path work before layer l, _cum[0] == 0
        cum = [0.0] * (self.layer_count + 1)
        for i in range(self.layer_count):
            cum[i + 1] = cum[i] + self.layer_gflops[i]
        object.__setattr__(self, "_cum", tuple(cum))

    def _validate(self) -> None:
        if self.layer_count <= 0:
            raise ConfigError("layer_count", "must be positive")
        if len(self.layer_gflops) != self.layer_count:
            raise ConfigError("layer_gflops", "needs exactly layer_count entries")
        if len(self.layer_output_bits) != self.layer_count:
            raise ConfigError("layer_output_bits", "needs exactly layer_count entries")
        if any(g <= 0 for g in self.layer_gflops):
            raise ConfigError("layer_gflops", "entries must be positive")
        if any(s < 0 for s in self.layer_output_bits):
            raise ConfigError("layer_output_bits", "entries must be non-negative")
        full, l1, l2 = self.exit_points
        if not (0 < l2 < l1 < full == self.layer_count):
            raise ConfigError("exit_points", "need L_2 < L_1 < L_full == layer_count")
        acc_full, acc_l1, acc_l2 = self.exit_accuracies
        if not (acc_l2 < acc_l1 < acc_full):
            raise ConfigError("exit_accuracies", "must increase with exit depth")
        if self.exit_branch_layers < 0:
            raise ConfigError("exit_branch_layers", "must be non-negative")

    @property
    def mean_layer_gflops(self) -> float:
        return sum(self.layer_gflops) / self.layer_count

    @property
    def mean_output_bits(self) -> float:
        return sum(self.layer_output_bits) / self.layer_count

    @property
    def total_gflops(self) -> float:
        return self._suffix[0]

    def remaining_from(self, layer: int) -> float:
        """Main-path GFLOPs of layers ``layer .. layer_count-1``."""
        return self._suffix[layer]

    def exit_layer(self, label: ExitLabel) -> int:
        full, l1, l2 = self.exit_points
        return {ExitLabel.FULL: full, ExitLabel.L1: l1, ExitLabel.L2: l2}[label]

    def accuracy(self, label: ExitLabel) -> float:
        acc_full, acc_l1, acc_l2 = self.exit_accuracies
        return {ExitLabel.FULL: acc_full, ExitLabel.L1: acc_l1, ExitLabel.L2: acc_l2}[label]


@dataclass
class TaskInstance:
    task_id: int
    origin_node: int
    created_at_s: float
    next_layer: int = 0
    in_layer_progress_gflops: float = 0.0
    visited_nodes: set[int] = field(default_factory=set)
    committed_exit: Optional[ExitLabel] = None
    completed_at_s: Optional[float] = None
    completion_accuracy: Optional[float] = None
    hops: list[int] = field(default_factory=list)
    # bookkeeping for the work-conservation check
    credited_gflops: float = 0.0
    discarded_gflops: float = 0.0

    def __post_init__(self):
        self.visited_nodes.add(self.origin_node)
        if not self.hops:
            self.hops.append(self.origin_node)

    def depth(self, profile: ModelProfile) -> int:
        """Total number of layers this task will execute."""
        if self.committed_exit is None or self.committed_exit is ExitLabel.FULL:
            return profile.layer_count
        return profile.exit_layer(self.committed_exit) + profile.exit_branch_layers

    def layer_cost(self, profile: ModelProfile) -> float:
        if self.committed_exit not in (None, ExitLabel.FULL):
            if self.next_layer >= profile.exit_layer(self.committed_exit):
                return profile.branch_layer_gflops
        return profile.layer_gflops[self.next_layer]

    def remaining_gflops(self, profile: ModelProfile) -> float:
        """Work left to the task's committed depth (full depth if uncommitted)."""
        if self.committed_exit in (None, ExitLabel.FULL):
            whole = profile.remaining_from(self.next_layer)
        else:
            exit_at = profile.exit_layer(self.committed_exit)
            branch_done = max(0, self.next_layer - exit_at)
            whole = profile.branch_layer_gflops * (profile.exit_branch_layers - branch_done)
        return whole - self.in_layer_progress_gflops


def sample_capability(rng: np.random.Generator, mean: float = 400.0, std: float = 100.0) -> float:
    """Draw a node capability from N(mean, std), redrawing non-positive values."""
    while True:
        value = float(rng.normal(mean, std))
        if value > 0:
            return value


# substream identifiers; node streams are keyed (stream, node_id)
STREAM_PLACEMENT = 0
STREAM_CAPABILITY = 1
STREAM_ARRIVALS = 2
STREAM_STRATEGY = 3


def substream(seed: int, stream: int, node_id: int = 0) -> np.random.Generator:
    """Independent Philox generator for ``(seed, stream, node_id)``.

    Streams are addressed by key, so adding nodes or subsystems never
    shifts the draws another stream produces.
    """
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(stream, node_id))
    return np.random.Generator(np.random.Philox(ss))
