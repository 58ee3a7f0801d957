import math

import numpy as np
import pytest

from swarmsplit.core import (
    STREAM_ARRIVALS,
    STREAM_CAPABILITY,
    ConfigError,
    ExitLabel,
    ModelProfile,
    SimConfig,
    Strategy,
    TaskInstance,
    sample_capability,
    substream,
    validate_config,
)


def test_defaults_match_table_one():
    cfg = validate_config(SimConfig())
    assert cfg.area_side_m == 20_000
    assert cfg.placement_granularity == 15
    assert cfg.movement_radius_m == 1000
    assert cfg.speed_mps == 75
    assert (cfg.capability_mean_gflops, cfg.capability_std_gflops) == (400, 100)
    assert cfg.energy_per_gflop_j == 0.02
    assert cfg.task_arrival_mean_s == 0.060
    assert (cfg.tau_med, cfg.tau_high) == (1.5, 2.5)
    assert (cfg.tx_power_dbm, cfg.noise_dbm, cfg.min_snr_db, cfg.bandwidth_hz) == (30, -85, 3, 1e7)
    assert cfg.runs == 50 and cfg.max_sim_time_s == 100
    assert cfg.strategy_probabilities == {"random": 0.2, "random_acyclic": 0.1, "greedy": 0.05}
    assert cfg.gamma_threshold == 0.02 and cfg.decision_period_s == 0.2


@pytest.mark.parametrize(
    "overrides, field",
    [
        ({"tau_med": 2.5, "tau_high": 1.5}, "tau_med"),
        ({"worker_count": 0}, "worker_count"),
        ({"worker_count": 226}, "placement_granularity"),
        ({"alpha_smoothing": 0.0}, "alpha_smoothing"),
        ({"alpha_smoothing": 1.5}, "alpha_smoothing"),
        ({"gamma_threshold": -0.1}, "gamma_threshold"),
        ({"bandwidth_hz": 0.0}, "bandwidth_hz"),
        ({"task_arrival_mean_s": -1.0}, "task_arrival_mean_s"),
        ({"decision_period_s": 0.2005}, "decision_period_s"),
        ({"random_probability": 1.2}, "random_probability"),
    ],
)
def test_validate_config_rejects(overrides, field):
    with pytest.raises(ConfigError) as err:
        validate_config(SimConfig(**overrides))
    assert err.value.field == field


def test_infinite_arrival_mean_is_valid():
    validate_config(SimConfig(task_arrival_mean_s=math.inf))


def test_strategy_parse():
    assert Strategy.parse("Random_Acyclic") is Strategy.RANDOM_ACYCLIC
    with pytest.raises(ConfigError):
        Strategy.parse("round_robin")


def test_sample_capability_deterministic():
    a = sample_capability(substream(5, STREAM_CAPABILITY, 3))
    b = sample_capability(substream(5, STREAM_CAPABILITY, 3))
    assert a == b


def test_sample_capability_distribution():
    rng = substream(11, STREAM_CAPABILITY)
    draws = np.array([sample_capability(rng) for _ in range(10_000)])
    assert (draws > 0).all()
    # std error of the mean is 1, so +-5 is a 5-sigma band
    assert abs(draws.mean() - 400) < 5


def test_sample_capability_resamples_non_positive():
    rng = substream(2, STREAM_CAPABILITY)
    draws = [sample_capability(rng, mean=1.0, std=100.0) for _ in range(500)]
    assert min(draws) > 0


def test_substreams_are_independent_of_node_count():
    first = substream(9, STREAM_ARRIVALS, 4).random(5)
    substream(9, STREAM_ARRIVALS, 5).random(100)
    again = substream(9, STREAM_ARRIVALS, 4).random(5)
    assert np.array_equal(first, again)
    assert not np.array_equal(first, substream(9, STREAM_ARRIVALS, 3).random(5))
    assert not np.array_equal(first, substream(10, STREAM_ARRIVALS, 4).random(5))


def test_model_profile_defaults():
    p = ModelProfile()
    assert p.layer_count == 60 and len(p.layer_gflops) == 60 and len(p.layer_output_bits) == 60
    assert p.total_gflops == pytest.approx(24.0)
    assert p.exit_layer(ExitLabel.L1) == 30 and p.exit_layer(ExitLabel.L2) == 15
    assert p.accuracy(ExitLabel.FULL) == 0.95
    assert p.branch_layer_gflops == pytest.approx(0.4)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"exit_points": (60, 15, 30)},
        {"exit_points": (50, 30, 15)},
        {"exit_accuracies": (0.9, 0.95, 0.6)},
        {"layer_gflops": (0.4,) * 59},
        {"layer_output_bits": (1.0,) * 61},
    ],
)
def test_model_profile_invariants(kwargs):
    with pytest.raises(ConfigError):
        ModelProfile(**kwargs)


def test_task_remaining_work():
    p = ModelProfile()
    task = TaskInstance(0, origin_node=2, created_at_s=0.0)
    assert task.visited_nodes == {2}
    assert task.remaining_gflops(p) == pytest.approx(24.0)
    task.next_layer, task.in_layer_progress_gflops = 15, 0.1
    assert task.remaining_gflops(p) == pytest.approx(45 * 0.4 - 0.1)
    task.committed_exit, task.in_layer_progress_gflops = ExitLabel.L2, 0.0
    assert task.remaining_gflops(p) == pytest.approx(3 * 0.4)
    assert task.depth(p) == 18
