"""Queue-growth estimation and exit-label selection."""

from __future__ import annotations

from dataclasses import dataclass

from .core import ExitLabel, ModelProfile


@dataclass
class ExitState:
    smoothed_derivative: float = 0.0
    label: ExitLabel = ExitLabel.FULL


def load_derivative(t_now: float, t_prev: float, dt: float) -> float:
    if not dt > 0:
        raise ValueError("dt must be positive")
    return (t_now - t_prev) / dt


def smooth(d_prev: float, delta: float, alpha: float) -> float:
    """One EWMA step; ``alpha == 1`` returns ``delta``."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if alpha == 1:
        return delta
    return d_prev + alpha * (delta - d_prev)


def exit_label(d: float, tau_med: float, tau_high: float) -> ExitLabel:
    if d <= tau_med:
        return ExitLabel.FULL
    if d <= tau_high:
        return ExitLabel.L1
    return ExitLabel.L2


def effective_depth(label: ExitLabel, profile: ModelProfile) -> tuple[int, int]:
    """``(last main layer, extra branch layers)`` executed under ``label``."""
    if label is ExitLabel.FULL:
        return profile.layer_count, 0
    return profile.exit_layer(label), profile.exit_branch_layers


def update(state: ExitState, t_now: float, t_prev: float, dt: float, alpha: float,
           tau_med: float, tau_high: float) -> ExitState:
    """Advance ``state`` by one decision epoch in place and return it."""
    state.smoothed_derivative = smooth(state.smoothed_derivative, load_derivative(t_now, t_prev, dt), alpha)
    state.label = exit_label(state.smoothed_derivative, tau_med, tau_high)
    return state
