"""Fairness, figure of merit and multi-run aggregation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats


class Undefined(ArithmeticError):
    """The metric has no value for this input (e.g. nothing completed)."""


def jain_fairness(xs: Sequence[float]) -> float:
    values = [float(x) for x in xs]
    if any(x < 0 for x in values):
        raise ValueError("fairness inputs must be non-negative")
    total = sum(values)
    squares = sum(x * x for x in values)
    if not values or squares == 0:
        raise Undefined("all inputs are zero")
    return total * total / (len(values) * squares)


def figure_of_merit(tps: float, acc: float, ae: float, al: float) -> float:
    """Throughput times accuracy over energy-per-task times latency."""
    if not (ae > 0 and al > 0):
        raise Undefined("no completed tasks to average energy and latency over")
    return tps * acc / (ae * al)


@dataclass(frozen=True)
class Summary:
    mean: float
    ci95: float
    n: int


def mean_ci(values: Iterable[float], confidence: float = 0.95) -> Summary:
    """Sample mean and t-interval half-width; NaNs are dropped first."""
    arr = np.array([v for v in values if not math.isnan(v)], dtype=float)
    if arr.size == 0:
        return Summary(math.nan, math.nan, 0)
    mean = float(arr.mean())
    if arr.size == 1:
        return Summary(mean, 0.0, 1)
    sd = float(arr.std(ddof=1))
    half = float(stats.t.ppf(0.5 + confidence / 2, df=arr.size - 1)) * sd / math.sqrt(arr.size)
    return Summary(mean, half, int(arr.size))


def aggregate_runs(results: Sequence[Mapping[str, float]], metrics: Sequence[str]) -> dict[str, Summary]:
    """Per-metric mean and 95% CI over ``results`` (mappings or RunResults)."""
    if not results:
        raise ValueError("need at least one result")

    def get(r, name):
        return r[name] if isinstance(r, Mapping) else getattr(r, name)

    return {name: mean_ci(float(get(r, name)) for r in results) for name in metrics}
