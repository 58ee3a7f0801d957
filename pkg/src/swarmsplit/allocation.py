"""Utilization, the gamma-threshold transfer rule and the five offloading strategies."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import SimConfig, Strategy


class NoNeighbors(LookupError):
    pass


@dataclass(frozen=True)
class AllocationDecision:
    """``target`` is None for ProcessLocally, else the receiving node id."""

    target: Optional[int] = None
    task_id: Optional[int] = None

    @property
    def is_transfer(self) -> bool:
        return self.target is not None


PROCESS_LOCALLY = AllocationDecision()


@dataclass(frozen=True)
class NeighborInfo:
    node_id: int
    utilization: float
    load_gflops: float


@dataclass
class NodeView:
    """What a node knows at a decision epoch: itself plus advertised neighbors."""

    node_id: int
    utilization: float
    load_gflops: float
    neighbors: Sequence[NeighborInfo] = field(default_factory=tuple)
    head_task_id: Optional[int] = None
    head_visited: frozenset[int] = frozenset()


def utilization(total_load_gflops: float, phi_gflops: float) -> float:
    """Estimated queue drain time in seconds."""
    if not phi_gflops > 0:
        raise ValueError("phi must be positive")
    return total_load_gflops / phi_gflops


def select_target(neighbor_utilizations: Sequence[tuple[int, float]]) -> int:
    if not neighbor_utilizations:
        raise NoNeighbors("no neighbors to select from")
    best_id, best_u = None, None
    for node_id, u in neighbor_utilizations:
        if best_u is None or u < best_u or (u == best_u and node_id < best_id):
            best_id, best_u = node_id, u
    return best_id


def transfer_decision(u_self: float, u_target: float, gamma: float, target: Optional[int] = None,
                      task_id: Optional[int] = None) -> AllocationDecision:
    if u_self - u_target > gamma:
        return AllocationDecision(target, task_id)
    return PROCESS_LOCALLY


def _least_loaded(neighbors: Sequence[NeighborInfo]) -> int:
    return select_target([(n.node_id, n.load_gflops) for n in neighbors])


def strategy_decide(kind: Strategy, view: NodeView, rng: Optional[np.random.Generator],
                    config: SimConfig) -> AllocationDecision:
    """Decide what to do with the head-of-queue task of ``view.node_id``.

    Baselines flip one coin per call against their Table-1 probability
    before choosing a target; Distributed is deterministic.
    """
    neighbors = list(view.neighbors)
    task = view.head_task_id

    if kind is Strategy.LOCAL_ONLY:
        return PROCESS_LOCALLY

    if kind is Strategy.DISTRIBUTED:
        if not neighbors:
            return PROCESS_LOCALLY
        best = select_target([(n.node_id, n.utilization) for n in neighbors])
        u_best = next(n.utilization for n in neighbors if n.node_id == best)
        return transfer_decision(view.utilization, u_best, config.gamma_threshold, best, task)

    probability = config.strategy_probabilities[kind.value]
    if rng.random() >= probability or not neighbors:
        return PROCESS_LOCALLY

    if kind is Strategy.RANDOM:
        pick = neighbors[int(rng.integers(len(neighbors)))]
        return AllocationDecision(pick.node_id, task)
    if kind is Strategy.RANDOM_ACYCLIC:
        fresh = [n for n in neighbors if n.node_id not in view.head_visited]
        if not fresh:
            return PROCESS_LOCALLY
        pick = fresh[int(rng.integers(len(fresh)))]
        return AllocationDecision(pick.node_id, task)
    if kind is Strategy.GREEDY:
        return AllocationDecision(_least_loaded(neighbors), task)
    raise ValueError(f"unhandled strategy {kind}")
