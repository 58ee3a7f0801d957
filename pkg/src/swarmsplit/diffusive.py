"""Aggregated computation capability: the neighbor-recursive diffusive metric.

Each node holds a value phi (GFLOPS) that blends its own capability with
the slowest neighbor path. Values are exchanged with one-hop neighbors once
per decision epoch and updated from the latest received advertisements, so
no node ever needs a global view of the swarm.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence


@dataclass(frozen=True)
class PhiView:
    node_id: int
    phi_gflops: float
    advertised_at_s: float

    def __post_init__(self):
        if not self.phi_gflops > 0:
            raise ValueError("advertised phi must be positive")


def phi_init(capability_gflops: float) -> float:
    if not capability_gflops > 0:
        raise ValueError("capability must be positive")
    return float(capability_gflops)


def phi_update(capability_gflops: float, neighbors: Iterable[tuple[float, float]]) -> float:
    """One update step for a node with capability ``capability_gflops``.

    ``neighbors`` yields ``(phi_k, tx_delay_s)`` pairs for the current
    neighbor set. With ``n`` neighbors the new value satisfies

        1/phi = (1/F + max_k(d_k + 1/phi_k)) / (n + 1)

    An isolated node keeps ``phi = F``.
    """
    worst = None
    n = 0
    for phi_k, delay in neighbors:
        n += 1
        cost = delay + 1.0 / phi_k
        if worst is None or cost > worst:
            worst = cost
    if n == 0:
        return float(capability_gflops)
    inv = (1.0 / capability_gflops + worst) / (n + 1)
    return 1.0 / inv


def iterate_fixed_point(
    capabilities: Sequence[float],
    neighbors: Sequence[Sequence[int]],
    delays: dict[tuple[int, int], float],
    iterations: int = 200,
    tol: float = 0.0,
) -> list[float]:
    """Synchronously iterate ``phi_update`` on a static graph.

    ``delays[(i, k)]`` is the delay used by node ``i`` toward ``k``. Stops
    early once no value moves by more than ``tol``.
    """
    phi = [phi_init(f) for f in capabilities]
    for _ in range(iterations):
        new = [
            phi_update(capabilities[i], [(phi[k], delays[(i, k)]) for k in neighbors[i]])
            for i in range(len(phi))
        ]
        moved = max((abs(a - b) for a, b in zip(new, phi)), default=0.0)
        phi = new
        if moved <= tol:
            break
    return phi
