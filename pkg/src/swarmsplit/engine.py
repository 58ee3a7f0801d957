"""Simulation loop: arrivals, layer-by-layer compute, transfers and decision epochs.

Time is measured on a fixed grid of ``sim_step_s``. Task arrivals and link
checks for in-flight transfers land on grid points, decisions run every
``decision_period_s``. Compute is work-conserving inside a step: a node
that finishes a layer mid-step carries the leftover capacity into the next
layer (or task), so completion instants are exact rather than rounded to
the grid. Because compute on a node only depends on its own queue, it is
settled lazily whenever something touches the node; this gives the same
trajectory as stepping every node every millisecond at a fraction of the
cost.
"""

from __future__ import annotations

import bisect
import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import earlyexit
from .allocation import NeighborInfo, NodeView, strategy_decide
from .channel import ChannelParams, DisconnectedLink, LinkBudget, snr_from_distance, snr_matrix
from .core import (
    STREAM_ARRIVALS,
    STREAM_CAPABILITY,
    STREAM_PLACEMENT,
    STREAM_STRATEGY,
    ExitLabel,
    ModelProfile,
    SimConfig,
    Strategy,
    TaskInstance,
    sample_capability,
    substream,
    validate_config,
)
from .diffusive import phi_init, phi_update
from .metrics import Undefined, figure_of_merit, jain_fairness
from .mobility import CircularTrajectory, Swarm, place_nodes

_EPS = 1e-9


@dataclass
class NodeState:
    node_id: int
    capability_gflops: float
    trajectory: Optional[CircularTrajectory] = None
    queue: deque = field(default_factory=deque)
    phi_gflops: float = 0.0
    total_load_gflops: float = 0.0
    prev_total_load_gflops: float = 0.0
    smoothed_derivative: float = 0.0
    exit_label: ExitLabel = ExitLabel.FULL
    energy_consumed_j: float = 0.0
    processed_gflops: float = 0.0
    tx_energy_j: float = 0.0
    clock_s: float = 0.0
    sending: Optional["InFlightTransfer"] = None

    def __post_init__(self):
        if not self.capability_gflops > 0:
            raise ValueError("capability must be positive")
        if self.phi_gflops <= 0:
            self.phi_gflops = phi_init(self.capability_gflops)

    def recompute_load(self, profile: ModelProfile) -> float:
        return sum(t.remaining_gflops(profile) for t in self.queue)

    def enqueue(self, task: TaskInstance, profile: ModelProfile) -> None:
        self.queue.append(task)
        self.total_load_gflops += task.remaining_gflops(profile)


@dataclass
class InFlightTransfer:
    task: TaskInstance
    from_node: int
    to_node: int
    payload_bits: float
    capacity_bps: float
    remaining_bits: float
    started_at_s: float
    energy_j: float = 0.0

    @property
    def duration_s(self) -> float:
        return self.payload_bits / self.capacity_bps if self.payload_bits else 0.0


@dataclass(frozen=True)
class CompletionRecord:
    task_id: int
    origin_node: int
    node: int
    created_at_s: float
    completed_at_s: float
    accuracy: float
    hops: tuple[int, ...]
    depth_gflops: float
    credited_gflops: float
    discarded_gflops: float

    @property
    def latency_s(self) -> float:
        return self.completed_at_s - self.created_at_s


@dataclass(frozen=True)
class TransferRecord:
    task_id: int
    from_node: int
    to_node: int
    started_at_s: float
    ended_at_s: float
    payload_bits: float
    capacity_bps: float
    energy_j: float
    delivered: bool


@dataclass(frozen=True)
class NodeRecord:
    node_id: int
    capability_gflops: float
    processed_gflops: float
    energy_j: float
    tx_energy_j: float
    final_load_gflops: float
    final_phi_gflops: float


@dataclass
class RunResult:
    strategy: str
    early_exit: bool
    seed: int
    worker_count: int
    sim_time_s: float
    created_tasks: int
    completed_tasks: int
    mean_latency_s: float
    mean_remaining_gflops: float
    mean_transfer_time_s: float
    transfer_count: int
    aborted_transfers: int
    jain_fairness: float
    total_energy_j: float
    compute_energy_j: float
    tx_energy_j: float
    energy_per_task_j: float
    mean_accuracy: float
    tps: float
    fom: float
    nodes: list[NodeRecord] = field(default_factory=list)
    remaining_series: list[tuple[float, float]] = field(default_factory=list)
    completions: list[CompletionRecord] = field(default_factory=list)
    transfers: list[TransferRecord] = field(default_factory=list)

    def trace(self) -> tuple:
        """Everything observable about a run, for bit-exact comparisons."""
        return (tuple(self.completions), tuple(self.transfers), tuple(self.remaining_series), tuple(self.nodes))


# --------------------------------------------------------------------------
# per-node operations


def generate_arrival_steps(config: SimConfig, rng: np.random.Generator, horizon_s: float) -> list[int]:
    """Grid steps at which tasks arrive at one node over ``[0, horizon_s)``.

    An arrival at continuous time ``a`` is created at the end of the step
    that contains it.
    """
    mean = config.task_arrival_mean_s
    dt = config.sim_step_s
    if math.isinf(mean):
        return []
    if config.arrival_process == "periodic":
        count = int(math.floor(horizon_s / mean - _EPS))
        times = mean * np.arange(1, count + 1)
    else:
        chunk = max(16, int(horizon_s / mean * 1.2) + 16)
        parts = []
        last = 0.0
        while last < horizon_s:
            gaps = rng.exponential(mean, size=chunk)
            part = last + np.cumsum(gaps)
            parts.append(part)
            last = float(part[-1])
        times = np.concatenate(parts)
        times = times[times < horizon_s]
    steps = np.ceil(times / dt - _EPS).astype(np.int64)
    return [max(1, int(s)) for s in steps]


def advance_compute(node: NodeState, until_s: float, profile: ModelProfile,
                    energy_per_gflop_j: float) -> list[tuple[TaskInstance, float]]:
    """Run ``node``'s FIFO queue from its clock up to ``until_s``.

    Returns ``(task, completion_time)`` for every task finished. Exit
    commitment is evaluated whenever the head task completes the layer
    matching the node's current exit label.
    """
    done: list[tuple[TaskInstance, float]] = []
    start = node.clock_s
    if until_s <= start:
        return done
    F = node.capability_gflops
    budget = (until_s - start) * F
    used = 0.0
    cum = profile._cum
    L = profile.layer_count
    while node.queue and used < budget:
        task = node.queue[0]
        avail = budget - used
        committed = task.committed_exit
        if committed is None:
            stop = L
            if node.exit_label is not ExitLabel.FULL:
                e = profile.exit_layer(node.exit_label)
                if e > task.next_layer:
                    stop = e
            need = cum[stop] - cum[task.next_layer] - task.in_layer_progress_gflops
        else:
            need = task.remaining_gflops(profile)
        if avail >= need:
            used += need
            task.credited_gflops += need
            node.total_load_gflops -= need
            task.in_layer_progress_gflops = 0.0
            if committed is None and stop < L:
                task.next_layer = stop
                task.committed_exit = node.exit_label
                node.total_load_gflops += task.remaining_gflops(profile) - profile.remaining_from(stop)
                if task.remaining_gflops(profile) > 0:
                    continue
            task.next_layer = task.depth(profile)
            node.queue.popleft()
            label = task.committed_exit or ExitLabel.FULL
            t_done = start + used / F
            task.completed_at_s = t_done
            task.completion_accuracy = profile.accuracy(label)
            done.append((task, t_done))
        else:
            used = budget
            task.credited_gflops += avail
            node.total_load_gflops -= avail
            _partial_advance(task, avail, profile)
    if not node.queue:
        node.total_load_gflops = 0.0
    node.processed_gflops += used
    node.energy_consumed_j += used * energy_per_gflop_j
    node.clock_s = until_s
    return done


def _partial_advance(task: TaskInstance, work: float, profile: ModelProfile) -> None:
    if task.committed_exit is None:
        cum = profile._cum
        pos = cum[task.next_layer] + task.in_layer_progress_gflops + work
        layer = min(bisect.bisect_right(cum, pos) - 1, profile.layer_count - 1)
        task.next_layer = layer
        task.in_layer_progress_gflops = max(0.0, pos - cum[layer])
    else:
        exit_at = profile.exit_layer(task.committed_exit)
        c = profile.branch_layer_gflops
        pos = (task.next_layer - exit_at) * c + task.in_layer_progress_gflops + work
        k = min(int(pos // c), profile.exit_branch_layers - 1)
        task.next_layer = exit_at + k
        task.in_layer_progress_gflops = max(0.0, pos - k * c)


def transfer_payload_bits(task: TaskInstance, profile: ModelProfile) -> float:
    """Size of what must be shipped: the last finished layer's output or the raw input."""
    if task.next_layer == 0:
        return profile.layer_output_bits[0]
    if task.next_layer > profile.layer_count:
        return profile.mean_output_bits
    return profile.layer_output_bits[task.next_layer - 1]


def start_transfer(sender: NodeState, to_node: int, link: LinkBudget, now_s: float,
                   profile: ModelProfile, tx_power_w: float) -> InFlightTransfer:
    """Pull the head task off ``sender``'s queue and put it on the air.

    In-layer progress is thrown away; the sender pays the full transmit
    energy up front.
    """
    if not link.connected:
        raise DisconnectedLink(f"link {sender.node_id}->{to_node} is down")
    task = sender.queue.popleft()
    sender.total_load_gflops -= task.remaining_gflops(profile)
    if not sender.queue:
        sender.total_load_gflops = 0.0
    task.discarded_gflops += task.in_layer_progress_gflops
    task.in_layer_progress_gflops = 0.0
    bits = transfer_payload_bits(task, profile)
    xfer = InFlightTransfer(task, sender.node_id, to_node, bits, link.capacity_bps, bits, now_s)
    xfer.energy_j = xfer.duration_s * tx_power_w
    sender.energy_consumed_j += xfer.energy_j
    sender.tx_energy_j += xfer.energy_j
    sender.sending = xfer
    return xfer


def advance_transfer(xfer: InFlightTransfer, dt: float, link_connected: bool) -> Optional[str]:
    """Step an in-flight transfer by ``dt``.

    ``link_connected`` is the link state at the start of the step. Returns
    ``"delivered"``, ``"aborted"`` or None while still sending.
    """
    if xfer.remaining_bits <= 0:
        return "delivered"
    if not link_connected:
        return "aborted"
    xfer.remaining_bits = max(0.0, xfer.remaining_bits - xfer.capacity_bps * dt)
    return "delivered" if xfer.remaining_bits == 0 else None


# --------------------------------------------------------------------------
# the run


_TRANSFER, _ARRIVAL = 0, 1


class Simulation:
    def __init__(self, config: SimConfig, strategy, early_exit: bool = False,
                 profile: Optional[ModelProfile] = None, seed: Optional[int] = None,
                 check_invariants: bool = False,
                 trajectories: Optional[list[CircularTrajectory]] = None,
                 capabilities: Optional[list[float]] = None,
                 on_epoch: Optional[Callable[["Simulation", float], None]] = None):
        self.config = validate_config(config)
        self.strategy = Strategy.parse(strategy)
        self.early_exit = bool(early_exit)
        self.profile = profile or ModelProfile()
        self.seed = config.seed if seed is None else int(seed)
        self.check_invariants = check_invariants
        self.on_epoch = on_epoch
        self.params = ChannelParams.from_config(config)
        self.tx_power_w = self.params.tx_power_w
        n = config.worker_count

        if trajectories is None:
            trajectories = place_nodes(config, substream(self.seed, STREAM_PLACEMENT))
        if capabilities is None:
            capabilities = [
                sample_capability(substream(self.seed, STREAM_CAPABILITY, i),
                                  config.capability_mean_gflops, config.capability_std_gflops)
                for i in range(n)
            ]
        self.swarm = Swarm(trajectories)
        self.nodes = [NodeState(i, capabilities[i], trajectories[i]) for i in range(n)]
        self.strategy_rngs = [substream(self.seed, STREAM_STRATEGY, i) for i in range(n)]

        self.dt = config.sim_step_s
        self.max_steps = int(round(config.max_sim_time_s / self.dt))
        self.epoch_steps = int(round(config.decision_period_s / self.dt))
        self.horizon_s = self.max_steps * self.dt

        self._events: list = []
        self._seq = 0
        self._arrivals = []
        for i in range(n):
            steps = generate_arrival_steps(config, substream(self.seed, STREAM_ARRIVALS, i), self.horizon_s)
            self._arrivals.append(steps)
            if steps:
                self._push(steps[0] * self.dt, _ARRIVAL, (i, 0))

        self.next_task_id = 0
        self.created = 0
        self.in_flight: dict[int, InFlightTransfer] = {}
        self.completions: list[CompletionRecord] = []
        self.transfers: list[TransferRecord] = []
        self.remaining_series: list[tuple[float, float]] = []
        self.neighbors: list[list[int]] = [[] for _ in range(n)]

    # -- event queue

    def _push(self, t: float, kind: int, payload) -> None:
        key = payload[0] if kind == _ARRIVAL else self._seq
        heapq.heappush(self._events, (t, kind, key, self._seq, payload))
        self._seq += 1

    def _drain_until(self, t_end: float) -> None:
        events = self._events
        while events and events[0][0] <= t_end:
            t, kind, _, _, payload = heapq.heappop(events)
            if kind == _ARRIVAL:
                self._on_arrival(t, *payload)
            else:
                self._on_transfer_end(t, *payload)

    def _settle(self, node: NodeState, t: float) -> None:
        for task, t_done in advance_compute(node, t, self.profile, self.config.energy_per_gflop_j):
            self.completions.append(CompletionRecord(
                task.task_id, task.origin_node, node.node_id, task.created_at_s, t_done,
                task.completion_accuracy, tuple(task.hops), _depth_gflops(task, self.profile),
                task.credited_gflops, task.discarded_gflops))

    def _on_arrival(self, t: float, node_id: int, idx: int) -> None:
        node = self.nodes[node_id]
        self._settle(node, t)
        task = TaskInstance(self.next_task_id, node_id, t)
        self.next_task_id += 1
        self.created += 1
        node.enqueue(task, self.profile)
        steps = self._arrivals[node_id]
        if idx + 1 < len(steps):
            self._push(steps[idx + 1] * self.dt, _ARRIVAL, (node_id, idx + 1))

    def _on_transfer_end(self, t: float, sender_id: int, delivered: bool) -> None:
        xfer = self.in_flight.pop(sender_id)
        sender = self.nodes[sender_id]
        sender.sending = None
        task = xfer.task
        if delivered:
            xfer.remaining_bits = 0.0
            dest = self.nodes[xfer.to_node]
            task.visited_nodes.add(dest.node_id)
            task.hops.append(dest.node_id)
        else:
            dest = sender
        self._settle(dest, t)
        dest.enqueue(task, self.profile)
        self.transfers.append(TransferRecord(
            task.task_id, xfer.from_node, xfer.to_node, xfer.started_at_s, t,
            xfer.payload_bits, xfer.capacity_bps, xfer.energy_j, delivered))

    def _schedule_transfer(self, xfer: InFlightTransfer, start_step: int) -> None:
        """Find when the transfer ends: delivery, or the first grid step the link is down."""
        end = xfer.started_at_s + xfer.duration_s
        first = start_step + 1
        last = int(math.ceil(end / self.dt - _EPS)) - 1
        outcome_t, delivered = end, True
        if last >= first:
            steps = np.arange(first, last + 1)
            times = steps * self.dt
            keep = times < end
            if keep.any():
                d = self.swarm.pair_distances(xfer.from_node, xfer.to_node, times[keep])
                ok = snr_from_distance(d, self.params) >= self.params.min_snr_db
                if not ok.all():
                    outcome_t, delivered = float(steps[keep][int(np.argmin(ok))] * self.dt), False
        self.in_flight[xfer.from_node] = xfer
        self._push(outcome_t, _TRANSFER, (xfer.from_node, delivered))

    # -- epochs

    def _epoch(self, step: int) -> None:
        t = step * self.dt
        cfg = self.config
        nodes = self.nodes
        positions = self.swarm.positions(t)
        snr = snr_matrix(positions, self.params) if len(nodes) > 1 else np.full((1, 1), -np.inf)
        connected = snr >= cfg.min_snr_db
        self.neighbors = [list(map(int, np.flatnonzero(row))) for row in connected]
        cap = cfg.bandwidth_hz * np.log2(1 + 10 ** (np.where(connected, snr, 0.0) / 10))
        ref_bits = self.profile.mean_output_bits

        old_phi = [nd.phi_gflops for nd in nodes]
        for nd in nodes:
            nbrs = self.neighbors[nd.node_id]
            nd.phi_gflops = phi_update(
                nd.capability_gflops,
                [(old_phi[k], ref_bits / cap[nd.node_id, k]) for k in nbrs],
            )

        period = cfg.decision_period_s
        for nd in nodes:
            delta = earlyexit.load_derivative(nd.total_load_gflops, nd.prev_total_load_gflops, period)
            nd.smoothed_derivative = earlyexit.smooth(nd.smoothed_derivative, delta, cfg.alpha_smoothing)
            nd.prev_total_load_gflops = nd.total_load_gflops
            if self.early_exit:
                nd.exit_label = earlyexit.exit_label(nd.smoothed_derivative, cfg.tau_med, cfg.tau_high)

        util = [nd.total_load_gflops / nd.phi_gflops for nd in nodes]
        loads = [nd.total_load_gflops for nd in nodes]
        for nd in nodes:
            if not nd.queue or nd.sending is not None:
                continue
            i = nd.node_id
            head = nd.queue[0]
            view = NodeView(
                i, util[i], loads[i],
                [NeighborInfo(k, util[k], loads[k]) for k in self.neighbors[i]],
                head.task_id, frozenset(head.visited_nodes),
            )
            decision = strategy_decide(self.strategy, view, self.strategy_rngs[i], cfg)
            if decision.is_transfer:
                k = decision.target
                link = LinkBudget(float(snr[i, k]), float(cap[i, k]), bool(connected[i, k]))
                xfer = start_transfer(nd, k, link, t, self.profile, self.tx_power_w)
                self._schedule_transfer(xfer, step)

    def _check(self) -> None:
        queued = sum(len(nd.queue) for nd in self.nodes)
        assert self.created == len(self.completions) + queued + len(self.in_flight), "task conservation"
        for nd in self.nodes:
            assert abs(nd.recompute_load(self.profile) - nd.total_load_gflops) <= 1e-6, "load drift"
            for task in nd.queue:
                assert 0 <= task.in_layer_progress_gflops < task.layer_cost(self.profile) + 1e-9

    def run(self) -> RunResult:
        step = 0
        while step < self.max_steps:
            self._drain_until(step * self.dt)
            for nd in self.nodes:
                self._settle(nd, step * self.dt)
            if step > 0:
                self._sample(step * self.dt)
            if self.check_invariants:
                self._check()
            if self.on_epoch:
                self.on_epoch(self, step * self.dt)
            self._epoch(step)
            step = min(step + self.epoch_steps, self.max_steps)
        self._drain_until(self.horizon_s)
        for nd in self.nodes:
            self._settle(nd, self.horizon_s)
        self._sample(self.horizon_s)
        if self.check_invariants:
            self._check()
        return self._result()

    def _sample(self, t: float) -> None:
        total = sum(nd.total_load_gflops for nd in self.nodes)
        self.remaining_series.append((t, total / len(self.nodes)))

    def _result(self) -> RunResult:
        cfg = self.config
        done = self.completions
        n_done = len(done)
        compute_e = sum(nd.processed_gflops for nd in self.nodes) * cfg.energy_per_gflop_j
        tx_e = sum(nd.tx_energy_j for nd in self.nodes)
        total_e = sum(nd.energy_consumed_j for nd in self.nodes)
        mean_lat = math.fsum(c.latency_s for c in done) / n_done if n_done else math.nan
        mean_acc = _mean_accuracy([c.accuracy for c in done])
        e_task = total_e / n_done if n_done else math.nan
        tps = n_done / self.horizon_s
        try:
            fom = figure_of_merit(tps, mean_acc, e_task, mean_lat)
        except Undefined:
            fom = math.nan
        try:
            jain = jain_fairness([nd.processed_gflops / nd.capability_gflops for nd in self.nodes])
        except Undefined:
            jain = math.nan
        series = self.remaining_series
        mean_rem = sum(v for _, v in series) / len(series) if series else 0.0
        xfers = self.transfers
        mean_xfer = sum(x.ended_at_s - x.started_at_s for x in xfers) / len(xfers) if xfers else 0.0
        return RunResult(
            strategy=self.strategy.value,
            early_exit=self.early_exit,
            seed=self.seed,
            worker_count=cfg.worker_count,
            sim_time_s=self.horizon_s,
            created_tasks=self.created,
            completed_tasks=n_done,
            mean_latency_s=mean_lat,
            mean_remaining_gflops=mean_rem,
            mean_transfer_time_s=mean_xfer,
            transfer_count=len(xfers),
            aborted_transfers=sum(1 for x in xfers if not x.delivered),
            jain_fairness=jain,
            total_energy_j=total_e,
            compute_energy_j=compute_e,
            tx_energy_j=tx_e,
            energy_per_task_j=e_task,
            mean_accuracy=mean_acc,
            tps=tps,
            fom=fom,
            nodes=[
                NodeRecord(nd.node_id, nd.capability_gflops, nd.processed_gflops, nd.energy_consumed_j,
                           nd.tx_energy_j, nd.total_load_gflops, nd.phi_gflops)
                for nd in self.nodes
            ],
            remaining_series=list(series),
            completions=list(done),
            transfers=list(xfers),
        )


def _depth_gflops(task: TaskInstance, profile: ModelProfile) -> float:
    if task.committed_exit in (None, ExitLabel.FULL):
        return profile.total_gflops
    exit_at = profile.exit_layer(task.committed_exit)
    return profile._cum[exit_at] + profile.exit_branch_layers * profile.branch_layer_gflops


def _mean_accuracy(values: list[float]) -> float:
    # weight each distinct exit accuracy by its share so a single-exit run is exact
    if not values:
        return math.nan
    counts: dict[float, int] = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    return math.fsum(acc * (k / len(values)) for acc, k in sorted(counts.items()))


def run_simulation(config: SimConfig, strategy="distributed", early_exit: bool = False,
                   seed: Optional[int] = None, profile: Optional[ModelProfile] = None,
                   **kwargs) -> RunResult:
    return Simulation(config, strategy, early_exit, profile=profile, seed=seed, **kwargs).run()
