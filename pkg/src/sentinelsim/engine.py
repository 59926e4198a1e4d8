"""Deterministic discrete-event kernel: seeded deployment, unit-disk broadcast
radio with destructive collisions, per-state energy accounting, failure
injection, and the metrics sampler.

The loop is single threaded; events are processed in (time, sequence) order
and all randomness flows through one seeded generator, so identical configs
replay identical runs. Concurrency is only sensible across worlds.
"""

from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass, field
from enum import IntEnum

from . import peas as peas_policy
from . import protocol as sentinel_policy
from .analysis import CoverageGrid, MetricsRecord, RecoveryEvent, RunResult, coverage_fraction
from .peas import PeasParams, matched_rate
from .protocol import (
    NodeState,
    ProbeReply,
    ProbeRequest,
    ProtocolParams,
    SensorNode,
    change_state,
)

PROTOCOLS = ("sentinel", "peas")


class SimError(RuntimeError):
    """Event-queue or run-contract violation; aborts the run with context."""


class EventKind(IntEnum):
    WAKE = 0
    REPLY_TIMEOUT = 1
    MESSAGE_DELIVERY = 2
    METRICS_SAMPLE = 3
    FAILURE_INJECTION = 4
    END_OF_RUN = 5


@dataclass(order=True)
class SimEvent:
    time: float
    sequence: int
    kind: EventKind = field(compare=False)
    payload: object = field(compare=False, default=None)


@dataclass(frozen=True)
class EnergyModel:
    """Per-state draws in watts, per-message costs in joules.

    The active draw blends sensing duty with a mostly idle radio, so it sits
    below the full probe-listen draw. Defaults approximate a low-rate sensor
    mote on a 2xAA pack.
    """

    p_sleep: float = 3e-6
    p_probe_listen: float = 0.060
    p_active: float = 0.015
    e_tx: float = 50e-6
    e_rx: float = 50e-6
    initial_energy: float = 18_720.0

    def validate(self) -> None:
        if self.p_sleep < 0:
            raise ValueError(f"p_sleep must be >= 0, got {self.p_sleep}")
        if self.p_sleep >= self.p_probe_listen or self.p_sleep >= self.p_active:
            raise ValueError("p_sleep must be below the probing and active draws")
        if self.e_tx < 0 or self.e_rx < 0:
            raise ValueError("per-message energies must be >= 0")
        if self.initial_energy <= 0:
            raise ValueError(f"initial_energy must be positive, got {self.initial_energy}")


@dataclass
class SimConfig:
    """Full description of one simulation run."""

    field_width: float = 50.0      # m
    field_height: float = 50.0     # m
    n_nodes: int = 200
    r_sense: float = 10.0          # m
    r_comm: float = 20.0           # m, must be >= r_sense
    delta: float = 20.0            # m, active-node distance threshold, <= 2*r_sense
    duration: float = 6000.0       # s simulated
    seed: int = 1
    protocol: str = "sentinel"     # or "peas"
    beta: float = 2.0
    lambda_init: float = 0.01      # 1/s, probe rate at deployment
    t_w: float = 1.0               # s, reply wait timer
    k_probes: int = 3
    msg_size: int = 25             # octets
    bitrate: float = 250_000.0     # bit/s
    loss_probability: float = 0.05
    collisions: bool = True        # destructive overlap model on/off
    # Max random delay before a probe reply goes out. Scaled like a low-rate
    # radio's rx/tx turnaround plus CSMA backoff; simultaneous responders
    # therefore collide with realistic frequency.
    reply_jitter: float = 0.005    # s
    age_tie_margin: float = 0.01   # s, withdrawal tie band
    ts_initial: float = 10.0       # s, initial sleeps drawn uniform from (0, this]
    # Operational probe-rate clamps. Tighter than the bare math defaults: at
    # spec densities an uncapped rate saturates the shared channel (every
    # sleeper waking at ~1 Hz keeps the medium >40% busy), so the ceiling is
    # set where duty cycling still beats an always-on baseline.
    lambda_min: float = 1e-3       # 1/s
    lambda_max: float = 0.05       # 1/s
    t_sleep_min: float = 1.0       # s
    t_sleep_max_scale: float = 10.0
    lambda_peas: float | None = None       # None: match mean initial sleep
    peas_probing_range: float | None = None  # None: use delta
    metrics_interval: float = 10.0  # s
    coverage_resolution: float = 1.0  # m per grid cell
    energy: EnergyModel = field(default_factory=EnergyModel)
    failure_injections: list[tuple[int, float]] = field(default_factory=list)

    def validate(self) -> None:
        if self.field_width <= 0 or self.field_height <= 0:
            raise ValueError("field dimensions must be positive")
        if self.n_nodes < 0:
            raise ValueError(f"n_nodes must be >= 0, got {self.n_nodes}")
        if self.r_sense <= 0 or self.r_comm <= 0 or self.delta <= 0:
            raise ValueError("radii and delta must be positive")
        if self.delta > 2.0 * self.r_sense:
            raise ValueError(
                f"delta must be <= 2 * r_sense ({2 * self.r_sense}), got {self.delta}"
            )
        if self.r_comm < self.r_sense:
            raise ValueError(f"r_comm ({self.r_comm}) must be >= r_sense ({self.r_sense})")
        if self.duration < 0:
            raise ValueError(f"duration must be >= 0, got {self.duration}")
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        if not 0.0 <= self.loss_probability < 1.0:
            raise ValueError(
                f"loss_probability must lie in [0, 1), got {self.loss_probability}"
            )
        if self.t_w <= 0:
            raise ValueError(f"t_w must be positive, got {self.t_w}")
        if self.k_probes < 1:
            raise ValueError(f"k_probes must be >= 1, got {self.k_probes}")
        if self.msg_size <= 0:
            raise ValueError(f"msg_size must be positive, got {self.msg_size}")
        if self.bitrate <= 0:
            raise ValueError(f"bitrate must be positive, got {self.bitrate}")
        if self.beta <= 0 or self.lambda_init <= 0:
            raise ValueError("beta and lambda_init must be positive")
        if self.lambda_min <= 0 or self.lambda_max < self.lambda_min:
            raise ValueError("need 0 < lambda_min <= lambda_max")
        if self.reply_jitter < 0 or self.reply_jitter >= self.t_w:
            raise ValueError("reply_jitter must lie in [0, t_w)")
        if self.ts_initial <= 0:
            raise ValueError(f"ts_initial must be positive, got {self.ts_initial}")
        if self.metrics_interval <= 0:
            raise ValueError(f"metrics_interval must be positive, got {self.metrics_interval}")
        self.energy.validate()
        for node_id, when in self.failure_injections:
            if not 0 <= node_id < self.n_nodes:
                raise ValueError(f"failure injection names unknown node id {node_id}")
            if not 0.0 <= when <= self.duration:
                raise ValueError(
                    f"failure injection at t={when} lies outside the run "
                    f"duration {self.duration}"
                )

    @property
    def airtime(self) -> float:
        return self.msg_size * 8.0 / self.bitrate

    def protocol_params(self) -> ProtocolParams:
        return ProtocolParams(
            delta=self.delta,
            t_w=self.t_w,
            k_probes=self.k_probes,
            ts_initial=self.ts_initial,
            r_sense=self.r_sense,
            r_comm=self.r_comm,
            msg_size=self.msg_size,
            beta=self.beta,
            lambda_min=self.lambda_min,
            lambda_max=self.lambda_max,
            t_sleep_min=self.t_sleep_min,
            t_sleep_max_scale=self.t_sleep_max_scale,
            age_tie_margin=self.age_tie_margin,
        )

    def peas_params(self) -> PeasParams:
        return PeasParams(
            probing_range=(
                self.peas_probing_range if self.peas_probing_range is not None else self.delta
            ),
            lambda_peas=(
                self.lambda_peas
                if self.lambda_peas is not None
                else matched_rate(self.lambda_init, self.beta)
            ),
        )


class Frame:
    """One transmission on the air: interval, audience, and per-receiver fate."""

    __slots__ = ("msg", "sender_id", "start", "end", "receivers", "dropped")

    def __init__(self, msg, sender_id: int, start: float, end: float):
        self.msg = msg
        self.sender_id = sender_id
        self.start = start
        self.end = end
        self.receivers: list[int] = []
        self.dropped: set[int] = set()


class World:
    """A deployed population plus the event queue and all run bookkeeping."""

    def __init__(self, config: SimConfig):
        self.config = config
        self.params = config.protocol_params()
        self.peas = config.peas_params()
        self.clock = 0.0
        self.rng = random.Random(config.seed)
        self.nodes: list[SensorNode] = []
        self.neighbor_sets: list[frozenset[int]] = []
        self.rows: list[MetricsRecord] = []
        # cumulative control-traffic counters
        self.probes_sent = 0
        self.probes_received = 0
        self.replies_sent = 0
        self.replies_received = 0
        self.collisions = 0
        self.withdrawals = 0
        self.false_activation_ids: set[int] = set()
        self.activations: list[tuple[float, int]] = []
        self.conflict_ages: list[tuple[float, float]] = []
        self._heap: list[SimEvent] = []
        self._seq = 0
        self._inflight: dict[int, list[Frame]] = {}
        self._radio_on: set[int] = set()
        self._active_ids: set[int] = set()
        self._conflicts: dict[tuple[int, int], float] = {}
        self._holes: list[dict] = []
        self._grid = CoverageGrid(
            config.field_width, config.field_height, config.coverage_resolution
        )
        self._power = {
            NodeState.SLEEPING: config.energy.p_sleep,
            NodeState.PROBING: config.energy.p_probe_listen,
            NodeState.ACTIVE: config.energy.p_active,
            NodeState.DEAD: 0.0,
        }
        if config.protocol == "peas":
            self._reply_fn = peas_policy.on_probe_reply
            self._withdraw_fn = peas_policy.on_withdrawal_check
            self._policy_params = self.peas
        else:
            self._reply_fn = sentinel_policy.on_probe_reply
            self._withdraw_fn = sentinel_policy.on_withdrawal_check
            self._policy_params = self.params
        self._finished = False

    # -- event queue ---------------------------------------------------------

    def push(self, time: float, kind: EventKind, payload=None) -> None:
        if time < self.clock - 1e-9:
            raise SimError(
                f"event {kind.name} scheduled at t={time} before clock {self.clock}"
            )
        ev = SimEvent(time, self._seq, kind, payload)
        self._seq += 1
        heapq.heappush(self._heap, ev)

    # -- energy --------------------------------------------------------------

    def _spend(self, node: SensorNode, amount: float, category: str, now: float) -> None:
        budget = node.initial_energy - node.spent_total
        if amount >= budget:
            amount = budget
            setattr(node, category, getattr(node, category) + amount)
            node.spent_total = node.initial_energy
            if node.state is not NodeState.DEAD:
                prev = node.state
                change_state(node, NodeState.DEAD)
                self._sync_state(node, prev, now)
        else:
            setattr(node, category, getattr(node, category) + amount)
            node.spent_total += amount

    def charge(self, node: SensorNode, now: float) -> None:
        """Advance the node's state-power integral to `now`, applying death by
        depletion the moment the budget runs out."""
        dt = now - node.last_charge_time
        if dt <= 0.0:
            return
        node.last_charge_time = now
        p = self._power[node.state]
        if p > 0.0:
            self._spend(node, p * dt, "spent_state", now)

    # -- state bookkeeping ----------------------------------------------------

    def _sync_state(self, node: SensorNode, prev: NodeState, now: float) -> None:
        """Engine-side consequences of a protocol state transition."""
        state = node.state
        if state is NodeState.PROBING:
            self._radio_on.add(node.id)
        elif state is NodeState.SLEEPING:
            self._radio_on.discard(node.id)
            if prev is NodeState.ACTIVE:
                self._leave_active(node)
            self.push(node.wake_deadline, EventKind.WAKE, node.id)
        elif state is NodeState.ACTIVE:
            self._enter_active(node, now)
        elif state is NodeState.DEAD:
            self._radio_on.discard(node.id)
            if prev is NodeState.ACTIVE:
                self._leave_active(node)

    def _enter_active(self, node: SensorNode, now: float) -> None:
        redundant = False
        for oid in self._active_ids:
            other = self.nodes[oid]
            d = math.hypot(node.x - other.x, node.y - other.y)
            if d <= self.params.delta:
                redundant = True
            if d < self.params.delta:
                pair = (oid, node.id) if oid < node.id else (node.id, oid)
                self._conflicts[pair] = now
        if redundant:
            self.false_activation_ids.add(node.id)
        self._active_ids.add(node.id)
        self.activations.append((now, node.id))
        for hole in self._holes:
            if hole["recovered_at"] is None:
                d = math.hypot(node.x - hole["x"], node.y - hole["y"])
                if d <= self.params.delta:
                    hole["recovered_at"] = now

    def _leave_active(self, node: SensorNode) -> None:
        self._active_ids.discard(node.id)
        if self._conflicts:
            nid = node.id
            self._conflicts = {
                pair: t for pair, t in self._conflicts.items() if nid not in pair
            }

    # -- radio ----------------------------------------------------------------

    def broadcast(self, sender: SensorNode, msg, start: float) -> None:
        """Put one frame on the air at `start`.

        Every other in-range node whose radio is on is a receiver; each draws
        an independent loss and, when the frame overlaps another transmission
        audible at that receiver, all overlapping frames die there and the
        collision counter ticks once per overlap event.
        """
        if sender.state is NodeState.DEAD or not sender.radio_on:
            raise SimError(f"node {sender.id} cannot transmit in state {sender.state.name}")
        cfg = self.config
        end = start + msg.size * 8.0 / cfg.bitrate
        frame = Frame(msg, sender.id, start, end)
        loss = cfg.loss_probability
        neighbors = self.neighbor_sets[sender.id]
        for rid in sorted(self._radio_on & neighbors):
            lost = self.rng.random() < loss
            inflight = self._inflight.setdefault(rid, [])
            if inflight:
                inflight[:] = [f for f in inflight if f.end > start]
                overlapping = [f for f in inflight if f.start < end]
                if overlapping and cfg.collisions:
                    self.collisions += 1
                    for f in overlapping:
                        f.dropped.add(rid)
                    frame.dropped.add(rid)
            if lost:
                frame.dropped.add(rid)
            frame.receivers.append(rid)
            inflight.append(frame)
        if isinstance(msg, ProbeRequest):
            self.probes_sent += 1
        else:
            self.replies_sent += 1
        self._spend(sender, cfg.energy.e_tx, "spent_tx", start)
        if frame.receivers:
            self.push(end, EventKind.MESSAGE_DELIVERY, frame)

    # -- introspection ---------------------------------------------------------

    @property
    def active_ids(self) -> set[int]:
        return set(self._active_ids)

    def state_counts(self) -> dict[NodeState, int]:
        counts = dict.fromkeys(NodeState, 0)
        for node in self.nodes:
            counts[node.state] += 1
        return counts


def _uniform_open(rng: random.Random) -> float:
    """Uniform draw from the open interval (0, 1)."""
    r = rng.random()
    while r == 0.0:
        r = rng.random()
    return r


def deploy(
    config: SimConfig,
    *,
    positions: list[tuple[float, float]] | None = None,
    initial_sleeps: list[float] | None = None,
) -> World:
    """Build a world: seeded uniform deployment, everyone asleep with a wake
    event drawn from (0, ts_initial].

    positions and initial_sleeps override the random draws for engineered
    scenarios; lengths must equal n_nodes.
    """
    config.validate()
    world = World(config)
    rng = world.rng
    n = config.n_nodes
    if positions is None:
        positions = [
            (rng.uniform(0.0, config.field_width), rng.uniform(0.0, config.field_height))
            for _ in range(n)
        ]
    elif len(positions) != n:
        raise ValueError(f"expected {n} positions, got {len(positions)}")
    if initial_sleeps is None:
        initial_sleeps = [config.ts_initial * (1.0 - rng.random()) for _ in range(n)]
    elif len(initial_sleeps) != n:
        raise ValueError(f"expected {n} initial sleeps, got {len(initial_sleeps)}")

    rate = (
        world.peas.lambda_peas if config.protocol == "peas" else config.lambda_init
    )
    for i in range(n):
        x, y = positions[i]
        node = SensorNode(
            id=i,
            x=x,
            y=y,
            state=NodeState.SLEEPING,
            probe_rate=rate,
            beta=config.beta,
            wake_deadline=initial_sleeps[i],
            initial_energy=config.energy.initial_energy,
        )
        world.nodes.append(node)

    r2 = config.r_comm * config.r_comm
    adjacency: list[set[int]] = [set() for _ in range(n)]
    for i in range(n):
        xi, yi = world.nodes[i].x, world.nodes[i].y
        for j in range(i + 1, n):
            dx = xi - world.nodes[j].x
            dy = yi - world.nodes[j].y
            if dx * dx + dy * dy <= r2:
                adjacency[i].add(j)
                adjacency[j].add(i)
    world.neighbor_sets = [frozenset(s) for s in adjacency]

    for node in world.nodes:
        world.push(node.wake_deadline, EventKind.WAKE, node.id)
    for node_id, when in config.failure_injections:
        inject_failure(world, node_id, when)
    return world


def inject_failure(world: World, node_id: int, time: float) -> None:
    """Schedule a hardware failure: the node dies at `time` regardless of its
    remaining energy. Killing an already dead node is a no-op at run time."""
    if not 0 <= node_id < len(world.nodes):
        raise ValueError(f"unknown node id {node_id}")
    if not 0.0 <= time <= world.config.duration:
        raise ValueError(
            f"failure time {time} outside the run duration {world.config.duration}"
        )
    world.push(time, EventKind.FAILURE_INJECTION, node_id)


def _schedule_timeout(world: World, node: SensorNode, now: float) -> None:
    node.timeout_token += 1
    world.push(
        now + world.params.t_w, EventKind.REPLY_TIMEOUT, (node.id, node.timeout_token)
    )


def _handle_wake(world: World, node_id: int, now: float) -> None:
    node = world.nodes[node_id]
    if node.state is NodeState.DEAD:
        return
    world.charge(node, now)
    if node.state is NodeState.DEAD:
        return
    prev = node.state
    req = sentinel_policy.on_wake(node, world.params, now)
    if node.state is not prev:
        world._sync_state(node, prev, now)
    if req is not None:
        world.broadcast(node, req, now)
        _schedule_timeout(world, node, now)


def _handle_timeout(world: World, node_id: int, token: int, now: float) -> None:
    node = world.nodes[node_id]
    if node.state is not NodeState.PROBING or token != node.timeout_token:
        return  # cancelled by a reply or a state change
    world.charge(node, now)
    if node.state is not NodeState.PROBING:
        return
    prev = node.state
    req = sentinel_policy.on_reply_timeout(node, world.params, now)
    if node.state is not prev:
        world._sync_state(node, prev, now)
    if req is not None:
        world.broadcast(node, req, now)
        _schedule_timeout(world, node, now)


def _handle_delivery(world: World, frame: Frame, now: float) -> None:
    cfg = world.config
    e_rx = cfg.energy.e_rx
    for rid in frame.receivers:
        if rid in frame.dropped:
            continue
        node = world.nodes[rid]
        if not node.radio_on:
            continue  # slept or died while the frame was in the air
        world.charge(node, now)
        if not node.radio_on:
            continue
        world._spend(node, e_rx, "spent_rx", now)
        if node.state is NodeState.DEAD:
            continue
        msg = frame.msg
        if isinstance(msg, ProbeRequest):
            # received-probe accounting follows the message's purpose: only
            # guards are probe destinations, overhearing probers are not
            if node.state is NodeState.ACTIVE:
                world.probes_received += 1
                jitter = (
                    world.rng.uniform(0.0, cfg.reply_jitter) if cfg.reply_jitter > 0 else 0.0
                )
                tx_start = now + jitter
                reply = sentinel_policy.on_probe_request(node, msg, tx_start)
                if reply is not None:
                    world.broadcast(node, reply, tx_start)
        else:
            r = _uniform_open(world.rng)
            prev = node.state
            if node.state is NodeState.PROBING:
                world.replies_received += 1
                world._reply_fn(node, msg, world._policy_params, now, r)
            else:  # ACTIVE: overheard replies route to the withdrawal check
                if world._withdraw_fn(node, msg, world._policy_params, now, r):
                    world.withdrawals += 1
            if node.state is not prev:
                world._sync_state(node, prev, now)


def _handle_failure(world: World, node_id: int, now: float) -> None:
    node = world.nodes[node_id]
    if node.state is NodeState.DEAD:
        return
    world.charge(node, now)
    if node.state is not NodeState.DEAD:
        prev = node.state
        change_state(node, NodeState.DEAD)
        world._sync_state(node, prev, now)
    hole = {"node_id": node.id, "time": now, "x": node.x, "y": node.y, "recovered_at": None}
    for oid in world._active_ids:
        other = world.nodes[oid]
        if math.hypot(node.x - other.x, node.y - other.y) <= world.params.delta:
            hole["recovered_at"] = now
            break
    world._holes.append(hole)


def _record_sample(world: World, now: float) -> None:
    for node in world.nodes:
        world.charge(node, now)
    counts = world.state_counts()
    actives = [
        (world.nodes[i].x, world.nodes[i].y) for i in sorted(world._active_ids)
    ]
    cov = coverage_fraction(actives, world.config.r_sense, world._grid)
    world.rows.append(
        MetricsRecord(
            time=now,
            active_count=counts[NodeState.ACTIVE],
            sleeping_count=counts[NodeState.SLEEPING],
            probing_count=counts[NodeState.PROBING],
            dead_count=counts[NodeState.DEAD],
            total_energy_consumed=sum(n.spent_total for n in world.nodes),
            coverage_fraction=cov,
            probes_sent=world.probes_sent,
            probes_received=world.probes_received,
            replies_sent=world.replies_sent,
            replies_received=world.replies_received,
            collisions=world.collisions,
            withdrawals=world.withdrawals,
        )
    )
    oldest = max((now - t for t in world._conflicts.values()), default=0.0)
    world.conflict_ages.append((now, oldest))


def run(world: World, duration: float | None = None) -> RunResult:
    """Drive the event loop until the end-of-run marker and return the log."""
    if world._finished:
        raise SimError("world has already been run")
    cfg = world.config
    if duration is None:
        duration = cfg.duration
    world.push(duration, EventKind.END_OF_RUN)
    if duration > 0.0:
        world.push(0.0, EventKind.METRICS_SAMPLE)

    heap = world._heap
    while heap:
        ev = heapq.heappop(heap)
        if ev.time > duration:
            break
        if ev.time < world.clock - 1e-9:
            raise SimError(
                f"event {ev.kind.name} at t={ev.time} violates clock monotonicity "
                f"(clock={world.clock})"
            )
        world.clock = ev.time
        kind = ev.kind
        if kind is EventKind.MESSAGE_DELIVERY:
            _handle_delivery(world, ev.payload, ev.time)
        elif kind is EventKind.WAKE:
            _handle_wake(world, ev.payload, ev.time)
        elif kind is EventKind.REPLY_TIMEOUT:
            nid, token = ev.payload
            _handle_timeout(world, nid, token, ev.time)
        elif kind is EventKind.METRICS_SAMPLE:
            _record_sample(world, ev.time)
            nxt = ev.time + cfg.metrics_interval
            if nxt < duration:
                world.push(nxt, EventKind.METRICS_SAMPLE)
        elif kind is EventKind.FAILURE_INJECTION:
            _handle_failure(world, ev.payload, ev.time)
        elif kind is EventKind.END_OF_RUN:
            world.clock = duration
            break
        else:  # pragma: no cover
            raise SimError(f"unknown event kind {kind!r}")

    if not world.rows or world.rows[-1].time != duration:
        _record_sample(world, duration)
    world._finished = True
    return RunResult(
        config=cfg,
        rows=list(world.rows),
        recoveries=[
            RecoveryEvent(
                node_id=h["node_id"],
                time=h["time"],
                position=(h["x"], h["y"], 0.0),
                recovered_at=h["recovered_at"],
            )
            for h in world._holes
        ],
        false_activation_ids=set(world.false_activation_ids),
        conflict_ages=list(world.conflict_ages),
        activations=list(world.activations),
    )


def simulate(config: SimConfig) -> RunResult:
    """Deploy and run in one call."""
    return run(deploy(config))
