"""Sentinel node state machine: probing rounds, redundancy check, activation,
and the activity-withdrawal procedure between conflicting guards.

Handlers mutate only the node they are given and return any message the node
wants on the air; scheduling of wake/timeout events and actual delivery is the
engine's job. No handler reads another node's state directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

from .scheduling import (
    LAMBDA_MAX,
    LAMBDA_MIN,
    T_SLEEP_MAX_SCALE,
    T_SLEEP_MIN,
    WeibullParams,
    sample_sleep_time,
    update_probe_rate,
)

DEFAULT_MSG_SIZE = 25  # octets


class ProtocolError(RuntimeError):
    """An illegal state transition or handler precondition violation."""


class NodeState(IntEnum):
    SLEEPING = 0
    PROBING = 1
    ACTIVE = 2
    DEAD = 3


# Dead is absorbing; Active can only leave by withdrawal or death.
ALLOWED_TRANSITIONS = frozenset(
    {
        (NodeState.SLEEPING, NodeState.PROBING),
        (NodeState.PROBING, NodeState.SLEEPING),
        (NodeState.PROBING, NodeState.ACTIVE),
        (NodeState.ACTIVE, NodeState.SLEEPING),
        (NodeState.ACTIVE, NodeState.DEAD),
        (NodeState.PROBING, NodeState.DEAD),
        (NodeState.SLEEPING, NodeState.DEAD),
    }
)


@dataclass(frozen=True)
class ProbeRequest:
    """Broadcast by a waking node looking for a nearby guard."""

    sender_id: int
    sender_position: tuple[float, float, float]
    size: int = DEFAULT_MSG_SIZE

    def __post_init__(self) -> None:
        if self.size <= 0:
            raise ValueError(f"message size must be positive, got {self.size}")


@dataclass(frozen=True)
class ProbeReply:
    """Broadcast by an active node in response to a probe request.

    Carries the sender's coordinates and its activity age (seconds since it
    went on duty, stamped when the reply is transmitted).
    """

    sender_id: int
    sender_position: tuple[float, float, float]
    activity_age: float
    size: int = DEFAULT_MSG_SIZE

    def __post_init__(self) -> None:
        if self.activity_age < 0:
            raise ValueError(f"activity_age must be >= 0, got {self.activity_age}")
        if self.size <= 0:
            raise ValueError(f"message size must be positive, got {self.size}")


@dataclass(frozen=True)
class ProtocolParams:
    """Tunable protocol constants shared by every node in a run."""

    delta: float = 20.0           # m, distance threshold between active nodes
    t_w: float = 1.0              # s, probe-reply wait timer
    k_probes: int = 3             # probe attempts per round
    ts_initial: float = 10.0      # s, upper bound of the uniform initial sleep
    r_sense: float = 10.0         # m, sensing radius
    r_comm: float = 20.0          # m, communication radius
    msg_size: int = DEFAULT_MSG_SIZE  # octets per control frame
    beta: float = 2.0             # Weibull shape used by the rate update
    lambda_min: float = LAMBDA_MIN
    lambda_max: float = LAMBDA_MAX
    t_sleep_min: float = T_SLEEP_MIN
    t_sleep_max_scale: float = T_SLEEP_MAX_SCALE
    # Activity ages within this band count as a tie and fall back to the id
    # rule. Must exceed the message airtime, which inflates the local age
    # relative to the age stamped into the reply.
    age_tie_margin: float = 0.01  # s

    def __post_init__(self) -> None:
        if self.delta > 2.0 * self.r_sense:
            raise ValueError(
                f"delta must be <= 2 * r_sense ({2 * self.r_sense}), got {self.delta}"
            )
        if self.r_comm < self.r_sense:
            raise ValueError(
                f"r_comm ({self.r_comm}) must be >= r_sense ({self.r_sense})"
            )
        if self.t_w <= 0:
            raise ValueError(f"t_w must be positive, got {self.t_w}")
        if self.k_probes < 1:
            raise ValueError(f"k_probes must be >= 1, got {self.k_probes}")
        if self.ts_initial <= 0:
            raise ValueError(f"ts_initial must be positive, got {self.ts_initial}")
        if self.msg_size <= 0:
            raise ValueError(f"msg_size must be positive, got {self.msg_size}")


@dataclass
class SensorNode:
    """Protocol actor: position, lifecycle state, energy ledger, probe rate.

    Energy is tracked as spent amounts per category; the remaining budget is
    derived so the ledger always reconciles. last_charge_time marks how far the
    state-power integral has been advanced.
    """

    id: int
    x: float
    y: float
    z: float = 0.0
    state: NodeState = NodeState.SLEEPING
    probe_rate: float = 0.01          # 1/s
    beta: float = 2.0
    activity_start: float | None = None
    wake_deadline: float = 0.0
    probes_sent_this_round: int = 0
    timeout_token: int = 0            # stale reply-timeout events carry old tokens
    initial_energy: float = 18_720.0  # J
    spent_state: float = 0.0          # J, integral of state power over time
    spent_tx: float = 0.0             # J, per-message transmit costs
    spent_rx: float = 0.0             # J, per-message receive costs
    spent_total: float = 0.0          # J, all of the above in charge order
    last_charge_time: float = 0.0

    @property
    def position(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)

    @property
    def energy_remaining(self) -> float:
        return max(0.0, self.initial_energy - self.spent_total)

    @property
    def radio_on(self) -> bool:
        return self.state in (NodeState.PROBING, NodeState.ACTIVE)


def change_state(node: SensorNode, new: NodeState) -> None:
    """Apply a lifecycle transition, aborting on any move outside the allowed set."""
    if (node.state, new) not in ALLOWED_TRANSITIONS:
        raise ProtocolError(
            f"illegal transition {node.state.name} -> {new.name} for node {node.id}"
        )
    node.state = new


def distance_to(node: SensorNode, position: tuple[float, float, float]) -> float:
    """Planar distance from the node to a message's sender coordinates."""
    return math.hypot(node.x - position[0], node.y - position[1])


def scan_check(d: float, delta: float) -> bool:
    """Redundancy test: a replying guard at distance d covers us iff d <= delta."""
    if d < 0:
        raise ValueError(f"distance must be >= 0, got {d}")
    return d <= delta


def _go_to_sleep(node: SensorNode, params: ProtocolParams, now: float, r: float) -> float:
    """Sample a sleep duration from the node's current rate and transition.

    Returns the sleep duration; the caller schedules the wake at now + t_s.
    """
    weib = WeibullParams(alpha=1.0 / node.probe_rate, beta=params.beta)
    t_s = sample_sleep_time(
        weib,
        r,
        t_min=params.t_sleep_min,
        t_max=params.t_sleep_max_scale * weib.alpha,
    )
    change_state(node, NodeState.SLEEPING)
    node.activity_start = None
    node.probes_sent_this_round = 0
    node.timeout_token += 1  # cancels any pending reply timeout
    node.wake_deadline = now + t_s
    return t_s


def on_wake(node: SensorNode, params: ProtocolParams, now: float) -> ProbeRequest | None:
    """Wake from sleep and open a probing round.

    Returns the first probe request of the round, or None if the node's budget
    is exhausted (it dies instead of probing). The caller broadcasts the
    request and schedules a reply timeout at now + t_w.
    """
    if node.state is NodeState.DEAD:
        return None
    if node.energy_remaining <= 0.0:
        change_state(node, NodeState.DEAD)
        return None
    if node.state is not NodeState.SLEEPING:
        raise ProtocolError(
            f"wake fired for node {node.id} in state {node.state.name}"
        )
    change_state(node, NodeState.PROBING)
    node.probes_sent_this_round = 1
    return ProbeRequest(
        sender_id=node.id, sender_position=node.position, size=params.msg_size
    )


def on_probe_request(node: SensorNode, msg: ProbeRequest, now: float) -> ProbeReply | None:
    """Answer a probe request. Only active nodes speak, and only when probed.

    now is the instant the reply goes on the air, so the stamped activity age
    is exact at transmission start.
    """
    if node.state is not NodeState.ACTIVE:
        return None
    return ProbeReply(
        sender_id=node.id,
        sender_position=node.position,
        activity_age=now - node.activity_start,
        size=msg.size,
    )


def on_probe_reply(
    node: SensorNode, msg: ProbeReply, params: ProtocolParams, now: float, r: float
) -> bool:
    """Handle a reply while probing.

    A reply from within the distance threshold proves redundancy: the node
    refreshes its probe rate from the network age, samples a new sleep time
    with the fresh uniform draw r, and goes back to sleep (returns True).
    Replies from beyond the threshold are ignored and the round continues.
    """
    if node.state is not NodeState.PROBING:
        raise ProtocolError(
            f"probe reply routed to node {node.id} in state {node.state.name}"
        )
    if not scan_check(distance_to(node, msg.sender_position), params.delta):
        return False
    node.probe_rate = update_probe_rate(
        node.probe_rate,
        now,
        params.beta,
        lambda_min=params.lambda_min,
        lambda_max=params.lambda_max,
    )
    _go_to_sleep(node, params, now, r)
    return True


def on_reply_timeout(node: SensorNode, params: ProtocolParams, now: float) -> ProbeRequest | None:
    """A probe attempt expired with no valid reply: retry or go on duty.

    Returns the next probe request while attempts remain (caller rebroadcasts
    and schedules a fresh timeout); returns None once the node has used its
    k_probes budget and switched to Active.
    """
    if node.state is not NodeState.PROBING:
        raise ProtocolError(
            f"reply timeout fired for node {node.id} in state {node.state.name}"
        )
    if node.probes_sent_this_round < params.k_probes:
        node.probes_sent_this_round += 1
        return ProbeRequest(
            sender_id=node.id, sender_position=node.position, size=params.msg_size
        )
    change_state(node, NodeState.ACTIVE)
    node.activity_start = now
    node.probes_sent_this_round = 0
    return None


def on_withdrawal_check(
    node: SensorNode, msg: ProbeReply, params: ProtocolParams, now: float, r: float
) -> bool:
    """Resolve a conflict between two active nodes that can hear each other.

    A reply overheard from another guard closer than delta means both stand
    watch over the same area; the younger one withdraws and re-enters the
    sleep cycle (returns True). Ages within age_tie_margin count as a tie and
    the higher id yields, so exactly one side of a conflicting pair backs off.
    """
    if node.state is not NodeState.ACTIVE:
        raise ProtocolError(
            f"withdrawal check on node {node.id} in state {node.state.name}"
        )
    if msg.sender_id == node.id:
        return False
    d = distance_to(node, msg.sender_position)
    if d >= params.delta:
        return False
    age_diff = (now - node.activity_start) - msg.activity_age
    younger = age_diff < -params.age_tie_margin
    tied = abs(age_diff) <= params.age_tie_margin
    if not (younger or (tied and node.id > msg.sender_id)):
        return False
    node.probe_rate = update_probe_rate(
        node.probe_rate,
        now,
        params.beta,
        lambda_min=params.lambda_min,
        lambda_max=params.lambda_max,
    )
    _go_to_sleep(node, params, now, r)
    return True
