"""PEAS baseline policy: exponential wake timers at a fixed rate, permanent
activation, no conflict resolution.

Wake, request handling, and timeout mechanics are shared with the sentinel
policy (protocol.on_wake / on_probe_request / on_reply_timeout); this module
supplies the two handlers that differ. A node under PEAS that activates never
sleeps again, and its probe rate never adapts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .protocol import NodeState, ProbeReply, ProtocolError, SensorNode, distance_to


@dataclass(frozen=True)
class PeasParams:
    """Policy constants for the baseline scheduler."""

    probing_range: float = 20.0   # m, replies from farther away are ignored
    lambda_peas: float = 0.01     # 1/s, fixed wake rate

    def __post_init__(self) -> None:
        if self.probing_range <= 0:
            raise ValueError(f"probing_range must be positive, got {self.probing_range}")
        if self.lambda_peas <= 0:
            raise ValueError(f"lambda_peas must be positive, got {self.lambda_peas}")


def peas_sample_sleep(lambda_peas: float, r: float) -> float:
    """Exponential sleep draw: ln(1/r) / lambda_peas."""
    if not (0.0 < r < 1.0):
        raise ValueError(f"r must lie in the open interval (0, 1), got {r}")
    if lambda_peas <= 0:
        raise ValueError(f"lambda_peas must be positive, got {lambda_peas}")
    return math.log(1.0 / r) / lambda_peas


def matched_rate(lambda_init: float, beta: float) -> float:
    """Wake rate whose exponential mean sleep equals the sentinel policy's
    mean initial Weibull sleep (scale 1/lambda_init, shape beta)."""
    return lambda_init / math.gamma(1.0 + 1.0 / beta)


def on_probe_reply(
    node: SensorNode, msg: ProbeReply, params: PeasParams, now: float, r: float
) -> bool:
    """Any reply from within probing range sends the node back to sleep for an
    exponential duration at the unchanged rate (returns True)."""
    if node.state is not NodeState.PROBING:
        raise ProtocolError(
            f"probe reply routed to node {node.id} in state {node.state.name}"
        )
    if distance_to(node, msg.sender_position) > params.probing_range:
        return False
    t_s = peas_sample_sleep(params.lambda_peas, r)
    node.state = NodeState.SLEEPING
    node.activity_start = None
    node.probes_sent_this_round = 0
    node.timeout_token += 1
    node.wake_deadline = now + t_s
    return True


def on_withdrawal_check(
    node: SensorNode, msg: ProbeReply, params: PeasParams, now: float, r: float
) -> bool:
    """Working nodes never stand down: overheard replies are ignored."""
    return False
