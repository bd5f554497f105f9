"""Point-queue traffic dynamics for a corridor with HOT and GP lanes.

Two vertical queues, one per lane group, driven by the residual capacity of
the HOT lanes (capacity minus HOT-bound demand).  All rates are vehicles per
minute, queues are vehicles, and times are minutes.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Capacities:
    """Bottleneck discharge rates of the two lane groups (veh/min)."""

    hot: float
    gp: float

    def __post_init__(self) -> None:
        if self.hot <= 0 or self.gp <= 0:
            raise ValueError("capacities must be positive")


@dataclass(frozen=True)
class QueueState:
    """Vehicles queued on the HOT and GP lanes."""

    lambda1: float
    lambda2: float

    def __post_init__(self) -> None:
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("queue sizes cannot be negative")


@dataclass(frozen=True)
class TimingState:
    """Queuing times per lane group and their difference (minutes).

    ``w = w2 - w1`` may be negative when the HOT queue exceeds the GP queue.
    """

    w1: float
    w2: float
    w: float


def residual_capacity(c1: float, q1: float, q3: float) -> float:
    """Spare HOT discharge rate after HOV and paying-SOV demand."""
    return c1 - q1 - q3


def step_point_queues(
    queues: QueueState,
    zeta: float,
    q1: float,
    q2: float,
    caps: Capacities,
    dt: float,
) -> QueueState:
    """Advance both point queues one step of size ``dt``.

    The HOT queue drains at the residual capacity ``zeta`` and the GP queue
    absorbs whatever demand exceeds the total discharge rate; both are
    clipped at zero.
    """
    lambda1 = max(-zeta * dt + queues.lambda1, 0.0)
    lambda2 = max((q1 + q2 - caps.gp - caps.hot + zeta) * dt + queues.lambda2, 0.0)
    return QueueState(lambda1, lambda2)


def throughputs(
    queues: QueueState,
    zeta: float,
    q1: float,
    q2: float,
    caps: Capacities,
    dt: float,
) -> tuple[float, float]:
    """Discharge rates of the HOT and GP lanes over the current step.

    Capped above by the capacities and below at zero; the lower clamp only
    matters for unphysical inputs since nonnegative demands cannot push the
    raw expressions negative.
    """
    g1 = min(caps.hot - zeta + queues.lambda1 / dt, caps.hot)
    g2 = min(q1 + q2 - caps.hot + zeta + queues.lambda2 / dt, caps.gp)
    return max(g1, 0.0), max(g2, 0.0)


def queuing_times(queues: QueueState, caps: Capacities) -> TimingState:
    """Queuing delays implied by the current queues."""
    w1 = queues.lambda1 / caps.hot
    w2 = queues.lambda2 / caps.gp
    return TimingState(w1=w1, w2=w2, w=w2 - w1)
