"""Closed-loop simulation engine.

Wires the point-queue dynamics, the logit lane choice, and a pricing
controller into one discrete feedback loop and records every step.  The
per-step sequence is fixed:

1. queuing times from the current queues;
2. demand rates from the profile;
3. price quoted by the controller from its current state;
4. choice disturbance drawn;
5. paying demand and residual capacity from the lane-choice model;
6. throughputs recorded;
7. queues advanced;
8. controller updated with the same-step observation.

The final state at ``t = horizon`` is computed and recorded without a
further queue or controller update, so a run of ``horizon / dt`` steps
yields ``horizon / dt + 1`` states.  Each run owns a single seeded random
stream; the per-step draw order (HOV demand, SOV demand, disturbance) never
varies, so runs with the same seed see identical demand realizations
regardless of the controller.
"""

from __future__ import annotations

import bisect
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterator

import numpy as np

from . import choice, traffic
from .errors import ConfigError, HotSimError
from .pricing import PricingController, StepObservation

if TYPE_CHECKING:  # pragma: no cover
    from .config import ScenarioConfig

DEMAND_KINDS = ("constant", "poisson", "timeseries")
ZERO_QUEUE_TOL = 1e-6


@dataclass(frozen=True)
class DemandProfile:
    """Arrival-rate generator for HOV and SOV traffic.

    ``constant`` returns the means; ``poisson`` redraws both rates each step
    from Poisson distributions with those means (veh/min); ``timeseries``
    holds ``(t, hov, sov)`` breakpoints interpreted as a step function.
    """

    kind: str = "constant"
    mean_hov: float = 10.0
    mean_sov: float = 60.0
    samples: tuple[tuple[float, float, float], ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in DEMAND_KINDS:
            raise ValueError(f"unknown demand kind {self.kind!r}")
        if self.kind in ("constant", "poisson"):
            if self.mean_hov < 0 or self.mean_sov < 0:
                raise ValueError("demand rates cannot be negative")
        else:
            if not self.samples:
                raise ValueError("timeseries demand needs at least one sample")
            times = [s[0] for s in self.samples]
            if any(b <= a for a, b in zip(times, times[1:])):
                raise ValueError("timeseries sample times must be strictly increasing")
            if any(s[1] < 0 or s[2] < 0 for s in self.samples):
                raise ValueError("demand rates cannot be negative")


def demand_at(
    profile: DemandProfile, t: float, dt: float, rng: np.random.Generator
) -> tuple[float, float]:
    """Demand rates (HOV, SOV) in veh/min for the step starting at ``t``."""
    if profile.kind == "constant":
        return profile.mean_hov, profile.mean_sov
    if profile.kind == "poisson":
        return float(rng.poisson(profile.mean_hov)), float(rng.poisson(profile.mean_sov))
    times = [s[0] for s in profile.samples]
    idx = bisect.bisect_right(times, t) - 1
    if idx < 0:
        raise ConfigError(
            f"timeseries demand starts at t={times[0]:g} min, after the "
            f"requested time t={t:g} min"
        )
    _, hov, sov = profile.samples[idx]
    return hov, sov


@dataclass(frozen=True)
class SystemState:
    """One recorded simulation step."""

    t: float
    lambda1: float
    lambda2: float
    zeta: float
    w: float
    pi: float  # controller's VOT estimate; nan when the strategy has none
    u: float
    g1: float
    g2: float
    q1: float
    q2: float
    q3: float
    eta: float


STATE_FIELDS = (
    "t", "lambda1", "lambda2", "zeta", "w", "pi", "u",
    "g1", "g2", "q1", "q2", "q3", "eta",
)


@dataclass
class Trajectory:
    """Ordered step records of one run plus a fingerprint of its inputs."""

    states: list[SystemState]
    fingerprint: str
    _columns: dict = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.states)

    def __iter__(self) -> Iterator[SystemState]:
        return iter(self.states)

    def column(self, name: str) -> np.ndarray:
        """Cached column array (one entry per recorded step)."""
        if name not in STATE_FIELDS:
            raise KeyError(name)
        if name not in self._columns:
            self._columns[name] = np.array([getattr(s, name) for s in self.states])
        return self._columns[name]


@dataclass(frozen=True)
class SummaryMetrics:
    """Scalar descriptors derived from one trajectory."""

    avg_g1: float
    final_u: float
    final_pi: float | None
    max_lambda1: float
    final_lambda1: float
    time_to_zero_queue: float | None
    pi_rmse_tail: float | None

    def as_dict(self) -> dict:
        return {
            "avg_g1": self.avg_g1,
            "final_u": self.final_u,
            "final_pi": self.final_pi,
            "max_lambda1": self.max_lambda1,
            "final_lambda1": self.final_lambda1,
            "time_to_zero_queue": self.time_to_zero_queue,
            "pi_rmse_tail": self.pi_rmse_tail,
        }


def config_fingerprint(config: "ScenarioConfig", seed: int) -> str:
    payload = json.dumps([config.to_mapping(), seed], sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def run_closed_loop(config: "ScenarioConfig", seed: int | None = None) -> Trajectory:
    """Simulate one closed-loop run and return its trajectory.

    ``seed`` overrides the configured seed (used for replications).
    Controller errors are re-raised with the offending step index attached.
    """
    caps = config.capacities
    dt = config.dt
    n_steps = config.n_steps
    rng = np.random.default_rng(config.seed if seed is None else seed)
    controller = config.controller.build(caps)
    queues = traffic.QueueState(config.initial_hot_queue, config.initial_gp_queue)

    states: list[SystemState] = []
    for k in range(n_steps + 1):
        t = k * dt
        timing = traffic.queuing_times(queues, caps)
        q1, q2 = demand_at(config.demand, t, dt, rng)
        eta = choice.sample_eta(config.noise, rng)
        if q2 > 0.0:
            try:
                u = controller.quote(t, timing.w, q1, q2)
            except HotSimError as exc:
                raise type(exc)(f"step {k} (t={t:.6g} min): {exc}") from exc
            q3 = choice.paying_demand(q2, u, timing.w, eta, config.behavior)
        else:
            # no SOVs to price this step
            u, q3 = 0.0, 0.0
        zeta = traffic.residual_capacity(caps.hot, q1, q3)
        g1, g2 = traffic.throughputs(queues, zeta, q1, q2, caps, dt)
        pi = controller.vot_estimate
        states.append(
            SystemState(
                t=t, lambda1=queues.lambda1, lambda2=queues.lambda2,
                zeta=zeta, w=timing.w, pi=math.nan if pi is None else pi,
                u=u, g1=g1, g2=g2, q1=q1, q2=q2, q3=q3, eta=eta,
            )
        )
        if k == n_steps:
            break
        obs = StepObservation(
            dt=dt, lambda1=queues.lambda1, zeta=zeta, w=timing.w,
            u=u, q1=q1, q2=q2, q3=q3,
        )
        queues = traffic.step_point_queues(queues, zeta, q1, q2, caps, dt)
        if q2 > 0.0:
            try:
                controller.observe(obs)
            except HotSimError as exc:
                raise type(exc)(f"step {k} (t={t:.6g} min): {exc}") from exc

    fingerprint = config_fingerprint(config, config.seed if seed is None else seed)
    return Trajectory(states=states, fingerprint=fingerprint)


def summarize(traj: Trajectory, pi_star: float) -> SummaryMetrics:
    """Scalar metrics of one trajectory against the true average VOT."""
    if not traj.states:
        raise ValueError("cannot summarize an empty trajectory")
    lambda1 = traj.column("lambda1")
    g1 = traj.column("g1")
    pi = traj.column("pi")
    t = traj.column("t")

    # first time after which the HOT queue stays (numerically) empty
    time_to_zero: float | None = None
    if lambda1[-1] < ZERO_QUEUE_TOL:
        idx = len(lambda1) - 1
        while idx > 0 and lambda1[idx - 1] < ZERO_QUEUE_TOL:
            idx -= 1
        time_to_zero = float(t[idx])

    tail = slice(3 * len(traj) // 4, None)
    has_pi = not math.isnan(pi[-1])
    rmse = float(np.sqrt(np.mean((pi[tail] - pi_star) ** 2))) if has_pi else None

    return SummaryMetrics(
        avg_g1=float(g1.mean()),
        final_u=float(traj.states[-1].u),
        final_pi=float(pi[-1]) if has_pi else None,
        max_lambda1=float(lambda1.max()),
        final_lambda1=float(lambda1[-1]),
        time_to_zero_queue=time_to_zero,
        pi_rmse_tail=rmse,
    )
