"""Closed-form results and convergence analysis for constant-demand scenarios.

Includes the market-clearing price under known behavior, the reduced
near-equilibrium dynamics of the HOT queue and residual capacity, the two
asymptotic decay laws (Gaussian when the queue is empty, exponential when a
queue persists), a trajectory classifier for those two patterns, and a
bisection search for the gain value where the patterns switch.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .engine import run_closed_loop
from .errors import BoundaryNotBracketedError, ConfigError, ScenarioAssumptionError

if TYPE_CHECKING:  # pragma: no cover
    from .config import ScenarioConfig
    from .engine import Trajectory

GAUSSIAN = "gaussian"
EXPONENTIAL = "exponential"
UNDETERMINED = "undetermined"

CONVERGENCE_FLOOR = 1e-9
RATIO_RTOL = 0.10


@dataclass(frozen=True)
class ConstantDemandScenario:
    """Constant-demand corridor satisfying the congested-regime assumptions."""

    q1: float
    q2: float
    c1: float
    c2: float
    vot: float
    scale: float

    def __post_init__(self) -> None:
        if self.q1 >= self.c1:
            raise ScenarioAssumptionError(
                f"HOV demand {self.q1:g} must stay below the HOT capacity {self.c1:g}"
            )
        if self.q1 + self.q2 <= self.c1 + self.c2:
            raise ScenarioAssumptionError(
                f"total demand {self.q1 + self.q2:g} must exceed the total "
                f"capacity {self.c1 + self.c2:g}"
            )


def analytic_optimal_price(t: float, scen: ConstantDemandScenario) -> float:
    """Price that keeps the HOT lanes exactly full at time ``t``.

    Affine in ``t``: the slope is the value of the GP queue's growth rate in
    delay terms, the intercept the demand-split log term.
    """
    slope = (scen.q1 + scen.q2 - scen.c1 - scen.c2) / scen.c2 * scen.vot
    intercept = math.log((scen.q1 + scen.q2 - scen.c1) / (scen.c1 - scen.q1)) / scen.scale
    return slope * t + intercept


def loop_gain_rate(scen: ConstantDemandScenario) -> float:
    """Growth rate of the estimator-to-residual loop gain, per (min·veh).

    The residual capacity's sensitivity to the estimation error grows
    linearly in time because the GP queue (and with it the queuing-time
    difference) grows linearly; this factor is the rate of that growth.
    """
    return (
        scen.scale
        * (scen.q1 + scen.q2 - scen.c1 - scen.c2)
        * (scen.q1 + scen.q2 - scen.c1)
        * (scen.c1 - scen.q1)
        / (scen.c2 * scen.q2)
    )


@dataclass(frozen=True)
class ApproxState:
    """State of the reduced near-equilibrium model."""

    lambda1: float
    zeta: float
    t: float


def step_approximate(
    state: ApproxState,
    queue_gain: float,
    residual_gain: float,
    gain_rate: float,
    dt: float,
) -> ApproxState:
    """One explicit Euler step of the reduced dynamics."""
    lambda1 = max(state.lambda1 - state.zeta * dt, 0.0)
    zeta = state.zeta + dt * gain_rate * state.t * (
        queue_gain * state.lambda1 - residual_gain * state.zeta
    )
    return ApproxState(lambda1=lambda1, zeta=zeta, t=state.t + dt)


def run_approximate(
    initial_queue: float,
    initial_zeta: float,
    queue_gain: float,
    residual_gain: float,
    gain_rate: float,
    horizon: float,
    dt: float,
    start_time: float = 0.0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Integrate the reduced model over ``horizon`` minutes.

    Returns (t, lambda1, zeta) arrays.  ``start_time`` matters because the
    reduced dynamics are time-variant.
    """
    n = round(horizon / dt)
    state = ApproxState(lambda1=initial_queue, zeta=initial_zeta, t=start_time)
    lam = np.empty(n + 1)
    zeta = np.empty(n + 1)
    lam[0], zeta[0] = state.lambda1, state.zeta
    for k in range(1, n + 1):
        state = step_approximate(state, queue_gain, residual_gain, gain_rate, dt)
        lam[k], zeta[k] = state.lambda1, state.zeta
    return start_time + np.arange(n + 1) * dt, lam, zeta


def gaussian_tail(
    zeta0: float, t: float, gain_rate: float, residual_gain: float
) -> float:
    """Residual-capacity decay law once the HOT queue is empty."""
    return zeta0 * math.exp(-0.5 * gain_rate * residual_gain * t * t)


def exponential_tail(
    lambda10: float, t: float, queue_gain: float, residual_gain: float
) -> tuple[float, float]:
    """Joint decay law when a HOT queue persists; returns (lambda1, zeta)."""
    lam = lambda10 * math.exp(-(queue_gain / residual_gain) * t)
    return lam, (queue_gain / residual_gain) * lam


@dataclass(frozen=True)
class ConvergenceReport:
    """Classification of a trajectory's approach to the optimal state."""

    pattern: str
    ratio_estimate: float
    fit_r2_gaussian: float
    fit_r2_exponential: float


def _fit_r2(x: np.ndarray, y: np.ndarray) -> float:
    """R^2 of the least-squares line of y against x; 0 when degenerate."""
    if len(x) < 3 or np.ptp(x) == 0.0:
        return 0.0
    coeffs = np.polyfit(x, y, 1)
    resid = y - np.polyval(coeffs, x)
    total = float(np.sum((y - y.mean()) ** 2))
    if total == 0.0:
        return 1.0
    r2 = 1.0 - float(np.sum(resid**2)) / total
    return min(max(r2, 0.0), 1.0)


def classify_convergence(
    t: np.ndarray,
    lambda1: np.ndarray,
    zeta: np.ndarray,
    queue_gain: float,
    residual_gain: float,
    tail_window: float | None = None,
    floor: float = CONVERGENCE_FLOOR,
) -> ConvergenceReport:
    """Classify the tail of a trajectory as Gaussian, exponential, or neither.

    The decay patterns are asymptotic, so classification looks at a trailing
    window of the *active* part of the trajectory: samples after both the
    queue and the residual capacity have fallen below ``floor`` carry no
    information and are discarded first.  ``tail_window`` is the window
    length in minutes (default: a quarter of the horizon).  If the queue
    empties for good inside the window, the window is narrowed to the
    empty-queue segment, where the Gaussian law applies.

    Gaussian requires an identically empty queue with positive residual
    capacity over the window; exponential requires a persistent queue whose
    ratio to the residual capacity is locked near ``residual_gain /
    queue_gain``.  Anything else (including a fully converged trajectory) is
    undetermined.
    """
    t = np.asarray(t, dtype=float)
    lambda1 = np.asarray(lambda1, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    if tail_window is None:
        tail_window = (t[-1] - t[0]) / 4.0

    active = np.maximum(lambda1, np.abs(zeta)) > floor
    if not active.any():
        return ConvergenceReport(UNDETERMINED, math.nan, 0.0, 0.0)
    t_end = t[active][-1]
    window = (t >= t_end - tail_window) & (t <= t_end)

    # if the queue empties for good mid-window, the Gaussian regime starts there
    lam_win = lambda1[window]
    if lam_win[-1] <= floor and (lam_win > floor).any():
        t_win = t[window]
        empty_from = t_win[lam_win > floor][-1]
        window &= t > empty_from

    lam_win = lambda1[window]
    zeta_win = zeta[window]
    t_win = t[window]

    r2_gauss = 0.0
    r2_exp = 0.0
    if (zeta_win > 0.0).all():
        r2_gauss = _fit_r2(t_win**2, np.log(zeta_win))
    if (lam_win > floor).all():
        r2_exp = _fit_r2(t_win, np.log(lam_win))

    if (lam_win <= floor).all() and (zeta_win > 0.0).all():
        return ConvergenceReport(GAUSSIAN, 0.0, r2_gauss, r2_exp)

    if (lam_win > floor).all() and (zeta_win > floor).all():
        ratio = float(np.mean(lam_win / zeta_win))
        target = residual_gain / queue_gain
        if abs(ratio - target) <= RATIO_RTOL * target:
            return ConvergenceReport(EXPONENTIAL, ratio, r2_gauss, r2_exp)
        return ConvergenceReport(UNDETERMINED, ratio, r2_gauss, r2_exp)

    return ConvergenceReport(UNDETERMINED, math.nan, r2_gauss, r2_exp)


def classify_trajectory(
    traj: "Trajectory",
    queue_gain: float,
    residual_gain: float,
    tail_window: float | None = None,
) -> ConvergenceReport:
    """Classify a recorded closed-loop trajectory."""
    return classify_convergence(
        traj.column("t"), traj.column("lambda1"), traj.column("zeta"),
        queue_gain, residual_gain, tail_window,
    )


def scenario_from_config(config: "ScenarioConfig") -> ConstantDemandScenario:
    """Constant-demand view of a scenario (Poisson profiles use their means)."""
    if config.demand.kind == "timeseries":
        raise ConfigError(
            "constant-demand analysis needs a demand profile with mean rates"
        )
    return ConstantDemandScenario(
        q1=config.demand.mean_hov,
        q2=config.demand.mean_sov,
        c1=config.capacities.hot,
        c2=config.capacities.gp,
        vot=config.behavior.vot,
        scale=config.behavior.scale,
    )


def _classify_at(config: "ScenarioConfig", residual_gain: float, model: str) -> str:
    spec = dataclasses.replace(config.vot_spec, residual_gain=residual_gain)
    cfg = dataclasses.replace(config, controller_kind="vot", vot_spec=spec)
    if model == "closed":
        traj = run_closed_loop(cfg)
        report = classify_trajectory(traj, spec.queue_gain, residual_gain)
    elif model == "approx":
        scen = scenario_from_config(cfg)
        t, lam, zeta = run_approximate(
            cfg.initial_hot_queue, cfg.approx_initial_zeta(),
            spec.queue_gain, residual_gain,
            loop_gain_rate(scen), cfg.horizon, cfg.dt,
        )
        report = classify_convergence(t, lam, zeta, spec.queue_gain, residual_gain)
    else:
        raise ConfigError(f"unknown model {model!r}; use 'closed' or 'approx'")
    return report.pattern


def find_phase_boundary(
    config: "ScenarioConfig",
    k2_low: float,
    k2_high: float,
    resolution: float = 0.005,
    model: str = "closed",
) -> float:
    """Bisect the residual gain for the switch between convergence patterns.

    Re-runs the simulation (closed loop or reduced model) at every midpoint
    and keeps the half-bracket whose endpoints classify differently, until
    the bracket is narrower than ``resolution``.  Returns the midpoint of
    the final bracket.
    """
    if resolution <= 0:
        raise ConfigError("resolution must be positive")
    low_pattern = _classify_at(config, k2_low, model)
    high_pattern = _classify_at(config, k2_high, model)
    if low_pattern == high_pattern:
        raise BoundaryNotBracketedError(
            f"both ends of [{k2_low:g}, {k2_high:g}] classify as {low_pattern}"
        )
    low, high = k2_low, k2_high
    while high - low > resolution:
        mid = 0.5 * (low + high)
        if _classify_at(config, mid, model) == low_pattern:
            low = mid
        else:
            high = mid
    return 0.5 * (low + high)
