"""Pricing strategies for the HOT lanes.

Three controllers share one interface: ``quote`` returns the toll for the
current step from the current internal state, and ``observe`` feeds the
realized step back into the controller.  The engine always calls them in
that order, so a quote never sees same-step outcomes.

* ``VotFeedbackController`` integrates the HOT queue and residual capacity
  into an estimate of the average value of time, then inverts the logit
  model for the market-clearing price.
* ``IntegralTollController`` adjusts the toll directly in proportion to the
  gap between realized and desired HOT demand.
* ``SelfLearningController`` tracks the willingness-to-pay coefficients with
  a linear Kalman filter and inverts the fitted logit for the price.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PriceUndefinedError, ScenarioAssumptionError

ALPHA2_FLOOR = 1e-6


@dataclass(frozen=True)
class StepObservation:
    """Realized quantities of one simulation step, fed back to a controller."""

    dt: float
    lambda1: float
    zeta: float
    w: float
    u: float
    q1: float
    q2: float
    q3: float


class PricingController:
    """Behavioral contract shared by the pricing strategies."""

    name = "base"

    def quote(self, t: float, w: float, q1: float, q2: float) -> float:
        raise NotImplementedError

    def observe(self, obs: StepObservation) -> None:
        raise NotImplementedError

    @property
    def vot_estimate(self) -> float | None:
        """Current estimate of the average value of time, if the strategy has one."""
        return None


def _check_congested(q1: float, q2: float, c1: float) -> None:
    # log term requires q1 < c1 < q1 + q2
    if q1 >= c1:
        raise ScenarioAssumptionError(
            f"HOV demand {q1:g} veh/min saturates the HOT capacity {c1:g} veh/min"
        )
    if q1 + q2 <= c1:
        raise ScenarioAssumptionError(
            f"total demand {q1 + q2:g} veh/min does not exceed the HOT capacity "
            f"{c1:g} veh/min; the corridor is not congested"
        )


class VotFeedbackController(PricingController):
    """Integral estimator of the average value of time plus a logit-inverting price law.

    A positive HOT queue raises the estimate with gain ``queue_gain`` and
    positive residual capacity lowers it with gain ``residual_gain``.  The
    price is the estimated delay cost plus the demand-split log term scaled
    by the operator's guess of the logit scale.
    """

    name = "vot"

    def __init__(
        self,
        hot_capacity: float,
        queue_gain: float,
        residual_gain: float,
        scale_guess: float = 1.0,
        initial_vot: float = 0.25,
    ) -> None:
        if queue_gain <= 0 or residual_gain <= 0:
            raise ValueError("gains must be positive")
        if scale_guess <= 0:
            raise ValueError("scale_guess must be positive")
        self.hot_capacity = hot_capacity
        self.queue_gain = queue_gain
        self.residual_gain = residual_gain
        self.scale_guess = scale_guess
        self.vot = initial_vot

    def update_estimate(self, lambda1: float, zeta: float, dt: float) -> None:
        """One explicit Euler step of the estimator."""
        self.vot += dt * (self.queue_gain * lambda1 - self.residual_gain * zeta)

    def price(self, w: float, q1: float, q2: float) -> float:
        c1 = self.hot_capacity
        _check_congested(q1, q2, c1)
        return self.vot * w + math.log((q1 + q2 - c1) / (c1 - q1)) / self.scale_guess

    def quote(self, t: float, w: float, q1: float, q2: float) -> float:
        return self.price(w, q1, q2)

    def observe(self, obs: StepObservation) -> None:
        self.update_estimate(obs.lambda1, obs.zeta, obs.dt)

    @property
    def vot_estimate(self) -> float:
        return self.vot


class IntegralTollController(PricingController):
    """Toll adjusted in proportion to the accumulated HOT demand error."""

    name = "integral"

    def __init__(self, gain: float, initial_price: float, target_demand: float) -> None:
        if gain <= 0:
            raise ValueError("gain must be positive")
        self.gain = gain
        self.u = initial_price
        self.target_demand = target_demand

    def update(self, q_hot: float) -> None:
        self.u += self.gain * (q_hot - self.target_demand)

    def quote(self, t: float, w: float, q1: float, q2: float) -> float:
        return self.u

    def observe(self, obs: StepObservation) -> None:
        # HOT arrival demand is HOVs plus paying SOVs
        self.update(obs.q1 + obs.q3)


class SelfLearningController(PricingController):
    """Kalman-filtered willingness-to-pay model inverted for the price.

    State vector ``theta = [alpha1, alpha2, gamma]``: marginal delay utility
    (1/min), marginal price utility (1/$), and a bias term.  The realized
    paying share yields the scalar measurement
    ``log((q2 - q3)/q3) = -alpha1*w + alpha2*u + gamma``.
    The implied value-of-time estimate is ``alpha1/alpha2``.
    """

    name = "selflearning"

    def __init__(
        self,
        hot_capacity: float,
        initial_theta,
        initial_cov,
        measurement_var: float = 0.09,
        process_noise=1e-6,
    ) -> None:
        if measurement_var <= 0:
            raise ValueError("measurement_var must be positive")
        self.hot_capacity = hot_capacity
        self.theta = np.asarray(initial_theta, dtype=float).copy()
        if self.theta.shape != (3,):
            raise ValueError("initial_theta must have three entries")
        self.cov = self._as_matrix(initial_cov, "initial_cov")
        self.measurement_var = float(measurement_var)
        self.process_noise = self._as_matrix(process_noise, "process_noise")

    @staticmethod
    def _as_matrix(value, name: str) -> np.ndarray:
        mat = np.asarray(value, dtype=float)
        if mat.ndim == 0:
            mat = float(mat) * np.eye(3)
        if mat.shape != (3, 3):
            raise ValueError(f"{name} must be a scalar or a 3x3 matrix")
        return mat.copy()

    def ingest(self, q2: float, q3: float, w: float, u: float) -> None:
        """One predict/update cycle against the realized paying share."""
        if q2 <= 0.0:
            return
        margin = 1e-6 * q2
        q3 = min(max(q3, margin), q2 - margin)
        y = math.log((q2 - q3) / q3)
        h = np.array([-w, u, 1.0])

        cov = self.cov + self.process_noise
        s = float(h @ cov @ h) + self.measurement_var
        gain = (cov @ h) / s
        self.theta = self.theta + gain * (y - float(h @ self.theta))
        # Joseph form keeps the covariance symmetric PSD under roundoff
        ikh = np.eye(3) - np.outer(gain, h)
        cov = ikh @ cov @ ikh.T + self.measurement_var * np.outer(gain, gain)
        self.cov = 0.5 * (cov + cov.T)

    def price(self, w: float, q1: float, q2: float) -> float:
        alpha1, alpha2, gamma = self.theta
        if abs(alpha2) < ALPHA2_FLOOR:
            raise PriceUndefinedError(
                f"price-utility estimate alpha2={alpha2:g} is too close to zero"
            )
        target = self.hot_capacity - q1  # paying demand that fills the HOT lanes
        if not 0.0 < target < q2:
            raise ScenarioAssumptionError(
                f"optimal paying demand {target:g} veh/min must lie strictly "
                f"between 0 and the SOV demand {q2:g} veh/min"
            )
        return (math.log((q2 - target) / target) + alpha1 * w - gamma) / alpha2

    def quote(self, t: float, w: float, q1: float, q2: float) -> float:
        return self.price(w, q1, q2)

    def observe(self, obs: StepObservation) -> None:
        self.ingest(obs.q2, obs.q3, obs.w, obs.u)

    @property
    def vot_estimate(self) -> float:
        return float(self.theta[0] / self.theta[1])
