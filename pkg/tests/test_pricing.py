"""Controllers: estimator arithmetic, price laws, and the Kalman filter."""

import math

import numpy as np
import pytest

from hotsim.errors import PriceUndefinedError, ScenarioAssumptionError
from hotsim.pricing import (
    IntegralTollController,
    SelfLearningController,
    StepObservation,
    VotFeedbackController,
)

DT = 1.0 / 60.0


def vot_controller(**kwargs):
    defaults = dict(hot_capacity=30.0, queue_gain=0.1, residual_gain=0.1,
                    scale_guess=1.0, initial_vot=0.5)
    defaults.update(kwargs)
    return VotFeedbackController(**defaults)


class TestVotEstimator:
    def test_optimal_state_freezes_estimate(self):
        ctrl = vot_controller()
        ctrl.update_estimate(0.0, 0.0, DT)
        assert ctrl.vot == 0.5

    def test_queue_raises_estimate(self):
        ctrl = vot_controller()
        ctrl.update_estimate(1.0, 0.0, DT)
        assert ctrl.vot == pytest.approx(0.5 + 0.1 / 60.0, rel=1e-12)

    def test_spare_capacity_lowers_estimate(self):
        ctrl = vot_controller()
        ctrl.update_estimate(0.0, 0.11, DT)
        assert ctrl.vot == pytest.approx(0.5 - 0.011 / 60.0, rel=1e-12)

    def test_update_is_linear(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            lam, zeta = rng.uniform(-2.0, 2.0, size=2)
            a, b = vot_controller(), vot_controller()
            a.update_estimate(lam, zeta, DT)
            b.update_estimate(2.0 * lam, 2.0 * zeta, DT)
            assert b.vot - 0.5 == pytest.approx(2.0 * (a.vot - 0.5), rel=1e-9, abs=1e-15)


class TestVotPrice:
    def test_reference_price_at_twenty_minutes(self):
        u = vot_controller().price(20.0 / 3.0, 10.0, 60.0)
        assert u == pytest.approx(10.0 / 3.0 + math.log(2.0), rel=1e-12)
        assert u == pytest.approx(4.0265, abs=5e-4)

    def test_zero_delay_gives_log_term(self):
        assert vot_controller().price(0.0, 10.0, 60.0) == pytest.approx(
            math.log(2.0), rel=1e-12
        )

    def test_scale_guess_shrinks_log_term(self):
        u = vot_controller(scale_guess=1.2).price(20.0 / 3.0, 10.0, 60.0)
        assert u == pytest.approx(10.0 / 3.0 + math.log(2.0) / 1.2, rel=1e-12)
        assert u == pytest.approx(3.9110, abs=5e-4)

    def test_uncongested_demand_rejected(self):
        with pytest.raises(ScenarioAssumptionError):
            vot_controller().price(0.0, 10.0, 10.0)

    def test_saturating_hov_demand_rejected(self):
        with pytest.raises(ScenarioAssumptionError):
            vot_controller().price(0.0, 30.0, 60.0)


class TestIntegralToll:
    def test_on_target_demand_freezes_toll(self):
        ctrl = IntegralTollController(0.01, math.log(2.0), 30.0)
        ctrl.update(30.0)
        assert ctrl.u == math.log(2.0)

    def test_excess_demand_raises_toll(self):
        ctrl = IntegralTollController(0.01, math.log(2.0), 30.0)
        ctrl.update(40.0)
        assert ctrl.u == pytest.approx(math.log(2.0) + 0.1, rel=1e-12)

    def test_shortfall_lowers_toll(self):
        ctrl = IntegralTollController(0.01, 1.0, 30.0)
        ctrl.update(25.0)
        assert ctrl.u < 1.0


def learner(**kwargs):
    defaults = dict(hot_capacity=30.0, initial_theta=(0.25, 1.0, 0.1),
                    initial_cov=0.1, measurement_var=0.09, process_noise=1e-6)
    defaults.update(kwargs)
    return SelfLearningController(**defaults)


class TestSelfLearningFilter:
    def test_zero_innovation_keeps_estimate(self):
        ctrl = learner(process_noise=0.0)
        theta = ctrl.theta.copy()
        trace_before = np.trace(ctrl.cov)
        w, u = 1.0, 1.0
        # observation manufactured to match the current estimate exactly
        y = -theta[0] * w + theta[1] * u + theta[2]
        q3 = 60.0 / (1.0 + math.exp(y))
        ctrl.ingest(60.0, q3, w, u)
        assert ctrl.theta == pytest.approx(theta, rel=1e-9)
        assert np.trace(ctrl.cov) <= trace_before + 1e-12

    def test_one_step_update_matches_hand_computation(self):
        # identity covariance, no process noise, h = [-1, 1, 1]:
        # innovation = 0.5 - 0.85 = -0.35, gain = h / 3.09
        ctrl = learner(initial_cov=1.0, process_noise=0.0)
        y_true = -0.5 * 1.0 + 1.0 * 1.0 + 0.0
        q3 = 60.0 / (1.0 + math.exp(y_true))
        ctrl.ingest(60.0, q3, 1.0, 1.0)
        shift = 0.35 / 3.09
        expected = np.array([0.25 + shift, 1.0 - shift, 0.1 - shift])
        assert ctrl.theta == pytest.approx(expected, rel=1e-9)
        # moves toward the true delay and bias coefficients
        assert abs(ctrl.theta[0] - 0.5) < abs(0.25 - 0.5)
        assert abs(ctrl.theta[2]) < 0.1

    def test_huge_measurement_noise_is_uninformative(self):
        ctrl = learner(measurement_var=1e12)
        theta = ctrl.theta.copy()
        ctrl.ingest(60.0, 25.0, 1.0, 1.0)
        assert ctrl.theta == pytest.approx(theta, abs=1e-9)

    def test_covariance_stays_symmetric_psd(self):
        ctrl = learner()
        rng = np.random.default_rng(31)
        for _ in range(1000):
            q2 = rng.uniform(30.0, 100.0)
            ctrl.ingest(
                q2, rng.uniform(0.0, 1.0) * q2,
                rng.uniform(-2.0, 10.0), rng.uniform(-1.0, 8.0),
            )
            assert ctrl.cov == pytest.approx(ctrl.cov.T, abs=1e-12)
            assert np.linalg.eigvalsh(ctrl.cov).min() >= -1e-9

    def test_boundary_paying_demand_is_clamped(self):
        ctrl = learner()
        ctrl.ingest(60.0, 0.0, 1.0, 1.0)   # fully unpaying step
        ctrl.ingest(60.0, 60.0, 1.0, 1.0)  # fully paying step
        assert np.isfinite(ctrl.theta).all()


class TestSelfLearningPrice:
    def test_reference_price_at_twenty_minutes(self):
        ctrl = learner(initial_theta=(0.5, 1.0, 0.0))
        u = ctrl.price(20.0 / 3.0, 10.0, 60.0)
        assert u == pytest.approx(math.log(2.0) + 10.0 / 3.0, rel=1e-12)
        assert u == pytest.approx(4.0265, abs=5e-4)

    def test_zero_delay_gives_log_term(self):
        ctrl = learner(initial_theta=(0.5, 1.0, 0.0))
        assert ctrl.price(0.0, 10.0, 60.0) == pytest.approx(math.log(2.0), rel=1e-12)

    def test_bias_shifts_price_linearly(self):
        delta = 0.3
        base = learner(initial_theta=(0.5, 1.0, 0.0)).price(1.0, 10.0, 60.0)
        shifted = learner(initial_theta=(0.5, 1.0, delta)).price(1.0, 10.0, 60.0)
        assert shifted == pytest.approx(base - delta, rel=1e-12)

    def test_degenerate_price_sensitivity_fails(self):
        ctrl = learner(initial_theta=(0.5, 0.0, 0.0))
        with pytest.raises(PriceUndefinedError):
            ctrl.price(1.0, 10.0, 60.0)

    def test_target_outside_demand_rejected(self):
        ctrl = learner()
        with pytest.raises(ScenarioAssumptionError):
            ctrl.price(1.0, 10.0, 15.0)  # needs 20 paying out of 15 SOVs


class TestControllerInterface:
    def test_quote_then_observe_round_trip(self):
        obs = StepObservation(dt=DT, lambda1=0.0, zeta=0.0, w=0.0,
                              u=math.log(2.0), q1=10.0, q2=60.0, q3=20.0)
        for ctrl in (vot_controller(), IntegralTollController(0.01, 0.5, 30.0),
                     learner()):
            u = ctrl.quote(0.0, 0.0, 10.0, 60.0)
            assert math.isfinite(u)
            ctrl.observe(obs)

    def test_vot_estimates(self):
        assert vot_controller().vot_estimate == 0.5
        assert IntegralTollController(0.01, 0.5, 30.0).vot_estimate is None
        assert learner().vot_estimate == pytest.approx(0.25)
