"""Binary logit lane choice for single-occupancy vehicles.

An SOV pays to use the HOT lanes with probability given by a logit model of
the toll against the value of the queuing time saved.  A multiplicative
disturbance on the value of time captures driver heterogeneity and detection
noise; it perturbs only the drivers' decisions, never the operator's
measurements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

NOISE_KINDS = ("none", "uniform")


@dataclass(frozen=True)
class BehaviorParams:
    """True population parameters of the lane-choice model."""

    vot: float    # average value of time, $/min
    scale: float  # logit scale, 1/$

    def __post_init__(self) -> None:
        if self.vot <= 0:
            raise ValueError("vot must be positive")
        if self.scale <= 0:
            raise ValueError("scale must be positive")


@dataclass(frozen=True)
class NoiseSpec:
    """Distribution of the per-step multiplicative choice disturbance."""

    kind: str = "none"
    half_width: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not 0.0 <= self.half_width < 1.0:
            raise ValueError("half_width must lie in [0, 1)")


def paying_share(u: float, w: float, eta: float, params: BehaviorParams) -> float:
    """Fraction of SOVs that pay the toll ``u`` to skip ``w`` minutes of queue.

    Evaluated with the sign-split logistic so large exponents cannot
    overflow.
    """
    x = params.scale * (u - (1.0 + eta) * params.vot * w)
    if x >= 0.0:
        e = math.exp(-x)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(x))


def paying_demand(
    q2: float, u: float, w: float, eta: float, params: BehaviorParams
) -> float:
    """Arrival rate of paying SOVs out of total SOV demand ``q2``."""
    return q2 * paying_share(u, w, eta, params)


def induced_residual_capacity(
    c1: float,
    q1: float,
    q2: float,
    u: float,
    w: float,
    eta: float,
    params: BehaviorParams,
) -> float:
    """Residual HOT capacity left once drivers respond to the quoted price."""
    return c1 - q1 - paying_demand(q2, u, w, eta, params)


def sample_eta(noise: NoiseSpec, rng: np.random.Generator) -> float:
    """Draw one choice disturbance from the run's random stream."""
    if noise.kind == "none":
        return 0.0
    return float(rng.uniform(-noise.half_width, noise.half_width))
