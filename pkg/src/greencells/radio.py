"""Channel and power arithmetic shared by both engines.

The key object is the power domain: mapping every transmitter through
``p = P_rx * kappa * r**alpha / chi`` turns the planar point processes into
one-dimensional ones whose cumulative intensity is ``lam * UPSILON * p**(2/alpha)``
(per node density ``lam``).  UPSILON absorbs the received-power constraint,
the 1 m free-space loss and the shadowing moment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .config import NetworkConfig

# dB-to-natural-log bridge: chi = exp(X / ZETA) for X in dB
ZETA = 10.0 / math.log(10.0)


@dataclass(frozen=True)
class LinkGain:
    """One BS-to-user link: distance in metres and linear shadowing gain."""

    distance_m: float
    shadowing_linear: float = 1.0

    def __post_init__(self) -> None:
        if self.distance_m < 0.0:
            raise ValueError("distance_m must be nonnegative")
        if self.shadowing_linear <= 0.0:
            raise ValueError("shadowing_linear must be positive")


def required_power(link: LinkGain, config: NetworkConfig) -> float:
    """Transmit power (mW) needed to hit the received-power constraint.

    Strictly increasing in distance, decreasing in the shadowing gain;
    zero distance means a co-located user and costs nothing.
    """
    return config.p_rx_mw * config.kappa * link.distance_m**config.alpha / link.shadowing_linear


def upsilon(config: NetworkConfig) -> float:
    """Power-domain intensity constant.

    pi * (1 / (P_rx * kappa))**(2/alpha) * E[chi**(2/alpha)] for zero-mean
    log-normal shadowing; the expectation equals
    exp(0.5 * ((2/alpha) * sigma / ZETA)**2).
    """
    if config.alpha <= 2.0:
        raise ValueError("alpha must exceed 2 for a locally finite power domain")
    s = 2.0 / config.alpha
    shadow_moment = math.exp(0.5 * (s * config.sigma_db / ZETA) ** 2)
    return math.pi * (1.0 / (config.p_rx_mw * config.kappa)) ** s * shadow_moment


def user_intensity_coefficient(config: NetworkConfig) -> float:
    """Coefficient of the user power-domain intensity omega * UPSILON."""
    return config.omega * upsilon(config)


def other_users_estimate(p_mw, config: NetworkConfig):
    """Expected total power drawn by users with a smaller requirement.

    Equals the integral of t over the user power-domain intensity up to
    ``p_mw``; closed form omega * UPSILON * s/(s+1) * p**(s+1) with
    s = 2/alpha.  Accepts scalars or arrays.
    """
    s = 2.0 / config.alpha
    coef = user_intensity_coefficient(config) * s / (s + 1.0)
    if s == 0.5:
        return coef * p_mw * np.sqrt(p_mw)
    return coef * p_mw ** (s + 1.0)


def loaded_demand(p_mw, config: NetworkConfig):
    """Requested power plus the estimated draw of closer users.

    This is the quantity a battery must cover for a station to be declared
    available at demand ``p_mw``; strictly increasing in p.
    """
    return p_mw + other_users_estimate(p_mw, config)


def invert_loaded_demand(budget_mw: float, config: NetworkConfig) -> float:
    """Largest demand whose loaded total fits within ``budget_mw``.

    Monotone inversion of loaded_demand, solved to 1e-12 relative accuracy.
    """
    if budget_mw <= 0.0:
        return 0.0
    if loaded_demand(budget_mw, config) <= budget_mw:
        # omega == 0 degenerates to the identity
        return budget_mw
    return brentq(
        lambda p: loaded_demand(p, config) - budget_mw,
        0.0,
        budget_mw,
        xtol=1e-300,
        rtol=1e-13,
    )


def sample_shadowing(sigma_db: float, rng: np.random.Generator, size=None):
    """Draw linear shadowing gains 10**(X/10), X ~ Normal(0, sigma_db**2)."""
    if sigma_db < 0.0:
        raise ValueError("sigma_db must be nonnegative")
    if sigma_db == 0.0:
        return 1.0 if size is None else np.ones(size)
    return np.exp(rng.normal(0.0, sigma_db, size) / ZETA)
