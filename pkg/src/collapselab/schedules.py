"""Noise schedules: signal/noise coefficients, drift, diffusion, perturbation.

A schedule defines the forward corruption x_t = alpha_t * x_0 + sigma_t * eps
with eps ~ N(0, I). Drift and squared diffusion follow from the coefficient
curves via

    f(x, t) = (alpha'_t / alpha_t) x
    g(t)^2  = 2 (sigma_t sigma'_t - (alpha'_t / alpha_t) sigma_t^2)

so every schedule shares one sampler/velocity code path. For the
variance-preserving family this reduces to f = -beta(t) x / 2, g = sqrt(beta(t)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import rng_stream
from .errors import ParameterError, SingularityError

SCHEDULE_KINDS = ("vp", "subvp", "linear")

# The linear schedule has alpha_t = 1 - t, so its drift blows up at t = 1;
# sampling starts are clamped below this removable endpoint singularity.
LINEAR_T_MAX = 1.0 - 1e-6


@dataclass(frozen=True)
class NoiseSchedule:
    kind: str = "vp"
    beta_min: float = 0.1
    beta_max: float = 20.0

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ParameterError(f"unknown schedule kind {self.kind!r}; expected one of {SCHEDULE_KINDS}")
        if self.kind in ("vp", "subvp") and not (0.0 < self.beta_min < self.beta_max):
            raise ParameterError(
                f"need 0 < beta_min < beta_max, got ({self.beta_min}, {self.beta_max})"
            )


def _check_t(t):
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise ParameterError(f"t must lie in [0, 1], got {t}")
    return t


def _beta(sched, t):
    return sched.beta_min + t * (sched.beta_max - sched.beta_min)


def _log_alpha_vp(sched, t):
    return -0.25 * t * t * (sched.beta_max - sched.beta_min) - 0.5 * t * sched.beta_min


def schedule_coeffs(sched: NoiseSchedule, t):
    """(alpha_t, sigma_t) for scalar or array t in [0, 1]."""
    t = _check_t(t)
    if sched.kind == "vp":
        alpha = np.exp(_log_alpha_vp(sched, t))
        sigma = np.sqrt(1.0 - alpha * alpha)
    elif sched.kind == "subvp":
        alpha = np.exp(_log_alpha_vp(sched, t))
        sigma = 1.0 - alpha * alpha
    else:  # linear
        alpha = 1.0 - t
        sigma = t.copy() if t.ndim else t
    return alpha, sigma


def drift_diffusion(sched: NoiseSchedule, x, t):
    """Drift vector f(x, t) and scalar diffusion g(t)."""
    t = float(_check_t(t))
    x = np.asarray(x, dtype=np.float64)
    if sched.kind == "vp":
        b = _beta(sched, t)
        return -0.5 * b * x, np.sqrt(b)
    if sched.kind == "subvp":
        b = _beta(sched, t)
        # g^2 = beta (1 - alpha^4) with alpha^4 = exp(-2 * integral of beta)
        g2 = b * (1.0 - np.exp(4.0 * _log_alpha_vp(sched, t)))
        return -0.5 * b * x, np.sqrt(g2)
    # linear: alpha = 1 - t vanishes at t = 1
    if t >= 1.0:
        raise SingularityError("linear schedule drift is singular at t = 1")
    return -x / (1.0 - t), np.sqrt(2.0 * t / (1.0 - t))


def perturb(sched: NoiseSchedule, x0, t, seed: int):
    """Forward-corrupt x0 to time t; returns (x_t, eps) with eps ~ N(0, I)."""
    x0 = np.asarray(x0, dtype=np.float64)
    alpha, sigma = schedule_coeffs(sched, t)
    eps = rng_stream(seed, 0).standard_normal(x0.shape)
    return alpha * x0 + sigma * eps, eps
