"""Closed-form score, velocity, and marginals of isotropic Gaussian mixtures.

For x_0 ~ sum_k w_k N(mu_k, s2_k I), the forward corruption keeps the mixture
Gaussian: x_t ~ sum_k w_k N(alpha_t mu_k, (s2_k alpha_t^2 + sigma_t^2) I).
The score is the responsibility-weighted sum of per-component natural
gradients; responsibilities are computed in log space so far-apart modes do
not underflow.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .core import DatasetSpec
from .errors import ParameterError
from .schedules import NoiseSchedule, drift_diffusion, schedule_coeffs

_WEIGHT_TOL = 1e-12


@dataclass
class MogSpec:
    """Weights, means (K, d) and isotropic per-component variances (K,)."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.means = np.asarray(self.means, dtype=np.float64)
        self.variances = np.asarray(self.variances, dtype=np.float64)
        if self.means.ndim != 2:
            raise ParameterError("means must be (K, d)")
        k = self.means.shape[0]
        if self.weights.shape != (k,) or self.variances.shape != (k,):
            raise ParameterError("weights/variances must match the number of components")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > _WEIGHT_TOL:
            raise ParameterError("weights must be nonnegative and sum to 1")
        if np.any(self.variances <= 0):
            raise ParameterError("variances must be positive")

    @property
    def dim(self) -> int:
        return self.means.shape[1]


def symmetric_pair(dim: int, variance: float = 0.2) -> MogSpec:
    """Equal-weight modes at +-1 with isotropic ``variance`` per dimension."""
    ones = np.ones((1, dim))
    return MogSpec(
        weights=np.array([0.5, 0.5]),
        means=np.concatenate([-ones, ones], axis=0),
        variances=np.array([variance, variance]),
    )


def ring(components: int = 6, radius: float = 2.0, std: float = 0.2) -> MogSpec:
    """Equal-weight 2-D modes on a circle, parameterized by component std."""
    angles = 2.0 * np.pi * np.arange(components) / components
    means = radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return MogSpec(
        weights=np.full(components, 1.0 / components),
        means=means,
        variances=np.full(components, std * std),
    )


def mog_spec_for(spec: DatasetSpec) -> MogSpec:
    """The mixture matching a mog-family DatasetSpec."""
    if spec.variant in ("mognd", "mog1d"):
        return symmetric_pair(spec.dimension, spec.component_variance)
    if spec.variant == "mog2d":
        return ring(spec.components, spec.radius, spec.component_std)
    raise ParameterError(f"dataset variant {spec.variant!r} has no closed-form mixture")


def sample_mog(spec: MogSpec, n: int, g: np.random.Generator) -> np.ndarray:
    """n draws from the mixture using generator g (components, then normals)."""
    comp = g.choice(len(spec.weights), size=n, p=spec.weights)
    eps = g.standard_normal((n, spec.dim))
    return spec.means[comp] + np.sqrt(spec.variances)[comp, None] * eps


def _component_moments(spec, sched, t):
    alpha, sigma = schedule_coeffs(sched, t)
    means_t = alpha * spec.means                        # (K, d)
    vars_t = spec.variances * alpha * alpha + sigma * sigma  # (K,)
    return means_t, vars_t


def _log_weighted(spec, sched, x, t):
    """Per-component log(w_k N(x; m_k, v_k I)) for batched x (n, d)."""
    means_t, vars_t = _component_moments(spec, sched, t)
    d = spec.dim
    diff = x[:, None, :] - means_t[None, :, :]          # (n, K, d)
    maha = np.sum(diff * diff, axis=2) / vars_t[None, :]
    log_norm = -0.5 * d * (np.log(2.0 * np.pi) + np.log(vars_t))
    return np.log(spec.weights)[None, :] + log_norm[None, :] - 0.5 * maha


def _as_batch(spec, x):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    if xb.ndim != 2 or xb.shape[1] != spec.dim:
        raise ParameterError(f"x must have dimension {spec.dim}, got shape {x.shape}")
    return xb, single


def mog_logpdf(spec: MogSpec, sched: NoiseSchedule, x, t: float):
    """Log density of the time-t marginal at x ((d,) or (n, d))."""
    xb, single = _as_batch(spec, x)
    out = logsumexp(_log_weighted(spec, sched, xb, t), axis=1)
    return float(out[0]) if single else out


def mog_score(spec: MogSpec, sched: NoiseSchedule, x, t: float):
    """Gradient of the log marginal density at time t."""
    xb, single = _as_batch(spec, x)
    means_t, vars_t = _component_moments(spec, sched, t)
    log_w = _log_weighted(spec, sched, xb, t)
    resp = np.exp(log_w - logsumexp(log_w, axis=1, keepdims=True))  # (n, K)
    per_comp = (means_t[None, :, :] - xb[:, None, :]) / vars_t[None, :, None]
    score = np.sum(resp[:, :, None] * per_comp, axis=1)
    return score[0] if single else score


def mog_velocity(spec: MogSpec, sched: NoiseSchedule, x, t: float):
    """Probability-flow velocity f(x, t) - g(t)^2 score(x, t) / 2."""
    f, g = drift_diffusion(sched, x, t)
    return f - 0.5 * g * g * mog_score(spec, sched, x, t)


def _marginal_moments(spec, sched, t, dim):
    if not 0 <= dim < spec.dim:
        raise ParameterError(f"dim must be in [0, {spec.dim}), got {dim}")
    means_t, vars_t = _component_moments(spec, sched, t)
    return means_t[:, dim], vars_t


def mog_marginal_pdf(spec: MogSpec, sched: NoiseSchedule, u, t: float, dim: int = 0):
    """Exact 1-D density of coordinate ``dim`` of x_t (isotropic marginalizes)."""
    m, v = _marginal_moments(spec, sched, t, dim)
    u = np.asarray(u, dtype=np.float64)
    z = (u[..., None] - m) ** 2 / v
    comp = np.exp(-0.5 * z) / np.sqrt(2.0 * np.pi * v)
    out = comp @ spec.weights
    return float(out) if out.ndim == 0 else out


def mog_marginal_cdf(spec: MogSpec, sched: NoiseSchedule, u, t: float, dim: int = 0):
    """Exact 1-D CDF of coordinate ``dim`` of x_t."""
    from scipy.special import ndtr

    m, v = _marginal_moments(spec, sched, t, dim)
    u = np.asarray(u, dtype=np.float64)
    out = ndtr((u[..., None] - m) / np.sqrt(v)) @ spec.weights
    return float(out) if out.ndim == 0 else out
