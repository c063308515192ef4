"""Closed-form Hermite model of the low/high-noise fitting trade-off.

A capacity-p learner fits two score targets at once: the low-noise target
tanh(mu_t x) mu_t - x (mu_t = e^-t, here at t = 0) and the high-noise target
-x. Expanding both in the orthonormal probabilists' Hermite basis under the
standard Gaussian measure gives the shared optimum theta_i = (a1_i + a2_i)/2
and closed-form losses whose opposite monotonicity in p is the see-saw.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from .errors import ConfigError, ParameterError

GH_NODES_DEFAULT = 200
# Tail truncation for the i > p residual; tanh - x coefficients decay fast
# enough that the truncation error is below 1e-10 (checked by the Parseval
# residual in the tests).
P_MAX_DEFAULT = 40


@dataclass
class HermiteExpansion:
    """Coefficients of He_1..He_p plus the (fixed-zero) bare-t coefficient."""

    coeffs: np.ndarray
    t_coeff: float = 0.0

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if self.coeffs.ndim != 1 or len(self.coeffs) < 1:
            raise ParameterError("coeffs must be a nonempty vector")
        if not np.all(np.isfinite(self.coeffs)):
            raise ParameterError("coeffs must be finite")

    def __call__(self, x, t=0.0):
        x = np.asarray(x, dtype=np.float64)
        out = self.t_coeff * t * np.ones_like(x)
        for i, c in enumerate(self.coeffs, start=1):
            out = out + c * hermite_eval(i, x)
        return out


def hermite_eval(i: int, x):
    """Orthonormal probabilists' Hermite He_i(x), by the stable recurrence.

    He_0 = 1, He_1 = x, He_{n+1} = (x He_n - sqrt(n) He_{n-1}) / sqrt(n+1).
    """
    if i < 0:
        raise ParameterError(f"i must be >= 0, got {i}")
    x = np.asarray(x, dtype=np.float64)
    prev = np.ones_like(x)
    if i == 0:
        return float(prev) if prev.ndim == 0 else prev
    cur = x.copy() if x.ndim else np.float64(x)
    for n in range(1, i):
        prev, cur = cur, (x * cur - np.sqrt(n) * prev) / np.sqrt(n + 1.0)
    return float(cur) if np.ndim(cur) == 0 else cur


def gauss_hermite_rule(nodes: int = GH_NODES_DEFAULT):
    """Nodes and weights for integration against the standard normal density."""
    x, w = hermegauss(nodes)
    return x, w / np.sqrt(2.0 * np.pi)


def score_target(t: float, x):
    """tanh(mu_t x) mu_t - x with mu_t = e^-t (unit mode mean, 1-D)."""
    mu_t = np.exp(-t)
    return np.tanh(mu_t * np.asarray(x, dtype=np.float64)) * mu_t - x


def target_coeffs(t: float, p: int, nodes: int = GH_NODES_DEFAULT) -> np.ndarray:
    """Hermite coefficients a_i = E[s_t(x) He_i(x)], i = 1..p, x ~ N(0,1)."""
    if p < 1:
        raise ParameterError(f"p must be >= 1, got {p}")
    if t < 0:
        raise ParameterError(f"t must be >= 0, got {t}")
    if nodes < 5 * p:
        raise ConfigError(
            f"{nodes} quadrature nodes are insufficient for degree {p}; need >= {5 * p}"
        )
    x, w = gauss_hermite_rule(nodes)
    s = score_target(t, x)
    return np.array([np.sum(w * s * hermite_eval(i, x)) for i in range(1, p + 1)])


def high_noise_coeffs(p: int) -> np.ndarray:
    """Expansion of the high-noise target -x: (-1, 0, 0, ...)."""
    a = np.zeros(p)
    a[0] = -1.0
    return a


def optimal_theta(p: int, nodes: int = GH_NODES_DEFAULT) -> HermiteExpansion:
    """Minimizer of the summed two-regime loss: the average of both targets."""
    a1 = target_coeffs(0.0, p, nodes)
    a2 = high_noise_coeffs(p)
    return HermiteExpansion(coeffs=0.5 * (a1 + a2), t_coeff=0.0)


def seesaw_losses(p: int, p_max: int = P_MAX_DEFAULT, nodes: int = GH_NODES_DEFAULT):
    """(low-noise loss, high-noise loss) of the shared degree-p optimum.

    With a_i the low-noise target coefficients (tail truncated at p_max):

        l1 = 1/4 sum_{i<=p} a_i^2 + sum_{p<i<=p_max} a_i^2
        l2 = 1/4 (1 + a_1)^2 + 1/4 sum_{2<=i<=p} a_i^2
    """
    if not 1 <= p <= p_max:
        raise ParameterError(f"p must be in [1, {p_max}], got {p}")
    a = target_coeffs(0.0, p_max, nodes)
    sq = a * a
    # Cumulative forms keep the p -> p+1 transitions exactly monotone in
    # floating point (a running sum of nonnegative terms never decreases).
    head = np.cumsum(sq)[p - 1]
    l1 = np.sum(sq) - 0.75 * head
    tail_from_2 = 0.0 if p == 1 else np.cumsum(sq[1:])[p - 2]
    l2 = 0.25 * (1.0 + a[0]) ** 2 + 0.25 * tail_from_2
    return float(l1), float(l2)


def seesaw_table(p_values, p_max: int = P_MAX_DEFAULT, nodes: int = GH_NODES_DEFAULT):
    """Rows (p, l1, l2) for a sweep over capacities."""
    return [(int(p), *seesaw_losses(int(p), p_max, nodes)) for p in p_values]
