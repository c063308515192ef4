"""Collapse-cause instrumentation: velocity errors, field grids, covariances.

Everything here is deterministic given seeds and compares a model-backed
score source against the closed-form mixture source.
"""

from __future__ import annotations

import numpy as np

from .core import rng_stream
from .errors import ParameterError
from .mog import sample_mog
from .samplers import OracleSource, SamplerConfig, Trajectory, run_sampler
from .schedules import schedule_coeffs


def ks_distance(samples, cdf) -> float:
    """Sup gap between the empirical CDF of samples and a callable CDF."""
    x = np.sort(np.asarray(samples, dtype=np.float64))
    n = x.size
    if n == 0:
        raise ParameterError("samples must be nonempty")
    f = np.asarray(cdf(x), dtype=np.float64)
    steps = np.arange(n + 1) / n
    return float(max(np.max(steps[1:] - f), np.max(f - steps[:-1])))


def velocity_mae(model_src, oracle_src, sched, t, n_points, seed) -> float:
    """Mean absolute velocity error on test points from the time-t marginal.

    Test points follow x = alpha_t x0 + sigma_t eps with x0 drawn from the
    oracle mixture, i.e. exactly where samplers evaluate the field.
    """
    if not isinstance(oracle_src, OracleSource):
        raise ParameterError("oracle_src must be an OracleSource")
    if n_points < 1:
        raise ParameterError(f"n_points must be >= 1, got {n_points}")
    g = rng_stream(seed, 0)
    x0 = sample_mog(oracle_src.spec, n_points, g)
    eps = g.standard_normal(x0.shape)
    alpha, sigma = schedule_coeffs(sched, t)
    x = alpha * x0 + sigma * eps
    return float(np.mean(np.abs(model_src.velocity(x, t) - oracle_src.velocity(x, t))))


def velocity_grid(src, sched, dim, x_range, t_range, resolution, seed=0):
    """Velocity component ``dim`` on an (x, t) grid, other coordinates frozen.

    The frozen coordinates come from one seeded standard-normal draw. Returns
    (xs, ts, V) with V[i, j] = velocity(x=xs[j], t=ts[i])[dim].
    """
    try:
        res_x, res_t = resolution
    except TypeError:
        res_x = res_t = resolution
    if res_x < 2 or res_t < 2:
        raise ParameterError("resolution must be >= 2 on each axis")
    d = src.dim
    if not 0 <= dim < d:
        raise ParameterError(f"dim must be in [0, {d}), got {dim}")
    xs = np.linspace(x_range[0], x_range[1], res_x)
    ts = np.linspace(t_range[0], t_range[1], res_t)
    frozen = rng_stream(seed, 0).standard_normal(d)
    points = np.tile(frozen, (res_x, 1))
    points[:, dim] = xs
    grid = np.empty((res_t, res_x))
    for i, t in enumerate(ts):
        grid[i] = src.velocity(points, float(t))[:, dim]
    return xs, ts, grid


def error_covariance(model_src, oracle_src, sched, steps, n_chains,
                     sampler_kind, seed, record_stride=1):
    """Covariance of velocity errors e(x_t, t) with the start-time errors e(x_1, 1).

    Runs n_chains trajectories of the model source under the chosen sampler
    and returns (times, c) with

        c(t) = (1/(n d)) sum_chains <e(x_t, t) - mean_t, e(x_1, 1) - mean_1>.
    """
    if sampler_kind not in ("ode", "sde"):
        raise ParameterError(f"sampler_kind must be 'ode' or 'sde', got {sampler_kind!r}")
    if n_chains < 2:
        raise ParameterError("need at least two chains to center errors")
    cfg = SamplerConfig(kind=sampler_kind, steps=steps)
    _, traj = run_sampler(model_src, sched, cfg, n_chains, seed,
                          record=True, record_stride=record_stride)
    d = traj.states.shape[2]
    errors = np.empty_like(traj.states)
    for i, t in enumerate(traj.times):
        x = traj.states[i]
        errors[i] = model_src.velocity(x, float(t)) - oracle_src.velocity(x, float(t))
    centered = errors - errors.mean(axis=1, keepdims=True)
    base = centered[0]
    c = np.einsum("tnd,nd->t", centered, base) / (n_chains * d)
    return traj.times.copy(), c


def density_evolution(traj: Trajectory, dim, bins, hist_range):
    """Per-time normalized histograms (area 1) of one trajectory coordinate.

    Returns (bin_centers, H) with H[i] the density histogram at traj.times[i].
    """
    if traj.states.shape[1] == 0:
        raise ParameterError("trajectory has no chains")
    d = traj.states.shape[2]
    if not 0 <= dim < d:
        raise ParameterError(f"dim must be in [0, {d}), got {dim}")
    if bins < 1:
        raise ParameterError(f"bins must be >= 1, got {bins}")
    edges = np.linspace(hist_range[0], hist_range[1], bins + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    hist = np.empty((traj.times.size, bins))
    for i in range(traj.times.size):
        hist[i], _ = np.histogram(traj.states[i][:, dim], bins=edges, density=True)
    return centers, hist
