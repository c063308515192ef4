"""Reverse-time generation: ODE, SDE, DDIM, predictor-corrector, ALD, DPM-2.

All samplers drive a ScoreSource, which exposes three mutually consistent
views of one field: score(x, t), eps(x, t) = -sigma_t * score, and
velocity(x, t) = f - g^2 score / 2. Sources wrap either the closed-form
mixture or a trained model, so the sampler code never knows which it runs.

Chains start from x_1 ~ N(0, I). The prior block is drawn from stream 0 and
the step-k noise block from stream k + 1, with row r of every block owned by
chain r; blocks fill row-major, so results are unchanged when chains are
appended and a chain-parallel worker can re-derive its rows exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .core import Dataset, T_MIN_DEFAULT, rng_stream, time_grid
from .errors import ParameterError, SingularityError
from .mog import MogSpec, mog_score, mog_velocity
from .schedules import LINEAR_T_MAX, NoiseSchedule, drift_diffusion, schedule_coeffs
from .scorenet import Model, forward, model_score, model_velocity

SAMPLER_KINDS = ("ode", "sde", "ddim", "pc", "ald", "dpm2")


class OracleSource:
    """Closed-form mixture score/velocity under a schedule."""

    def __init__(self, spec: MogSpec, sched: NoiseSchedule):
        self.spec = spec
        self.sched = sched

    @property
    def dim(self) -> int:
        return self.spec.dim

    def score(self, x, t):
        return mog_score(self.spec, self.sched, x, t)

    def eps(self, x, t):
        _, sigma = schedule_coeffs(self.sched, t)
        return -sigma * self.score(x, t)

    def velocity(self, x, t):
        return mog_velocity(self.spec, self.sched, x, t)


class ModelSource:
    """Trained noise predictor (single model or two-model pair)."""

    def __init__(self, model: Model, sched: NoiseSchedule, t_min: float = T_MIN_DEFAULT):
        self.model = model
        self.sched = sched
        self.t_min = t_min

    @property
    def dim(self) -> int:
        return self.model.dim

    def eps(self, x, t):
        return np.asarray(forward(self.model, x, t, self.sched), dtype=np.float64)

    def score(self, x, t):
        return model_score(self.model, self.sched, x, t, self.t_min)

    def velocity(self, x, t):
        return model_velocity(self.model, self.sched, x, t, self.t_min)


@dataclass
class SamplerConfig:
    kind: str = "ode"
    steps: int = 100
    t_start: float = 1.0
    t_end: float = T_MIN_DEFAULT
    snr: float = 0.16            # pc: corrector signal-to-noise ratio r
    corrector_steps: int = 1     # pc: M
    levels: int = 100            # ald
    steps_per_level: int = 10    # ald
    base_step: float = 2e-5      # ald

    def __post_init__(self):
        if self.kind not in SAMPLER_KINDS:
            raise ParameterError(f"unknown sampler kind {self.kind!r}; expected one of {SAMPLER_KINDS}")
        if self.steps < 1:
            raise ParameterError(f"steps must be >= 1, got {self.steps}")
        if not (0.0 <= self.t_end < self.t_start <= 1.0):
            raise ParameterError(f"need 0 <= t_end < t_start <= 1, got ({self.t_end}, {self.t_start})")
        if self.snr < 0:
            raise ParameterError(f"snr must be >= 0, got {self.snr}")
        if self.corrector_steps < 1:
            raise ParameterError(f"corrector_steps must be >= 1, got {self.corrector_steps}")
        if self.levels < 1 or self.steps_per_level < 0 or self.base_step <= 0:
            raise ParameterError("ald parameters must be positive (steps_per_level may be 0)")


_DEFAULT_STEPS = {"ode": 100, "sde": 1000, "ddim": 100, "pc": 100, "dpm2": 100, "ald": 1}


def default_sampler_config(kind: str) -> SamplerConfig:
    """Source-setup step counts: 100 for deterministic samplers, 1000 for SDE."""
    return SamplerConfig(kind=kind, steps=_DEFAULT_STEPS.get(kind, 100))


@dataclass
class Trajectory:
    """Recorded (strictly decreasing) times and per-time (n, d) states."""

    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.states = np.asarray(self.states, dtype=np.float64)
        if self.states.ndim != 3 or self.times.shape != (self.states.shape[0],):
            raise ParameterError("states must be (m, n, d) aligned with times")
        if np.any(np.diff(self.times) >= 0):
            raise ParameterError("recorded times must be strictly decreasing")


def _batch(x):
    x = np.asarray(x, dtype=np.float64)
    return (x[None, :], True) if x.ndim == 1 else (x, False)


def ode_step(src, sched, x, t, dt):
    """Backward Euler-in-time step along the probability-flow velocity."""
    if dt < 0:
        raise ParameterError(f"dt must be >= 0, got {dt}")
    x = np.asarray(x, dtype=np.float64)
    if dt == 0:
        return x.copy()
    return x - dt * src.velocity(x, t)


def sde_step(src, sched, x, t, dt, noise):
    """Euler-Maruyama step of the reverse SDE; caller supplies noise ~ N(0, I)."""
    if dt < 0:
        raise ParameterError(f"dt must be >= 0, got {dt}")
    x = np.asarray(x, dtype=np.float64)
    if dt == 0:
        return x.copy()
    f, g = drift_diffusion(sched, x, t)
    return x - dt * (f - g * g * src.score(x, t)) + g * np.sqrt(dt) * np.asarray(noise)


def ddim_step(src, sched, x, t, s):
    """Step t -> s through the predicted clean point and predicted noise."""
    if not s <= t:
        raise ParameterError(f"need s <= t, got s={s}, t={t}")
    x = np.asarray(x, dtype=np.float64)
    if s == t:
        return x.copy()
    alpha_t, sigma_t = schedule_coeffs(sched, t)
    if alpha_t == 0:
        raise SingularityError(f"ddim step undefined where alpha_t = 0 (t={t})")
    eps = src.eps(x, t)
    x0 = (x - sigma_t * eps) / alpha_t
    alpha_s, sigma_s = schedule_coeffs(sched, s)
    return alpha_s * x0 + sigma_s * eps


def corrector_step(src, sched, x, t, r, noise):
    """One score-based MCMC correction with per-chain adaptive step size.

    step = alpha_t (r ||noise|| / ||score||)^2; chains with zero score (or
    r = 0) are left unchanged, noise term included.
    """
    if r < 0:
        raise ParameterError(f"snr must be >= 0, got {r}")
    xb, single = _batch(x)
    nb = np.asarray(noise, dtype=np.float64).reshape(xb.shape)
    s = src.score(xb, t)
    alpha_t, _ = schedule_coeffs(sched, t)
    s_norm = np.linalg.norm(s, axis=1)
    n_norm = np.linalg.norm(nb, axis=1)
    safe = np.where(s_norm > 0, s_norm, 1.0)
    step = np.where(s_norm > 0, alpha_t * (r * n_norm / safe) ** 2, 0.0)[:, None]
    out = xb + step * s + np.sqrt(2.0 * step) * nb
    return out[0] if single else out


def _log_snr(sched, t):
    alpha, sigma = schedule_coeffs(sched, t)
    if alpha <= 0 or sigma <= 0:
        raise SingularityError(f"log(alpha/sigma) undefined at t={t}")
    return np.log(alpha / sigma)


def _invert_log_snr(sched, lam, t_lo, t_hi):
    # log(alpha/sigma) is strictly decreasing in t; plain bisection.
    for _ in range(100):
        mid = 0.5 * (t_lo + t_hi)
        if _log_snr(sched, mid) > lam:
            t_lo = mid
        else:
            t_hi = mid
    return 0.5 * (t_lo + t_hi)


def dpm2_step(src, sched, x, t, s):
    """Second-order exponential-integrator step t -> s in lambda = log(alpha/sigma).

    Midpoint noise estimate from a half-step of the first-order update; exact
    for a constant noise prediction, where it coincides with a DDIM step.
    """
    if not s <= t:
        raise ParameterError(f"need s <= t, got s={s}, t={t}")
    x = np.asarray(x, dtype=np.float64)
    if s == t:
        return x.copy()
    lam_t = _log_snr(sched, t)
    lam_s = _log_snr(sched, s)
    h = lam_s - lam_t
    t_mid = _invert_log_snr(sched, 0.5 * (lam_t + lam_s), s, t)
    alpha_t, _ = schedule_coeffs(sched, t)
    alpha_m, sigma_m = schedule_coeffs(sched, t_mid)
    alpha_s, sigma_s = schedule_coeffs(sched, s)
    eps_t = src.eps(x, t)
    x_mid = (alpha_m / alpha_t) * x - sigma_m * np.expm1(0.5 * h) * eps_t
    eps_mid = src.eps(x_mid, t_mid)
    return (alpha_s / alpha_t) * x - sigma_s * np.expm1(h) * eps_mid


def ald_run(src, sched, n, levels, steps_per_level, base_step, seed,
            t_start=1.0, t_end=T_MIN_DEFAULT) -> Dataset:
    """Annealed Langevin dynamics over noise levels sigma(t_i) on a descending grid.

    Level step size is base_step * sigma_i^2 / sigma_last^2; each update is
    x += step/2 * score + sqrt(step) * z.
    """
    if n < 0 or levels < 1 or steps_per_level < 0 or base_step <= 0:
        raise ParameterError("invalid ald parameters")
    d = src.dim
    x = rng_stream(seed, 0).standard_normal((n, d))
    ts = np.linspace(t_start, t_end, levels)
    sigmas = np.array([schedule_coeffs(sched, t)[1] for t in ts])
    stream = 1
    for t_i, sig_i in zip(ts, sigmas):
        step = base_step * (sig_i / sigmas[-1]) ** 2
        for _ in range(steps_per_level):
            z = rng_stream(seed, stream).standard_normal((n, d))
            stream += 1
            x = x + 0.5 * step * src.score(x, t_i) + np.sqrt(step) * z
    return Dataset(points=x)


def run_sampler(src, sched, cfg: SamplerConfig, n: int, seed: int,
                record: bool = False, record_stride: int = 1
                ) -> Tuple[Dataset, Optional[Trajectory]]:
    """Generate n chains under cfg; optionally record the trajectory."""
    if n < 0:
        raise ParameterError(f"n must be >= 0, got {n}")
    if record_stride < 1:
        raise ParameterError(f"record_stride must be >= 1, got {record_stride}")
    if cfg.kind == "ald":
        ds = ald_run(src, sched, n, cfg.levels, cfg.steps_per_level,
                     cfg.base_step, seed, cfg.t_start, cfg.t_end)
        return ds, None
    t_start = min(cfg.t_start, LINEAR_T_MAX) if sched.kind == "linear" else cfg.t_start
    if cfg.kind == "dpm2":
        # The exponential integrator is second-order in lambda = log(alpha/sigma);
        # steps are placed uniformly there, its native spacing.
        lams = np.linspace(_log_snr(sched, t_start), _log_snr(sched, cfg.t_end),
                           cfg.steps + 1)
        grid = np.array([t_start]
                        + [_invert_log_snr(sched, lam, cfg.t_end, t_start)
                           for lam in lams[1:-1]]
                        + [cfg.t_end])
    else:
        grid = time_grid(cfg.steps, cfg.t_end, t_start)
    x = rng_stream(seed, 0).standard_normal((n, src.dim))
    rec_t, rec_x = [grid[0]], [x.copy()]
    stream = 1
    for k in range(cfg.steps):
        t, t_next = grid[k], grid[k + 1]
        dt = t - t_next
        if cfg.kind == "ode":
            x = ode_step(src, sched, x, t, dt)
        elif cfg.kind == "sde":
            z = rng_stream(seed, stream).standard_normal(x.shape)
            stream += 1
            x = sde_step(src, sched, x, t, dt, z)
        elif cfg.kind == "ddim":
            x = ddim_step(src, sched, x, t, t_next)
        elif cfg.kind == "dpm2":
            x = dpm2_step(src, sched, x, t, t_next)
        else:  # pc: predictor step, then M corrections at the new time
            x = ode_step(src, sched, x, t, dt)
            for _ in range(cfg.corrector_steps):
                z = rng_stream(seed, stream).standard_normal(x.shape)
                stream += 1
                x = corrector_step(src, sched, x, t_next, cfg.snr, z)
        if record and ((k + 1) % record_stride == 0 or k == cfg.steps - 1):
            rec_t.append(t_next)
            rec_x.append(x.copy())
    traj = Trajectory(times=np.array(rec_t), states=np.stack(rec_x)) if record else None
    return Dataset(points=x), traj
