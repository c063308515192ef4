"""From-scratch MLP noise predictor: forward, exact backprop, Adam, training.

The network consumes [x_t, t] (time appended as one extra input coordinate)
and predicts the injected noise eps. The learned score is then
-eps_hat / sigma_t and the learned velocity f + g^2 eps_hat / (2 sigma_t).

Three output wrappers are supported:

* ``none``    - raw network output
* ``fixed``   - sigma_t * x_t + (1 - sigma_t) * eps_net (identity at high noise)
* ``learned`` - c1(t) * x_t + c2(t) * eps_net with small trainable MLPs c1, c2

Training is single-threaded and fully determined by (seed, config); minibatch
indices come from stream 2*it and the (t, eps) draws of iteration ``it`` from
stream 2*it + 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple, Union

import numpy as np

from .core import Dataset, T_MIN_DEFAULT, rng_stream
from .errors import CheckpointError, ParameterError, SingularityError
from .schedules import NoiseSchedule, drift_diffusion, schedule_coeffs

ACTIVATIONS = ("tanh", "relu")
SKIP_MODES = ("none", "fixed", "learned")
CHECKPOINT_VERSION = 1

# Learned skip coefficients: scalar t -> scalar, two hidden layers of 30, Tanh.
_COEFF_NET_HIDDEN = (30, 30)


@dataclass
class MlpParams:
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    activation: str = "tanh"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ParameterError(f"unknown activation {self.activation!r}")
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ParameterError("weights and biases must be nonempty and aligned")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ParameterError(f"layer {l}: bias shape {b.shape} does not match {w.shape}")
            if l > 0 and w.shape[0] != self.weights[l - 1].shape[1]:
                raise ParameterError(f"layer {l}: input width does not match layer {l - 1}")

    @property
    def widths(self) -> List[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def dtype(self):
        return self.weights[0].dtype


def init_mlp(widths, activation="tanh", seed=0, dtype=np.float64) -> MlpParams:
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) init, layer by layer."""
    if len(widths) < 2:
        raise ParameterError("need at least input and output widths")
    g = rng_stream(seed, 0)
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(g.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype))
        biases.append(g.uniform(-bound, bound, size=fan_out).astype(dtype))
    return MlpParams(weights=weights, biases=biases, activation=activation)


def _mlp_forward(p: MlpParams, inp: np.ndarray):
    """Returns (output, activations); activations[l] is the input of layer l."""
    acts = [inp]
    h = inp
    for l in range(len(p.weights) - 1):
        pre = h @ p.weights[l] + p.biases[l]
        h = np.tanh(pre) if p.activation == "tanh" else np.maximum(pre, 0.0)
        acts.append(h)
    return h @ p.weights[-1] + p.biases[-1], acts


def _mlp_backward(p: MlpParams, acts, dout):
    """Exact parameter gradients [gW0, gb0, gW1, gb1, ...] for a cached pass."""
    rev = []
    delta = dout
    for l in range(len(p.weights) - 1, -1, -1):
        rev.append(delta.sum(axis=0))
        rev.append(acts[l].T @ delta)
        if l > 0:
            a = acts[l]
            deriv = 1.0 - a * a if p.activation == "tanh" else (a > 0).astype(a.dtype)
            delta = (delta @ p.weights[l].T) * deriv
    rev.reverse()
    return rev


@dataclass
class SkipWrapper:
    """An inner noise-prediction MLP plus an optional output skip connection."""

    inner: MlpParams
    mode: str = "none"
    c1: Optional[MlpParams] = None
    c2: Optional[MlpParams] = None
    swap_fixed: bool = False
    sched: Optional[NoiseSchedule] = None  # provenance; fixed mode falls back to it

    def __post_init__(self):
        if self.mode not in SKIP_MODES:
            raise ParameterError(f"unknown skip mode {self.mode!r}")
        if self.mode == "learned":
            for name, net in (("c1", self.c1), ("c2", self.c2)):
                if net is None or net.widths[0] != 1 or net.widths[-1] != 1:
                    raise ParameterError(f"learned skip requires scalar->scalar {name} net")

    @property
    def dim(self) -> int:
        return self.inner.widths[-1]

    @property
    def dtype(self):
        return self.inner.dtype


@dataclass
class TwoModelPair:
    """Routes forward(x, t) to ``low`` iff t < t_split, else to ``high``."""

    low: SkipWrapper
    high: SkipWrapper
    t_split: float = 0.6

    @property
    def dim(self) -> int:
        return self.high.dim


Model = Union[SkipWrapper, TwoModelPair]


def make_model(dim, hidden, activation="tanh", skip="none", seed=0,
               dtype=np.float64, sched=None, swap_fixed=False) -> SkipWrapper:
    """Fresh model: inner widths [dim+1, *hidden, dim]; coeff nets on streams 1, 2."""
    inner = init_mlp([dim + 1, *hidden, dim], activation, seed=seed, dtype=dtype)
    c1 = c2 = None
    if skip == "learned":
        c1 = init_mlp([1, *_COEFF_NET_HIDDEN, 1], "tanh", seed=_substream(seed, 1), dtype=dtype)
        c2 = init_mlp([1, *_COEFF_NET_HIDDEN, 1], "tanh", seed=_substream(seed, 2), dtype=dtype)
    return SkipWrapper(inner=inner, mode=skip, c1=c1, c2=c2,
                       swap_fixed=swap_fixed, sched=sched)


def _substream(seed, k):
    # Distinct init seeds for auxiliary nets; folded so each net still draws
    # from its own stream-0.
    return (int(seed) * 1000003 + k) % (1 << 64)


def _time_column(x, t):
    n = x.shape[0]
    tb = np.full(n, float(t)) if np.ndim(t) == 0 else np.asarray(t, dtype=np.float64)
    if tb.shape != (n,):
        raise ParameterError(f"t must be scalar or shape ({n},), got {np.shape(t)}")
    return tb


def _forward_cached(model: SkipWrapper, x, t, sched=None):
    dtype = model.dtype
    x = np.asarray(x).astype(dtype, copy=False)
    tb = _time_column(x, t)
    z = np.concatenate([x, tb[:, None].astype(dtype)], axis=1)
    u, inner_acts = _mlp_forward(model.inner, z)
    cache = {"x": x, "u": u, "inner_acts": inner_acts}
    if model.mode == "none":
        return u, cache
    if model.mode == "fixed":
        sched = sched or model.sched
        if sched is None:
            raise ParameterError("fixed skip mode requires a schedule")
        _, s = schedule_coeffs(sched, tb)
        s = np.asarray(s, dtype=np.float64)[:, None].astype(dtype)
        c1v, c2v = ((1.0 - s), s) if model.swap_fixed else (s, (1.0 - s))
    else:  # learned
        tcol = tb[:, None].astype(dtype)
        c1v, a1 = _mlp_forward(model.c1, tcol)
        c2v, a2 = _mlp_forward(model.c2, tcol)
        cache["c_acts"] = (a1, a2)
    cache["c"] = (c1v, c2v)
    return c1v * x + c2v * u, cache


def _backward(model: SkipWrapper, cache, dout):
    """Gradients in params_list order for d(loss)/d(output) = dout."""
    if model.mode == "none":
        return _mlp_backward(model.inner, cache["inner_acts"], dout)
    c1v, c2v = cache["c"]
    du = c2v * dout
    grads = _mlp_backward(model.inner, cache["inner_acts"], du)
    if model.mode == "learned":
        dc1 = np.sum(dout * cache["x"], axis=1, keepdims=True)
        dc2 = np.sum(dout * cache["u"], axis=1, keepdims=True)
        a1, a2 = cache["c_acts"]
        grads += _mlp_backward(model.c1, a1, dc1)
        grads += _mlp_backward(model.c2, a2, dc2)
    return grads


def forward(model: Model, x, t, sched=None):
    """Predicted noise eps_hat for x of shape (d,) or (n, d)."""
    x = np.asarray(x)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    if xb.ndim != 2 or xb.shape[1] != model.dim:
        raise ParameterError(f"x must have dimension {model.dim}, got shape {x.shape}")
    if isinstance(model, TwoModelPair):
        tb = _time_column(xb, t)
        out = np.empty_like(xb, dtype=model.high.dtype)
        mask = tb < model.t_split
        if mask.any():
            out[mask], _ = _forward_cached(model.low, xb[mask], tb[mask], sched)
        if (~mask).any():
            out[~mask], _ = _forward_cached(model.high, xb[~mask], tb[~mask], sched)
    else:
        out, _ = _forward_cached(model, xb, t, sched)
    return out[0] if single else out


def params_list(model: SkipWrapper) -> List[np.ndarray]:
    """Flat view [W0, b0, W1, b1, ...] + coeff nets, aligned with gradients."""
    out = []
    for w, b in zip(model.inner.weights, model.inner.biases):
        out += [w, b]
    if model.mode == "learned":
        for net in (model.c1, model.c2):
            for w, b in zip(net.weights, net.biases):
                out += [w, b]
    return out


def set_params(model: SkipWrapper, params: List[np.ndarray]) -> None:
    """Write a flat parameter list (as produced by params_list) back."""
    nets = [model.inner] + ([model.c1, model.c2] if model.mode == "learned" else [])
    i = 0
    for net in nets:
        for l in range(len(net.weights)):
            net.weights[l] = params[i]
            net.biases[l] = params[i + 1]
            i += 2
    if i != len(params):
        raise ParameterError("parameter list does not match model structure")


@dataclass
class TrainConfig:
    learning_rate: float = 5e-3
    batch_size: int = 2000
    iterations: int = 10_000
    t_range: Tuple[float, float] = (T_MIN_DEFAULT, 1.0)
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        lo, hi = self.t_range
        if not (0.0 <= lo < hi <= 1.0):
            raise ParameterError(f"t_range must satisfy 0 <= lo < hi <= 1, got {self.t_range}")
        if self.batch_size < 1 or self.iterations < 1 or self.learning_rate <= 0:
            raise ParameterError("batch_size, iterations, learning_rate must be positive")


@dataclass
class AdamState:
    m: List[np.ndarray]
    v: List[np.ndarray]
    step: int = 0


def adam_init(params: List[np.ndarray]) -> AdamState:
    return AdamState(m=[np.zeros_like(p) for p in params],
                     v=[np.zeros_like(p) for p in params], step=0)


def adam_step(params, grads, state: AdamState, lr,
              beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update; returns fresh (params, state)."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ParameterError("params/grads/state lengths do not match")
    step = state.step + 1
    c1 = 1.0 - beta1 ** step
    c2 = 1.0 - beta2 ** step
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * (g * g)
        update = (m / c1) / (np.sqrt(v / c2) + eps)
        new_p.append(p - lr * update)
        new_m.append(m)
        new_v.append(v)
    return new_p, AdamState(m=new_m, v=new_v, step=step)


def loss_and_grad(model: SkipWrapper, batch: Dataset, sched: NoiseSchedule,
                  t_range, seed: int, stream: int = 0):
    """Minibatch DSM loss mean_i ||eps_hat_i - eps_i||^2 and exact gradients.

    Per-sample t ~ U(t_range) and eps ~ N(0, I) are drawn from
    rng_stream(seed, stream), in that order.
    """
    x0 = batch.points
    n = x0.shape[0]
    if n == 0:
        raise ParameterError("batch must be nonempty")
    lo, hi = t_range
    if not lo < hi:
        raise ParameterError(f"t_range must be increasing, got {t_range}")
    g = rng_stream(seed, stream)
    t = g.uniform(lo, hi, size=n)
    eps = g.standard_normal((n, x0.shape[1]))
    alpha, sigma = schedule_coeffs(sched, t)
    dtype = model.dtype
    xt = (alpha[:, None] * x0 + sigma[:, None] * eps).astype(dtype)
    out, cache = _forward_cached(model, xt, t, sched)
    r = out - eps.astype(dtype)
    loss = float(np.sum(r * r) / n)
    grads = _backward(model, cache, (2.0 / n) * r)
    return loss, grads


def train(model: SkipWrapper, data: Dataset, sched: NoiseSchedule, cfg: TrainConfig):
    """Adam on minibatches drawn with replacement; returns (model, loss history)."""
    if isinstance(model, TwoModelPair):
        raise ParameterError("train a TwoModelPair via train_two_model")
    n = len(data)
    if cfg.batch_size > n:
        raise ParameterError(f"batch_size {cfg.batch_size} exceeds dataset size {n}")
    params = params_list(model)
    state = adam_init(params)
    losses = np.empty(cfg.iterations)
    for it in range(cfg.iterations):
        idx = rng_stream(cfg.seed, 2 * it).integers(0, n, size=cfg.batch_size)
        batch = Dataset(points=data.points[idx])
        loss, grads = loss_and_grad(model, batch, sched, cfg.t_range,
                                    cfg.seed, stream=2 * it + 1)
        params, state = adam_step(params, grads, state, cfg.learning_rate,
                                  cfg.beta1, cfg.beta2, cfg.adam_eps)
        set_params(model, params)
        losses[it] = loss
    return model, losses


def train_two_model(m_low: SkipWrapper, m_high: SkipWrapper, data: Dataset,
                    sched: NoiseSchedule, cfg: TrainConfig, t_split: float = 0.6):
    """Train the split pair: low on U(lo, t_split), high on U(t_split, hi)."""
    lo, hi = cfg.t_range
    if not lo < t_split < hi:
        raise ParameterError(f"t_split must lie strictly inside {cfg.t_range}, got {t_split}")
    m_low, losses_low = train(m_low, data, sched, replace(cfg, t_range=(lo, t_split)))
    m_high, losses_high = train(m_high, data, sched, replace(cfg, t_range=(t_split, hi)))
    return TwoModelPair(low=m_low, high=m_high, t_split=t_split), (losses_low, losses_high)


def eval_dsm_at(model: Model, data: Dataset, sched: NoiseSchedule,
                t: float, n_mc: int, seed: int) -> float:
    """Monte-Carlo DSM loss at a fixed time, n_mc noise draws per data point."""
    if n_mc < 1:
        raise ParameterError(f"n_mc must be >= 1, got {n_mc}")
    x0 = data.points
    alpha, sigma = schedule_coeffs(sched, t)
    g = rng_stream(seed, 0)
    total = 0.0
    for _ in range(n_mc):
        eps = g.standard_normal(x0.shape)
        r = np.asarray(forward(model, alpha * x0 + sigma * eps, t, sched), dtype=np.float64) - eps
        total += float(np.sum(r * r))
    return total / (x0.shape[0] * n_mc)


def model_score(model: Model, sched: NoiseSchedule, x, t: float,
                t_min: float = T_MIN_DEFAULT):
    """Learned score -eps_hat / sigma_t; undefined below the time floor."""
    if t < t_min:
        raise SingularityError(f"score requires t >= {t_min} (sigma_t > 0), got {t}")
    _, sigma = schedule_coeffs(sched, t)
    eps_hat = np.asarray(forward(model, x, t, sched), dtype=np.float64)
    return -eps_hat / sigma


def model_velocity(model: Model, sched: NoiseSchedule, x, t: float,
                   t_min: float = T_MIN_DEFAULT):
    """Learned probability-flow velocity f - g^2 model_score / 2."""
    f, g = drift_diffusion(sched, x, t)
    return f - 0.5 * g * g * model_score(model, sched, x, t, t_min)


def _mlp_to_json(p: MlpParams):
    return {
        "activation": p.activation,
        "widths": p.widths,
        "layers": [{"weights": w.tolist(), "bias": b.tolist()}
                   for w, b in zip(p.weights, p.biases)],
    }


def _mlp_from_json(obj, dtype):
    try:
        layers = obj["layers"]
        weights = [np.array(l["weights"], dtype=dtype) for l in layers]
        biases = [np.array(l["bias"], dtype=dtype) for l in layers]
        return MlpParams(weights=weights, biases=biases, activation=obj["activation"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"malformed MLP block: {exc}") from exc


def save_checkpoint(model: SkipWrapper, path, state: Optional[AdamState] = None,
                    train_seed: Optional[int] = None) -> None:
    """Serialize the model (and optional Adam state) as version-tagged JSON."""
    doc = {
        "schema_version": CHECKPOINT_VERSION,
        "dtype": np.dtype(model.dtype).name,
        "skip_mode": model.mode,
        "swap_fixed": model.swap_fixed,
        "inner": _mlp_to_json(model.inner),
        "c1": _mlp_to_json(model.c1) if model.c1 is not None else None,
        "c2": _mlp_to_json(model.c2) if model.c2 is not None else None,
        "schedule": None if model.sched is None else {
            "kind": model.sched.kind,
            "beta_min": model.sched.beta_min,
            "beta_max": model.sched.beta_max,
        },
        "train_seed": train_seed,
        "adam": None if state is None else {
            "step": state.step,
            "m": [a.tolist() for a in state.m],
            "v": [a.tolist() for a in state.v],
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_checkpoint(path):
    """Rebuild (model, adam_state) from JSON written by save_checkpoint."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: not valid JSON ({exc})") from exc
    version = doc.get("schema_version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported schema_version {version!r} (expected {CHECKPOINT_VERSION})"
        )
    try:
        dtype = np.dtype(doc["dtype"])
        sched = doc["schedule"]
        model = SkipWrapper(
            inner=_mlp_from_json(doc["inner"], dtype),
            mode=doc["skip_mode"],
            c1=_mlp_from_json(doc["c1"], dtype) if doc["c1"] is not None else None,
            c2=_mlp_from_json(doc["c2"], dtype) if doc["c2"] is not None else None,
            swap_fixed=bool(doc.get("swap_fixed", False)),
            sched=None if sched is None else NoiseSchedule(
                kind=sched["kind"], beta_min=sched["beta_min"], beta_max=sched["beta_max"]
            ),
        )
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"{path}: missing or malformed field {exc}") from exc
    state = None
    if doc.get("adam") is not None:
        try:
            state = AdamState(
                m=[np.array(a, dtype=dtype) for a in doc["adam"]["m"]],
                v=[np.array(a, dtype=dtype) for a in doc["adam"]["v"]],
                step=int(doc["adam"]["step"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CheckpointError(f"{path}: malformed adam block ({exc})") from exc
    return model, state
