"""Experiment config: JSON schema, validation, canonical hashing.

Validation is collected, not fail-fast: a bad config reports every offending
key in one ConfigError.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .core import DatasetSpec
from .errors import ConfigError, ParameterError
from .samplers import SamplerConfig, _DEFAULT_STEPS
from .schedules import NoiseSchedule
from .scorenet import ACTIVATIONS, SKIP_MODES, TrainConfig

_TOP_KEYS = {"seed", "threads", "out", "dataset", "schedule", "model", "train",
             "score_source", "samplers", "sample_n", "tid", "diagnostics",
             "seesaw", "plots"}
_DATASET_KEYS = {"variant", "n", "dimension", "noise_std", "component_std",
                 "component_variance", "radius", "components"}
_SCHEDULE_KEYS = {"schedule", "beta_min", "beta_max"}
_MODEL_KEYS = {"hidden", "activation", "skip", "swap_fixed", "two_model_split", "dtype"}
_TRAIN_KEYS = {"learning_rate", "batch_size", "iterations", "t_range"}
_SAMPLER_KEYS = {"sampler", "steps", "t_start", "t_end", "snr", "corrector_steps",
                 "levels", "steps_per_level", "base_step"}
_TID_KEYS = {"epsilons", "subset", "dim", "convention", "k"}
_DIAG_KEYS = {"velocity_mae_ts", "mae_points", "error_covariance",
              "density_evolution", "velocity_grid"}
_SEESAW_KEYS = {"p_max", "p_values"}


@dataclass
class ModelConfig:
    hidden: List[int]
    activation: str = "tanh"
    skip: str = "none"
    swap_fixed: bool = False
    two_model_split: Optional[float] = None
    dtype: str = "float64"

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64


@dataclass
class ExperimentConfig:
    raw: dict
    seed: int = 0
    threads: int = 1
    out: Optional[str] = None
    dataset: Optional[DatasetSpec] = None
    dataset_n: int = 0
    schedule: NoiseSchedule = field(default_factory=NoiseSchedule)
    model: Optional[ModelConfig] = None
    train: Optional[TrainConfig] = None
    score_source: str = "model"
    samplers: List[SamplerConfig] = field(default_factory=list)
    sample_n: int = 2000
    tid: Optional[dict] = None
    diagnostics: Optional[dict] = None
    seesaw_p: Optional[List[int]] = None
    plots: bool = False


def config_hash(raw: dict) -> str:
    canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _unknown(errs, prefix, obj, allowed):
    for key in obj:
        if key not in allowed:
            errs.append(f"{prefix}{key}: unknown key")


def _get(errs, obj, prefix, key, types, default=None, required=False):
    if key not in obj:
        if required:
            errs.append(f"{prefix}{key}: missing required key")
        return default
    v = obj[key]
    if not isinstance(v, types) or isinstance(v, bool) and bool not in (
            types if isinstance(types, tuple) else (types,)):
        errs.append(f"{prefix}{key}: expected {types}, got {type(v).__name__}")
        return default
    return v


def _parse_dataset(errs, obj):
    _unknown(errs, "dataset.", obj, _DATASET_KEYS)
    variant = _get(errs, obj, "dataset.", "variant", str, required=True)
    n = _get(errs, obj, "dataset.", "n", int, default=0)
    if n is None or n < 0:
        errs.append("dataset.n: must be >= 0")
        n = 0
    if variant is None:
        return None, 0
    kwargs = {}
    for key in ("dimension", "components"):
        if key in obj:
            kwargs[key] = _get(errs, obj, "dataset.", key, int, default=1)
    for key in ("noise_std", "component_std", "component_variance", "radius"):
        if key in obj:
            kwargs[key] = float(_get(errs, obj, "dataset.", key, (int, float), default=1.0))
    try:
        return DatasetSpec(variant=variant, **kwargs), n
    except ParameterError as exc:
        errs.append(f"dataset: {exc}")
        return None, n


def _parse_schedule(errs, obj):
    _unknown(errs, "schedule.", obj, _SCHEDULE_KEYS)
    kind = _get(errs, obj, "schedule.", "schedule", str, default="vp")
    beta_min = float(_get(errs, obj, "schedule.", "beta_min", (int, float), default=0.1))
    beta_max = float(_get(errs, obj, "schedule.", "beta_max", (int, float), default=20.0))
    try:
        return NoiseSchedule(kind=kind, beta_min=beta_min, beta_max=beta_max)
    except ParameterError as exc:
        errs.append(f"schedule.schedule: {exc}")
        return NoiseSchedule()


def _parse_model(errs, obj):
    _unknown(errs, "model.", obj, _MODEL_KEYS)
    hidden = _get(errs, obj, "model.", "hidden", list, required=True) or []
    if not all(isinstance(h, int) and h >= 1 for h in hidden):
        errs.append("model.hidden: must be a list of positive ints")
    activation = _get(errs, obj, "model.", "activation", str, default="tanh")
    if activation not in ACTIVATIONS:
        errs.append(f"model.activation: {activation!r} not in {ACTIVATIONS}")
    skip = _get(errs, obj, "model.", "skip", str, default="none")
    if skip not in SKIP_MODES:
        errs.append(f"model.skip: {skip!r} not in {SKIP_MODES}")
    dtype = _get(errs, obj, "model.", "dtype", str, default="float64")
    if dtype not in ("float64", "float32"):
        errs.append(f"model.dtype: {dtype!r} must be float64 or float32")
    split = obj.get("two_model_split")
    if split is not None and not isinstance(split, (int, float)):
        errs.append("model.two_model_split: must be null or a number")
        split = None
    return ModelConfig(hidden=hidden, activation=activation, skip=skip,
                       swap_fixed=bool(obj.get("swap_fixed", False)),
                       two_model_split=None if split is None else float(split),
                       dtype=dtype)


def _parse_train(errs, obj, seed):
    _unknown(errs, "train.", obj, _TRAIN_KEYS)
    t_range = obj.get("t_range", [1e-3, 1.0])
    if (not isinstance(t_range, list) or len(t_range) != 2
            or not all(isinstance(v, (int, float)) for v in t_range)):
        errs.append("train.t_range: must be [lo, hi]")
        t_range = [1e-3, 1.0]
    try:
        return TrainConfig(
            learning_rate=float(_get(errs, obj, "train.", "learning_rate", (int, float), default=5e-3)),
            batch_size=_get(errs, obj, "train.", "batch_size", int, default=2000),
            iterations=_get(errs, obj, "train.", "iterations", int, default=10_000),
            t_range=(float(t_range[0]), float(t_range[1])),
            seed=seed,
        )
    except ParameterError as exc:
        errs.append(f"train: {exc}")
        return None


def _parse_samplers(errs, items):
    out = []
    for i, obj in enumerate(items):
        prefix = f"samplers[{i}]."
        if not isinstance(obj, dict):
            errs.append(f"samplers[{i}]: expected an object")
            continue
        _unknown(errs, prefix, obj, _SAMPLER_KEYS)
        kind = _get(errs, obj, prefix, "sampler", str, required=True)
        if kind is None:
            continue
        kwargs = {k: obj[k] for k in obj if k in _SAMPLER_KEYS - {"sampler", "steps"}}
        steps = obj.get("steps", _DEFAULT_STEPS.get(kind, 100))
        try:
            out.append(SamplerConfig(kind=kind, steps=steps, **kwargs))
        except (ParameterError, TypeError) as exc:
            errs.append(f"{prefix}sampler: {exc}")
    return out


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate a raw config dict; raises ConfigError listing every bad key."""
    errs = []
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    _unknown(errs, "", raw, _TOP_KEYS)
    cfg = ExperimentConfig(raw=raw)
    cfg.seed = _get(errs, raw, "", "seed", int, default=0)
    cfg.threads = _get(errs, raw, "", "threads", int, default=1)
    cfg.out = _get(errs, raw, "", "out", str, default=None)
    cfg.plots = bool(raw.get("plots", False))
    cfg.sample_n = _get(errs, raw, "", "sample_n", int, default=2000)
    if cfg.sample_n is None or cfg.sample_n < 0:
        errs.append("sample_n: must be >= 0")
    cfg.score_source = _get(errs, raw, "", "score_source", str, default="model")
    if cfg.score_source not in ("model", "oracle"):
        errs.append(f"score_source: {cfg.score_source!r} must be 'model' or 'oracle'")
    if "dataset" in raw and isinstance(raw["dataset"], dict):
        cfg.dataset, cfg.dataset_n = _parse_dataset(errs, raw["dataset"])
    elif "dataset" in raw:
        errs.append("dataset: expected an object")
    cfg.schedule = (_parse_schedule(errs, raw["schedule"])
                    if isinstance(raw.get("schedule"), dict) else NoiseSchedule())
    if "schedule" in raw and not isinstance(raw["schedule"], dict):
        errs.append("schedule: expected an object")
    if isinstance(raw.get("model"), dict):
        cfg.model = _parse_model(errs, raw["model"])
    elif "model" in raw:
        errs.append("model: expected an object")
    if isinstance(raw.get("train"), dict):
        cfg.train = _parse_train(errs, raw["train"], cfg.seed or 0)
    elif "train" in raw:
        errs.append("train: expected an object")
    if isinstance(raw.get("samplers"), list):
        cfg.samplers = _parse_samplers(errs, raw["samplers"])
    elif "samplers" in raw:
        errs.append("samplers: expected a list")
    if isinstance(raw.get("tid"), dict):
        _unknown(errs, "tid.", raw["tid"], _TID_KEYS)
        cfg.tid = raw["tid"]
        if not isinstance(cfg.tid.get("epsilons"), list) or not cfg.tid["epsilons"]:
            errs.append("tid.epsilons: must be a nonempty list")
        if cfg.tid.get("convention", "reciprocal") not in ("reciprocal", "raw"):
            errs.append("tid.convention: must be 'reciprocal' or 'raw'")
    elif "tid" in raw:
        errs.append("tid: expected an object")
    if isinstance(raw.get("diagnostics"), dict):
        _unknown(errs, "diagnostics.", raw["diagnostics"], _DIAG_KEYS)
        cfg.diagnostics = raw["diagnostics"]
    elif "diagnostics" in raw:
        errs.append("diagnostics: expected an object")
    if isinstance(raw.get("seesaw"), dict):
        _unknown(errs, "seesaw.", raw["seesaw"], _SEESAW_KEYS)
        obj = raw["seesaw"]
        if "p_values" in obj:
            if not isinstance(obj["p_values"], list) or not all(
                    isinstance(p, int) and p >= 1 for p in obj["p_values"]):
                errs.append("seesaw.p_values: must be a list of positive ints")
            else:
                cfg.seesaw_p = obj["p_values"]
        elif "p_max" in obj:
            if not isinstance(obj["p_max"], int) or obj["p_max"] < 1:
                errs.append("seesaw.p_max: must be a positive int")
            else:
                cfg.seesaw_p = list(range(1, obj["p_max"] + 1))
        else:
            errs.append("seesaw: need p_max or p_values")
    elif "seesaw" in raw:
        errs.append("seesaw: expected an object")

    # Cross-stage requirements.
    if cfg.samplers and cfg.score_source == "model" and cfg.model is None:
        errs.append("samplers: score_source 'model' requires a model section")
    if cfg.model is not None and cfg.train is not None and cfg.dataset is None:
        errs.append("train: requires a dataset section")
    if cfg.tid is not None and not cfg.samplers:
        errs.append("tid: requires a samplers section")
    if cfg.score_source == "oracle" and cfg.dataset is not None \
            and cfg.dataset.variant not in ("mognd", "mog1d", "mog2d"):
        errs.append("score_source: 'oracle' requires a mog-family dataset")
    if errs:
        raise ConfigError("invalid config:\n  " + "\n  ".join(sorted(errs)))
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return parse_config(raw)
