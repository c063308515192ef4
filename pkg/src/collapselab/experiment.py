"""Config-driven experiment runner binding all stages.

Stage seeds are fixed offsets of the global seed so artifacts are
reproducible from (config, seed) alone: dataset and training use the seed
itself, model inits use seed+1 (and seed+2 for the high model of a pair),
sampler i draws from seed+100+i, TID subsets from seed+500, diagnostics from
seed+600.
"""

from __future__ import annotations

import json
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import __version__
from .config import ExperimentConfig, config_hash
from .core import Dataset, gen_dataset, save_dataset_csv
from .csvio import write_rows
from .diagnostics import density_evolution, error_covariance, velocity_grid, velocity_mae
from .errors import StageError
from .mog import mog_spec_for
from .samplers import ModelSource, OracleSource, SamplerConfig, run_sampler
from .scorenet import make_model, save_checkpoint, train, train_two_model
from .seesaw import seesaw_table
from .tid import tid_report
from . import svgplot

_SEED_SAMPLE = 100
_SEED_TID = 500
_SEED_DIAG = 600


def save_trajectory_csv(traj, path, stride: int = 1) -> None:
    """chain,t,dim0,... rows; times thinned by ``stride`` (last time kept)."""
    d = traj.states.shape[2]
    keep = sorted(set(range(0, traj.times.size, stride)) | {traj.times.size - 1})
    rows = []
    for i in keep:
        t = float(traj.times[i])
        for chain in range(traj.states.shape[1]):
            rows.append([chain, t, *map(float, traj.states[i][chain])])
    write_rows(path, ["chain", "t"] + [f"dim{j}" for j in range(d)], rows)


class _Runner:
    def __init__(self, cfg: ExperimentConfig, out_dir):
        self.cfg = cfg
        self.out = out_dir
        self.dataset = None
        self.model = None
        self.samples = {}   # label -> Dataset
        self.timings = {}
        self.artifacts = []

    def path(self, name):
        self.artifacts.append(name)
        return os.path.join(self.out, name)

    def oracle_spec(self):
        if self.cfg.dataset is None:
            raise StageError("diagnose", "no dataset section; the oracle needs a mog dataset")
        return mog_spec_for(self.cfg.dataset)

    def source(self):
        if self.cfg.score_source == "oracle":
            return OracleSource(self.oracle_spec(), self.cfg.schedule)
        if self.model is None:
            raise StageError("sample", "score_source 'model' but no trained model available")
        return ModelSource(self.model, self.cfg.schedule)

    # -- stages ----------------------------------------------------------

    def stage_gen(self):
        cfg = self.cfg
        self.dataset = gen_dataset(cfg.dataset, cfg.dataset_n, cfg.seed)
        save_dataset_csv(self.dataset, self.path("dataset.csv"))

    def stage_train(self):
        cfg = self.cfg
        mc = cfg.model
        d = cfg.dataset.dimension
        if mc.two_model_split is None:
            model = make_model(d, mc.hidden, mc.activation, mc.skip, seed=cfg.seed + 1,
                               dtype=mc.np_dtype, sched=cfg.schedule, swap_fixed=mc.swap_fixed)
            model, losses = train(model, self.dataset, cfg.schedule, cfg.train)
            save_checkpoint(model, self.path("checkpoint.json"), train_seed=cfg.seed)
            write_rows(self.path("loss_history.csv"), ["iter", "loss"],
                       [(i, float(v)) for i, v in enumerate(losses)])
            self.losses = {"model": losses}
        else:
            low = make_model(d, mc.hidden, mc.activation, mc.skip, seed=cfg.seed + 1,
                             dtype=mc.np_dtype, sched=cfg.schedule, swap_fixed=mc.swap_fixed)
            high = make_model(d, mc.hidden, mc.activation, mc.skip, seed=cfg.seed + 2,
                              dtype=mc.np_dtype, sched=cfg.schedule, swap_fixed=mc.swap_fixed)
            model, (l_low, l_high) = train_two_model(low, high, self.dataset, cfg.schedule,
                                                     cfg.train, mc.two_model_split)
            save_checkpoint(model.low, self.path("checkpoint_low.json"), train_seed=cfg.seed)
            save_checkpoint(model.high, self.path("checkpoint_high.json"), train_seed=cfg.seed)
            write_rows(self.path("loss_history_low.csv"), ["iter", "loss"],
                       [(i, float(v)) for i, v in enumerate(l_low)])
            write_rows(self.path("loss_history_high.csv"), ["iter", "loss"],
                       [(i, float(v)) for i, v in enumerate(l_high)])
            self.losses = {"low": l_low, "high": l_high}
        self.model = model

    def stage_sample(self):
        cfg = self.cfg
        src = self.source()
        for i, raw in enumerate(cfg.raw.get("samplers", [])):
            scfg = cfg.samplers[i]
            label = scfg.kind if sum(s.kind == scfg.kind for s in cfg.samplers) == 1 \
                else f"{scfg.kind}{i}"
            record = bool(raw.get("record", False)) if isinstance(raw, dict) else False
            ds, traj = run_sampler(src, cfg.schedule, scfg, cfg.sample_n,
                                   seed=cfg.seed + _SEED_SAMPLE + i, record=record)
            save_dataset_csv(ds, self.path(f"samples_{label}.csv"))
            if traj is not None:
                stride = int(raw.get("record_stride", 1)) if isinstance(raw, dict) else 1
                save_trajectory_csv(traj, self.path(f"trajectory_{label}.csv"), stride)
            self.samples[label] = ds

    def stage_tid(self):
        cfg = self.cfg
        t = cfg.tid
        rows = []
        self.tid_curves = {}
        for label, ds in self.samples.items():
            report = tid_report(
                self.dataset, ds, t["epsilons"], subset=t.get("subset", 2000),
                seed=cfg.seed + _SEED_TID, dim=t.get("dim"),
                convention=t.get("convention", "reciprocal"), k=t.get("k"),
            )
            self.tid_curves[label] = report
            for j, eps in enumerate(report.epsilons):
                rows.append([label, float(eps), float(report.hill_train[j]),
                             float(report.hill_sampled[j]), float(report.alpha_train[j]),
                             float(report.alpha_sampled[j]), float(report.tid[j])])
        write_rows(self.path("tid.csv"),
                   ["sampler", "epsilon", "hill_train", "hill_sampled",
                    "alpha_train", "alpha_sampled", "tid"], rows)

    def stage_diagnose(self):
        cfg = self.cfg
        diag = cfg.diagnostics
        oracle = OracleSource(self.oracle_spec(), cfg.schedule)
        src = self.source()
        seed = cfg.seed + _SEED_DIAG
        if diag.get("velocity_mae_ts"):
            pts = int(diag.get("mae_points", 2000))
            rows = [(float(t), velocity_mae(src, oracle, cfg.schedule, float(t), pts, seed))
                    for t in diag["velocity_mae_ts"]]
            write_rows(self.path("mae.csv"), ["t", "mae"], rows)
            self.mae_rows = rows
        if diag.get("error_covariance"):
            ec = diag["error_covariance"]
            rows = []
            self.errcov_curves = {}
            for kind in ec.get("samplers", ["ode", "sde"]):
                times, c = error_covariance(src, oracle, cfg.schedule,
                                            int(ec.get("steps", 100)),
                                            int(ec.get("chains", 1000)), kind, seed)
                self.errcov_curves[kind] = (times, c)
                rows += [(kind, float(t), float(v)) for t, v in zip(times, c)]
            write_rows(self.path("errcov.csv"), ["sampler", "t", "c"], rows)
        if diag.get("density_evolution"):
            de = diag["density_evolution"]
            scfg = SamplerConfig(kind=de.get("sampler", "ode"), steps=int(de.get("steps", 100)))
            _, traj = run_sampler(src, cfg.schedule, scfg, int(de.get("chains", 5000)),
                                  seed=seed + 1, record=True)
            centers, hist = density_evolution(traj, int(de.get("dim", 0)),
                                              int(de.get("bins", 100)),
                                              tuple(de.get("range", [-3.0, 3.0])))
            rows = [(float(t), float(c), float(hist[i, j]))
                    for i, t in enumerate(traj.times) for j, c in enumerate(centers)]
            write_rows(self.path("density.csv"), ["t", "bin_center", "density"], rows)
            self.density = (centers, traj.times, hist)
        if diag.get("velocity_grid"):
            vg = diag["velocity_grid"]
            xs, ts, grid = velocity_grid(src, cfg.schedule, int(vg.get("dim", 0)),
                                         tuple(vg.get("x_range", [-3.0, 3.0])),
                                         tuple(vg.get("t_range", [0.0, 1.0])),
                                         tuple(vg.get("resolution", [40, 40])), seed=seed + 2)
            rows = [(float(x), float(t), float(grid[i, j]))
                    for i, t in enumerate(ts) for j, x in enumerate(xs)]
            write_rows(self.path("velocity_grid.csv"), ["x", "t", "v"], rows)
            self.vgrid = (xs, ts, grid)

    def stage_seesaw(self):
        rows = seesaw_table(self.cfg.seesaw_p)
        write_rows(self.path("seesaw.csv"), ["p", "ell1", "ell2"], rows)
        self.seesaw_rows = rows

    def stage_plots(self):
        if hasattr(self, "losses"):
            series = [(name, np.arange(len(v)), v) for name, v in self.losses.items()]
            svgplot.line_plot(series, self.path("loss_history.svg"),
                              "training loss", "iteration", "loss")
        for label, ds in self.samples.items():
            if len(ds) and ds.dim >= 2:
                svgplot.scatter_plot([(label, ds.points[:, 0], ds.points[:, 1])],
                                     self.path(f"samples_{label}.svg"),
                                     f"samples ({label})", "dim0", "dim1")
        if hasattr(self, "tid_curves"):
            series = [(label, r.epsilons, r.tid) for label, r in self.tid_curves.items()]
            svgplot.line_plot(series, self.path("tid.svg"), "tail index difference",
                              "epsilon", "tid")
        if hasattr(self, "mae_rows"):
            xs = [r[0] for r in self.mae_rows]
            ys = [r[1] for r in self.mae_rows]
            svgplot.scatter_plot([("mae", xs, ys)], self.path("mae.svg"),
                                 "velocity MAE", "t", "mae")
        if hasattr(self, "errcov_curves"):
            series = [(k, t, c) for k, (t, c) in self.errcov_curves.items()]
            svgplot.line_plot(series, self.path("errcov.svg"),
                              "velocity-error covariance", "t", "c(t)")
        if hasattr(self, "density"):
            centers, times, hist = self.density
            svgplot.heatmap(centers, times, hist, self.path("density.svg"),
                            "density evolution", "x", "t")
        if hasattr(self, "vgrid"):
            xs, ts, grid = self.vgrid
            svgplot.heatmap(xs, ts, grid, self.path("velocity_grid.svg"),
                            "velocity field", "x", "t")
        if hasattr(self, "seesaw_rows"):
            ps = [r[0] for r in self.seesaw_rows]
            svgplot.line_plot([("ell1", ps, [r[1] for r in self.seesaw_rows]),
                               ("ell2", ps, [r[2] for r in self.seesaw_rows])],
                              self.path("seesaw.svg"), "see-saw losses", "p", "loss")


def run_experiment(cfg: ExperimentConfig, out_dir=None, model=None) -> str:
    """Run every configured stage; returns the artifact directory.

    ``model`` (e.g. loaded from a checkpoint) replaces the train stage.
    """
    out = out_dir or cfg.out
    if not out:
        raise StageError("setup", "no output directory configured")
    os.makedirs(out, exist_ok=True)
    lock = os.path.join(out, ".lock")
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise StageError("setup", f"{out} is locked by another experiment (remove {lock})")
    os.write(fd, str(os.getpid()).encode())
    os.close(fd)
    runner = _Runner(cfg, out)
    runner.model = model
    stages = []
    if cfg.dataset is not None:
        stages.append(("gen", runner.stage_gen))
    if model is None and cfg.model is not None and cfg.train is not None:
        stages.append(("train", runner.stage_train))
    if cfg.samplers:
        stages.append(("sample", runner.stage_sample))
    if cfg.tid is not None:
        stages.append(("tid", runner.stage_tid))
    if cfg.diagnostics is not None:
        stages.append(("diagnose", runner.stage_diagnose))
    if cfg.seesaw_p is not None:
        stages.append(("seesaw", runner.stage_seesaw))
    if cfg.plots:
        stages.append(("plots", runner.stage_plots))
    t_total = time.perf_counter()
    try:
        for name, fn in stages:
            t0 = time.perf_counter()
            try:
                fn()
            except StageError:
                raise
            except Exception as exc:
                raise StageError(name, str(exc)) from exc
            runner.timings[name] = time.perf_counter() - t0
        manifest = {
            "config": cfg.raw,
            "config_hash": config_hash(cfg.raw),
            "seed": cfg.seed,
            "versions": {
                "collapselab": __version__,
                "numpy": np.__version__,
                "python": sys.version.split()[0],
            },
            "wall_clock_s": {**runner.timings, "total": time.perf_counter() - t_total},
            "artifacts": runner.artifacts,
        }
        with open(os.path.join(out, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2)
    finally:
        os.unlink(lock)
    return out
