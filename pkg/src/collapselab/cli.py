"""Command-line entry point.

Subcommands: gen, train, sample, tid, diagnose, seesaw, run. Heavy imports
happen after argument parsing so --threads can pin the BLAS pool before
numpy loads. Exit codes: 0 success, 2 config error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import os
import sys


def _build_parser():
    parser = argparse.ArgumentParser(prog="collapselab", description=__doc__)
    parser.add_argument("--config", help="path to the experiment config JSON")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--threads", type=int, help="BLAS thread count")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, doc in (
        ("gen", "generate the configured dataset to dataset.csv"),
        ("train", "generate data and train the configured model"),
        ("sample", "run the configured samplers"),
        ("diagnose", "run the configured diagnostics"),
        ("run", "run every configured stage"),
    ):
        p = sub.add_parser(name, help=doc)
        if name in ("sample", "diagnose"):
            p.add_argument("--checkpoint", help="model checkpoint JSON to load")

    p = sub.add_parser("tid", help="tail-index difference between two dataset CSVs")
    p.add_argument("--train-csv", required=True)
    p.add_argument("--sampled-csv", required=True)
    p.add_argument("--epsilons", required=True, help="comma-separated radii")
    p.add_argument("--subset", type=int, default=2000)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--convention", choices=("reciprocal", "raw"), default="reciprocal")

    p = sub.add_parser("seesaw", help="closed-form see-saw loss table")
    p.add_argument("--p-max", type=int, default=20)
    return parser


def _configure_threads(threads):
    for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(threads)


def _load_config(args, require=True):
    from .config import load_config
    from .errors import ConfigError

    if not args.config:
        if require:
            raise ConfigError(f"'{args.command}' requires --config")
        return None
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.raw["seed"] = args.seed
        if cfg.train is not None:
            cfg.train.seed = args.seed
    if args.out:
        cfg.out = args.out
    return cfg


def _restrict(cfg, keep):
    """Disable every stage outside ``keep`` (field-level, config untouched)."""
    if "train" not in keep:
        cfg.train = None
        cfg.model = cfg.model if "sample" in keep or "diagnose" in keep else None
    if "sample" not in keep:
        cfg.samplers = []
    if "tid" not in keep:
        cfg.tid = None
    if "diagnose" not in keep:
        cfg.diagnostics = None
    if "seesaw" not in keep:
        cfg.seesaw_p = None
    cfg.plots = cfg.plots and "plots" in keep
    return cfg


def _run_stages(cfg, args, keep, model=None):
    from .experiment import run_experiment

    out = run_experiment(_restrict(cfg, keep), args.out or cfg.out, model=model)
    print(f"artifacts written to {out}")
    return 0


def _cmd_sample_or_diagnose(cfg, args, keep):
    model = None
    if getattr(args, "checkpoint", None):
        from .scorenet import load_checkpoint

        model, _ = load_checkpoint(args.checkpoint)
    return _run_stages(cfg, args, keep, model=model)


def _cmd_tid(args):
    from .core import load_dataset_csv
    from .csvio import write_rows
    from .tid import tid_report

    d_train = load_dataset_csv(args.train_csv)
    d_sampled = load_dataset_csv(args.sampled_csv)
    epsilons = [float(v) for v in args.epsilons.split(",") if v]
    report = tid_report(d_train, d_sampled, epsilons, subset=args.subset,
                        seed=args.seed or 0, dim=args.dim, convention=args.convention)
    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "tid.csv")
    write_rows(path, ["epsilon", "hill_train", "hill_sampled",
                      "alpha_train", "alpha_sampled", "tid"],
               [(float(report.epsilons[i]), float(report.hill_train[i]),
                 float(report.hill_sampled[i]), float(report.alpha_train[i]),
                 float(report.alpha_sampled[i]), float(report.tid[i]))
                for i in range(report.epsilons.size)])
    print(f"wrote {path}")
    return 0


def _cmd_seesaw(args):
    from .csvio import write_rows
    from .seesaw import seesaw_table

    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "seesaw.csv")
    write_rows(path, ["p", "ell1", "ell2"], seesaw_table(range(1, args.p_max + 1)))
    print(f"wrote {path}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.threads:
        _configure_threads(args.threads)
    from .errors import CollapseLabError, ConfigError, ParameterError

    try:
        if args.command == "tid":
            return _cmd_tid(args)
        if args.command == "seesaw":
            return _cmd_seesaw(args)
        cfg = _load_config(args)
        if args.command == "gen":
            return _run_stages(cfg, args, keep={"gen"})
        if args.command == "train":
            return _run_stages(cfg, args, keep={"gen", "train"})
        if args.command == "sample":
            return _cmd_sample_or_diagnose(cfg, args, keep={"gen", "train", "sample", "plots"})
        if args.command == "diagnose":
            return _cmd_sample_or_diagnose(cfg, args, keep={"gen", "train", "diagnose", "plots"})
        return _run_stages(cfg, args, keep={"gen", "train", "sample", "tid",
                                            "diagnose", "seesaw", "plots"})
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CollapseLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
