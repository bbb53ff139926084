"""``mvtrust`` command line.

Exit codes: 0 success, 2 configuration error, 3 data/checkpoint error,
4 numerical divergence during training.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import pipeline
from .config import ConfigError, ExperimentConfig, load_config
from .data import DataError
from .network import NumericalDivergence

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGENCE = 0, 2, 3, 4

# flag name -> dotted config field
_FIELD_FLAGS = {
    "manifest": "data.manifest",
    "train_fraction": "data.train_fraction",
    "hidden": "network.hidden",
    "epochs": "network.epochs",
    "lr": "network.lr",
    "batch_size": "network.batch_size",
    "optimizer": "network.optimizer",
    "anneal_epochs": "loss.anneal_epochs",
    "per_view_loss": "loss.per_view_loss",
    "reduction": "loss.reduction",
    "n_neighbors": "oversample.n_neighbors",
    "target": "oversample.target",
    "ablation": "oversample.ablation",
    "warm_start": "oversample.warm_start",
    "eta": "long_tail.eta",
    "decay_form": "long_tail.decay_form",
    "long_tail": "long_tail.enabled",
    "noise": "noise.kind",
    "sigma": "noise.sigma",
    "fraction": "noise.fraction",
    "seed": "seed",
    "report_dir": "report_dir",
}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("experiment config (override --config)")
    g.add_argument("--config", help="JSON config file")
    g.add_argument("--manifest", help="dataset manifest (JSON)")
    g.add_argument("--train-fraction", type=float)
    g.add_argument("--seed", type=int)
    g.add_argument("--hidden", type=int)
    g.add_argument("--epochs", type=int)
    g.add_argument("--lr", type=float)
    g.add_argument("--batch-size", type=int)
    g.add_argument("--optimizer", choices=["adam", "sgd"])
    g.add_argument("--anneal-epochs", type=int)
    g.add_argument("--per-view-loss", action=argparse.BooleanOptionalAction, default=None)
    g.add_argument("--reduction", choices=["mean", "sum"])
    g.add_argument("--n-neighbors", "-R", type=int)
    g.add_argument("--target", help="'max' or an integer class size")
    g.add_argument("--ablation", choices=["full", "v1-no-oversample", "v2-random-weights"])
    g.add_argument("--warm-start", action=argparse.BooleanOptionalAction, default=None)
    g.add_argument("--eta", type=float)
    g.add_argument("--decay-form", choices=["normalized-exponent", "geometric-per-class"])
    g.add_argument("--long-tail", action=argparse.BooleanOptionalAction, default=None)
    g.add_argument("--noise", choices=["none", "gaussian", "conflictive"])
    g.add_argument("--sigma", type=float)
    g.add_argument("--fraction", type=float)
    g.add_argument("--report-dir", help="defaults to $MVTRUST_REPORT_DIR, then ./reports")
    g.add_argument("--report", help="report path (defaults to <report-dir>/<command>-seed<seed>.json)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mvtrust", description="Trusted multi-view long-tailed classification.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="phase-1 training on the long-tailed training split")
    _add_config_flags(p)
    p.add_argument("--checkpoint", required=True, help="output checkpoint (.npz)")

    p = sub.add_parser("oversample-retrain", help="balance with pseudo-samples and retrain")
    _add_config_flags(p)
    p.add_argument("--checkpoint", required=True, help="phase-1 checkpoint")
    p.add_argument("--out-checkpoint", required=True)
    p.add_argument("--export-dir", help="write pseudo-samples and provenance here")

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on clean or noisy test data")
    _add_config_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--subset", choices=["test", "train", "all"], default="test")

    p = sub.add_parser("sweep", help="full pipeline for each value of R or eta")
    _add_config_flags(p)
    p.add_argument("--param", required=True, choices=sorted(pipeline.SWEEP_PARAMS))
    p.add_argument("--values", required=True, nargs="+", type=float)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("dump-evidence", help="export joint evidence, labels and uncertainty as CSV")
    _add_config_flags(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--subset", choices=["test", "train", "all"], default="all")

    p = sub.add_parser("make-fixture", help="write a synthetic Gaussian multi-view dataset")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--classes", type=int, default=6)
    p.add_argument("--views", type=int, default=3)
    p.add_argument("--counts", type=int, nargs="+", default=[100])
    p.add_argument("--separation", type=float, default=3.0)
    p.add_argument("--dims", type=int, nargs="+", default=[8])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--name", default="fixture")
    return parser


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {field: getattr(args, flag) for flag, field in _FIELD_FLAGS.items()}
    if overrides["data.manifest"] is not None:
        overrides["data.manifest"] = str(Path(overrides["data.manifest"]))
    try:
        return cfg.override(overrides)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _report_path(args, cfg: ExperimentConfig) -> Path:
    if args.report:
        return Path(args.report)
    suffix = "" if cfg.noise.kind == "none" or args.command != "evaluate" else f"-{cfg.noise.kind}"
    return cfg.resolved_report_dir() / f"{args.command}{suffix}-seed{cfg.seed}.json"


def _print_summary(report: dict) -> None:
    if report["command"] == "sweep":
        param = report["parameter"]
        cols = (param, "status", "phase1_accuracy", "accuracy", "head", "medium", "tail", "mean_u", "pseudo")
        print(pipeline.format_table(report["rows"], cols))
    else:
        rows = [pipeline.summary_row(key, report[key]) for key in ("phase1", "phase2", "metrics")
                if key in report]
        print(pipeline.format_table(rows, pipeline.SUMMARY_COLUMNS))
    for notice in report.get("notices", []):
        print(f"notice: {notice}")


def _fixture_counts(values, n):
    if len(values) == 1:
        return values[0]
    if len(values) != n:
        raise ConfigError(f"expected 1 or {n} values, got {len(values)}")
    return values


def run(args) -> int:
    if args.command == "make-fixture":
        path = pipeline.cmd_make_fixture(
            args.out_dir, args.classes, args.views, _fixture_counts(args.counts, args.classes),
            args.separation, _fixture_counts(args.dims, args.views), args.seed, args.name)
        print(path)
        return EXIT_OK
    cfg = resolve_config(args)
    if args.command == "dump-evidence":
        print(pipeline.cmd_dump_evidence(cfg, args.checkpoint, args.out, args.subset))
        return EXIT_OK
    if args.command == "train":
        report = pipeline.cmd_train(cfg, args.checkpoint)
    elif args.command == "oversample-retrain":
        report = pipeline.cmd_oversample_retrain(cfg, args.checkpoint, args.out_checkpoint, args.export_dir)
    elif args.command == "evaluate":
        report = pipeline.cmd_evaluate(cfg, args.checkpoint, args.subset)
    elif args.command == "sweep":
        report = pipeline.cmd_sweep(cfg, args.param, args.values, args.jobs)
    else:  # pragma: no cover - argparse restricts the choices
        raise ConfigError(f"unknown command {args.command}")
    path = pipeline.write_report(report, _report_path(args, cfg))
    _print_summary(report)
    print(f"report: {path}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalDivergence as exc:
        print(f"numerical divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE


if __name__ == "__main__":
    sys.exit(main())
