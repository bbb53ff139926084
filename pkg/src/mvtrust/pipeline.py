"""End-to-end experiment steps shared by the command line and the tests.

Every step is a pure function of its config (including the master seed) and
input files; the only nondeterministic field of a report is ``wall_clock_s``.
"""

from __future__ import annotations

import json
import logging
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import network
from .config import ConfigError, ExperimentConfig
from .data import (DataError, LongTailConfig, MultiViewDataset, apply_normalization, fit_normalization,
                   inject_conflictive, inject_gaussian, load_dataset, make_long_tailed,
                   make_synthetic_fixture, save_dataset, split)
from .metrics import MetricsReport, evaluate_predictions
from .oversample import UncertaintyOversampler

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
_PURPOSES = {"split": 1, "long_tail": 2, "noise": 3}


def derive_seed(seed: int, purpose: str) -> int:
    """Independent integer seed for one randomized step of a run."""
    return int(np.random.SeedSequence([seed, _PURPOSES[purpose]]).generate_state(1)[0])


# ---------------------------------------------------------------- data prep

@dataclass
class Prepared:
    train: MultiViewDataset
    test: MultiViewDataset
    normalization: dict | None
    notices: list = field(default_factory=list)


def load_source(cfg: ExperimentConfig) -> MultiViewDataset:
    if not cfg.data.manifest:
        raise ConfigError("no dataset manifest given (data.manifest / --manifest)")
    return load_dataset(cfg.data.manifest)


def prepare(cfg: ExperimentConfig, source: MultiViewDataset | None = None) -> Prepared:
    """Split, subsample the training part to a long tail, then z-score on the long-tailed training rows."""
    source = load_source(cfg) if source is None else source
    train, test = split(source, cfg.data.train_fraction, derive_seed(cfg.seed, "split"))
    notices = []
    if cfg.long_tail.enabled:
        lt = LongTailConfig(cfg.long_tail.eta, cfg.long_tail.decay_form,
                            derive_seed(cfg.seed, "long_tail"), cfg.long_tail.min_per_class)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            train = make_long_tailed(train, lt)
        notices += [str(w.message) for w in caught]
    stats = None
    if cfg.data.normalize:
        stats = fit_normalization(train)
        train, test = apply_normalization(train, stats), apply_normalization(test, stats)
    return Prepared(train, test, stats, notices)


def normalize_with(ds: MultiViewDataset, stats: dict | None) -> MultiViewDataset:
    return ds if stats is None else apply_normalization(ds, stats)


def apply_noise(ds: MultiViewDataset, cfg: ExperimentConfig) -> MultiViewDataset:
    seed = derive_seed(cfg.seed, "noise")
    if cfg.noise.kind == "gaussian":
        return inject_gaussian(ds, cfg.noise.sigma, seed)
    if cfg.noise.kind == "conflictive":
        return inject_conflictive(ds, cfg.noise.fraction, seed)
    return ds


# ----------------------------------------------------------------- training

def train_networks(cfg: ExperimentConfig, train: MultiViewDataset, start=None):
    nets = start if start is not None else network.init_networks(
        train.dims, cfg.network.hidden, train.n_classes, cfg.seed)
    return network.train(
        nets, train.views, train.labels, train.n_classes, epochs=cfg.network.epochs,
        lr=cfg.network.lr, batch_size=cfg.network.batch_size, optimizer=cfg.network.optimizer,
        anneal_epochs=cfg.loss.anneal_epochs, per_view_loss=cfg.loss.per_view_loss,
        reduction=cfg.loss.reduction, seed=cfg.seed, early_stop=cfg.network.early_stop)


def oversample(cfg: ExperimentConfig, nets, train: MultiViewDataset):
    """Balance ``train`` with pseudo-samples; returns ``(augmented, oversampler or None)``."""
    if cfg.oversample.ablation == "v1-no-oversample":
        return train, None
    weighting = "random" if cfg.oversample.ablation == "v2-random-weights" else "uncertainty"
    evidence = [net.forward(X) for net, X in zip(nets, train.views)]
    sampler = UncertaintyOversampler(n_neighbors=cfg.oversample.n_neighbors, weighting=weighting,
                                     target_count=cfg.oversample.target_count(), random_state=cfg.seed)
    views, labels = sampler.fit_resample(list(train.views), train.labels, evidence)
    return MultiViewDataset(tuple(views), labels, train.n_classes, train.name, train.normalization), sampler


def evaluate(nets, test: MultiViewDataset, train_counts, *, loss_history=(), pseudo_counts=None) -> MetricsReport:
    pred = network.predict(nets, test.views)
    return evaluate_predictions(test.labels, pred.decision, pred.joint.uncertainty, train_counts,
                                loss_history=loss_history, pseudo_counts=pseudo_counts)


@dataclass
class RunResult:
    phase1: list
    phase2: list
    phase1_state: network.TrainState
    phase2_state: network.TrainState | None
    train: MultiViewDataset
    augmented: MultiViewDataset
    sampler: UncertaintyOversampler | None

    @property
    def pseudo_counts(self) -> list[int]:
        if self.sampler is None:
            return [0] * self.train.n_classes
        return self.sampler.n_generated_.tolist()


def run_two_phase(cfg: ExperimentConfig, train: MultiViewDataset, phase1=None, phase1_state=None) -> RunResult:
    """Phase 1 (unless given), oversampling, and retraining when pseudo-samples were added."""
    if phase1 is None:
        phase1, phase1_state = train_networks(cfg, train)
    augmented, sampler = oversample(cfg, phase1, train)
    if augmented.n_samples == train.n_samples:
        return RunResult(phase1, phase1, phase1_state, None, train, augmented, sampler)
    start = phase1 if cfg.oversample.warm_start else None
    phase2, state2 = train_networks(cfg, augmented, start)
    return RunResult(phase1, phase2, phase1_state, state2, train, augmented, sampler)


# ------------------------------------------------------------------ reports

def make_report(command: str, cfg: ExperimentConfig, payload: dict, started: float,
                notices: Sequence[str] = ()) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "notices": list(notices),
        **payload,
        "wall_clock_s": round(time.perf_counter() - started, 3),
    }


def payload_of(report: dict) -> dict:
    """Report without the wall-clock field (the part that must be reproducible)."""
    return {k: v for k, v in report.items() if k != "wall_clock_s"}


def write_report(report: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return path


def _fmt(x) -> str:
    if x is None:
        return "-"
    if isinstance(x, float):
        return f"{x:.4f}"
    return str(x)


def format_table(rows: Sequence[dict], columns: Sequence[str]) -> str:
    cells = [[_fmt(r.get(c)) for c in columns] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths)),
             "  ".join("-" * w for w in widths)]
    lines += ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)


def summary_row(label: str, m: dict) -> dict:
    g = m["group_accuracy"]
    return {"model": label, "accuracy": m["accuracy"], "head": g["head"], "medium": g["medium"],
            "tail": g["tail"], "mean_u": m["mean_uncertainty"], "pseudo": sum(m["pseudo_counts"])}


SUMMARY_COLUMNS = ("model", "accuracy", "head", "medium", "tail", "mean_u", "pseudo")


# ----------------------------------------------------------------- commands

def _checkpoint_meta(cfg: ExperimentConfig, prepared: Prepared, phase: int, state) -> dict:
    return {"phase": phase, "seed": cfg.seed, "config": cfg.to_dict(),
            "normalization": prepared.normalization,
            "train_counts": prepared.train.class_counts().tolist(),
            "loss_history": [float(x) for x in state.loss_history]}


def load_compatible(checkpoint, ds: MultiViewDataset):
    try:
        return network.load_checkpoint(checkpoint, ds.dims, ds.n_classes)
    except FileNotFoundError:
        raise
    except (ValueError, KeyError, OSError) as exc:
        raise DataError(f"checkpoint {checkpoint} is incompatible with the dataset: {exc}") from exc


def cmd_train(cfg: ExperimentConfig, checkpoint) -> dict:
    started = time.perf_counter()
    prepared = prepare(cfg)
    nets, state = train_networks(cfg, prepared.train)
    counts = prepared.train.class_counts()
    metrics = evaluate(nets, prepared.test, counts, loss_history=state.loss_history)
    network.save_checkpoint(checkpoint, nets, _checkpoint_meta(cfg, prepared, 1, state))
    return make_report("train", cfg, {"train_counts": counts.tolist(), "phase1": metrics.to_dict()},
                       started, prepared.notices)


def export_pseudo_data(sampler: UncertaintyOversampler, n_classes: int, directory, name: str = "pseudo") -> Path | None:
    """Write pseudo-samples in the dataset format plus a JSON-lines provenance sidecar."""
    samples = sampler.pseudo_samples_
    if not samples:
        return None
    directory = Path(directory)
    views = tuple(np.vstack([s.views[v] for s in samples]) for v in range(len(samples[0].views)))
    ds = MultiViewDataset(views, np.array([s.label for s in samples]), n_classes, name)
    manifest = save_dataset(ds, directory, name)
    with open(directory / f"{name}_provenance.jsonl", "w") as fh:
        for s in samples:
            fh.write(json.dumps(s.provenance()) + "\n")
    return manifest


def cmd_oversample_retrain(cfg: ExperimentConfig, checkpoint, out_checkpoint, export_dir=None) -> dict:
    started = time.perf_counter()
    prepared = prepare(cfg)
    phase1, meta = load_compatible(checkpoint, prepared.train)
    if meta.get("normalization") != prepared.normalization:
        raise DataError(f"checkpoint {checkpoint} was trained on differently prepared data "
                        "(normalization statistics differ)")
    state1 = network.TrainState(seed=cfg.seed, loss_history=meta.get("loss_history", []))
    result = run_two_phase(cfg, prepared.train, phase1, state1)
    counts = prepared.train.class_counts()
    m1 = evaluate(result.phase1, prepared.test, counts, loss_history=state1.loss_history)
    state2 = result.phase2_state or state1
    m2 = evaluate(result.phase2, prepared.test, counts, loss_history=state2.loss_history,
                  pseudo_counts=result.pseudo_counts)
    network.save_checkpoint(out_checkpoint, result.phase2, _checkpoint_meta(cfg, prepared, 2, state2))
    notices = prepared.notices + (result.sampler.warnings_ if result.sampler else [])
    payload = {"train_counts": counts.tolist(),
               "augmented_counts": result.augmented.class_counts().tolist(),
               "phase1": m1.to_dict(), "phase2": m2.to_dict()}
    if export_dir is not None and result.sampler is not None:
        manifest = export_pseudo_data(result.sampler, prepared.train.n_classes, export_dir)
        payload["pseudo_export"] = None if manifest is None else manifest.name
    return make_report("oversample-retrain", cfg, payload, started, notices)


def _subset(cfg: ExperimentConfig, which: str, stats) -> MultiViewDataset:
    if which == "all":
        return normalize_with(load_source(cfg), stats)
    prepared = prepare(cfg)
    if prepared.normalization != stats:
        # prepare() normalized with freshly fitted stats; redo with the checkpoint's
        source = load_source(cfg)
        train, test = split(source, cfg.data.train_fraction, derive_seed(cfg.seed, "split"))
        return normalize_with(test if which == "test" else train, stats)
    return prepared.test if which == "test" else prepared.train


def cmd_evaluate(cfg: ExperimentConfig, checkpoint, subset: str = "test") -> dict:
    started = time.perf_counter()
    source = load_source(cfg)
    nets, meta = load_compatible(checkpoint, source)
    ds = apply_noise(_subset(cfg, subset, meta.get("normalization")), cfg)
    counts = meta.get("train_counts") or source.class_counts().tolist()
    metrics = evaluate(nets, ds, counts, loss_history=meta.get("loss_history", []))
    return make_report("evaluate", cfg, {"checkpoint_phase": meta.get("phase"), "subset": subset,
                                         "metrics": metrics.to_dict()}, started)


def cmd_dump_evidence(cfg: ExperimentConfig, checkpoint, out, subset: str = "all") -> Path:
    """CSV with ``K`` joint-evidence columns, the label and the joint uncertainty."""
    source = load_source(cfg)
    nets, meta = load_compatible(checkpoint, source)
    ds = _subset(cfg, subset, meta.get("normalization"))
    pred = network.predict(nets, ds.views)
    table = np.column_stack([pred.joint_evidence, ds.labels, pred.joint.uncertainty])
    header = ",".join([f"e{k}" for k in range(ds.n_classes)] + ["label", "uncertainty"])
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fmt = ["%.17g"] * ds.n_classes + ["%d", "%.17g"]
    np.savetxt(out, table, delimiter=",", fmt=fmt, header=header, comments="")
    return out


def _sweep_one(cfg_dict: dict, param: str, value) -> dict:
    cfg = ExperimentConfig.from_dict(cfg_dict)
    row = {param: value}
    try:
        prepared = prepare(cfg)
        result = run_two_phase(cfg, prepared.train)
        counts = prepared.train.class_counts()
        m1 = evaluate(result.phase1, prepared.test, counts)
        m2 = evaluate(result.phase2, prepared.test, counts, pseudo_counts=result.pseudo_counts)
        row.update(status="ok", phase1_accuracy=m1.accuracy, accuracy=m2.accuracy,
                   head=m2.group_accuracy["head"], medium=m2.group_accuracy["medium"],
                   tail=m2.group_accuracy["tail"], mean_u=m2.mean_uncertainty,
                   pseudo=int(sum(result.pseudo_counts)), phase2=m2.to_dict())
    except Exception as exc:  # a failed value is recorded and the sweep moves on
        logger.warning("sweep %s=%s failed: %s", param, value, exc)
        row.update(status=f"error: {type(exc).__name__}: {exc}")
    return row


SWEEP_PARAMS = {"R": "oversample.n_neighbors", "eta": "long_tail.eta"}
ETA_FLOOR = 1e-6


def sweep_values(param: str, values: Sequence) -> tuple[list, list[str]]:
    """Deduplicate (keeping order) and clamp ``eta = 0``; returns values and notices."""
    if param not in SWEEP_PARAMS:
        raise ConfigError(f"sweep parameter must be one of {sorted(SWEEP_PARAMS)}")
    if not values:
        raise ConfigError("sweep needs at least one value")
    notices, out = [], []
    for v in values:
        v = int(v) if param == "R" else float(v)
        if param == "eta" and v <= 0:
            msg = f"eta={v} is undefined for the decay forms; clamped to {ETA_FLOOR}"
            logger.warning(msg)
            notices.append(msg)
            v = ETA_FLOOR
        if v in out:
            notices.append(f"duplicate value {v} dropped")
            continue
        out.append(v)
    return out, notices


def cmd_sweep(cfg: ExperimentConfig, param: str, values: Sequence, jobs: int = 1) -> dict:
    started = time.perf_counter()
    load_source(cfg)  # fail fast on a missing manifest
    values, notices = sweep_values(param, values)
    configs = [cfg.override({SWEEP_PARAMS[param]: v}).to_dict() for v in values]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_one, configs, [param] * len(values), values))
    else:
        rows = [_sweep_one(c, param, v) for c, v in zip(configs, values)]
    return make_report("sweep", cfg, {"parameter": param, "rows": rows}, started, notices)


def cmd_make_fixture(out_dir, n_classes: int, n_views: int, counts, separation: float, dims,
                     seed: int, name: str = "fixture") -> Path:
    ds = make_synthetic_fixture(n_classes, n_views, counts, separation, dims, seed, name)
    return save_dataset(ds, out_dir, name)
