"""Multi-view datasets: on-disk format, splits, long-tail subsampling, noise.

On disk a dataset is a JSON manifest::

    {"name": ..., "K": 10, "V": 2,
     "views": [{"path": "view0.csv", "dim": 4}, ...],
     "labels_path": "labels.csv",
     "normalization": {"mean": [[...], ...], "std": [[...], ...]}}   # optional

Matrix files are comma-delimited, one row per sample, no header.  Paths are
resolved relative to the manifest.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)


class DataError(ValueError):
    """Malformed or inconsistent dataset files."""


@dataclass(frozen=True)
class MultiViewDataset:
    views: tuple
    labels: np.ndarray
    n_classes: int
    name: str = "dataset"
    normalization: dict | None = None

    def __post_init__(self):
        views = tuple(np.asarray(X, dtype=np.float64) for X in self.views)
        labels = np.asarray(self.labels, dtype=np.int64)
        if not views:
            raise DataError("dataset needs at least one view")
        if labels.ndim != 1:
            raise DataError("labels must be one-dimensional")
        for v, X in enumerate(views):
            if X.ndim != 2:
                raise DataError(f"view {v} must be a 2-D matrix, got shape {X.shape}")
            if X.shape[0] != labels.shape[0]:
                raise DataError(f"view {v} has {X.shape[0]} rows but there are {labels.shape[0]} labels")
            if not np.all(np.isfinite(X)):
                row = int(np.argwhere(~np.isfinite(X))[0, 0])
                raise DataError(f"view {v} has a non-finite value in row {row}")
        if self.n_classes < 2:
            raise DataError("need at least two classes")
        bad = np.flatnonzero((labels < 0) | (labels >= self.n_classes))
        if bad.size:
            raise DataError(f"label {labels[bad[0]]} in row {bad[0]} outside [0, {self.n_classes})")
        for X in views:
            X.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "views", views)
        object.__setattr__(self, "labels", labels)

    @property
    def n_samples(self) -> int:
        return self.labels.shape[0]

    @property
    def n_views(self) -> int:
        return len(self.views)

    @property
    def dims(self) -> list[int]:
        return [X.shape[1] for X in self.views]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def subset(self, idx) -> "MultiViewDataset":
        idx = np.asarray(idx)
        return replace(self, views=tuple(X[idx] for X in self.views), labels=self.labels[idx])

    def concat(self, views, labels) -> "MultiViewDataset":
        return replace(self, views=tuple(np.vstack([X, np.asarray(A, dtype=np.float64).reshape(-1, X.shape[1])])
                                         for X, A in zip(self.views, views)),
                       labels=np.concatenate([self.labels, np.asarray(labels, dtype=np.int64)]))


# ---------------------------------------------------------------- file format

def _read_matrix(path: Path) -> np.ndarray:
    try:
        M = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    return M


def load_dataset(manifest_path) -> MultiViewDataset:
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text())
    except FileNotFoundError:
        raise
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot parse manifest {manifest_path}: {exc}") from exc
    root = manifest_path.parent
    try:
        n_classes = int(manifest["K"])
        entries = manifest["views"]
        labels_path = root / manifest["labels_path"]
    except KeyError as exc:
        raise DataError(f"manifest {manifest_path} is missing field {exc}") from exc
    if "V" in manifest and int(manifest["V"]) != len(entries):
        raise DataError(f"manifest says V={manifest['V']} but lists {len(entries)} views")
    views = []
    for v, entry in enumerate(entries):
        X = _read_matrix(root / entry["path"])
        if "dim" in entry and X.shape[1] != int(entry["dim"]):
            raise DataError(f"{entry['path']}: expected {entry['dim']} columns, found {X.shape[1]}")
        views.append(X)
    labels_raw = _read_matrix(labels_path).ravel()
    if not np.all(labels_raw == np.round(labels_raw)):
        raise DataError(f"{labels_path}: labels must be integers")
    return MultiViewDataset(tuple(views), labels_raw.astype(np.int64), n_classes,
                            name=manifest.get("name", manifest_path.stem),
                            normalization=manifest.get("normalization"))


def save_dataset(ds: MultiViewDataset, directory, name: str | None = None) -> Path:
    """Write matrices and a manifest; values are stored with 17 significant digits (bit-exact)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    name = name or ds.name
    views = []
    for v, X in enumerate(ds.views):
        fname = f"{name}_view{v}.csv"
        np.savetxt(directory / fname, X, delimiter=",", fmt="%.17g")
        views.append({"path": fname, "dim": int(X.shape[1])})
    labels_name = f"{name}_labels.csv"
    np.savetxt(directory / labels_name, ds.labels, fmt="%d")
    manifest = {"name": name, "K": ds.n_classes, "V": ds.n_views, "views": views,
                "labels_path": labels_name}
    if ds.normalization is not None:
        manifest["normalization"] = ds.normalization
    path = directory / f"{name}.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path


# ------------------------------------------------------------- normalisation

def fit_normalization(ds: MultiViewDataset) -> dict:
    """Per-view z-score statistics from the rows of ``ds``; constant columns get std 1."""
    mean = [X.mean(axis=0).tolist() for X in ds.views]
    std = []
    for X in ds.views:
        s = X.std(axis=0)
        std.append(np.where(s > 0, s, 1.0).tolist())
    return {"mean": mean, "std": std}


def apply_normalization(ds: MultiViewDataset, stats: dict) -> MultiViewDataset:
    views = tuple((X - np.asarray(m)) / np.asarray(s)
                  for X, m, s in zip(ds.views, stats["mean"], stats["std"]))
    return replace(ds, views=views, normalization=stats)


# -------------------------------------------------------------------- splits

def split(ds: MultiViewDataset, train_fraction: float = 0.8,
          seed: int = 0) -> tuple[MultiViewDataset, MultiViewDataset]:
    """Stratified split: ``round(fraction * n_k)`` training rows from each class."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for k in range(ds.n_classes):
        members = np.flatnonzero(ds.labels == k)
        if members.size == 0:
            continue
        if members.size < 2:
            raise DataError(f"class {k} has fewer than 2 samples; cannot split")
        members = rng.permutation(members)
        n_train = int(np.clip(round(train_fraction * members.size), 1, members.size - 1))
        train_idx.append(members[:n_train])
        test_idx.append(members[n_train:])
    return ds.subset(np.sort(np.concatenate(train_idx))), ds.subset(np.sort(np.concatenate(test_idx)))


# --------------------------------------------------------------- long tail

@dataclass(frozen=True)
class LongTailConfig:
    eta: float = 0.3
    decay_form: str = "normalized-exponent"
    seed: int = 0
    min_per_class: int = 2

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise ValueError("eta must lie in (0, 1]")
        if self.decay_form not in ("normalized-exponent", "geometric-per-class"):
            raise ValueError(f"unknown decay form {self.decay_form!r}")


def retention_probabilities(n_classes: int, eta: float, decay_form: str = "normalized-exponent") -> np.ndarray:
    """``eta ** (k / (K - 1))`` (normalized-exponent) or ``eta ** k`` (geometric-per-class)."""
    k = np.arange(n_classes, dtype=np.float64)
    if decay_form == "normalized-exponent":
        return eta ** (k / (n_classes - 1))
    if decay_form == "geometric-per-class":
        return eta ** k
    raise ValueError(f"unknown decay form {decay_form!r}")


def make_long_tailed(ds: MultiViewDataset, cfg: LongTailConfig) -> MultiViewDataset:
    """Keep each class-``k`` row independently with probability ``P_d(k)``.

    With ``cfg.min_per_class > 0`` a class that falls below that many
    survivors is topped up from its dropped rows (chosen at random).
    """
    p = retention_probabilities(ds.n_classes, cfg.eta, cfg.decay_form)
    rng = np.random.default_rng(cfg.seed)
    keep = rng.random(ds.n_samples) < p[ds.labels]
    for k in range(ds.n_classes):
        members = np.flatnonzero(ds.labels == k)
        kept = int(keep[members].sum())
        if members.size and kept == 0:
            warnings.warn(f"long-tail subsampling emptied class {k}", RuntimeWarning, stacklevel=2)
        need = min(cfg.min_per_class, members.size) - kept
        if need > 0:
            dropped = members[~keep[members]]
            keep[rng.choice(dropped, size=need, replace=False)] = True
    return ds.subset(np.flatnonzero(keep))


# --------------------------------------------------------------------- noise

@dataclass(frozen=True)
class NoiseConfig:
    kind: str = "none"
    sigma: float = 0.0
    fraction: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("none", "gaussian", "conflictive"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if not 0 <= self.fraction <= 1:
            raise ValueError("fraction must lie in [0, 1]")


def inject_gaussian(ds: MultiViewDataset, sigma: float, seed: int = 0) -> MultiViewDataset:
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0:
        return ds
    rng = np.random.default_rng(seed)
    return replace(ds, views=tuple(X + rng.normal(0.0, sigma, X.shape) for X in ds.views))


def inject_conflictive(ds: MultiViewDataset, fraction: float = 1.0, seed: int = 0,
                       return_record: bool = False):
    """Swap one random view of ``floor(fraction * N)`` samples with that view of a different-class sample.

    With ``return_record`` also returns ``(sample, view, donor)`` triples.
    """
    if not 0 <= fraction <= 1:
        raise ValueError("fraction must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    n = ds.n_samples
    chosen = np.sort(rng.choice(n, size=int(np.floor(fraction * n)), replace=False))
    views = [X.copy() for X in ds.views]
    record = []
    for i in chosen:
        donors = np.flatnonzero(ds.labels != ds.labels[i])
        if donors.size == 0:
            continue
        v = int(rng.integers(ds.n_views))
        j = int(rng.choice(donors))
        views[v][i] = ds.views[v][j]
        record.append((int(i), v, j))
    out = replace(ds, views=tuple(views))
    return (out, record) if return_record else out


def inject_noise(ds: MultiViewDataset, cfg: NoiseConfig) -> MultiViewDataset:
    if cfg.kind == "gaussian":
        return inject_gaussian(ds, cfg.sigma, cfg.seed)
    if cfg.kind == "conflictive":
        return inject_conflictive(ds, cfg.fraction, cfg.seed)
    return ds


# ------------------------------------------------------------------ fixture

def make_synthetic_fixture(n_classes: int, n_views: int, counts: Sequence[int] | int,
                           separation: float = 3.0, dims: Sequence[int] | int = 8,
                           seed: int = 0, name: str = "fixture") -> MultiViewDataset:
    """Gaussian blobs (unit variance) whose class means differ per view.

    Class means sit on scaled orthonormal directions, so any two class means
    of a view are exactly ``separation`` apart when ``dim >= n_classes``.
    """
    counts = [int(counts)] * n_classes if np.isscalar(counts) else [int(c) for c in counts]
    dims = [int(dims)] * n_views if np.isscalar(dims) else [int(d) for d in dims]
    if len(counts) != n_classes or len(dims) != n_views:
        raise ValueError("counts/dims length mismatch")
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(n_classes), counts)
    views = []
    for d in dims:
        if d >= n_classes:
            q, _ = np.linalg.qr(rng.normal(size=(d, n_classes)))
            dirs = q.T
        else:
            dirs = rng.normal(size=(n_classes, d))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        means = dirs * (separation / np.sqrt(2.0))
        views.append(means[labels] + rng.normal(size=(labels.size, d)))
    return MultiViewDataset(tuple(views), labels, n_classes, name=name)
