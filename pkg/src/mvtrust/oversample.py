"""Uncertainty-guided multi-view SMOTE.

Neighbours are found in joint-evidence space, so all views agree on which
samples are neighbours.  A pseudo-sample is a per-view convex combination of
a centre and its ``R`` neighbours; the per-view weights come from the
uncertainty entropy of the centre's evidence integrated with each
neighbour's evidence, passed through a decreasing transform (``1/x``).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .opinion import Opinion, check_evidence, opinion_from_evidence, project
from .validation import check_labels, check_views

logger = logging.getLogger(__name__)

ENTROPY_FLOOR = 1e-8


class InsufficientSamples(ValueError):
    """A class has too few real samples for the requested neighbourhood."""


class NeighborSet(NamedTuple):
    center: int
    indices: np.ndarray
    distances: np.ndarray


@dataclass(frozen=True)
class PseudoSample:
    views: tuple
    label: int
    center: int
    neighbors: tuple
    weights: tuple

    def provenance(self) -> dict:
        return {"label": self.label, "center": self.center, "neighbors": list(self.neighbors),
                "weights": [list(map(float, w)) for w in self.weights]}


def inverse(x):
    return 1.0 / x


def evidence_distance(e_i, e_j) -> float:
    e_i = check_evidence(e_i)
    e_j = check_evidence(e_j, e_i.shape[-1])
    return float(np.sqrt(np.sum((e_i - e_j) ** 2)))


def find_neighbors(center: int, class_pool: Sequence[int], joint_evidence: np.ndarray,
                   n_neighbors: int) -> NeighborSet:
    """The ``n_neighbors`` pool members closest to ``center`` in joint evidence; ties go to the lower id."""
    pool = np.asarray(class_pool, dtype=np.int64)
    if center not in pool:
        raise ValueError(f"center {center} is not in the class pool")
    others = np.sort(pool[pool != center])
    if n_neighbors < 1:
        raise ValueError("n_neighbors must be >= 1")
    if n_neighbors > others.size:
        raise InsufficientSamples(f"need {n_neighbors} neighbours but only {others.size} class-mates")
    diff = joint_evidence[others] - joint_evidence[center]
    dist = np.sqrt(np.sum(diff * diff, axis=1))
    order = np.lexsort((others, dist))[:n_neighbors]
    return NeighborSet(int(center), others[order], dist[order])


def integrate_evidence(e_c, e_r) -> np.ndarray:
    return 0.5 * np.asarray(e_c, dtype=np.float64) + 0.5 * np.asarray(e_r, dtype=np.float64)


def uncertainty_entropy(o: Opinion, y) -> np.ndarray:
    """``-exp(u) * sum_k y_k log(b_k + u a_k)``."""
    y = np.asarray(y, dtype=np.float64)
    p = project(o)
    p_true = np.sum(y * p, axis=-1)
    if np.any(p_true <= 0):
        raise ValueError("projected probability of the true class must be positive")
    out = -np.exp(o.uncertainty) * np.log(p_true)
    return out if np.ndim(out) else float(out)


def weights_from_entropies(entropies, transform: Callable = inverse,
                           floor: float = ENTROPY_FLOOR) -> np.ndarray:
    """Normalise ``F(H)`` over ``[H_c, H_c1, ..., H_cR]``."""
    f = transform(np.maximum(np.asarray(entropies, dtype=np.float64), floor))
    return f / f.sum()


def neighbor_weights(neighbors: NeighborSet, view_evidence: np.ndarray, y,
                     transform: Callable = inverse, floor: float = ENTROPY_FLOOR,
                     base_rates=None) -> np.ndarray:
    """Weights ``w_0..w_R`` for one view.

    Slot 0 is the centre itself, scored from its own evidence (equal to the
    centre integrated with itself); slot ``r`` scores the centre integrated
    with neighbour ``r``.
    """
    e_c = view_evidence[neighbors.center]
    members = np.concatenate([[neighbors.center], neighbors.indices])
    integrated = integrate_evidence(e_c[None, :], view_evidence[members])
    h = uncertainty_entropy(opinion_from_evidence(integrated, base_rates), np.broadcast_to(y, integrated.shape))
    return weights_from_entropies(h, transform, floor)


def random_weights_ablation(n_neighbors: int, rng: np.random.Generator | int) -> np.ndarray:
    """``R + 1`` weights drawn uniformly on the simplex (normalised exponentials)."""
    if n_neighbors < 1:
        raise ValueError("n_neighbors must be >= 1")
    rng = np.random.default_rng(rng)
    g = rng.exponential(size=n_neighbors + 1)
    return g / g.sum()


def synthesize(neighbors: NeighborSet, weights: Sequence[np.ndarray], views: Sequence[np.ndarray],
               label: int) -> PseudoSample:
    """Per-view convex combination ``w_0 x_c + sum_r w_r x_r``."""
    members = np.concatenate([[neighbors.center], neighbors.indices])
    out = []
    for X, w in zip(views, weights):
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (members.size,) or np.any(w < 0) or not np.isclose(w.sum(), 1.0, atol=1e-9):
            raise ValueError("weights must be a probability vector over centre and neighbours")
        out.append(w @ X[members])
    return PseudoSample(tuple(out), int(label), neighbors.center,
                        tuple(int(i) for i in neighbors.indices), tuple(np.asarray(w) for w in weights))


def class_rng(seed: int, label: int, stream: int) -> np.random.Generator:
    """Independent stream per (seed, class, purpose); parallel balancing gives identical output."""
    return np.random.default_rng([seed, label, stream])


@dataclass
class BalanceResult:
    samples: list = field(default_factory=list)
    warnings: list = field(default_factory=list)


def balance_class(views: Sequence[np.ndarray], labels: np.ndarray, label: int, target_count: int,
                  view_evidence: Sequence[np.ndarray], joint_evidence: np.ndarray, *,
                  n_neighbors: int = 3, weighting: str = "uncertainty", transform: Callable = inverse,
                  seed: int = 0, floor: float = ENTROPY_FLOOR) -> BalanceResult:
    """Generate pseudo-samples until class ``label`` has ``target_count`` members.

    Centres are drawn uniformly from the real members of the class; pseudo
    samples are never reused as centres or neighbours.
    """
    if weighting not in ("uncertainty", "random"):
        raise ValueError(f"unknown weighting {weighting!r}")
    result = BalanceResult()
    pool = np.flatnonzero(labels == label)
    need = target_count - pool.size
    if need <= 0:
        return result
    if pool.size < 2:
        raise InsufficientSamples(f"class {label} has {pool.size} sample(s); cannot oversample")
    r = n_neighbors
    if r > pool.size - 1:
        r = pool.size - 1
        msg = f"class {label}: reduced R from {n_neighbors} to {r} ({pool.size} samples)"
        logger.warning(msg)
        result.warnings.append(msg)
    n_classes = joint_evidence.shape[1]
    y = np.eye(n_classes)[label]
    centre_rng = class_rng(seed, label, 0)
    weight_rng = class_rng(seed, label, 1)
    cache: dict[int, NeighborSet] = {}
    for _ in range(need):
        c = int(centre_rng.choice(pool))
        if c not in cache:
            cache[c] = find_neighbors(c, pool, joint_evidence, r)
        nb = cache[c]
        if weighting == "uncertainty":
            w = [neighbor_weights(nb, E, y, transform, floor) for E in view_evidence]
        else:
            w = [random_weights_ablation(r, weight_rng) for _ in view_evidence]
        result.samples.append(synthesize(nb, w, views, label))
    return result


class UncertaintyOversampler(BaseEstimator):
    """Balance every class by uncertainty-weighted multi-view interpolation.

    Parameters
    ----------
    n_neighbors : int
        Neighbours per centre (``R``).
    weighting : {"uncertainty", "random"}
        ``"random"`` replaces the entropy-based weights by uniform simplex
        draws (ablation).
    target_count : int or None
        Class size to reach; defaults to the largest class.
    random_state : int
    """

    def __init__(self, n_neighbors=3, weighting="uncertainty", target_count=None, random_state=0,
                 entropy_floor=ENTROPY_FLOOR):
        self.n_neighbors = n_neighbors
        self.weighting = weighting
        self.target_count = target_count
        self.random_state = random_state
        self.entropy_floor = entropy_floor

    def fit_resample(self, X, y, view_evidence):
        """Return ``(views, labels)`` with pseudo-samples appended.

        ``view_evidence`` holds one ``(N, K)`` evidence matrix per view,
        computed by a model trained on ``(X, y)``.
        """
        views = check_views(X)
        y = check_labels(y, views[0].shape[0])
        view_evidence = [check_evidence(E) for E in view_evidence]
        if len(view_evidence) != len(views):
            raise ValueError("need one evidence matrix per view")
        joint = np.mean(view_evidence, axis=0)
        n_classes = joint.shape[1]
        counts = np.bincount(y, minlength=n_classes)
        target = int(counts.max() if self.target_count is None else self.target_count)
        self.pseudo_samples_ = []
        self.warnings_ = []
        self.n_generated_ = np.zeros(n_classes, dtype=np.int64)
        for k in range(n_classes):
            if counts[k] >= target:
                continue
            try:
                res = balance_class(views, y, k, target, view_evidence, joint,
                                    n_neighbors=self.n_neighbors, weighting=self.weighting,
                                    seed=self.random_state, floor=self.entropy_floor)
            except InsufficientSamples as exc:
                logger.warning("%s", exc)
                self.warnings_.append(str(exc))
                continue
            self.pseudo_samples_.extend(res.samples)
            self.warnings_.extend(res.warnings)
            self.n_generated_[k] = len(res.samples)
        if not self.pseudo_samples_:
            return list(views), y
        new_views = [np.vstack([X_v] + [s.views[v][None, :] for s in self.pseudo_samples_])
                     for v, X_v in enumerate(views)]
        new_y = np.concatenate([y, [s.label for s in self.pseudo_samples_]])
        return new_views, new_y
