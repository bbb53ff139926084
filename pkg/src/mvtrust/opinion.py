"""Subjective-logic primitives: evidence, Dirichlet parameters and opinions.

Every function accepts either a single vector of shape ``(K,)`` or a batch of
shape ``(N, K)``; scalars such as the uncertainty follow the leading shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BELIEF_TOL = 1e-9


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.float64)
    arr.setflags(write=False)
    return arr


def check_evidence(e, n_classes: int | None = None) -> np.ndarray:
    """Validate an evidence vector (or batch) and return it as float64."""
    e = np.asarray(e, dtype=np.float64)
    if e.ndim == 0 or e.shape[-1] < 2:
        raise ValueError(f"evidence needs at least 2 classes, got shape {e.shape}")
    if n_classes is not None and e.shape[-1] != n_classes:
        raise ValueError(f"evidence has {e.shape[-1]} classes, expected {n_classes}")
    if not np.all(np.isfinite(e)):
        raise ValueError("evidence contains non-finite values")
    if np.any(e < 0):
        raise ValueError("evidence must be nonnegative")
    return e


def uniform_base_rates(n_classes: int) -> np.ndarray:
    return np.full(n_classes, 1.0 / n_classes)


def _check_base_rates(a, n_classes: int) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.shape[-1] != n_classes:
        raise ValueError(f"base rates have {a.shape[-1]} entries, expected {n_classes}")
    if np.any(a < 0) or np.any(a > 1) or not np.allclose(a.sum(axis=-1), 1.0, atol=BELIEF_TOL):
        raise ValueError("base rates must be a probability vector")
    return a


@dataclass(frozen=True)
class Dirichlet:
    alphas: np.ndarray
    strength: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alphas", _frozen(self.alphas))
        object.__setattr__(self, "strength", _frozen(self.strength))
        if np.any(self.alphas < 1):
            raise ValueError("Dirichlet parameters built from evidence must be >= 1")

    @property
    def evidence(self) -> np.ndarray:
        return self.alphas - 1.0


@dataclass(frozen=True)
class Opinion:
    """Multinomial opinion ``(b, u, a)`` with ``sum(b) + u == 1``.

    Constructed opinions are validated, never renormalised.  A dogmatic
    opinion (``u == 0``) is representable but cannot be mapped back to
    evidence or fused.
    """

    beliefs: np.ndarray
    uncertainty: np.ndarray
    base_rates: np.ndarray

    def __post_init__(self):
        b = _frozen(self.beliefs)
        u = _frozen(self.uncertainty)
        if b.ndim == 0 or b.shape[-1] < 2:
            raise ValueError("an opinion needs at least 2 classes")
        if u.shape != b.shape[:-1]:
            raise ValueError(f"uncertainty shape {u.shape} does not match beliefs {b.shape}")
        a = _frozen(_check_base_rates(self.base_rates, b.shape[-1]))
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(u))):
            raise ValueError("opinion contains non-finite values")
        if np.any(b < -BELIEF_TOL) or np.any(b > 1 + BELIEF_TOL):
            raise ValueError("beliefs must lie in [0, 1]")
        if np.any(u < 0) or np.any(u > 1 + BELIEF_TOL):
            raise ValueError("uncertainty must lie in [0, 1]")
        if not np.allclose(b.sum(axis=-1) + u, 1.0, rtol=0.0, atol=BELIEF_TOL):
            raise ValueError("beliefs and uncertainty must sum to 1")
        object.__setattr__(self, "beliefs", b)
        object.__setattr__(self, "uncertainty", u)
        object.__setattr__(self, "base_rates", a)

    @property
    def n_classes(self) -> int:
        return self.beliefs.shape[-1]

    def __getitem__(self, idx) -> "Opinion":
        """Select samples from a batched opinion."""
        a = self.base_rates if self.base_rates.ndim == 1 else self.base_rates[idx]
        return Opinion(self.beliefs[idx], self.uncertainty[idx], a)


def dirichlet_from_evidence(e) -> Dirichlet:
    e = check_evidence(e)
    alphas = e + 1.0
    return Dirichlet(alphas, alphas.sum(axis=-1))


def opinion_from_evidence(e, base_rates=None) -> Opinion:
    """Map evidence to ``b_k = e_k / S`` and ``u = K / S`` with ``S = sum(e + 1)``."""
    e = check_evidence(e)
    n_classes = e.shape[-1]
    if base_rates is None:
        base_rates = uniform_base_rates(n_classes)
    base_rates = _check_base_rates(base_rates, n_classes)
    strength = (e + 1.0).sum(axis=-1)
    return Opinion(e / strength[..., None], n_classes / strength, base_rates)


def project(o: Opinion) -> np.ndarray:
    """Projected probability ``P_k = b_k + a_k * u``."""
    return o.beliefs + o.base_rates * o.uncertainty[..., None]


def evidence_from_opinion(o: Opinion, n_classes: int | None = None) -> np.ndarray:
    """Invert :func:`opinion_from_evidence`: ``S = K / u``, ``e_k = b_k * S``."""
    k = o.n_classes if n_classes is None else n_classes
    if k != o.n_classes:
        raise ValueError(f"opinion has {o.n_classes} classes, expected {k}")
    if np.any(o.uncertainty <= 0):
        raise ValueError("dogmatic opinion (u == 0) has no finite evidence")
    strength = k / o.uncertainty
    # clip the rounding residue of b_k ~ 0
    return np.maximum(o.beliefs * strength[..., None], 0.0)
