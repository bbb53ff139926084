"""Evidential losses on Dirichlet parameters and their gradients w.r.t. evidence.

All functions work per sample and broadcast over a leading batch axis:
``alphas`` and one-hot ``y`` have shape ``(..., K)``, results ``(...)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .opinion import Dirichlet
from .special import digamma, log_gamma, trigamma


@dataclass(frozen=True)
class LossConfig:
    anneal_epochs: int = 10
    current_epoch: int = 0

    def __post_init__(self):
        if self.anneal_epochs < 1:
            raise ValueError("anneal_epochs must be positive")
        if self.current_epoch < 0:
            raise ValueError("current_epoch must be nonnegative")

    @property
    def kl_weight(self) -> float:
        return annealing_coefficient(self.current_epoch, self.anneal_epochs)

    def at_epoch(self, epoch: int) -> "LossConfig":
        return LossConfig(self.anneal_epochs, epoch)


def annealing_coefficient(epoch: int, anneal_epochs: int) -> float:
    """``min(1, t / T)``."""
    return min(1.0, max(0.0, epoch / anneal_epochs))


def _alphas(alphas) -> np.ndarray:
    if isinstance(alphas, Dirichlet):
        return alphas.alphas
    alphas = np.asarray(alphas, dtype=np.float64)
    if np.any(alphas < 1):
        raise ValueError("Dirichlet parameters must be >= 1")
    return alphas


def _onehot(y, n_classes: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.shape[-1] != n_classes:
        raise ValueError(f"label has {y.shape[-1]} entries, expected {n_classes}")
    return y


def one_hot(labels, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.intp)
    return np.eye(n_classes)[labels]


def adjusted_alphas(alphas, y) -> np.ndarray:
    """``y + (1 - y) * alpha``: the true-class slot is reset to 1."""
    a = _alphas(alphas)
    y = _onehot(y, a.shape[-1])
    return y + (1.0 - y) * a


def loss_ace(alphas, y):
    """Expected cross-entropy under the Dirichlet: ``sum_k y_k (psi(S) - psi(alpha_k))``."""
    a = _alphas(alphas)
    y = _onehot(y, a.shape[-1])
    strength = a.sum(axis=-1, keepdims=True)
    return np.sum(y * (digamma(strength) - digamma(a)), axis=-1)


def loss_kl(alphas, y):
    """KL divergence from ``Dir(adjusted alphas)`` to the uniform Dirichlet."""
    a = adjusted_alphas(alphas, y)
    k = a.shape[-1]
    s = a.sum(axis=-1, keepdims=True)
    return (log_gamma(s)[..., 0] - log_gamma(float(k)) - np.sum(log_gamma(a), axis=-1)
            + np.sum((a - 1.0) * (digamma(a) - digamma(s)), axis=-1))


def loss_total(alphas, y, cfg: LossConfig):
    out = loss_ace(alphas, y)
    lam = cfg.kl_weight
    if lam > 0:
        out = out + lam * loss_kl(alphas, y)
    return out


def loss_grad_evidence(e, y, cfg: LossConfig) -> np.ndarray:
    """Gradient of :func:`loss_total` with respect to evidence (``alpha = e + 1``).

    d ace / d alpha_j = psi1(S) - y_j psi1(alpha_j)
    d kl  / d alpha_j = (1 - y_j) [(a~_j - 1) psi1(a~_j) - (S~ - K) psi1(S~)]
    """
    e = np.asarray(e, dtype=np.float64)
    a = e + 1.0
    y = _onehot(y, a.shape[-1])
    s = a.sum(axis=-1, keepdims=True)
    grad = trigamma(s) - y * trigamma(a)
    lam = cfg.kl_weight
    if lam > 0:
        at = y + (1.0 - y) * a
        st = at.sum(axis=-1, keepdims=True)
        k = a.shape[-1]
        grad = grad + lam * (1.0 - y) * ((at - 1.0) * trigamma(at) - (st - k) * trigamma(st))
    return grad
