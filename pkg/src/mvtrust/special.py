"""Digamma, trigamma and log-gamma for positive real arguments.

Digamma and trigamma shift the argument upward with the recurrences
``psi(x) = psi(x+1) - 1/x`` and ``psi1(x) = psi1(x+1) + 1/x**2`` until
``x >= 10`` and then use the asymptotic (Bernoulli) expansions.  Log-gamma
uses the Lanczos approximation (g = 7, 9 terms).
"""

from __future__ import annotations

import numpy as np

_SHIFT_TO = 10.0

_LANCZOS_G = 7.0
_LANCZOS_COEF = np.array([
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
])
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


def _positive(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if not (x > 0).all():
        raise ValueError("argument must be strictly positive")
    return x


def _shift(x, power: int):
    """Move every argument to ``>= 10``; returns the shifted x and ``sum_i (x + i) ** -power``."""
    n = np.maximum(np.ceil(_SHIFT_TO - x), 0.0)
    top = int(n.max()) if n.size else 0
    if top == 0:
        return x, np.zeros_like(x)
    steps = np.arange(top, dtype=np.float64)
    terms = (x[..., None] + steps) ** -power
    acc = np.sum(np.where(steps < n[..., None], terms, 0.0), axis=-1)
    return x + n, acc


def digamma(x):
    x, acc = _shift(_positive(x), 1)
    acc = -acc
    r = 1.0 / (x * x)
    series = r * (1 / 12 - r * (1 / 120 - r * (1 / 252 - r * (1 / 240 - r * (
        1 / 132 - r * (691 / 32760 - r * (1 / 12)))))))
    out = acc + np.log(x) - 0.5 / x - series
    return out if out.ndim else float(out)


def trigamma(x):
    x, acc = _shift(_positive(x), 2)
    r = 1.0 / (x * x)
    series = (1 / 6 - r * (1 / 30 - r * (1 / 42 - r * (1 / 30 - r * (
        5 / 66 - r * (691 / 2730 - r * (7 / 6))))))) / (x * x * x)
    out = acc + 1.0 / x + 0.5 * r + series
    return out if out.ndim else float(out)


def log_gamma(x):
    x = _positive(x)
    # Lanczos is accurate for x >= 0.5; below that use lnG(x) = lnG(x+1) - ln(x)
    low = x < 0.5
    z = np.where(low, x + 1.0, x) - 1.0
    series = np.full_like(z, _LANCZOS_COEF[0])
    for i, c in enumerate(_LANCZOS_COEF[1:], start=1):
        series = series + c / (z + i)
    t = z + _LANCZOS_G + 0.5
    out = _HALF_LOG_2PI + (z + 0.5) * np.log(t) - t + np.log(series)
    out = np.where(low, out - np.log(x), out)
    return out if out.ndim else float(out)
