"""Per-view evidential MLPs with hand-written backpropagation.

Each view has its own ``d_v -> hidden -> K`` network with rectifier hidden
units and a rectifier output, so evidence is always nonnegative.  Views are
joined by the consensus fold, whose closed form is the mean of the per-view
evidence; gradients flow back through that mean.
"""

from __future__ import annotations

import copy
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .aggregation import mean_evidence
from .losses import LossConfig, loss_grad_evidence, loss_total, one_hot
from .opinion import Opinion, opinion_from_evidence

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
PARAM_NAMES = ("W1", "b1", "W2", "b2")


class NumericalDivergence(RuntimeError):
    """Raised when the training loss stops being finite."""


@dataclass
class ViewNetwork:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    view: int = 0

    @property
    def n_features(self) -> int:
        return self.W1.shape[0]

    @property
    def hidden(self) -> int:
        return self.W1.shape[1]

    @property
    def n_classes(self) -> int:
        return self.W2.shape[1]

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def _check_input(self, X) -> tuple[np.ndarray, bool]:
        X = np.asarray(X, dtype=np.float64)
        squeeze = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.n_features:
            raise ValueError(f"view {self.view} expects {self.n_features} features, got {X.shape[1]}")
        if not np.all(np.isfinite(X)):
            raise ValueError(f"view {self.view} input contains non-finite values")
        return X, squeeze

    def forward(self, X) -> np.ndarray:
        """Evidence for one sample ``(d,)`` or a batch ``(N, d)``."""
        X, squeeze = self._check_input(X)
        hid = np.maximum(X @ self.W1 + self.b1, 0.0)
        e = np.maximum(hid @ self.W2 + self.b2, 0.0)
        return e[0] if squeeze else e


def init_view_network(n_features: int, hidden: int, n_classes: int, rng: np.random.Generator,
                      view: int = 0) -> ViewNetwork:
    """Uniform fan-in initialisation, ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``."""
    lim1 = 1.0 / np.sqrt(n_features)
    lim2 = 1.0 / np.sqrt(hidden)
    return ViewNetwork(
        W1=rng.uniform(-lim1, lim1, (n_features, hidden)),
        b1=rng.uniform(-lim1, lim1, hidden),
        W2=rng.uniform(-lim2, lim2, (hidden, n_classes)),
        b2=rng.uniform(-lim2, lim2, n_classes),
        view=view,
    )


def init_networks(dims: Sequence[int], hidden: int | Sequence[int], n_classes: int,
                  seed: int) -> list[ViewNetwork]:
    rng = np.random.default_rng(seed)
    widths = [hidden] * len(dims) if np.isscalar(hidden) else list(hidden)
    return [init_view_network(d, h, n_classes, rng, view=v) for v, (d, h) in enumerate(zip(dims, widths))]


def forward(net: ViewNetwork, x) -> np.ndarray:
    return net.forward(x)


def batch_loss(nets: Sequence[ViewNetwork], views: Sequence[np.ndarray], y: np.ndarray,
               cfg: LossConfig, per_view_loss: bool = True, reduction: str = "mean") -> float:
    """Objective value only; used for finite-difference checks and reporting."""
    ev = [net.forward(X) for net, X in zip(nets, views)]
    per_sample = loss_total(mean_evidence(ev) + 1.0, y, cfg)
    if per_view_loss:
        for e in ev:
            per_sample = per_sample + loss_total(e + 1.0, y, cfg)
    return float(per_sample.mean() if reduction == "mean" else per_sample.sum())


def backward(nets: Sequence[ViewNetwork], views: Sequence[np.ndarray], y: np.ndarray,
             cfg: LossConfig, per_view_loss: bool = True,
             reduction: str = "mean") -> tuple[float, list[dict[str, np.ndarray]]]:
    """Loss and parameter gradients for a batch.

    ``views`` holds one ``(B, d_v)`` array per view and ``y`` is one-hot
    ``(B, K)``.  The objective is the joint loss plus, if ``per_view_loss``,
    each view's own loss, reduced over the batch by mean or sum.
    """
    if reduction not in ("mean", "sum"):
        raise ValueError("reduction must be 'mean' or 'sum'")
    n_views = len(nets)
    if len(views) != n_views:
        raise ValueError(f"expected {n_views} views, got {len(views)}")
    batch = y.shape[0]
    if batch == 0:
        raise ValueError("empty batch")
    caches = []
    with np.errstate(over="ignore", invalid="ignore"):
        for net, X in zip(nets, views):
            X = np.asarray(X, dtype=np.float64)
            z1 = X @ net.W1 + net.b1
            hid = np.maximum(z1, 0.0)
            z2 = hid @ net.W2 + net.b2
            caches.append((X, z1, hid, z2, np.maximum(z2, 0.0)))
    ev = [c[4] for c in caches]
    if not all(np.all(np.isfinite(e)) for e in ev):
        raise NumericalDivergence("network produced non-finite evidence")
    joint = mean_evidence(ev)
    # joint and per-view terms are evaluated in one stacked call
    stacked = np.stack([joint] + ev) if per_view_loss else joint[None]
    per_sample = loss_total(stacked + 1.0, y, cfg).sum(axis=0)
    g_all = loss_grad_evidence(stacked, y, cfg)
    scale = 1.0 / batch if reduction == "mean" else 1.0
    g_joint = g_all[0] * (scale / n_views)
    grads = []
    for v, (net, (X, z1, hid, z2, e)) in enumerate(zip(nets, caches)):
        g_e = g_joint + g_all[v + 1] * scale if per_view_loss else g_joint
        dz2 = g_e * (z2 > 0)
        dhid = dz2 @ net.W2.T
        dz1 = dhid * (z1 > 0)
        grads.append({
            "W1": X.T @ dz1,
            "b1": dz1.sum(axis=0),
            "W2": hid.T @ dz2,
            "b2": dz2.sum(axis=0),
        })
    loss = float(per_sample.mean() if reduction == "mean" else per_sample.sum())
    return loss, grads


class Adam:
    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.moments: list[dict[str, tuple[np.ndarray, np.ndarray]]] = []

    def step(self, nets, grads):
        if not self.moments:
            self.moments = [{k: (np.zeros_like(p), np.zeros_like(p)) for k, p in n.params().items()}
                            for n in nets]
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for net, g, mom in zip(nets, grads, self.moments):
            for name in PARAM_NAMES:
                m, v = mom[name]
                m = self.beta1 * m + (1 - self.beta1) * g[name]
                v = self.beta2 * v + (1 - self.beta2) * g[name] ** 2
                mom[name] = (m, v)
                step = self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
                setattr(net, name, getattr(net, name) - step)


class SGD:
    def __init__(self, lr=1e-2):
        self.lr = lr
        self.t = 0
        self.moments = []

    def step(self, nets, grads):
        self.t += 1
        for net, g in zip(nets, grads):
            for name in PARAM_NAMES:
                setattr(net, name, getattr(net, name) - self.lr * g[name])


@dataclass
class TrainState:
    seed: int
    epoch: int = 0
    loss_history: list[float] = field(default_factory=list)
    optimizer: Adam | SGD | None = None


def make_optimizer(name: str, lr: float):
    if name == "adam":
        return Adam(lr)
    if name == "sgd":
        return SGD(lr)
    raise ValueError(f"unknown optimizer {name!r}")


def train(nets: Sequence[ViewNetwork], views: Sequence[np.ndarray], labels, n_classes: int, *,
          epochs: int = 200, lr: float = 1e-3, batch_size: int = 64, optimizer: str = "adam",
          anneal_epochs: int = 10, per_view_loss: bool = True, reduction: str = "mean",
          seed: int = 0, early_stop: bool = False, patience: int = 10,
          min_delta: float = 1e-6) -> tuple[list[ViewNetwork], TrainState]:
    """Seeded mini-batch training; returns trained copies of ``nets``."""
    nets = copy.deepcopy(list(nets))
    views = [np.asarray(X, dtype=np.float64) for X in views]
    labels = np.asarray(labels)
    y = one_hot(labels, n_classes)
    n = len(labels)
    rng = np.random.default_rng(seed)
    opt = make_optimizer(optimizer, lr)
    state = TrainState(seed=seed, optimizer=opt)
    for epoch in range(epochs):
        cfg = LossConfig(anneal_epochs, epoch)
        order = rng.permutation(n)
        total, count = 0.0, 0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            loss, grads = backward(nets, [X[idx] for X in views], y[idx], cfg, per_view_loss, reduction)
            if not np.isfinite(loss):
                raise NumericalDivergence(f"non-finite loss at epoch {epoch}")
            opt.step(nets, grads)
            total += loss * (len(idx) if reduction == "mean" else 1.0)
            count += len(idx)
        state.epoch = epoch + 1
        state.loss_history.append(total / count)
        if early_stop and len(state.loss_history) > patience:
            window = state.loss_history[-patience - 1:]
            if window[0] - min(window[1:]) < min_delta:
                logger.info("early stop at epoch %d", state.epoch)
                break
    return nets, state


class Prediction(NamedTuple):
    decision: np.ndarray
    joint: Opinion
    views: list[Opinion]
    joint_evidence: np.ndarray
    view_evidence: list[np.ndarray]


def predict(nets: Sequence[ViewNetwork], views: Sequence[np.ndarray], base_rates=None) -> Prediction:
    """Decision is the argmax of the joint belief (first class wins ties)."""
    if len(views) != len(nets):
        raise ValueError(f"expected {len(nets)} views, got {len(views)}")
    ev = [net.forward(X) for net, X in zip(nets, views)]
    joint_e = mean_evidence(ev)
    joint = opinion_from_evidence(joint_e, base_rates)
    decision = np.argmax(joint.beliefs, axis=-1)
    return Prediction(decision, joint, [opinion_from_evidence(e, base_rates) for e in ev], joint_e, ev)


def save_checkpoint(path, nets: Sequence[ViewNetwork], meta: dict) -> None:
    arrays = {}
    for v, net in enumerate(nets):
        for name, p in net.params().items():
            arrays[f"view{v}_{name}"] = p
    header = {
        "version": CHECKPOINT_VERSION,
        "n_classes": nets[0].n_classes,
        "n_views": len(nets),
        "shapes": [[net.n_features, net.hidden] for net in nets],
        **meta,
    }
    with open(path, "wb") as fh:
        np.savez(fh, meta=np.array(json.dumps(header, sort_keys=True)), **arrays)


def load_checkpoint(path, expect_dims: Sequence[int] | None = None,
                    expect_classes: int | None = None) -> tuple[list[ViewNetwork], dict]:
    """Load networks; rejects checkpoints whose shapes disagree with the expected dataset."""
    with np.load(Path(path), allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
        nets = [ViewNetwork(**{name: data[f"view{v}_{name}"] for name in PARAM_NAMES}, view=v)
                for v in range(meta["n_views"])]
    if expect_classes is not None and expect_classes != meta["n_classes"]:
        raise ValueError(f"checkpoint has K={meta['n_classes']}, dataset has K={expect_classes}")
    if expect_dims is not None and list(expect_dims) != [s[0] for s in meta["shapes"]]:
        raise ValueError(f"checkpoint view dims {[s[0] for s in meta['shapes']]} "
                         f"do not match dataset {list(expect_dims)}")
    return nets, meta
