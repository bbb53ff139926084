"""Scikit-learn style estimator wrapping the two-phase training procedure."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from . import network
from .oversample import UncertaintyOversampler
from .validation import check_labels, check_views


class TrustedMultiViewClassifier(ClassifierMixin, BaseEstimator):
    """Evidential multi-view classifier with uncertainty-guided oversampling.

    ``fit`` trains one evidential MLP per view on the given (typically
    long-tailed) data.  Unless ``oversample`` is ``None`` it then balances
    every class with pseudo-samples built from that model's evidence and
    trains again on the augmented set.

    ``X`` is a list of ``(n_samples, d_v)`` arrays, one per view; labels are
    integers in ``[0, n_classes)``.

    Parameters
    ----------
    hidden : int
        Hidden width of every view network.
    epochs, lr, batch_size, optimizer :
        Training budget and optimiser (``"adam"`` or ``"sgd"``).
    anneal_epochs : int
        The KL term is weighted by ``min(1, epoch / anneal_epochs)``.
    per_view_loss : bool
        Add each view's own loss to the joint loss.
    reduction : {"mean", "sum"}
        Batch reduction of the per-sample loss.
    oversample : {"uncertainty", "random", None}
        Pseudo-sample weighting; ``None`` skips the second phase.
    n_neighbors : int
        Neighbours per centre when oversampling.
    target_count : int or None
        Per-class size after oversampling; defaults to the largest class.
    warm_start_retrain : bool
        Start the second phase from the first-phase weights instead of a
        fresh initialisation.
    n_classes : int or None
        Number of classes; inferred from ``y`` when omitted.
    random_state : int
    """

    def __init__(self, hidden=64, epochs=200, lr=1e-3, batch_size=64, optimizer="adam",
                 anneal_epochs=10, per_view_loss=True, reduction="mean", oversample="uncertainty",
                 n_neighbors=3, target_count=None, warm_start_retrain=False, early_stop=False,
                 n_classes=None, random_state=0):
        self.hidden = hidden
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.optimizer = optimizer
        self.anneal_epochs = anneal_epochs
        self.per_view_loss = per_view_loss
        self.reduction = reduction
        self.oversample = oversample
        self.n_neighbors = n_neighbors
        self.target_count = target_count
        self.warm_start_retrain = warm_start_retrain
        self.early_stop = early_stop
        self.n_classes = n_classes
        self.random_state = random_state

    def _train(self, nets, views, y):
        return network.train(
            nets, views, y, self.n_classes_, epochs=self.epochs, lr=self.lr,
            batch_size=self.batch_size, optimizer=self.optimizer, anneal_epochs=self.anneal_epochs,
            per_view_loss=self.per_view_loss, reduction=self.reduction, seed=self.random_state,
            early_stop=self.early_stop)

    def _init(self):
        return network.init_networks(self.dims_, self.hidden, self.n_classes_, self.random_state)

    def fit(self, X, y):
        views = check_views(X)
        y = check_labels(y, views[0].shape[0])
        self.n_classes_ = int(self.n_classes if self.n_classes is not None else y.max() + 1)
        if y.max() >= self.n_classes_:
            raise ValueError(f"label {y.max()} outside [0, {self.n_classes_})")
        if self.oversample not in ("uncertainty", "random", None):
            raise ValueError(f"unknown oversample mode {self.oversample!r}")
        self.classes_ = np.arange(self.n_classes_)
        self.n_views_ = len(views)
        self.dims_ = [A.shape[1] for A in views]
        self.class_counts_ = np.bincount(y, minlength=self.n_classes_)

        nets, state = self._train(self._init(), views, y)
        self.phase1_networks_ = nets
        self.phase1_state_ = state
        self.networks_, self.train_state_ = nets, state
        self.oversampler_ = None
        if self.oversample is None:
            return self

        evidence = [net.forward(A) for net, A in zip(nets, views)]
        self.oversampler_ = UncertaintyOversampler(
            n_neighbors=self.n_neighbors, weighting=self.oversample,
            target_count=self.target_count, random_state=self.random_state)
        aug_views, aug_y = self.oversampler_.fit_resample(views, y, evidence)
        if len(aug_y) == len(y):
            return self
        start = nets if self.warm_start_retrain else self._init()
        self.networks_, self.train_state_ = self._train(start, aug_views, aug_y)
        return self

    def _predict(self, X, phase: int = 2) -> network.Prediction:
        check_is_fitted(self, "networks_")
        views = check_views(X, self.n_views_, self.dims_)
        nets = self.networks_ if phase == 2 else self.phase1_networks_
        return network.predict(nets, views)

    def predict_opinion(self, X, phase: int = 2) -> network.Prediction:
        """Decision, joint opinion, per-view opinions and evidence."""
        return self._predict(X, phase)

    def predict(self, X):
        return self._predict(X).decision

    def predict_proba(self, X):
        """Projected probabilities ``b + a u`` of the joint opinion."""
        joint = self._predict(X).joint
        return joint.beliefs + joint.base_rates * joint.uncertainty[:, None]

    def predict_uncertainty(self, X):
        return self._predict(X).joint.uncertainty
