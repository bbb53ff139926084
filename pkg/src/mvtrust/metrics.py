"""Evaluation metrics and the head/medium/tail class partition."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

HIST_BINS = 50


def class_groups(train_counts, n_head: int = 3, n_medium: int = 5) -> dict[str, list[int]]:
    """Partition classes by descending training count: ``min(3, K)`` head, ``min(5, K - head)`` medium, rest tail.

    Ties keep the lower class id first.
    """
    counts = np.asarray(train_counts)
    order = np.lexsort((np.arange(counts.size), -counts))
    head = min(n_head, counts.size)
    medium = min(n_medium, counts.size - head)
    return {"head": sorted(order[:head].tolist()),
            "medium": sorted(order[head:head + medium].tolist()),
            "tail": sorted(order[head + medium:].tolist())}


def _accuracy(correct: np.ndarray) -> float | None:
    return float(correct.mean()) if correct.size else None


def uncertainty_histogram(u, bins: int = HIST_BINS) -> list[int]:
    counts, _ = np.histogram(np.clip(u, 0.0, 1.0), bins=bins, range=(0.0, 1.0))
    return counts.tolist()


@dataclass
class MetricsReport:
    accuracy: float
    per_class_accuracy: list
    group_accuracy: dict
    groups: dict
    mean_uncertainty: float
    median_uncertainty: float
    uncertainty_histogram: list
    n_test: int
    loss_history: list = field(default_factory=list)
    pseudo_counts: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate_predictions(y_true, y_pred, uncertainty, train_counts, *, loss_history=(),
                         pseudo_counts=None) -> MetricsReport:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    u = np.asarray(uncertainty, dtype=np.float64)
    n_classes = len(train_counts)
    correct = y_true == y_pred
    per_class = [_accuracy(correct[y_true == k]) for k in range(n_classes)]
    groups = class_groups(train_counts)
    group_acc = {name: _accuracy(correct[np.isin(y_true, members)]) for name, members in groups.items()}
    return MetricsReport(
        accuracy=float(correct.mean()),
        per_class_accuracy=per_class,
        group_accuracy=group_acc,
        groups=groups,
        mean_uncertainty=float(u.mean()),
        median_uncertainty=float(np.median(u)),
        uncertainty_histogram=uncertainty_histogram(u),
        n_test=int(y_true.size),
        loss_history=[float(x) for x in loss_history],
        pseudo_counts=[int(c) for c in (pseudo_counts if pseudo_counts is not None else [0] * n_classes)],
    )
