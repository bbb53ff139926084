"""Trusted multi-view classification for long-tailed data.

Evidential per-view MLPs, consensus aggregation of subjective opinions, and
uncertainty-guided multi-view oversampling.
"""

from .aggregation import aggregate_views, aggregate_views_opinion_space, consensus_weights
from .config import ExperimentConfig
from .data import MultiViewDataset, load_dataset, make_synthetic_fixture, save_dataset
from .estimator import TrustedMultiViewClassifier
from .opinion import Opinion, opinion_from_evidence, project
from .oversample import UncertaintyOversampler

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig",
    "MultiViewDataset",
    "Opinion",
    "TrustedMultiViewClassifier",
    "UncertaintyOversampler",
    "aggregate_views",
    "aggregate_views_opinion_space",
    "consensus_weights",
    "load_dataset",
    "make_synthetic_fixture",
    "opinion_from_evidence",
    "project",
    "save_dataset",
]
