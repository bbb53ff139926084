"""Group-consensus aggregation of per-view opinions.

Views are folded left to right.  At step ``V`` the running group opinion
carries weight ``(V-1)/V`` and the incoming view ``1/V``, so after all views
the joint evidence is the arithmetic mean of the per-view evidence.  The
evidence-space fold is the production path; the opinion-space closed form is
kept as an independent route so the two can be checked against each other.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from .opinion import Opinion, check_evidence, evidence_from_opinion, opinion_from_evidence


class AggregationWeights(NamedTuple):
    group_weight: float
    individual_weight: float


class TraceStep(NamedTuple):
    step: int
    opinion: Opinion
    evidence: np.ndarray


def consensus_weights(n_views: int) -> AggregationWeights:
    """Weights for folding the ``n_views``-th view into a group of ``n_views - 1``."""
    if n_views < 2:
        raise ValueError("consensus weights need at least two views")
    return AggregationWeights((n_views - 1) / n_views, 1.0 / n_views)


def fuse_pair_evidence(group_e, group_count: int, individual_e) -> np.ndarray:
    if group_count < 1:
        raise ValueError("group_count must be >= 1")
    group_e = check_evidence(group_e)
    individual_e = check_evidence(individual_e, group_e.shape[-1])
    w = consensus_weights(group_count + 1)
    return w.group_weight * group_e + w.individual_weight * individual_e


def fuse_weighted_opinion(o_a: Opinion, o_b: Opinion, w_a: float, w_b: float) -> Opinion:
    """Opinion-space fusion with explicit weights ``w_a + w_b == 1``.

    ``u = u_a u_b / (w_a u_b + w_b u_a)`` and
    ``b_k = (w_a b_a u_b + w_b b_b u_a) / (w_a u_b + w_b u_a)``.
    """
    if o_a.n_classes != o_b.n_classes:
        raise ValueError("opinions disagree on the number of classes")
    if not np.allclose(o_a.base_rates, o_b.base_rates):
        raise ValueError("opinions must share base rates")
    u_a, u_b = o_a.uncertainty, o_b.uncertainty
    if np.any(u_a <= 0) or np.any(u_b <= 0):
        raise ValueError("cannot fuse a dogmatic opinion (u == 0)")
    denom = w_a * u_b + w_b * u_a
    b = (w_a * o_a.beliefs * u_b[..., None] + w_b * o_b.beliefs * u_a[..., None]) / denom[..., None]
    u = u_a * u_b / denom
    return Opinion(b, u, o_a.base_rates)


def fuse_pair_opinion(group_o: Opinion, group_count: int, individual_o: Opinion) -> Opinion:
    if group_count < 1:
        raise ValueError("group_count must be >= 1")
    w = consensus_weights(group_count + 1)
    return fuse_weighted_opinion(group_o, individual_o, w.group_weight, w.individual_weight)


def _check_views(opinions: Sequence[Opinion]) -> list[Opinion]:
    opinions = list(opinions)
    if not opinions:
        raise ValueError("need at least one opinion to aggregate")
    first = opinions[0]
    for o in opinions[1:]:
        if o.beliefs.shape != first.beliefs.shape:
            raise ValueError("all views must have the same shape")
        if not np.allclose(o.base_rates, first.base_rates):
            raise ValueError("all views must share base rates")
    return opinions


def aggregate_views(opinions: Sequence[Opinion]) -> tuple[Opinion, list[TraceStep]]:
    """Fold view opinions in evidence space; returns the joint opinion and the per-step trace."""
    opinions = _check_views(opinions)
    base_rates = opinions[0].base_rates
    evidence = evidence_from_opinion(opinions[0])
    trace = [TraceStep(1, opinions[0], evidence)]
    for v, o in enumerate(opinions[1:], start=2):
        evidence = fuse_pair_evidence(evidence, v - 1, evidence_from_opinion(o))
        trace.append(TraceStep(v, opinion_from_evidence(evidence, base_rates), evidence))
    return trace[-1].opinion, trace


def aggregate_views_opinion_space(opinions: Sequence[Opinion]) -> Opinion:
    """Same fold using only the opinion-space closed form."""
    opinions = _check_views(opinions)
    joint = opinions[0]
    for v, o in enumerate(opinions[1:], start=2):
        joint = fuse_pair_opinion(joint, v - 1, o)
    return joint


def joint_evidence(opinions: Sequence[Opinion]) -> np.ndarray:
    joint, _ = aggregate_views(opinions)
    return evidence_from_opinion(joint)


def mean_evidence(view_evidence) -> np.ndarray:
    """Closed form of the fold for raw evidence stacked on axis 0: ``(V, ..., K) -> (..., K)``."""
    return np.mean(np.asarray(view_evidence, dtype=np.float64), axis=0)
