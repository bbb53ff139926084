import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from mvtrust.aggregation import (aggregate_views, aggregate_views_opinion_space, consensus_weights,
                                 fuse_pair_evidence, fuse_pair_opinion, fuse_weighted_opinion,
                                 joint_evidence, mean_evidence)
from mvtrust.opinion import Opinion, opinion_from_evidence, uniform_base_rates


def _views(draw_k, draw_v):
    return st.tuples(draw_k, draw_v).flatmap(
        lambda kv: arrays(np.float64, (kv[1], kv[0]), elements=st.floats(0.0, 1e3, allow_subnormal=False)))


view_stacks = _views(st.integers(2, 10), st.integers(1, 6))


class TestWeights:
    @pytest.mark.parametrize("v,expected", [(2, (0.5, 0.5)), (3, (2 / 3, 1 / 3)), (6, (5 / 6, 1 / 6))])
    def test_values(self, v, expected):
        w = consensus_weights(v)
        assert w == pytest.approx(expected)
        assert sum(w) == pytest.approx(1.0)

    def test_single_view_rejected(self):
        with pytest.raises(ValueError):
            consensus_weights(1)


class TestPairFusion:
    def test_worked_uncertainty(self):
        # equal weights, u_A = 0.5, u_B = 0.2 -> 0.1 / 0.35
        a = Opinion([0.5, 0.0], 0.5, uniform_base_rates(2))
        b = Opinion([0.4, 0.4], 0.2, uniform_base_rates(2))
        fused = fuse_weighted_opinion(a, b, 0.5, 0.5)
        assert fused.uncertainty == pytest.approx(0.1 / 0.35, abs=1e-12)
        assert fused.beliefs.sum() + fused.uncertainty == pytest.approx(1.0)

    def test_evidence_pair_is_weighted_mean(self):
        np.testing.assert_allclose(fuse_pair_evidence([3.0, 0.0], 2, [0.0, 3.0]), [2.0, 1.0])

    def test_opinion_and_evidence_pair_agree(self, rng):
        for _ in range(50):
            k = int(rng.integers(2, 8))
            g, i = rng.gamma(1.0, 4.0, k), rng.gamma(1.0, 4.0, k)
            n = int(rng.integers(1, 6))
            via_op = fuse_pair_opinion(opinion_from_evidence(g), n, opinion_from_evidence(i))
            via_e = opinion_from_evidence(fuse_pair_evidence(g, n, i))
            np.testing.assert_allclose(via_op.beliefs, via_e.beliefs, atol=1e-12)
            assert via_op.uncertainty == pytest.approx(via_e.uncertainty, abs=1e-12)

    def test_dogmatic_rejected(self):
        a = Opinion([1.0, 0.0], 0.0, uniform_base_rates(2))
        b = opinion_from_evidence([1.0, 1.0])
        with pytest.raises(ValueError):
            fuse_weighted_opinion(a, b, 0.5, 0.5)

    def test_class_mismatch(self):
        with pytest.raises(ValueError):
            fuse_pair_opinion(opinion_from_evidence([1.0, 1.0]), 1, opinion_from_evidence([1.0, 1.0, 1.0]))


class TestFold:
    def test_single_view_is_identity(self):
        o = opinion_from_evidence([2.0, 5.0, 1.0])
        joint, trace = aggregate_views([o])
        np.testing.assert_allclose(joint.beliefs, o.beliefs)
        assert len(trace) == 1

    def test_trace_records_each_step(self):
        ops = [opinion_from_evidence(e) for e in ([6.0, 0.0], [0.0, 6.0], [3.0, 3.0])]
        joint, trace = aggregate_views(ops)
        assert [t.step for t in trace] == [1, 2, 3]
        np.testing.assert_allclose(trace[1].evidence, [3.0, 3.0])
        np.testing.assert_allclose(trace[2].evidence, [3.0, 3.0])
        np.testing.assert_allclose(joint_evidence(ops), [3.0, 3.0])

    def test_batched(self, rng):
        e = rng.gamma(1.0, 3.0, size=(4, 20, 5))
        joint, _ = aggregate_views([opinion_from_evidence(x) for x in e])
        np.testing.assert_allclose(joint.uncertainty, opinion_from_evidence(e.mean(axis=0)).uncertainty)

    def test_mismatched_shapes(self):
        with pytest.raises(ValueError):
            aggregate_views([opinion_from_evidence([1.0, 2.0]), opinion_from_evidence([[1.0, 2.0]])])

    def test_empty(self):
        with pytest.raises(ValueError):
            aggregate_views([])

    @given(view_stacks)
    def test_three_routes_agree_with_oracle(self, stack):
        ops = [opinion_from_evidence(e) for e in stack]
        evid, _ = aggregate_views(ops)
        opsp = aggregate_views_opinion_space(ops)
        b_ref, u_ref = oracles.fold_opinions([oracles.opinion(e.tolist()) for e in stack])
        mean_ref = oracles.mean_vector([e.tolist() for e in stack])
        b_mean, u_mean = oracles.opinion(mean_ref)
        for o in (evid, opsp):
            np.testing.assert_allclose(o.beliefs, b_ref, atol=1e-9)
            np.testing.assert_allclose(o.beliefs, b_mean, atol=1e-9)
            assert o.uncertainty == pytest.approx(u_ref, abs=1e-9)
            assert o.uncertainty == pytest.approx(u_mean, abs=1e-9)
        np.testing.assert_allclose(mean_evidence(stack), mean_ref, rtol=1e-12, atol=1e-9)

    @given(view_stacks)
    def test_order_invariant(self, stack):
        a, _ = aggregate_views([opinion_from_evidence(e) for e in stack])
        b, _ = aggregate_views([opinion_from_evidence(e) for e in stack[::-1]])
        assert a.uncertainty == pytest.approx(b.uncertainty, abs=1e-12)

    @given(view_stacks)
    def test_joint_uncertainty_between_view_extremes(self, stack):
        us = [opinion_from_evidence(e).uncertainty for e in stack]
        joint, _ = aggregate_views([opinion_from_evidence(e) for e in stack])
        assert min(us) - 1e-12 <= joint.uncertainty <= max(us) + 1e-12
