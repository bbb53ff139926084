import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from mvtrust.opinion import Opinion, opinion_from_evidence, uniform_base_rates
from mvtrust.oversample import (InsufficientSamples, NeighborSet, UncertaintyOversampler, balance_class,
                                evidence_distance, find_neighbors, integrate_evidence, neighbor_weights,
                                random_weights_ablation, synthesize, uncertainty_entropy,
                                weights_from_entropies)


def _problem(rng, counts=(12, 7, 3), k=3, dims=(2, 3)):
    labels = np.repeat(np.arange(len(counts)), counts)
    views = [rng.normal(size=(labels.size, d)) for d in dims]
    evidence = [rng.gamma(1.0, 3.0, size=(labels.size, k)) for _ in dims]
    return views, labels, evidence


class TestDistance:
    def test_worked(self):
        assert evidence_distance([0.0, 0.0], [3.0, 4.0]) == pytest.approx(5.0)

    def test_class_mismatch(self):
        with pytest.raises(ValueError):
            evidence_distance([0.0, 0.0], [3.0, 4.0, 1.0])


class TestNeighbors:
    def test_nearest_in_joint_evidence(self):
        joint = np.array([[0.0, 0.0], [5.0, 0.0], [1.0, 0.0], [2.0, 0.0], [0.0, 9.0]])
        nb = find_neighbors(0, [0, 1, 2, 3, 4], joint, 2)
        assert nb.indices.tolist() == [2, 3]
        np.testing.assert_allclose(nb.distances, [1.0, 2.0])

    def test_ties_go_to_lower_id(self):
        joint = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
        assert find_neighbors(0, [3, 2, 1, 0], joint, 2).indices.tolist() == [1, 2]

    def test_pool_restricts_candidates(self):
        joint = np.array([[0.0, 0.0], [0.1, 0.0], [3.0, 0.0], [4.0, 0.0]])
        assert find_neighbors(0, [0, 2, 3], joint, 1).indices.tolist() == [2]

    def test_insufficient(self):
        with pytest.raises(InsufficientSamples):
            find_neighbors(0, [0, 1], np.zeros((2, 2)), 2)

    def test_centre_must_be_in_pool(self):
        with pytest.raises(ValueError):
            find_neighbors(5, [0, 1], np.zeros((6, 2)), 1)


class TestEntropy:
    def test_dogmatic_worked_value(self):
        o = Opinion([0.8, 0.2], 0.0, uniform_base_rates(2))
        assert uncertainty_entropy(o, [1, 0]) == pytest.approx(-np.log(0.8), abs=1e-12)

    def test_uncertain_worked_value(self):
        o = Opinion([0.4, 0.1], 0.5, uniform_base_rates(2))
        # P_true = 0.4 + 0.5 * 0.5
        assert uncertainty_entropy(o, [1, 0]) == pytest.approx(np.exp(0.5) * -np.log(0.65), abs=1e-12)

    def test_against_oracle(self, rng):
        e = rng.gamma(1.0, 3.0, size=(30, 4))
        labels = rng.integers(0, 4, 30)
        h = uncertainty_entropy(opinion_from_evidence(e), np.eye(4)[labels])
        for i in range(30):
            b, u = oracles.opinion(e[i].tolist())
            assert h[i] == pytest.approx(oracles.uncertainty_entropy(b, u, int(labels[i]), 0.25), rel=1e-12)

    def test_penalises_uncertainty(self):
        confident = opinion_from_evidence([20.0, 0.0])
        vague = opinion_from_evidence([2.0, 0.0])
        assert uncertainty_entropy(confident, [1, 0]) < uncertainty_entropy(vague, [1, 0])

    def test_integrate_is_average(self):
        np.testing.assert_allclose(integrate_evidence([2.0, 0.0], [0.0, 4.0]), [1.0, 2.0])


class TestWeights:
    def test_inverse_normalised(self):
        np.testing.assert_allclose(weights_from_entropies([1.0, 2.0, 4.0]), [4 / 7, 2 / 7, 1 / 7])

    def test_floor(self):
        w = weights_from_entropies([0.0, 1.0], floor=1e-8)
        assert np.all(np.isfinite(w)) and w[0] > 0.99

    def test_centre_slot_uses_own_evidence(self):
        ev = np.array([[6.0, 0.0], [0.0, 0.0], [6.0, 0.0]])
        nb = NeighborSet(0, np.array([1, 2]), np.zeros(2))
        w = neighbor_weights(nb, ev, [1, 0])
        # neighbour 2 has the same evidence as the centre, so the same weight
        assert w[0] == pytest.approx(w[2])
        assert w[1] < w[0]
        assert w.sum() == pytest.approx(1.0)

    @given(arrays(np.float64, st.integers(2, 8), elements=st.floats(0.0, 50.0)))
    def test_simplex(self, h):
        w = weights_from_entropies(h)
        assert w.sum() == pytest.approx(1.0) and np.all(w > 0)

    def test_random_ablation(self):
        w = random_weights_ablation(3, 0)
        assert w.shape == (4,) and w.sum() == pytest.approx(1.0) and np.all(w >= 0)
        np.testing.assert_array_equal(w, random_weights_ablation(3, 0))

    def test_random_ablation_is_uniform_on_simplex(self):
        rng = np.random.default_rng(0)
        draws = np.array([random_weights_ablation(2, rng) for _ in range(20000)])
        # Dirichlet(1,1,1): each coordinate has mean 1/3 and variance 1/18
        np.testing.assert_allclose(draws.mean(axis=0), 1 / 3, atol=0.01)
        np.testing.assert_allclose(draws.var(axis=0), 1 / 18, atol=0.005)


class TestSynthesize:
    def test_convex_combination(self):
        views = [np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]])]
        nb = NeighborSet(0, np.array([1, 2]), np.zeros(2))
        s = synthesize(nb, [np.array([0.5, 0.25, 0.25])], views, 1)
        np.testing.assert_allclose(s.views[0], [0.5, 0.5])
        assert s.provenance() == {"label": 1, "center": 0, "neighbors": [1, 2],
                                  "weights": [[0.5, 0.25, 0.25]]}

    @pytest.mark.parametrize("w", [[0.5, 0.5, 0.5], [1.5, -0.25, -0.25], [0.5, 0.5]])
    def test_rejects_bad_weights(self, w):
        views = [np.zeros((3, 2))]
        nb = NeighborSet(0, np.array([1, 2]), np.zeros(2))
        with pytest.raises(ValueError):
            synthesize(nb, [np.array(w)], views, 0)


class TestBalanceClass:
    def test_count_arithmetic(self, rng):
        views, labels, ev = _problem(rng)
        res = balance_class(views, labels, 2, 5, ev, np.mean(ev, axis=0), n_neighbors=2)
        assert len(res.samples) == 2
        assert all(s.label == 2 for s in res.samples)

    def test_target_reached_is_empty(self, rng):
        views, labels, ev = _problem(rng)
        assert balance_class(views, labels, 0, 12, ev, np.mean(ev, axis=0)).samples == []

    def test_reduces_r_with_warning(self, rng):
        views, labels, ev = _problem(rng)
        res = balance_class(views, labels, 2, 12, ev, np.mean(ev, axis=0), n_neighbors=5)
        assert res.warnings and all(len(s.neighbors) == 2 for s in res.samples)

    def test_single_sample_class(self, rng):
        views, labels, ev = _problem(rng, counts=(5, 1))
        with pytest.raises(InsufficientSamples):
            balance_class(views, labels, 1, 5, ev, np.mean(ev, axis=0))

    def test_only_real_class_members_used(self, rng):
        views, labels, ev = _problem(rng)
        res = balance_class(views, labels, 1, 12, ev, np.mean(ev, axis=0), n_neighbors=3)
        members = set(np.flatnonzero(labels == 1).tolist())
        for s in res.samples:
            assert s.center in members and set(s.neighbors) <= members

    @pytest.mark.parametrize("weighting", ["uncertainty", "random"])
    def test_deterministic(self, rng, weighting):
        views, labels, ev = _problem(rng)
        a = balance_class(views, labels, 1, 12, ev, np.mean(ev, axis=0), weighting=weighting, seed=3)
        b = balance_class(views, labels, 1, 12, ev, np.mean(ev, axis=0), weighting=weighting, seed=3)
        for x, y in zip(a.samples, b.samples):
            np.testing.assert_array_equal(x.views[0], y.views[0])

    def test_ablation_shares_centres(self, rng):
        views, labels, ev = _problem(rng)
        joint = np.mean(ev, axis=0)
        full = balance_class(views, labels, 1, 12, ev, joint, weighting="uncertainty", seed=3)
        rand = balance_class(views, labels, 1, 12, ev, joint, weighting="random", seed=3)
        assert [s.center for s in full.samples] == [s.center for s in rand.samples]

    def test_unknown_weighting(self, rng):
        views, labels, ev = _problem(rng)
        with pytest.raises(ValueError):
            balance_class(views, labels, 1, 12, ev, np.mean(ev, axis=0), weighting="magic")


class TestOversampler:
    def test_balances_all_classes(self, rng):
        views, labels, ev = _problem(rng)
        sampler = UncertaintyOversampler(n_neighbors=2, random_state=0)
        new_views, new_y = sampler.fit_resample(views, labels, ev)
        assert np.bincount(new_y).tolist() == [12, 12, 12]
        assert sampler.n_generated_.tolist() == [0, 5, 9]
        for X, Xn in zip(views, new_views):
            np.testing.assert_array_equal(Xn[:len(labels)], X)

    def test_target_override(self, rng):
        views, labels, ev = _problem(rng)
        _, y = UncertaintyOversampler(n_neighbors=2, target_count=20).fit_resample(views, labels, ev)
        assert np.bincount(y).tolist() == [20, 20, 20]

    def test_already_balanced(self, rng):
        views, labels, ev = _problem(rng, counts=(4, 4, 4))
        sampler = UncertaintyOversampler()
        _, y = sampler.fit_resample(views, labels, ev)
        assert len(y) == 12 and sampler.pseudo_samples_ == []

    def test_unbalanceable_class_warns(self, rng):
        views, labels, ev = _problem(rng, counts=(6, 1, 3))
        sampler = UncertaintyOversampler(n_neighbors=2)
        _, y = sampler.fit_resample(views, labels, ev)
        assert np.bincount(y).tolist() == [6, 1, 6]
        assert any("class 1" in w for w in sampler.warnings_)

    def test_evidence_count_mismatch(self, rng):
        views, labels, ev = _problem(rng)
        with pytest.raises(ValueError):
            UncertaintyOversampler().fit_resample(views, labels, ev[:1])

    def test_get_params(self):
        params = UncertaintyOversampler(n_neighbors=5).get_params()
        assert params["n_neighbors"] == 5 and params["weighting"] == "uncertainty"
