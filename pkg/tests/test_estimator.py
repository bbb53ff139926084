import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from mvtrust import TrustedMultiViewClassifier
from mvtrust.data import make_synthetic_fixture, split


@pytest.fixture(scope="module")
def long_tailed():
    ds = make_synthetic_fixture(3, 2, [60, 20, 8], separation=5.0, dims=[4, 3], seed=0)
    test = make_synthetic_fixture(3, 2, 30, separation=5.0, dims=[4, 3], seed=0)
    return ds, test


class TestApi:
    def test_params_and_clone(self):
        clf = TrustedMultiViewClassifier(hidden=8, epochs=3, oversample="random")
        params = clf.get_params()
        assert params["hidden"] == 8 and params["oversample"] == "random"
        twin = clone(clf)
        assert twin.get_params() == params and twin is not clf

    def test_set_params(self):
        clf = TrustedMultiViewClassifier().set_params(n_neighbors=5)
        assert clf.n_neighbors == 5

    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            TrustedMultiViewClassifier().predict([np.zeros((2, 3))])

    def test_rejects_single_array(self):
        with pytest.raises(TypeError):
            TrustedMultiViewClassifier(epochs=1).fit(np.zeros((4, 3)), [0, 1, 0, 1])

    def test_rejects_bad_mode(self, long_tailed):
        ds, _ = long_tailed
        with pytest.raises(ValueError):
            TrustedMultiViewClassifier(epochs=1, oversample="smote").fit(ds.views, ds.labels)

    def test_rejects_label_out_of_range(self, long_tailed):
        ds, _ = long_tailed
        with pytest.raises(ValueError):
            TrustedMultiViewClassifier(epochs=1, n_classes=2).fit(ds.views, ds.labels)


class TestFit:
    def test_two_phase(self, long_tailed):
        ds, test = long_tailed
        clf = TrustedMultiViewClassifier(hidden=16, epochs=40, lr=1e-2, random_state=0).fit(ds, ds.labels)
        assert clf.oversampler_.n_generated_.tolist() == [0, 40, 52]
        assert clf.networks_ is not clf.phase1_networks_
        proba = clf.predict_proba(test.views)
        np.testing.assert_allclose(proba.sum(axis=1), 1.0)
        u = clf.predict_uncertainty(test.views)
        assert np.all((u > 0) & (u <= 1))
        assert clf.score(test.views, test.labels) >= 0.9
        p1 = clf.predict_opinion(test.views, phase=1)
        assert p1.joint.beliefs.shape == (90, 3)

    def test_without_oversampling(self, long_tailed):
        ds, _ = long_tailed
        clf = TrustedMultiViewClassifier(hidden=8, epochs=5, oversample=None).fit(ds.views, ds.labels)
        assert clf.oversampler_ is None and clf.networks_ is clf.phase1_networks_

    def test_view_mismatch_on_predict(self, long_tailed):
        ds, _ = long_tailed
        clf = TrustedMultiViewClassifier(hidden=8, epochs=2, oversample=None).fit(ds.views, ds.labels)
        with pytest.raises(ValueError):
            clf.predict([ds.views[0]])
        with pytest.raises(ValueError):
            clf.predict([ds.views[0], ds.views[0]])

    def test_deterministic(self, long_tailed):
        ds, test = long_tailed
        a = TrustedMultiViewClassifier(hidden=8, epochs=5, random_state=3).fit(ds.views, ds.labels)
        b = TrustedMultiViewClassifier(hidden=8, epochs=5, random_state=3).fit(ds.views, ds.labels)
        np.testing.assert_array_equal(a.predict_proba(test.views), b.predict_proba(test.views))


class TestFixtureSeparability:
    """Trained accuracy tracks the fixture's class separation."""

    @staticmethod
    def _accuracy(separation):
        ds = make_synthetic_fixture(4, 2, 150, separation=separation, dims=6, seed=2)
        train, test = split(ds, 0.8, seed=0)
        clf = TrustedMultiViewClassifier(hidden=16, epochs=40, lr=1e-2, oversample=None)
        return clf.fit(train.views, train.labels).score(test.views, test.labels)

    def test_zero_separation_is_chance(self):
        assert abs(self._accuracy(0.0) - 0.25) <= 0.1

    def test_large_separation_is_separable(self):
        assert self._accuracy(6.0) >= 0.97
