import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spikebench import metrics
from spikebench.cluster import kmeans, kmeans_pp_init
from spikebench.features import FeatureMatrix


def _clouds(seed=0, n=100, sep=50.0):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, 3))
    b = rng.standard_normal((n, 3)) + sep
    return np.vstack([a, b]), np.repeat([0, 1], n)


def test_two_clouds_separate():
    x, truth = _clouds()
    res = kmeans(x, 2, seed=4)
    assert metrics.classification_accuracy(res.labels, truth) == 1.0


def test_k_one_is_mean():
    x, _ = _clouds(1)
    res = kmeans(x, 1)
    assert np.all(res.labels == 0)
    np.testing.assert_allclose(res.centroids[0], x.mean(axis=0), atol=1e-12)


def test_duplicated_points_same_centroids():
    x, _ = _clouds(2)
    a = kmeans(x, 2, seed=0).centroids
    b = kmeans(np.vstack([x, x]), 2, seed=0).centroids
    key = lambda c: c[np.argsort(c[:, 0])]
    np.testing.assert_allclose(key(a), key(b), atol=1e-9)


def test_accepts_feature_matrix_and_is_deterministic():
    x, _ = _clouds(3)
    fm = FeatureMatrix(x, [0, 1, 2], "dwt_ref")
    a, b = kmeans(fm, 3, seed=11), kmeans(x, 3, seed=11)
    np.testing.assert_array_equal(a.labels, b.labels)
    np.testing.assert_array_equal(a.centroids, b.centroids)


@given(st.integers(0, 2**31 - 1), st.integers(1, 5))
@settings(max_examples=40, deadline=None)
def test_inertia_non_increasing(seed, k):
    x = np.random.default_rng(seed).standard_normal((60, 2))
    hist = kmeans(x, k, seed=seed, n_init=1).inertia_history
    assert all(b <= a * (1 + 1e-12) + 1e-12 for a, b in zip(hist, hist[1:]))


def test_more_restarts_never_worse():
    x = np.random.default_rng(5).standard_normal((300, 3))
    one = kmeans(x, 4, seed=0, n_init=1).inertia_history[-1]
    ten = kmeans(x, 4, seed=0, n_init=10).inertia_history[-1]
    assert ten <= one


def test_pp_init_picks_distinct_points():
    x = np.array([[0.0, 0], [0, 0], [10, 10]])
    c = kmeans_pp_init(x, 2, np.random.default_rng(0))
    assert {tuple(r) for r in c} == {(0.0, 0.0), (10.0, 10.0)}


def test_identical_points_do_not_crash():
    res = kmeans(np.ones((10, 2)), 3, seed=0)
    assert res.inertia_history[-1] == 0
    assert len(np.unique(res.labels)) <= 3


@pytest.mark.parametrize("k,n,n_init", [(0, 5, 1), (6, 5, 1), (2, 5, 0)])
def test_preconditions(k, n, n_init):
    with pytest.raises(ValueError):
        kmeans(np.zeros((n, 2)), k, n_init=n_init)
