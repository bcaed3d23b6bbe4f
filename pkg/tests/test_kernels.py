import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import greedy_match_brute
from spikebench import kernels

needs_ext = pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled kernels not built")

times = st.lists(st.integers(0, 500), max_size=60)


def test_backend_reported():
    assert kernels.BACKEND in ("python", "cython")


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.greedy_match(np.array([1]), np.array([1]), 1, backend="fortran")


@given(times, times, st.integers(0, 10))
@settings(max_examples=200, deadline=None)
def test_greedy_match_counts_match_oracle(gt, det, tol):
    gt, det = sorted(gt), sorted(det)
    hit = kernels.greedy_match(np.array(gt), np.array(det), tol, backend="python")
    tp = int(np.count_nonzero(hit >= 0))
    assert (tp, len(det) - tp, len(gt) - tp) == greedy_match_brute(gt, det, tol)
    used = hit[hit >= 0]
    assert len(set(used.tolist())) == len(used)


@needs_ext
@given(times, times, st.integers(0, 10))
@settings(max_examples=200, deadline=None)
def test_greedy_match_backends_agree(gt, det, tol):
    gt, det = np.array(sorted(gt)), np.array(sorted(det))
    np.testing.assert_array_equal(
        kernels.greedy_match(gt, det, tol, backend="python"), kernels.greedy_match(gt, det, tol, backend="cython")
    )


@given(st.lists(st.integers(0, 299), unique=True, max_size=80), st.integers(1, 30))
@settings(max_examples=200, deadline=None)
def test_lockout_select_properties(order, lockout):
    order = np.array(order, dtype=np.int64)
    keep = kernels.lockout_select(order, 300, lockout, backend="python")
    kept = np.sort(order[keep])
    assert np.all(np.diff(kept) >= lockout)
    # every rejected candidate is within the lockout of an earlier kept one
    for i in np.flatnonzero(~keep):
        earlier = order[:i][keep[:i]]
        assert np.any(np.abs(earlier - order[i]) < lockout)
    if kernels.BACKEND == "cython":
        np.testing.assert_array_equal(keep, kernels.lockout_select(order, 300, lockout, backend="cython"))


@given(st.lists(st.integers(-40, 140), max_size=30), st.integers(1, 25))
@settings(max_examples=200, deadline=None)
def test_scatter_matches_dense_add(starts, length):
    rng = np.random.default_rng(len(starts) * 31 + length)
    shape = rng.standard_normal(length)
    amps = rng.standard_normal(len(starts))
    starts = np.array(starts, dtype=np.int64)
    want = np.zeros(100)
    for s, a in zip(starts, amps):
        for k in range(length):
            if 0 <= s + k < 100:
                want[s + k] += a * shape[k]
    for backend in ["python"] + (["cython"] if kernels.BACKEND == "cython" else []):
        out = np.zeros(100)
        kernels.scatter_templates(out, starts, amps, shape, backend=backend)
        np.testing.assert_allclose(out, want, atol=1e-12)


def test_scatter_rejects_non_float64():
    with pytest.raises(TypeError):
        kernels.scatter_templates(np.zeros(10, dtype=np.float32), np.array([0]), np.array([1.0]), np.ones(3))
