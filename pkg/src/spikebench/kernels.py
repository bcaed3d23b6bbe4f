"""Select the compiled kernels when available, else the pure-Python ones.

Set ``SPIKEBENCH_PURE_PYTHON=1`` to force the fallback.
"""

import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("SPIKEBENCH_PURE_PYTHON"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py


def lockout_select(order, n, lockout, backend=None):
    impl = _pick(backend)
    return impl.lockout_select(np.ascontiguousarray(order, dtype=np.int64), int(n), int(lockout))


def greedy_match(gt, det, tol, backend=None):
    impl = _pick(backend)
    return impl.greedy_match(
        np.ascontiguousarray(gt, dtype=np.int64),
        np.ascontiguousarray(det, dtype=np.int64),
        float(tol),
    )


def _pick(backend):
    if backend is None:
        return _impl
    if backend == "python":
        return _kernels_py
    if backend == "cython":
        if BACKEND != "cython":
            raise RuntimeError("compiled kernels are not built")
        return _impl
    raise ValueError(f"unknown backend {backend!r}")


def scatter_templates(out, starts, amps, shape, backend=None):
    if out.dtype != np.float64 or not out.flags.c_contiguous:
        raise TypeError("out must be a contiguous float64 array")
    impl = _pick(backend)
    impl.scatter_templates(
        out,
        np.ascontiguousarray(starts, dtype=np.int64),
        np.ascontiguousarray(amps, dtype=np.float64),
        np.ascontiguousarray(shape, dtype=np.float64),
    )
