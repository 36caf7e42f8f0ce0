"""Kernel selection: compiled extension when importable, numpy fallback otherwise.

Set ``POLTOMO_PURE_PYTHON=1`` to force the fallback.
"""
import os

import numpy as np
from scipy import sparse

from . import _kernels_py

try:
    if os.environ.get("POLTOMO_PURE_PYTHON"):
        raise ImportError("pure python requested")
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

HAVE_COMPILED = _compiled is not None
BACKEND = "cython" if HAVE_COMPILED else "numpy"
_THREADS = 1


def set_threads(count):
    """Cap the number of worker threads used for ray batches (compiled kernels release the GIL)."""
    global _THREADS
    if count < 1:
        raise ValueError("thread count must be >= 1")
    _THREADS = int(count)


def get_threads():
    return _THREADS


def map_chunks(func, chunks):
    """``[func(c) for c in chunks]``, on up to :func:`get_threads` threads; order preserved."""
    if _THREADS == 1 or len(chunks) < 2:
        return [func(c) for c in chunks]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=_THREADS) as pool:
        return list(pool.map(func, chunks))


def _impl(backend):
    if backend is None:
        backend = BACKEND
    if backend == "cython":
        if not HAVE_COMPILED:
            raise RuntimeError("compiled kernels are not available")
        return _compiled
    if backend == "numpy":
        return _kernels_py
    raise ValueError(f"unknown backend {backend!r}")


def ray_grid_matrix(start, xi, length, nseg, grid, backend=None):
    """Sparse ``W`` with ``W[r, node]`` = Simpson integral of the node's hat function along ray r."""
    impl = _impl(backend)
    indptr, indices, data = impl.ray_grid_weights(
        np.ascontiguousarray(start, dtype=float),
        np.ascontiguousarray(xi, dtype=float),
        np.ascontiguousarray(length, dtype=float),
        int(nseg),
        np.ascontiguousarray(grid.origin, dtype=float),
        float(grid.spacing),
        *map(int, grid.dims),
    )
    return sparse.csr_matrix((data, indices, indptr), shape=(len(length), grid.size))


def rk4_grid(values, grid, start, xi, length, nsteps, backend=None):
    impl = _impl(backend)
    return impl.rk4_grid(
        np.ascontiguousarray(values, dtype=complex),
        np.ascontiguousarray(grid.origin, dtype=float),
        float(grid.spacing),
        np.ascontiguousarray(start, dtype=float),
        np.ascontiguousarray(xi, dtype=float),
        np.ascontiguousarray(length, dtype=float),
        int(nsteps),
    )


def rk4_samples(values, xi, length, nsteps, backend=None):
    """RK4 exit matrices from raw field samples ``values[r, k] = f(x_r + k h_r / 2 xi_r)``."""
    impl = _impl(backend)
    return impl.rk4_samples(
        np.ascontiguousarray(values, dtype=complex),
        np.ascontiguousarray(xi, dtype=float),
        np.ascontiguousarray(length, dtype=float),
        int(nsteps),
    )
