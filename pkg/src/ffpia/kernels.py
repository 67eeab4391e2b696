"""Kernel backend selection.

The compiled extension is used when it imports; setting ``FFPIA_PURE_PYTHON=1``
forces the NumPy fallback.
"""

import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if os.environ.get("FFPIA_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py


def homodyne_feedforward(means, c, k, rest, sigma, z, tgt, gain, backend=None):
    impl = _pick(backend)
    return impl.homodyne_feedforward(
        np.ascontiguousarray(means, dtype=np.float64), np.ascontiguousarray(c, dtype=np.float64),
        np.ascontiguousarray(k, dtype=np.float64), np.ascontiguousarray(rest, dtype=np.int64),
        float(sigma), np.ascontiguousarray(z, dtype=np.float64),
        np.ascontiguousarray(tgt, dtype=np.int64), np.ascontiguousarray(gain, dtype=np.float64))


def scan_loglik(phases, q, theta, backend=None):
    impl = _pick(backend)
    return impl.scan_loglik(np.ascontiguousarray(phases, dtype=np.float64),
                            np.ascontiguousarray(q, dtype=np.float64),
                            np.ascontiguousarray(theta, dtype=np.float64))


def _pick(backend):
    if backend is None:
        return _impl
    if backend == "python":
        return _kernels_py
    if backend == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {backend!r}")
