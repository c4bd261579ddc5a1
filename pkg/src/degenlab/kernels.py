"""Backend selection for the element kernels.

The compiled extension is used when it imports; otherwise the numpy
implementation. Set ``DEGENLAB_BACKEND=python`` to force the fallback.
"""
import os

import numpy as np

from . import _kernels_py

if os.environ.get("DEGENLAB_BACKEND", "").lower() == "python":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

MODEL_CODES = {"constant": 0, "power": 1, "power_sum": 2}


def _tri(triangles):
    return np.ascontiguousarray(triangles, dtype=np.int64)


def _vec(x):
    return np.ascontiguousarray(x, dtype=float)


def sigma_integrals(vertices, triangles, model, alpha, beta=0.0, rel_tol=1e-10, max_depth=12,
                    backend=None):
    impl = _kernels_py if backend == "python" else _impl
    return impl.sigma_integrals(_vec(vertices), _tri(triangles), MODEL_CODES[model],
                                float(alpha), float(beta), float(rel_tol), int(max_depth))


def load_terms(triangles, areas, u, e, backend=None):
    impl = _kernels_py if backend == "python" else _impl
    return impl.load_terms(_tri(triangles), _vec(areas), _vec(u), float(e))


def weight_matrix_terms(triangles, areas, u, e, backend=None):
    impl = _kernels_py if backend == "python" else _impl
    return impl.weight_matrix_terms(_tri(triangles), _vec(areas), _vec(u), float(e))


def power_integral(triangles, areas, u, p, backend=None):
    impl = _kernels_py if backend == "python" else _impl
    return float(impl.power_integral(_tri(triangles), _vec(areas), _vec(u), float(p)))
