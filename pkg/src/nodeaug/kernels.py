"""Selects the compiled kernel backend when available, else the numpy fallback.

Set ``NODEAUG_PURE_PYTHON=1`` before import to force the fallback.
``BACKEND`` is ``"compiled"`` or ``"python"``.
"""
import os

from . import _kernels_py as python_backend

compiled_backend = None
if os.environ.get("NODEAUG_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as compiled_backend  # type: ignore[attr-defined]
    except ImportError:
        compiled_backend = None

_impl = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "compiled" if compiled_backend is not None else "python"

symmetric_eigh = _impl.symmetric_eigh
kmeans_assign = _impl.kmeans_assign
mean_distances = _impl.mean_distances
pair_distances = _impl.pair_distances

DISTANCE_NAMES = (
    "cosine", "euclidean", "correlation", "chebyshev",
    "manhattan", "sqeuclidean", "canberra", "braycurtis",
)
