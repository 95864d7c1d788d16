"""Select the batch quadruple scorer: compiled extension if importable, numpy otherwise.

Set ``HOMOLOGY_MATCH_PURE=1`` to force the numpy implementation.
"""
import os

from . import _fallback

BACKEND = "python"
score_quadruples = _fallback.score_quadruples

if os.environ.get("HOMOLOGY_MATCH_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels
    except ImportError:
        _kernels = None
    else:
        BACKEND = "cython"
        score_quadruples = _kernels.score_quadruples
else:
    _kernels = None


def available_backends():
    return ["python"] + (["cython"] if _kernels is not None else [])


def get_scorer(backend=None):
    """Return the scorer for ``backend`` ('python', 'cython' or None for the default)."""
    if backend is None or backend == "auto":
        return score_quadruples
    if backend == "python":
        return _fallback.score_quadruples
    if backend == "cython":
        if _kernels is None:
            raise ImportError("compiled kernels are not available; build the extension or use backend='python'")
        return _kernels.score_quadruples
    raise ValueError(f"unknown backend {backend!r}")
