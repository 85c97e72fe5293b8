"""Pick the compiled kernels when available, else the numpy fallback.

Set ``LPL_BACKEND=python`` to force the fallback, or ``LPL_BACKEND=cython``
to make a missing extension an import error.
"""
import os

from . import _fallback

_choice = os.environ.get("LPL_BACKEND", "").strip().lower()

if _choice == "python":
    kernels = _fallback
    BACKEND = "python"
else:
    try:
        from . import _core as kernels
        BACKEND = "cython"
    except ImportError:
        if _choice == "cython":
            raise
        kernels = _fallback
        BACKEND = "python"

gmm_score = kernels.gmm_score
tv_dual_prox = kernels.tv_dual_prox
transport_ssp = kernels.transport_ssp

__all__ = ["BACKEND", "gmm_score", "tv_dual_prox", "transport_ssp"]
