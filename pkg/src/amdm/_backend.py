"""Pick the integrator implementation at import time.

``AMDM_BACKEND=python`` forces the numpy fallback; ``AMDM_BACKEND=cython``
makes a missing extension an import error instead of a silent fallback.
"""
import os

from . import _fallback

_choice = os.environ.get("AMDM_BACKEND", "auto").lower()

try:
    if _choice == "python":
        raise ImportError("numpy fallback requested")
    from . import _kernels as _compiled
except ImportError:
    if _choice == "cython":
        raise
    _compiled = None

if _compiled is not None:
    integrate = _compiled.integrate
    BACKEND = "cython"
else:
    integrate = _fallback.integrate
    BACKEND = "python"

BACKENDS = {"python": _fallback.integrate}
if _compiled is not None:
    BACKENDS["cython"] = _compiled.integrate
