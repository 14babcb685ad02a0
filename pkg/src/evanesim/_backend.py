"""Kernel backend selection.

The hot inner loops (Crank-Nicolson stepping, trajectory bundles) exist in
two implementations: numba-jitted scalar loops and a pure numpy/scipy
vectorized fallback. Selection is by the EVANESIM_BACKEND environment
variable: "numba", "numpy", or "auto" (default; numba when importable).
"""

from __future__ import annotations

import os
import warnings

_ENV_VAR = "EVANESIM_BACKEND"
_VALID = ("auto", "numba", "numpy")


def _numba_available() -> bool:
    try:
        import numba  # noqa: F401
        return True
    except ImportError:
        return False


def backend_name() -> str:
    """Resolve the backend once per process. Raises on an impossible request."""
    choice = os.environ.get(_ENV_VAR, "auto").lower()
    if choice not in _VALID:
        raise ValueError(f"{_ENV_VAR} must be one of {_VALID}, got {choice!r}")
    if choice == "numpy":
        return "numpy"
    if choice == "numba":
        if not _numba_available():
            raise ImportError(f"{_ENV_VAR}=numba but numba is not importable")
        return "numba"
    if _numba_available():
        return "numba"
    warnings.warn("numba unavailable; falling back to the pure-numpy kernels")
    return "numpy"
