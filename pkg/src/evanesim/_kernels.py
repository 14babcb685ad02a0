"""Backend-dispatched hot kernels.

Import-time selection between the numba and numpy implementations; see
_backend for the EVANESIM_BACKEND environment flag. Both expose the same
two entry points used by the time-dependent propagator:

    CNStepper(A_diags, B_diags)   -- factor once, apply B then solve A
    integrate_bundle(...)         -- guided-trajectory bundle integrator
"""

from __future__ import annotations

import numpy as np

from ._backend import backend_name

BACKEND = backend_name()

if BACKEND == "numba":
    from . import _kernels_numba as _impl
else:
    from . import _kernels_numpy as _impl

integrate_bundle = _impl.integrate_bundle


class CNStepper:
    """One Crank-Nicolson update u -> A^{-1} B u for pentadiagonal A, B.

    Diagonal tuples are (d0, u1, u2, l1, l2) as complex128 arrays; A is
    factorized once at construction.
    """

    def __init__(self, a_diags, b_diags):
        n = len(a_diags[0])
        self._n = n
        self._work = np.empty(n, dtype=np.complex128)
        self._out = np.empty(n, dtype=np.complex128)
        if BACKEND == "numba":
            self._fact = tuple(np.ascontiguousarray(d, dtype=np.complex128).copy()
                               for d in a_diags)
            _impl.banded_lu_factor(*self._fact)
            self._b = tuple(np.ascontiguousarray(d, dtype=np.complex128) for d in b_diags)
        else:
            self._lu = _impl.banded_lu_matrixfree(*a_diags)
            self._bmat = _impl.banded_matvec_matrix(*b_diags)

    def __call__(self, u: np.ndarray) -> np.ndarray:
        if BACKEND == "numba":
            _impl.cn_step(*self._fact, *self._b, u, self._work, self._out)
            return self._out.copy()
        self._work[:] = self._bmat @ u
        return self._lu.solve(self._work, self._out).copy()
