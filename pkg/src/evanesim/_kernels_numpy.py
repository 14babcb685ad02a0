"""Pure numpy/scipy fallback kernels, same contracts as the numba set.

The Crank-Nicolson implicit half becomes one sparse LU factorization reused
every step; the trajectory bundle vectorizes the RK4 stages across
particles. Results agree with the numba path to rounding.
"""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

BACKEND = "numpy"

MAX_REFINE_DEPTH = 14


def _diags_matrix(d0, u1, u2, l1, l2, fmt):
    n = len(d0)
    return sp.diags([l2, l1, d0, u1, u2], offsets=[-2, -1, 0, 1, 2],
                    shape=(n, n), format=fmt)


class _LU:
    def __init__(self, d0, u1, u2, l1, l2):
        self._lu = spla.splu(_diags_matrix(d0, u1, u2, l1, l2, "csc"))

    def solve(self, b, out):
        out[:] = self._lu.solve(b)
        return out


def banded_lu_matrixfree(d0, u1, u2, l1, l2):
    return _LU(d0, u1, u2, l1, l2)


def banded_matvec_matrix(d0, u1, u2, l1, l2):
    return _diags_matrix(d0, u1, u2, l1, l2, "csr")


def _lerp(arr, pos, x0, h, n):
    t = np.clip((pos - x0) / h, 0.0, n - 1.0)
    i = np.minimum(t.astype(np.int64), n - 2)
    w = t - i
    return arr[i] * (1.0 - w) + arr[i + 1] * w


def _advance(x, v0, v1, dv0, dv1, rho0, rho1, floor0, floor1,
             dt, n_sub, theta, lam, x0, h, n):
    """Vectorized counterpart of the numba _advance over a particle array.

    Returns (x_new, peak, masked, resolved) with boolean arrays.
    """
    xi = x.copy()
    peak = x.copy()
    masked = np.zeros(len(x), dtype=bool)
    resolved = np.ones(len(x), dtype=bool)
    hsub = dt / n_sub
    for s in range(n_sub):
        t0 = s / n_sub
        tm = (s + 0.5) / n_sub
        t1 = (s + 1.0) / n_sub
        r = (1.0 - t0) * _lerp(rho0, xi, x0, h, n) + t0 * _lerp(rho1, xi, x0, h, n)
        masked |= r < (1.0 - t0) * floor0 + t0 * floor1
        k1 = (1.0 - t0) * _lerp(v0, xi, x0, h, n) + t0 * _lerp(v1, xi, x0, h, n)
        gmax = np.abs((1.0 - t0) * _lerp(dv0, xi, x0, h, n) + t0 * _lerp(dv1, xi, x0, h, n))
        xa = xi + 0.5 * hsub * k1
        k2 = (1.0 - tm) * _lerp(v0, xa, x0, h, n) + tm * _lerp(v1, xa, x0, h, n)
        xb = xi + 0.5 * hsub * k2
        k3 = (1.0 - tm) * _lerp(v0, xb, x0, h, n) + tm * _lerp(v1, xb, x0, h, n)
        xc = xi + hsub * k3
        k4 = (1.0 - t1) * _lerp(v0, xc, x0, h, n) + t1 * _lerp(v1, xc, x0, h, n)
        gmax = np.maximum(gmax, np.abs(
            (1.0 - t1) * _lerp(dv0, xc, x0, h, n) + t1 * _lerp(dv1, xc, x0, h, n)))
        step = hsub / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        amax = np.maximum.reduce([np.abs(step), np.abs(xa - xi), np.abs(xc - xi)])
        resolved &= (amax <= theta) & (hsub * gmax <= lam)
        xi = xi + step
        r = (1.0 - t1) * _lerp(rho0, xi, x0, h, n) + t1 * _lerp(rho1, xi, x0, h, n)
        masked |= r < (1.0 - t1) * floor0 + t1 * floor1
        peak = np.maximum.reduce([peak, xa, xc, xi])
    return xi, peak, masked, resolved


def integrate_bundle(xg0, h, n, ts, V, DV, RHO, floors, x0s, n_sub, theta, lam, n_trace):
    n_snap = len(ts)
    n_p = len(x0s)
    x = x0s.copy()
    peak = x0s.copy()
    stopped = np.full(n_p, -1, dtype=np.int64)
    traces = np.empty((n_snap, n_trace))
    traces[0] = x[:n_trace]
    violations = 0
    for k in range(n_snap - 1):
        dt = ts[k + 1] - ts[k]
        todo = np.where(stopped < 0)[0]
        sub = n_sub
        for _depth in range(MAX_REFINE_DEPTH + 1):
            xi, pk, masked, resolved = _advance(
                x[todo], V[k], V[k + 1], DV[k], DV[k + 1], RHO[k], RHO[k + 1],
                floors[k], floors[k + 1], dt, sub, theta, lam, xg0, h, n)
            ok = ~masked & resolved
            done = todo[ok]
            x[done] = xi[ok]
            peak[done] = np.maximum(peak[done], pk[ok])
            todo = todo[~ok]
            if len(todo) == 0:
                break
            sub *= 2
        stopped[todo] = k
        violations += int(np.count_nonzero(np.diff(x) < -1e-10 * h))
        traces[k + 1] = x[:n_trace]
    return x, peak, stopped, traces, violations
