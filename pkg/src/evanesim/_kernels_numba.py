"""Numba-jitted hot kernels.

Pentadiagonal (bandwidth-2) complex LU without pivoting for the implicit
half of the Crank-Nicolson step, the matching banded matvec for the
explicit half, and the guided-trajectory bundle integrator. The matrices
here are I +/- i*alpha*H with H real symmetric, for which pivot-free
elimination is stable in practice.
"""

import numpy as np
from numba import njit

BACKEND = "numba"

MAX_REFINE_DEPTH = 14


@njit(cache=True)
def banded_lu_factor(d0, u1, u2, l1, l2):
    """In-place LU of the pentadiagonal matrix given by its five diagonals.

    d0[i] = A[i,i]; u1[i] = A[i,i+1]; u2[i] = A[i,i+2];
    l1[i] = A[i+1,i]; l2[i] = A[i+2,i]. Multipliers land in l1, l2.
    """
    n = d0.shape[0]
    for i in range(n):
        piv = d0[i]
        if i + 1 < n:
            f = l1[i] / piv
            l1[i] = f
            d0[i + 1] -= f * u1[i]
            if i + 2 < n:
                u1[i + 1] -= f * u2[i]
        if i + 2 < n:
            f = l2[i] / piv
            l2[i] = f
            l1[i + 1] -= f * u1[i]
            d0[i + 2] -= f * u2[i]


@njit(cache=True)
def banded_lu_solve(d0, u1, u2, l1, l2, b, out):
    """Solve with factors from banded_lu_factor; b untouched, result in out."""
    n = d0.shape[0]
    for i in range(n):
        acc = b[i]
        if i >= 1:
            acc -= l1[i - 1] * out[i - 1]
        if i >= 2:
            acc -= l2[i - 2] * out[i - 2]
        out[i] = acc
    for i in range(n - 1, -1, -1):
        acc = out[i]
        if i + 1 < n:
            acc -= u1[i] * out[i + 1]
        if i + 2 < n:
            acc -= u2[i] * out[i + 2]
        out[i] = acc / d0[i]


@njit(cache=True)
def banded_matvec(d0, u1, u2, l1, l2, x, out):
    n = d0.shape[0]
    for i in range(n):
        acc = d0[i] * x[i]
        if i + 1 < n:
            acc += u1[i] * x[i + 1]
        if i + 2 < n:
            acc += u2[i] * x[i + 2]
        if i >= 1:
            acc += l1[i - 1] * x[i - 1]
        if i >= 2:
            acc += l2[i - 2] * x[i - 2]
        out[i] = acc
    return out


@njit(cache=True)
def cn_step(fd0, fu1, fu2, fl1, fl2, bd0, bu1, bu2, bl1, bl2, u, work, out):
    banded_matvec(bd0, bu1, bu2, bl1, bl2, u, work)
    banded_lu_solve(fd0, fu1, fu2, fl1, fl2, work, out)
    return out


@njit(cache=True, inline="always")
def _lerp(arr, pos, x0, h, n):
    t = (pos - x0) / h
    if t <= 0.0:
        return arr[0]
    if t >= n - 1:
        return arr[n - 1]
    i = int(t)
    w = t - i
    return arr[i] * (1.0 - w) + arr[i + 1] * w


@njit(cache=True)
def _advance(x, v0, v1, dv0, dv1, rho0, rho1, floor0, floor1,
             dt, n_sub, theta, lam, x0, h, n):
    """March one snapshot interval with n_sub RK4 substeps.

    Velocity and density are linear in time between the two snapshots.
    Returns (x_new, x_peak, masked, resolved): masked = a density sample
    fell below the floor; resolved = every stage displacement stayed
    within theta AND substep * |dv/dx| stayed within lam (the order-
    preservation condition). Either failure makes the caller retry at
    doubled substeps.
    """
    xi = x
    peak = x
    masked = False
    resolved = True
    hsub = dt / n_sub
    for s in range(n_sub):
        t0 = s / n_sub
        tm = (s + 0.5) / n_sub
        t1 = (s + 1.0) / n_sub
        r = (1.0 - t0) * _lerp(rho0, xi, x0, h, n) + t0 * _lerp(rho1, xi, x0, h, n)
        if r < (1.0 - t0) * floor0 + t0 * floor1:
            masked = True
        k1 = (1.0 - t0) * _lerp(v0, xi, x0, h, n) + t0 * _lerp(v1, xi, x0, h, n)
        g = (1.0 - t0) * _lerp(dv0, xi, x0, h, n) + t0 * _lerp(dv1, xi, x0, h, n)
        gmax = abs(g)
        xa = xi + 0.5 * hsub * k1
        k2 = (1.0 - tm) * _lerp(v0, xa, x0, h, n) + tm * _lerp(v1, xa, x0, h, n)
        xb = xi + 0.5 * hsub * k2
        k3 = (1.0 - tm) * _lerp(v0, xb, x0, h, n) + tm * _lerp(v1, xb, x0, h, n)
        xc = xi + hsub * k3
        k4 = (1.0 - t1) * _lerp(v0, xc, x0, h, n) + t1 * _lerp(v1, xc, x0, h, n)
        g = (1.0 - t1) * _lerp(dv0, xc, x0, h, n) + t1 * _lerp(dv1, xc, x0, h, n)
        if abs(g) > gmax:
            gmax = abs(g)
        step = hsub / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        amax = abs(step)
        if abs(xa - xi) > amax:
            amax = abs(xa - xi)
        if abs(xc - xi) > amax:
            amax = abs(xc - xi)
        if amax > theta or hsub * gmax > lam:
            resolved = False
        xi = xi + step
        r = (1.0 - t1) * _lerp(rho0, xi, x0, h, n) + t1 * _lerp(rho1, xi, x0, h, n)
        if r < (1.0 - t1) * floor0 + t1 * floor1:
            masked = True
        if xa > peak:
            peak = xa
        if xc > peak:
            peak = xc
        if xi > peak:
            peak = xi
    return xi, peak, masked, resolved


@njit(cache=True)
def integrate_bundle(xg0, h, n, ts, V, DV, RHO, floors, x0s, n_sub, theta, lam, n_trace):
    """Advance all particles through every snapshot interval.

    An interval whose stage displacements exceed theta, whose substep
    violates the gradient condition, or whose density samples dip below
    the floor, is retried with doubled substeps up to MAX_REFINE_DEPTH;
    a particle still failing after that freezes with the interval index
    recorded. Returns (positions, max_excursions, stopped_at, traces,
    order_violations).
    """
    n_snap = ts.shape[0]
    n_p = x0s.shape[0]
    x = x0s.copy()
    peak = x0s.copy()
    stopped = np.full(n_p, -1, dtype=np.int64)
    traces = np.empty((n_snap, n_trace))
    for j in range(n_trace):
        traces[0, j] = x[j]
    violations = 0
    for k in range(n_snap - 1):
        dt = ts[k + 1] - ts[k]
        for i in range(n_p):
            if stopped[i] >= 0:
                continue
            sub = n_sub
            ok = False
            xi = x[i]
            pk = peak[i]
            for _depth in range(MAX_REFINE_DEPTH + 1):
                xi, pk, masked, resolved = _advance(
                    x[i], V[k], V[k + 1], DV[k], DV[k + 1], RHO[k], RHO[k + 1],
                    floors[k], floors[k + 1], dt, sub, theta, lam, xg0, h, n)
                if not masked and resolved:
                    ok = True
                    break
                sub *= 2
            if not ok:
                stopped[i] = k
                continue
            x[i] = xi
            if pk > peak[i]:
                peak[i] = pk
        for i in range(n_p - 1):
            if x[i + 1] - x[i] < -1e-10 * h:
                violations += 1
        for j in range(n_trace):
            traces[k + 1, j] = x[j]
    return x, peak, stopped, traces, violations
