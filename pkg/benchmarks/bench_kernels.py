#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the two hot paths on a representative deep-evanescent scattering
problem: the banded Crank-Nicolson step and the trajectory-bundle
integration. Run directly:

    python benchmarks/bench_kernels.py [--steps N] [--particles N]

Both backends are imported explicitly, so EVANESIM_BACKEND is ignored here.
"""

import argparse
import time

import numpy as np

from evanesim import _kernels_numba, _kernels_numpy
from evanesim.cli import transient_setup
from evanesim.tdse import _hamiltonian_diags, _total_current, propagate
from evanesim.bohmian import MASK_REL_THRESHOLD, sample_positions


def bench_cn(params, grid, dt, n_steps):
    (d0, u1, u2, l1, l2), _ = _hamiltonian_diags(params, grid)
    alpha = 1j * dt / (2.0 * params.hbar)
    ones = np.ones_like(d0)
    a = (ones + alpha * d0, alpha * u1, alpha * u2, alpha * l1, alpha * l2)
    b = (ones - alpha * d0, -alpha * u1, -alpha * u2, -alpha * l1, -alpha * l2)
    results = {}
    for name, impl in (("numba", _kernels_numba), ("numpy", _kernels_numpy)):
        u = np.exp(1j * grid.x) * np.exp(-((grid.x + 30.0) ** 2) / 100.0)
        vec = np.zeros(2 * grid.n_points, dtype=complex)
        vec[0::2] = u
        vec[1::2] = 0.0
        vec[0] = vec[-2] = 0.0
        work = np.empty_like(vec)
        out = np.empty_like(vec)
        if name == "numba":
            fact = tuple(np.ascontiguousarray(d, dtype=np.complex128).copy() for d in a)
            impl.banded_lu_factor(*fact)
            bb = tuple(np.ascontiguousarray(d, dtype=np.complex128) for d in b)
            impl.cn_step(*fact, *bb, vec, work, out)      # compile
            t0 = time.perf_counter()
            for _ in range(n_steps):
                impl.cn_step(*fact, *bb, vec, work, out)
                vec, out = out, vec
            results[name] = time.perf_counter() - t0
        else:
            lu = impl.banded_lu_matrixfree(*a)
            bmat = impl.banded_matvec_matrix(*b)
            t0 = time.perf_counter()
            for _ in range(n_steps):
                work[:] = bmat @ vec
                lu.solve(work, out)
                vec, out = out, vec
            results[name] = time.perf_counter() - t0
    return results


def bench_bundle(params, spec, grid, n_particles, seed=7):
    snaps = propagate(params, spec, T=20.0, dt=0.02, snapshot_stride=8, grid=grid)
    n = grid.n_points
    n_snap = len(snaps.ts)
    V = np.zeros((n_snap, n))
    DV = np.empty((n_snap, n))
    RHO = np.empty((n_snap, n))
    floors = np.empty(n_snap)
    for k in range(n_snap):
        rho = np.abs(snaps.psi_m[k]) ** 2 + np.abs(snaps.psi_a[k]) ** 2
        j = _total_current(grid, params, snaps.psi_m[k], snaps.psi_a[k])
        ok = rho > 1e-12 * rho.max()
        V[k, ok] = j[ok] / rho[ok]
        DV[k] = np.gradient(V[k], grid.h)
        RHO[k] = rho
        floors[k] = (MASK_REL_THRESHOLD ** 2) * rho.max()
    rng = np.random.default_rng(seed)
    x0s = np.sort(sample_positions(grid, RHO[0], n_particles, rng))
    args = (grid.x[0], grid.h, n, snaps.ts.astype(float), V, DV, RHO, floors,
            x0s, 2, 4.0 * grid.h, 0.4, 10)
    results = {}
    outs = {}
    for name, impl in (("numba", _kernels_numba), ("numpy", _kernels_numpy)):
        if name == "numba":
            impl.integrate_bundle(*args)              # compile
        t0 = time.perf_counter()
        outs[name] = impl.integrate_bundle(*args)
        results[name] = time.perf_counter() - t0
    dev = np.abs(outs["numba"][0] - outs["numpy"][0]).max()
    return results, dev


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=1500)
    ap.add_argument("--particles", type=int, default=5000)
    args = ap.parse_args()

    params, spec, grid, kappa, cfg = transient_setup(0.2)
    print(f"problem: {grid.n_points} nodes, dt = {cfg['dt']}, kappa = {kappa}")

    cn = bench_cn(params, grid, cfg["dt"], args.steps)
    print(f"\nCrank-Nicolson step x{args.steps}:")
    for name, t in cn.items():
        print(f"  {name:6s} {t:8.3f} s   ({1e6 * t / args.steps:8.1f} us/step)")
    print(f"  speedup: {cn['numpy'] / cn['numba']:.2f}x")

    tr, dev = bench_bundle(params, spec, grid, args.particles)
    print(f"\ntrajectory bundle, {args.particles} particles:")
    for name, t in tr.items():
        print(f"  {name:6s} {t:8.3f} s")
    print(f"  speedup: {tr['numpy'] / tr['numba']:.2f}x")
    print(f"  max |position deviation| between backends: {dev:.3e}")


if __name__ == "__main__":
    main()
